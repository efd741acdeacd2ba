"""von Mises-Fisher log density on the unit hypersphere.

The vMF density in dimension d with mean direction mu (unit) and
concentration kappa > 0 is C_d(kappa) * exp(kappa * mu . f), with

    log C_d(kappa) = (d/2 - 1) log kappa - (d/2) log 2 pi
                     - log I_{d/2-1}(kappa).

Everything is evaluated in log domain via :func:`~vcfewshot.bessel.log_bessel_iv`
so large concentrations (up to the configured cap) stay finite.
"""

import numpy as np

from .bessel import log_bessel_iv
from .errors import InputError

_LOG_2PI = float(np.log(2.0 * np.pi))

#: Default upper bound on concentrations; matching the mixture fit default.
KAPPA_MAX_DEFAULT = 1e5

#: Tolerance on "unit norm" preconditions throughout the toolkit.
UNIT_NORM_TOL = 1e-6


def log_vmf_normalizer(dim: int, kappa) -> np.ndarray | float:
    """log C_d(kappa) for dimension ``dim`` >= 2; kappa scalar or array."""
    if dim < 2:
        raise InputError(f"dimension must be >= 2, got {dim}")
    nu = dim / 2.0 - 1.0
    kappa_arr = np.asarray(kappa, dtype=np.float64)
    return nu * np.log(kappa_arr) - (dim / 2.0) * _LOG_2PI - log_bessel_iv(nu, kappa_arr)


def _check_unit(v: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(v, axis=-1)
    if not np.all(np.abs(norms - 1.0) < UNIT_NORM_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise InputError(f"{name} must be unit-norm (max deviation {worst:.3g})")


def vmf_log_density(f, mu, kappa: float, kappa_max: float = KAPPA_MAX_DEFAULT):
    """Log vMF density of unit vector(s) ``f`` under (mu, kappa).

    Args:
        f: Unit vector (C,) or batch (M, C).
        mu: Unit mean direction (C,).
        kappa: Concentration, in (0, kappa_max].
        kappa_max: Upper bound of the admissible concentration range.

    Returns:
        Scalar for a single vector, (M,) array for a batch.

    Raises:
        InputError: Non-unit inputs or kappa outside (0, kappa_max].
    """
    if not (0.0 < kappa <= kappa_max) or not np.isfinite(kappa):
        raise InputError(f"kappa must lie in (0, {kappa_max:g}], got {kappa}")
    f_arr = np.asarray(f, dtype=np.float64)
    mu_arr = np.asarray(mu, dtype=np.float64)
    if f_arr.shape[-1] != mu_arr.shape[-1]:
        raise InputError(
            f"dimension mismatch: f has {f_arr.shape[-1]}, mu has {mu_arr.shape[-1]}")
    _check_unit(mu_arr, "mu")
    _check_unit(f_arr, "f")
    dim = mu_arr.shape[-1]
    log_c = log_vmf_normalizer(dim, kappa)
    dots = f_arr @ mu_arr
    return log_c + kappa * dots

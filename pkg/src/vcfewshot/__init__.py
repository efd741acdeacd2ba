"""Visual-concept few-shot learning toolkit.

Learns dictionaries of visual concepts (unit mean directions of a von
Mises-Fisher mixture over CNN feature vectors), converts feature grids to
binary concept encodings, and classifies N-way K-shot episodes with two
interpretable models: a spatially fuzzy nearest-neighbor matcher and a
factorizable Bernoulli likelihood model.
"""

from .bessel import log_bessel_iv
from .classifiers import (
    LikelihoodModel,
    NeighborhoodSpec,
    classify_lh,
    classify_nn,
    contribution_maps,
    export_contributions_csv,
    fit_likelihood,
    log_likelihood,
    similarity,
)
from .encoding import (
    DistanceTensor,
    VcEncoding,
    compute_distances,
    coverage_of,
    encode,
    firerate_of,
    read_bitset,
    search_threshold,
    write_bitset,
)
from .episodes import (
    EpisodeReport,
    EpisodeSpec,
    TrialResult,
    TrialSample,
    ci95_halfwidth,
    eligible_categories,
    report_to_json,
    run_benchmark,
    run_episode,
    sample_trial,
    write_report_csv,
)
from .errors import (
    InputError,
    NoFeasibleThresholdError,
    NumericalError,
    StoreFormatError,
    VcError,
    ZeroEncodingError,
)
from .mixture import (
    FitConfig,
    VcDictionary,
    assign_hard,
    fit_vmfm,
    load_dictionary,
    read_dictionary,
    responsibilities,
    save_dictionary,
    write_dictionary,
)
from .smoothing import gaussian_blur, gaussian_kernel1d
from .store import (
    FeatureGrid,
    FeatureStore,
    PooledVectors,
    collect_vectors,
    load_store,
    read_store,
    save_store,
    write_store,
)
from .synthetic import (
    make_cluster_store,
    make_planted_store,
    make_random_store,
    sample_uniform_sphere,
    sample_vmf,
)
from .vmf import log_vmf_normalizer, vmf_log_density

__version__ = "0.1.0"

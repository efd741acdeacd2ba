"""Command-line driver: validate | learn-vcs | encode | eval | inspect-vc.

Exit codes: 0 success, 1 bad input or usage, 2 numerical failure. Every
subcommand is deterministic given its flags; --seed controls all
randomness. The VC_THREADS environment variable caps worker counts and
affects speed only, never results.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .encoding import compute_distances, encode, search_threshold, write_bitset
from .episodes import EpisodeSpec, report_to_json, run_benchmark, write_report_csv
from .errors import InputError, NumericalError, StoreFormatError
from .mixture import FitConfig, assign_hard, fit_vmfm, load_dictionary, save_dictionary
from .store import collect_vectors, load_store


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we reserve 2 for
    numerical failures, so remap usage problems to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vcfewshot",
                     description="Visual-concept few-shot learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[], help="check a feature store file")
    p.add_argument("store", type=Path)

    p = sub.add_parser("learn-vcs", help="fit a concept dictionary from a store")
    p.add_argument("store", type=Path)
    p.add_argument("--num-vcs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("encode", help="encode every grid against a dictionary")
    p.add_argument("store", type=Path)
    p.add_argument("--dict", dest="dict_path", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="fixed threshold; default searches the grid")
    p.add_argument("--coverage-target", type=float, default=0.8)
    p.add_argument("--step", type=float, default=0.001)
    p.add_argument("--out-dir", type=Path, default=None,
                   help="write one .vcbe bitset per image here")

    p = sub.add_parser("eval", help="run an N-way K-shot benchmark")
    p.add_argument("store", type=Path)
    p.add_argument("--ways", type=int, default=5)
    p.add_argument("--shots", type=int, default=5)
    p.add_argument("--queries", type=int, default=15)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-vcs", type=int, default=200)
    p.add_argument("--classifier", choices=("nn", "likelihood"), default="nn")
    p.add_argument("--coverage-target", type=float, default=0.8)
    p.add_argument("--threshold-step", type=float, default=0.001)
    p.add_argument("--sigma", type=float, default=1.2)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--shared-vcs", action="store_true",
                   help="fit one dictionary on the whole store instead of "
                        "per trial")
    p.add_argument("--shuffle-support-labels", action="store_true",
                   help="permute support labels (chance-level control)")
    p.add_argument("--out", type=Path, default=None, help="write report JSON here")
    p.add_argument("--csv", type=Path, default=None, help="also write per-trial CSV")

    p = sub.add_parser("inspect-vc",
                       help="rank lattice positions closest to one concept")
    p.add_argument("store", type=Path)
    p.add_argument("--dict", dest="dict_path", type=Path, required=True)
    p.add_argument("--vc-index", type=int, required=True)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _cmd_validate(args) -> int:
    store = load_store(args.store)
    print(f"store: {args.store}")
    print(f"layer: {store.layer_name}")
    print(f"grids: {len(store.grids)}")
    counts = store.image_counts()
    for cid in sorted(store.categories):
        print(f"category {cid} ({store.categories[cid]}): {counts[cid]} grids")
    shapes: dict[tuple[int, int, int], int] = {}
    for g in store.grids:
        shapes[(g.height, g.width, g.channels)] = shapes.get(
            (g.height, g.width, g.channels), 0) + 1
    for (h, w, c), n in sorted(shapes.items()):
        print(f"shape {h}x{w}x{c}: {n} grids")
    print("OK")
    return 0


def _cmd_learn_vcs(args) -> int:
    store = load_store(args.store)
    pooled = collect_vectors(store)
    if pooled.excluded_count:
        print(f"excluded {pooled.excluded_count} near-zero vectors")
    config = FitConfig(num_vcs=args.num_vcs, seed=args.seed,
                       max_iters=args.max_iters)
    dictionary = fit_vmfm(pooled.vectors, config)
    save_dictionary(dictionary, args.out)
    print(f"vectors: {len(pooled)}")
    print(f"fitted log-likelihood: {dictionary.fitted_log_likelihood!r}")
    print(f"iterations: {dictionary.iterations_run}")
    labels = assign_hard(pooled.vectors, dictionary)
    purity = 0.0
    for v in range(dictionary.num_vcs):
        cats = pooled.category_ids[labels == v]
        if cats.size:
            purity += float(np.bincount(cats).max())
    purity /= len(pooled)
    print(f"assignment purity: {purity:.4f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_encode(args) -> int:
    store = load_store(args.store)
    dictionary = load_dictionary(args.dict_path)
    tensors = [compute_distances(g, dictionary) for g in store.grids]
    if args.threshold is None:
        threshold = search_threshold(tensors, args.coverage_target, args.step)
        print(f"searched threshold: {threshold!r}")
    else:
        threshold = args.threshold
        print(f"fixed threshold: {threshold!r}")
    encodings = [encode(t, threshold) for t in tensors]
    coverage = float(np.mean([e.coverage for e in encodings]))
    firerate = float(np.mean([e.firerate for e in encodings]))
    print(f"mean coverage: {coverage:.4f}")
    print(f"mean firerate: {firerate:.4f}")
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        for grid, enc in zip(store.grids, encodings):
            name = grid.image_id.replace("/", "_") + ".vcbe"
            with open(args.out_dir / name, "wb") as fh:
                write_bitset(enc.bits, fh)
        print(f"wrote {len(encodings)} bitsets to {args.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    store = load_store(args.store)
    spec = EpisodeSpec(
        ways=args.ways, shots=args.shots, trials=args.trials, seed=args.seed,
        num_vcs=args.num_vcs, queries=args.queries,
        coverage_target=args.coverage_target,
        threshold_step=args.threshold_step, sigma=args.sigma,
        nbhd_radius=args.radius, classifier=args.classifier,
        shared_vcs=args.shared_vcs,
        shuffle_support_labels=args.shuffle_support_labels,
    )
    report = run_benchmark(store, spec)
    text = report_to_json(report)
    if args.out is not None:
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    if args.csv is not None:
        with open(args.csv, "w") as fh:
            write_report_csv(report, fh)
        print(f"wrote {args.csv}")
    print(f"accuracy: {report.mean_accuracy:.4f} +/- {report.ci95_halfwidth:.4f}")
    return 0


def _cmd_inspect_vc(args) -> int:
    store = load_store(args.store)
    dictionary = load_dictionary(args.dict_path)
    if not 0 <= args.vc_index < dictionary.num_vcs:
        raise InputError(
            f"vc-index {args.vc_index} out of range [0, {dictionary.num_vcs})")
    if args.top_k < 0:
        raise InputError("top-k must be non-negative")

    rows = []
    for grid in store.grids:
        tensor = compute_distances(grid, dictionary)
        sheet = tensor.values[:, :, args.vc_index].astype(np.float64)
        for r in range(grid.height):
            for c in range(grid.width):
                y, x = grid.rf_center(r, c)
                rows.append((float(sheet[r, c]), grid.image_id, r, c, x, y,
                             grid.rf_size))
    rows.sort(key=lambda item: item[0])
    lines = ["rank,distance,image_id,row,col,pixel_x,pixel_y,rf_size"]
    for rank, (dist, image_id, r, c, x, y, rf) in enumerate(rows[:args.top_k]):
        lines.append(f"{rank},{dist!r},{image_id},{r},{c},{x},{y},{rf}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "learn-vcs": _cmd_learn_vcs,
    "encode": _cmd_encode,
    "eval": _cmd_eval,
    "inspect-vc": _cmd_inspect_vc,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (StoreFormatError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

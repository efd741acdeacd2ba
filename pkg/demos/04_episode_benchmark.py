"""Flexible N-way K-shot evaluation on one store, no retraining between setups.

Runs the full pipeline (per-trial concept learning, threshold search,
classification) across several way/shot settings with both classifiers,
plus a label-shuffled control that must sit at chance level.

The CLI equivalent of one row:
    vcfewshot eval store.vcfs --ways 5 --shots 5 --queries 15 --trials 20 \
        --num-vcs 20 --classifier likelihood --out report.json
"""

import json

from vcfewshot import EpisodeSpec, make_planted_store, report_to_json, run_benchmark

store = make_planted_store(n_categories=10, images_per_category=20,
                           height=6, width=6, channels=16,
                           parts_per_category=4, kappa=30.0, seed=1)
print(f"store: {len(store.grids)} grids over {len(store.categories)} categories\n")

print("setting          classifier   accuracy")
for ways, shots in ((5, 5), (5, 1), (6, 3), (8, 4)):
    for classifier in ("nn", "likelihood"):
        spec = EpisodeSpec(ways=ways, shots=shots, trials=10, seed=42,
                           num_vcs=20, queries=15, classifier=classifier)
        report = run_benchmark(store, spec)
        print(f"{ways}-way {shots}-shot   {classifier:11s}  "
              f"{report.mean_accuracy:.3f} +- {report.ci95_halfwidth:.3f}")

control = EpisodeSpec(ways=5, shots=5, trials=10, seed=42, num_vcs=20,
                      queries=15, classifier="likelihood",
                      shuffle_support_labels=True)
report = run_benchmark(store, control)
print(f"\nlabel-shuffled control: {report.mean_accuracy:.3f} "
      f"+- {report.ci95_halfwidth:.3f} (chance is 0.200)")

payload = json.loads(report_to_json(report))
print(f"report JSON keys: {sorted(payload)}")

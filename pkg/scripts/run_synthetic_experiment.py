#!/usr/bin/env python3
"""Run the piecewise pipeline against the single-map baseline on a
synthetic multi-rotation instance and print the comparison.

The baseline shares the pipeline's normalization and adversarial single
map, then refines it directly; the pipeline continues through
clustering, per-subspace training and the configured refinement mode.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from submap.cli import main as cli_main


CONFIG = """
[run]
seed = {seed}
refine_mode = {refine}
single_restarts = {restarts}

[data]
source = {out}/data/source.vec
target = {out}/data/target.vec
gold = {out}/data/gold.tsv
normalize_iterations = 5

[single_gan]
epochs = {epochs}
steps_per_epoch = {steps}
batch_size = 32
beta = 0.5
lr_generator = 0.1
lr_discriminator = 0.1
dis_hidden = 256
dis_dropout = 0.0
dis_steps_per_gen_step = 3
criterion_vocab = 10000
csls_k = 10

[refinement]
vocab_limit = 10000
max_iters = 50

[evaluation]
per_subspace = true
"""


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--clusters", type=int, default=3)
    parser.add_argument("--per-cluster", type=int, default=400)
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--separation", type=float, default=5.0)
    parser.add_argument("--noise-sigma", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--restarts", type=int, default=3)
    parser.add_argument("--epochs", type=int, default=6)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--refine", default="global", choices=["none", "global", "local"])
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rc = cli_main(["synth-gen", "--out", str(out / "data"),
                   "--clusters", str(args.clusters),
                   "--per-cluster", str(args.per_cluster),
                   "--dim", str(args.dim), "--separation", str(args.separation),
                   "--noise-sigma", str(args.noise_sigma), "--seed", str(args.seed)])
    if rc != 0:
        return rc

    cfg_path = out / "run.ini"
    cfg_path.write_text(CONFIG.format(out=out, seed=args.seed, refine=args.refine,
                                      restarts=args.restarts, epochs=args.epochs,
                                      steps=args.steps), encoding="utf-8")

    results = {}
    for label, extra in (("pipeline", []), ("baseline", ["--refine", "single"])):
        run_dir = out / label
        started = time.time()
        rc = cli_main(["pipeline", "--config", str(cfg_path),
                       "--out", str(run_dir)] + extra)
        if rc != 0:
            print(f"{label} failed with exit code {rc}", file=sys.stderr)
            return rc
        report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
        results[label] = report
        print(f"{label}: P@1 = {report['p_at_1']:.4f}  "
              f"({report['evaluated']} evaluated, {time.time() - started:.0f}s)")

    gap = results["pipeline"]["p_at_1"] - results["baseline"]["p_at_1"]
    print(f"pipeline - baseline gap: {gap:+.4f}")
    per_subspace = results["pipeline"].get("per_subspace")
    if per_subspace:
        print("pipeline per-subspace accuracy:")
        for row in per_subspace:
            acc = "n/a" if row["accuracy"] is None else f"{row['accuracy']:.4f}"
            print(f"  cluster {row['cluster_id']}  n={row['evaluated']}  {acc}")
    return 0


if __name__ == "__main__":
    sys.exit(run())

#!/usr/bin/env python3
"""Run every benchmark preset and write one CSV per figure.

Full presets run 50 trials at d=200 and take hours on a laptop; pass
--trials and --scale-d to shrink them for a quick pass, e.g.

    python scripts/reproduce_figures.py --out-dir results --trials 5 --scale-d 100
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from dpkpca.bench_cli import _PRESETS, preset, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--trials", type=int, help="override per-cell trial count")
    parser.add_argument("--scale-d", type=int, help="replace every d grid entry above this cap")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--presets", nargs="*", default=sorted(_PRESETS))
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in args.presets:
        cfg = preset(name)
        if args.trials is not None:
            cfg = replace(cfg, trials=args.trials)
        if args.scale_d is not None:
            cfg = replace(cfg, d_grid=tuple(min(d, args.scale_d) for d in cfg.d_grid))
        cfg = replace(cfg, base_seed=args.seed, out=str(out_dir / f"{name}.csv"))
        print(f"running {name} -> {cfg.out}", file=sys.stderr)
        records = run_experiment(cfg, threads=args.threads, progress=True)
        failed = sum(1 for r in records if r.status != "ok")
        print(f"  {len(records)} rows ({failed} failed)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

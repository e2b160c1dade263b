"""Matrix distributions of a metric, a relabelled copy and a rescaled copy.

Repeats the energy-distance test over many seeds and reports how often
each comparison rejects at level 0.01.
"""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vck import compare_md, make_space, sample_md


@dataclass
class Config:
    points: int = 32
    k: int = 3
    trials: int = 200
    runs: int = 100
    permutations: int = 200
    alpha: float = 0.01
    seed: int = 0
    out: Path = Path("results")


def run(cfg: Config) -> dict:
    rng = np.random.default_rng(cfg.seed)
    pts = rng.random((cfg.points, 2))
    rho = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    X = make_space(rng.uniform(0.05, 1.0, cfg.points))
    rejects = {"relabelled": 0, "scaled": 0}
    for r in range(cfg.runs):
        p = np.random.default_rng([cfg.seed, r]).permutation(cfg.points)
        Xp = make_space(np.array(X.exact, dtype=object)[p])
        base = sample_md(rho, X, X, cfg.k, cfg.trials, seed=3 * r)
        perm = sample_md(rho[np.ix_(p, p)], Xp, Xp, cfg.k, cfg.trials, seed=3 * r + 1)
        scaled = sample_md(2 * rho, X, X, cfg.k, cfg.trials, seed=3 * r + 2)
        rejects["relabelled"] += compare_md(base, perm, cfg.permutations).p_value <= cfg.alpha
        rejects["scaled"] += compare_md(base, scaled, cfg.permutations).p_value <= cfg.alpha
    summary = {"runs": cfg.runs, "alpha": cfg.alpha,
               **{f"reject_rate_{k}": v / cfg.runs for k, v in rejects.items()}}
    print(json.dumps(summary))
    return summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=Config.runs)
    ap.add_argument("--trials", type=int, default=Config.trials)
    ap.add_argument("--out", type=Path, default=Config.out)
    a = ap.parse_args()
    cfg = Config(runs=a.runs, trials=a.trials, out=a.out)
    summary = run(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "md_invariance.json").write_text(json.dumps(summary, indent=1))


if __name__ == "__main__":
    main()

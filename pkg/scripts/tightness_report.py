"""How far the analytic bounds sit below the true constrained minima.

For each <N_A> and weight, compare min R_w with L_w(N) and the Gaussian
trial value; prints a table and the worst relative gap per weight.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from fockcrit.bounds import bound_L, bound_Lw
from fockcrit.minimizer import gaussian_trial_bound, solve_min_direct, solve_min_recurrence


@dataclass
class TightnessConfig:
    n_values: tuple = (0.5, 1, 2, 5, 10, 20, 50, 100)
    ws: tuple = (None, 0.2, 0.5, 0.8)
    seed: int = 0


def run(cfg: TightnessConfig):
    out = []
    print(f"{'w':>5} {'N':>6} {'min':>12} {'bound':>12} {'gap':>10} {'gauss':>12}")
    for w in cfg.ws:
        rel = []
        for N in cfg.n_values:
            if w is None:
                res, b, g = solve_min_recurrence(N), bound_L(N), gaussian_trial_bound(N)
            else:
                res, b, g = solve_min_direct(N, w=w, seed=cfg.seed), bound_Lw(N, w), float("nan")
            gap = res.value - b
            rel.append(gap / max(res.value, 1e-12))
            out.append((w, N, res.value, b, gap))
            print(f"{'-' if w is None else w:>5} {N:6g} {res.value:12.8f} {b:12.8f} {gap:10.3g} {g:12.8f}")
        print(f"  worst relative gap {np.max(rel):.3g}\n")
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    run(TightnessConfig(seed=ap.parse_args().seed))

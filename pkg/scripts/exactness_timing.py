"""Time E(d_H nu) = 0 and H(E(lambda)) = 0 on random jet polynomials.

    python3 scripts/exactness_timing.py --cases 200 --seed 101
"""
import argparse
import time
from dataclasses import dataclass

from jetvar import sampling
from jetvar.forms import d_H
from jetvar.varseq import Lagrangian, euler_lagrange, helmholtz


@dataclass
class Config:
    cases: int = 200
    seed: int = 101


def run(cfg: Config):
    g = sampling.rng(cfg.seed)
    failures, start = 0, time.perf_counter()
    for _ in range(cfg.cases):
        ctx = sampling.random_context(g)
        nu = sampling.random_horizontal_minor(g, ctx)
        lam = sampling.random_lagrangian(g, ctx)
        ok = euler_lagrange(Lagrangian.from_form(d_H(nu))).is_zero() and helmholtz(euler_lagrange(lam)).is_zero()
        failures += not ok
    return failures, time.perf_counter() - start


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cases", type=int, default=Config.cases)
    ap.add_argument("--seed", type=int, default=Config.seed)
    a = ap.parse_args()
    bad, secs = run(Config(a.cases, a.seed))
    print(f"{a.cases} cases, {bad} failures, {secs:.2f} s ({1000 * secs / a.cases:.1f} ms/case)")


if __name__ == "__main__":
    main()

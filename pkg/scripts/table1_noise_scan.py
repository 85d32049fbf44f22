"""Scan (dgamma, ddelta, bg) and print the six-state fidelities at each point.

Infinite-statistics fidelities by default; ``--pairs`` switches to seeded
Poisson sampling.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from qtransfer.pipeline import Noise, exact_fidelities, simulate_table1

STATES = ("+2", "-2", "h", "v", "a", "d")


@dataclass(frozen=True)
class ScanConfig:
    dgamma_max: float = 0.4
    ddelta_max: float = 1.2
    steps: int = 5
    backgrounds: tuple[float, ...] = (0.0, 0.005, 0.01)
    pairs: float | None = None
    seed: int = 0


def fidelities(noise: Noise, cfg: ScanConfig) -> dict[str, float]:
    if cfg.pairs is None:
        return exact_fidelities(noise)
    return {r.state: r.fidelity for r in simulate_table1(noise, cfg.pairs, seed=cfg.seed)}


def scan(cfg: ScanConfig):
    for dg in np.linspace(-cfg.dgamma_max, cfg.dgamma_max, cfg.steps):
        for dd in np.linspace(-cfg.ddelta_max, cfg.ddelta_max, cfg.steps):
            for bg in cfg.backgrounds:
                noise = Noise(float(dg), float(dd), bg)
                yield noise, fidelities(noise, cfg)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=5)
    ap.add_argument("--pairs", type=float)
    ap.add_argument("--seed", type=int, default=0)
    ns = ap.parse_args()
    cfg = ScanConfig(steps=ns.steps, pairs=ns.pairs, seed=ns.seed)
    print("\t".join(["dgamma", "ddelta", "bg", *STATES, "avg", "lowest"]))
    for noise, f in scan(cfg):
        avg = np.mean([f[s] for s in STATES])
        row = [f"{noise.dgamma:+.3f}", f"{noise.ddelta:+.3f}", f"{noise.bg:.3f}"]
        row += [f"{f[s]:.5f}" for s in STATES] + [f"{avg:.5f}", min(f, key=f.get)]
        print("\t".join(row))


if __name__ == "__main__":
    main()

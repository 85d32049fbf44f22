"""Transfer fidelity of the six basis states versus Dove-prism misalignment."""
import argparse
import math
from dataclasses import dataclass

import numpy as np

from qtransfer.circuits import (
    MUB_COEFFS,
    MUB_NAMES,
    Postselection,
    deterministic_transferrer,
    run_transfer,
)
from qtransfer.hilbert import product_state, state_fidelity


@dataclass(frozen=True)
class SweepConfig:
    l1: int = 2
    l2: int = -2
    max_offset: float = math.pi / 16
    steps: int = 17
    fiber: bool = False


def fidelity(c, alpha, beta, fiber):
    tm = c.transfer_map
    out = run_transfer(c, product_state("H", {tm.l1: alpha, tm.l2: beta}, c.space)).output
    if fiber:
        out = Postselection(oam=tm.l_final).apply(out)
    return state_fidelity(out.normalized(), tm.expected(alpha, beta, c.space))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--l1", type=int, default=2)
    ap.add_argument("--l2", type=int, default=-2)
    ap.add_argument("--steps", type=int, default=17)
    ap.add_argument("--fiber", action="store_true", help="keep only the output OAM mode")
    ns = ap.parse_args()
    cfg = SweepConfig(ns.l1, ns.l2, steps=ns.steps, fiber=ns.fiber)
    q = (cfg.l1 - cfg.l2) / 4
    print("\t".join(["offset/pi", *MUB_NAMES]))
    for off in np.linspace(-cfg.max_offset, cfg.max_offset, cfg.steps):
        c = deterministic_transferrer(cfg.l1, cfg.l2, q, dove_offset=float(off))
        row = [f"{off / math.pi:+.4f}"]
        row += [f"{fidelity(c, *MUB_COEFFS[n], cfg.fiber):.6f}" for n in MUB_NAMES]
        print("\t".join(row))


if __name__ == "__main__":
    main()

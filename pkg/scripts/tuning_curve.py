"""Retardation and conversion efficiency versus q-plate voltage."""
import argparse
import math
from dataclasses import dataclass

import numpy as np

from qtransfer.elements import (
    TuningCurve,
    bundled_tuning_curve,
    qplate_efficiency,
    voltage_to_delta,
)


@dataclass(frozen=True)
class CurveConfig:
    table: str | None = None
    points: int = 41


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--table", help="tuning table JSON (default: bundled calibration)")
    ap.add_argument("--points", type=int, default=41)
    ns = ap.parse_args()
    cfg = CurveConfig(ns.table, ns.points)
    curve = TuningCurve.from_json(cfg.table) if cfg.table else bundled_tuning_curve()
    v = curve.voltages
    print("volts\tdelta/pi\tefficiency")
    for x in np.linspace(v[0], v[-1], cfg.points):
        d = voltage_to_delta(curve, float(x))
        print(f"{x:.3f}\t{d / math.pi:.5f}\t{qplate_efficiency(d):.5f}")


if __name__ == "__main__":
    main()

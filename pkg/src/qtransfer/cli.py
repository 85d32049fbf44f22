"""``sim`` command line: transfer, table1, budget, tomo."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import bench
from .circuits import (
    Circuit,
    TransferMap,
    deterministic_transferrer,
    mub_coefficients,
    probabilistic_transferrer_pi_to_oam,
    run_transfer,
)
from .errors import QTransferError
from .hilbert import POL_KETS, PhotonState, product_state, state_fidelity
from .measurement import (
    REFERENCE_BUDGET,
    load_budget,
    load_counts,
    overall_efficiency,
    sampled_tables,
    tomography,
)
from .pipeline import REFERENCE_TABLE, Bench, Noise, simulate_table1, table1_average

PRESETS = ("det-transferrer", "prob-transferrer")
EXIT_DOMAIN, EXIT_CONFIG = 1, 2


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    bench: str | None
    preset: str | None
    input: str | None
    pairs: float
    efficiency: float
    seed: int | None
    format: str
    compare_paper: bool
    noise: Noise
    jobs: int

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        if ns.pairs <= 0:
            raise ConfigError("--pairs must be positive")
        try:
            noise = Noise.parse(ns.noise or "")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(ns.command, ns.bench, ns.preset, ns.input, ns.pairs, ns.efficiency,
                   ns.seed, ns.format, ns.compare_paper, noise, ns.jobs)


# -- output -------------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def emit(report: dict, fmt: str, out=sys.stdout):
    """TSV: one ``key<TAB>value...`` line per field; tables as header + rows."""
    if fmt == "json":
        out.write(json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n")
        return
    for key, value in report.items():
        if isinstance(value, list) and value and isinstance(value[0], dict):
            cols = list(value[0])
            out.write("\t".join(cols) + "\n")
            for row in value:
                out.write("\t".join(_num(row[c]) for c in cols) + "\n")
        elif isinstance(value, dict):
            for sub, v in value.items():
                out.write(f"{key}.{sub}\t{_num(v)}\n")
        elif isinstance(value, (list, tuple)):
            out.write(key + "\t" + "\t".join(_num(v) for v in value) + "\n")
        else:
            out.write(f"{key}\t{_num(value)}\n")


def state_rows(s: PhotonState) -> list[dict]:
    return [{"pol": lab.pol.name, "oam": lab.oam, "path": lab.path,
             "re": float(a.real), "im": float(a.imag)}
            for lab, a in sorted(s.amplitudes.items(), key=lambda kv: (kv[0].path, kv[0].oam,
                                                                         kv[0].pol))]


def state_text(s: PhotonState) -> str:
    return " ".join(f"{r['pol']},{r['oam']:+d},{r['path']}:{_num(r['re'])}{float(r['im']):+.12g}j"
                    for r in state_rows(s))


# -- input resolution ---------------------------------------------------------

def resolve_input(text: str | None, default: str) -> tuple[str, complex, complex]:
    """MUB label (``+2``, ``h``...), polarization (``L-pol``) or explicit ``alpha,beta``."""
    text = text or default
    if text.endswith("-pol") and text[:-4] in POL_KETS:
        ket = POL_KETS[text[:-4]]
        return text, np.vdot(POL_KETS["L"], ket), np.vdot(POL_KETS["R"], ket)
    try:
        a, b = mub_coefficients(text)
        return text, complex(a), complex(b)
    except ValueError:
        pass
    try:
        a_s, b_s = text.split(",")
        a, b = complex(a_s.replace("i", "j")), complex(b_s.replace("i", "j"))
    except ValueError:
        raise ConfigError(f"cannot parse input state {text!r}") from None
    n = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    if n == 0:
        raise ConfigError("input state is zero")
    return text, a / n, b / n


def _source(cfg: RunConfig) -> tuple[str, Circuit]:
    if cfg.bench and cfg.preset:
        raise ConfigError("give either --bench or --preset, not both")
    if cfg.bench:
        return cfg.bench, bench.load_bench(cfg.bench)
    preset = cfg.preset or "det-transferrer"
    delta = math.pi + cfg.noise.ddelta
    if preset == "det-transferrer":
        return preset, deterministic_transferrer(dove_offset=cfg.noise.dgamma, qplate_delta=delta)
    if preset == "prob-transferrer":
        return preset, probabilistic_transferrer_pi_to_oam(qplate_delta=delta)
    raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")


# -- subcommands --------------------------------------------------------------

def cmd_transfer(cfg: RunConfig) -> dict:
    name, circuit = _source(cfg)
    space = circuit.space
    if circuit.postselection is not None:
        # pi -> OAM: qubit on polarization at l = 0
        q = next(e.qplate_charge for e in circuit.elements if e.qplate_charge)
        label, a, b = resolve_input(cfg.input, "L-pol")
        state = product_state(a * POL_KETS["L"] + b * POL_KETS["R"], {0: 1}, space)
        l = round(2 * q)
        expected = product_state("H", {l: a, -l: b}, space, normalize=True)
    else:
        tm = circuit.transfer_map or TransferMap(2, -2, "L", "R", 0)
        label, a, b = resolve_input(cfg.input, "h")
        state = product_state("H", {tm.l1: a, tm.l2: b}, space)
        expected = tm.expected(a, b, space)
    result = run_transfer(circuit, state)
    fid = state_fidelity(result.output.normalized(), expected) if result.success_probability else 0.0
    return {
        "source": name,
        "input": label,
        "input_state": state_text(state),
        "output_state": state_text(result.output),
        "success": result.success_probability,
        "survival": result.survival_probability,
        "fidelity": fid,
    }


def cmd_table1(cfg: RunConfig) -> dict:
    rows = simulate_table1(cfg.noise, cfg.pairs, cfg.efficiency,
                           seed=0 if cfg.seed is None else cfg.seed, jobs=cfg.jobs)
    avg, avg_sigma = table1_average(rows)
    table = []
    for r in rows:
        row = {"state": r.state, "F": r.fidelity, "sigma": r.sigma,
               "C_plus": r.counts.plus, "C_minus": r.counts.minus, "basis": r.counts.basis}
        if cfg.compare_paper:
            row["reference_F"], row["reference_sigma"] = REFERENCE_TABLE[r.state]
        table.append(row)
    report = {"rows": table, "average": {"F": avg, "sigma": avg_sigma}}
    if cfg.compare_paper:
        report["reference_average"] = {"F": REFERENCE_TABLE["average"][0],
                                   "sigma": REFERENCE_TABLE["average"][1]}
    return report


def cmd_budget(cfg: RunConfig, budget_path: str | None, reference: bool) -> dict:
    if budget_path and reference:
        raise ConfigError("give either --budget or --paper")
    if budget_path:
        try:
            budget = load_budget(budget_path)
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed budget file {budget_path}: {exc}") from None
    elif reference:
        budget = REFERENCE_BUDGET
    else:
        raise ConfigError("budget needs --budget FILE or --paper")
    return {"components": dict(budget.components), "overall": overall_efficiency(budget)}


def cmd_tomo(cfg: RunConfig, counts_path: str | None, target: str | None) -> dict:
    if counts_path:
        try:
            tables = load_counts(counts_path)
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed counts file {counts_path}: {exc}") from None
        target_ket = POL_KETS[target] if target else None
    else:
        if cfg.seed is None:
            raise ConfigError("simulated tomography needs --seed")
        label, a, b = resolve_input(cfg.input, "h")
        bench_ = Bench.build(cfg.noise)
        jones = bench_.output_qubit(a, b)
        tables = sampled_tables(jones, cfg.pairs, cfg.seed, cfg.efficiency,
                                background=cfg.noise.bg * cfg.pairs)
        target_ket = POL_KETS[target] if target else bench_.target(a, b)
    rho = tomography(tables)
    report = {
        "bloch": [float(x) for x in rho.bloch],
        "rho_re": [float(x) for x in rho.matrix.real.ravel()],
        "rho_im": [float(x) for x in rho.matrix.imag.ravel()],
    }
    if target_ket is not None:
        report["fidelity"] = rho.fidelity(target_ket)
    return report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("source")
    src.add_argument("--bench", metavar="FILE", help="bench description file")
    src.add_argument("--preset", choices=PRESETS)
    common.add_argument("--input", metavar="STATE",
                        help="MUB label (+2, -2, h, v, a, d), X-pol, or 'alpha,beta'")
    common.add_argument("--pairs", type=float, default=1e6, metavar="N")
    common.add_argument("--efficiency", type=float, default=1.0, help="detection efficiency")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=("tsv", "json"), default="tsv")
    common.add_argument("--compare-paper", action="store_true")
    common.add_argument("--noise", metavar="dgamma=..,ddelta=..,bg=..")
    common.add_argument("--jobs", type=int, default=1)

    p = argparse.ArgumentParser(prog="sim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("transfer", parents=[common], help="run one state through a circuit")
    sub.add_parser("table1", parents=[common], help="six-state fidelity table")
    b = sub.add_parser("budget", parents=[common], help="efficiency budget")
    b.add_argument("--budget", dest="budget_file", metavar="FILE")
    b.add_argument("--paper", action="store_true", help="use the reference budget (optics 0.648, fiber 0.5)")
    t = sub.add_parser("tomo", parents=[common], help="polarization qubit tomography")
    t.add_argument("--counts", metavar="FILE")
    t.add_argument("--target", choices=sorted(POL_KETS))
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ns = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        if cfg.subcommand == "transfer":
            report = cmd_transfer(cfg)
        elif cfg.subcommand == "table1":
            report = cmd_table1(cfg)
        elif cfg.subcommand == "budget":
            report = cmd_budget(cfg, ns.budget_file, ns.paper)
        else:
            report = cmd_tomo(cfg, ns.counts, ns.target)
    except bench.BenchError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError, ValueError) as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QTransferError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    emit(report, cfg.format, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance checks, one per criterion.

Each test prints a ``criterion N: PASS|FAIL ...`` line (shown even under
capture) and then asserts. Run ``python3 tests/test_acceptance.py`` for the
lines alone.
"""
import itertools
import math
import sys
import time

import numpy as np
import pytest

from qtransfer.bench import format_bench, load_bench, parse
from qtransfer.circuits import (
    MUB_COEFFS,
    MUB_NAMES,
    Circuit,
    compose,
    deterministic_transferrer,
    inverse,
    probabilistic_success,
    probabilistic_transferrer_pi_to_oam,
    run_transfer,
)
from qtransfer.elements import (
    HWP,
    PBS,
    QWP,
    Dagger,
    DovePrism,
    Mirror,
    PathDovePrism,
    PhaseShift,
    QPlate,
    SagnacPSI,
    TuningCurve,
    bundled_tuning_curve,
    qplate_efficiency,
    voltage_to_delta,
)
from qtransfer.hilbert import (
    Pol,
    Space,
    mode,
    operators_close,
    product_state,
    state_fidelity,
)
from qtransfer.measurement import (
    REFERENCE_BUDGET,
    CountTable,
    expected_tables,
    fidelity_from_counts,
    overall_efficiency,
    physical_projection,
    sampled_tables,
    tomography,
    trial_rng,
)
from qtransfer.pipeline import (
    Bench,
    Noise,
    exact_fidelities,
    simulate_table1,
    table1_average,
)

SUPERPOSITIONS = ("h", "v", "a", "d")


def report(capsys, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def transfer_fidelity(c, alpha, beta):
    tm = c.transfer_map
    out = run_transfer(c, product_state("H", {tm.l1: alpha, tm.l2: beta}, c.space)).output
    return state_fidelity(out.normalized(), tm.expected(alpha, beta, c.space))


def bloch_grid():
    for t in np.linspace(0, math.pi, 10):
        for p in np.linspace(0, 2 * math.pi, 10, endpoint=False):
            yield math.cos(t / 2), np.exp(1j * p) * math.sin(t / 2)


# -- 1 ------------------------------------------------------------------------

def check_1():
    t0 = time.perf_counter()
    c = deterministic_transferrer()
    inputs = [MUB_COEFFS[n] for n in MUB_NAMES] + list(bloch_grid())
    worst = max(abs(1 - transfer_fidelity(c, a, b)) for a, b in inputs)
    success = min(run_transfer(c, product_state("H", {2: a, -2: b}, c.space)).success_probability
                  for a, b in inputs)
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and abs(success - 1) < 1e-10 and dt < 1.0
    return ok, f"max |1-F| = {worst:.2e} over {len(inputs)} inputs, min p = {success:.12f}, {dt:.3f} s"


# -- 2 ------------------------------------------------------------------------

def valid_pairs():
    for l1, l2 in itertools.permutations(range(-4, 5), 2):
        if (l1 - l2) % 2 == 0:
            yield l1, l2, (l1 - l2) / 4


def check_2():
    t0 = time.perf_counter()
    worst_nominal, best_perturbed, n = 0.0, 0.0, 0
    for l1, l2, q in valid_pairs():
        n += 1
        c = deterministic_transferrer(l1, l2, q)
        worst_nominal = max(worst_nominal,
                            max(abs(1 - transfer_fidelity(c, *MUB_COEFFS[s])) for s in MUB_NAMES))
        for off in (math.pi / 32, -math.pi / 32):
            cp = deterministic_transferrer(l1, l2, q, dove_offset=off)
            best_perturbed = max(best_perturbed, max(transfer_fidelity(cp, *MUB_COEFFS[s])
                                                     for s in SUPERPOSITIONS))
    dt = time.perf_counter() - t0
    ok = worst_nominal < 1e-10 and best_perturbed < 1 and dt < 5.0
    return ok, (f"{n} pairs; nominal max |1-F| = {worst_nominal:.2e}; "
                f"max superposition F at gamma+-pi/32 = {best_perturbed:.6f}; {dt:.2f} s")


# -- 3 ------------------------------------------------------------------------

def random_circuit(rng, space):
    elems = []
    for _ in range(int(rng.integers(1, 9))):
        t = float(rng.uniform(-math.pi, math.pi))
        e = [HWP(t), QWP(t), DovePrism(t), SagnacPSI(t), Mirror(), PhaseShift(t, pol="V"),
             PhaseShift(t, oam=int(rng.integers(-2, 3))), QPlate(0.5, t)][int(rng.integers(8))]
        if isinstance(e, QPlate) and sum(isinstance(x, QPlate) for x in elems) >= 2:
            continue
        elems.append(e)
    return Circuit(space, elems)


def round_trip_error(c):
    op = compose(inverse(c)) @ compose(c)
    cols = [c.space.index(lab) for lab in c.space.labels if abs(lab.oam) <= c.safe_input_lmax]
    return float(np.abs(op.matrix[:, cols] - np.eye(c.space.dim)[:, cols]).max())


def check_3():
    rng = np.random.default_rng(3)
    errs = [round_trip_error(deterministic_transferrer())]
    errs += [round_trip_error(random_circuit(rng, Space(4))) for _ in range(50)]
    worst = max(errs)
    return worst < 1e-10, f"transferrer + 50 random circuits, max |T^-1 T - I| = {worst:.2e}"


# -- 4 ------------------------------------------------------------------------

def check_4():
    analytic = [probabilistic_success(*MUB_COEFFS[n]) for n in MUB_NAMES]
    exact = all(p == 0.5 for p in analytic)
    c = probabilistic_transferrer_pi_to_oam()
    p = run_transfer(c, product_state("L", {0: 1}, c.space)).success_probability
    n = 100_000
    freq = float((trial_rng(4, 0).random(n) < p).mean())
    sigma = math.sqrt(0.25 / n)
    ok = exact and abs(p - 0.5) < 1e-15 and abs(freq - 0.5) < 3 * sigma
    return ok, (f"analytic p = {analytic[0]!r} (all six inputs exact: {exact}), simulated p = {p!r}, "
                f"MC freq = {freq:.5f} ({(freq - 0.5) / sigma:+.2f} sigma)")


# -- 5 ------------------------------------------------------------------------

def psi_oracle(gamma, space):
    split = PBS()
    return Dagger(split).lower(space) @ PathDovePrism(gamma).lower(space) @ split.lower(space)


def check_5():
    rng = np.random.default_rng(5)
    space = Space(4, paths=2)
    worst = 0.0
    for _ in range(20):
        gamma = float(rng.uniform(-math.pi, math.pi))
        l = int(rng.integers(-4, 5))
        cols = [space.index(mode(p, l, 0)) for p in Pol]
        A = psi_oracle(gamma, space).matrix[:, cols]
        B = SagnacPSI(gamma).lower(space).matrix[:, cols]
        k = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        phase = B[k] / A[k]
        worst = max(worst, float(np.abs(A * phase - B).max()), abs(abs(phase) - 1))
    return worst < 1e-10, f"20 (gamma, l) draws, max deviation up to global phase = {worst:.2e}"


# -- 6 ------------------------------------------------------------------------

def ordering_ok(f):
    eig = min(f["+2"], f["-2"])
    sup = {k: f[k] for k in SUPERPOSITIONS}
    return eig > max(sup.values()) and all(f["v"] < f[k] for k in f if k != "v")


def table_ok(f):
    avg = float(np.mean(list(f.values())))
    return abs(avg - 0.980) <= 0.01 and ordering_ok(f), avg


def search_noise():
    """Grid over (dgamma, ddelta, bg) in the infinite-statistics limit."""
    best, v_lowest = None, 0
    for dg in np.linspace(-0.4, 0.4, 9):
        for dd in np.linspace(-1.2, 1.2, 13):
            for bg in (0.0, 0.002, 0.005, 0.01, 0.02, 0.03):
                noise = Noise(float(dg), float(dd), bg)
                f = exact_fidelities(noise)
                ok, avg = table_ok(f)
                eig = min(f["+2"], f["-2"]) > max(f[k] for k in SUPERPOSITIONS)
                v_low = all(f["v"] < f[k] for k in f if k != "v")
                v_lowest += v_low
                key = (ok, abs(avg - 0.98) <= 0.01, eig + v_low, -abs(avg - 0.98))
                if best is None or key > best[0]:
                    best = (key, noise, f, avg)
    return best, v_lowest


def check_6():
    budget_exact = overall_efficiency(REFERENCE_BUDGET) == 0.324
    f994 = fidelity_from_counts(CountTable("RL", 994, 6))[0]
    (key, noise, _, _), v_lowest = search_noise()
    ok_exact = key[0]
    rows = simulate_table1(noise, n_pairs=1e6, seed=6)
    sampled = {r.state: r.fidelity for r in rows}
    ok_sampled, _ = table_ok(sampled)
    avg_sampled = table1_average(rows)[0]
    part_b = ok_exact and ok_sampled
    ok = budget_exact and f994 == 0.994 and part_b
    lowest = min(sampled, key=sampled.get)
    return ok, (f"budget 0.648*0.5 = {overall_efficiency(REFERENCE_BUDGET)!r}; (a) F(994,6) = {f994!r}; "
                f"(b) best config dgamma={noise.dgamma:g} ddelta={noise.ddelta:g} bg={noise.bg:g}: "
                f"avg {avg_sampled:.4f}, lowest state {lowest!r}, ordering holds: {ordering_ok(sampled)}; "
                f"grid points with v lowest: {v_lowest}/{9 * 13 * 6}")


# -- 7 ------------------------------------------------------------------------

def check_7():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        worst = max(worst, abs(1 - tomography(expected_tables(v)).fidelity(v)))
    bench = Bench.build()
    jones, target = bench.output_qubit(*MUB_COEFFS["a"]), bench.target(*MUB_COEFFS["a"])
    good = sum(tomography(sampled_tables(jones, 1e4, trial_rng(7, i))).fidelity(target) >= 0.99
               for i in range(100))
    idem = 0.0
    for _ in range(100):
        r = rng.uniform(-1.5, 1.5, size=3)
        raw = (np.eye(2) + r[0] * np.diag([1, -1]) + r[1] * np.array([[0, 1], [1, 0]])
               + r[2] * np.array([[0, 1j], [-1j, 0]])) / 2
        once = physical_projection(raw)
        idem = max(idem, float(np.abs(physical_projection(once).matrix - once.matrix).max()))
    ok = worst < 1e-12 and good >= 95 and idem < 1e-12
    return ok, (f"noiseless max |1-F| = {worst:.1e}; sampled N=1e4: {good}/100 trials F >= 0.99; "
                f"projection idempotence err = {idem:.1e}")


# -- 8 ------------------------------------------------------------------------

def check_8():
    rng = np.random.default_rng(8)
    crashes = 0
    for _ in range(10_000):
        data = rng.integers(0, 256, size=int(rng.integers(0, 120)), dtype=np.uint8).tobytes()
        try:
            parse(data)
        except Exception:
            crashes += 1
    from importlib.resources import files

    preset = deterministic_transferrer()
    c = load_bench(files("qtransfer") / "data" / "det_transferrer.bench")
    cols = [preset.space.index(lab) for lab in preset.space.labels if abs(lab.oam) <= 2]
    equal = operators_close(compose(c), compose(preset), 1e-10, columns=cols, up_to_phase=True)
    text = (files("qtransfer") / "data" / "det_transferrer.bench").read_text()
    once = format_bench(parse(text))
    idem = format_bench(parse(once)) == once
    ok = crashes == 0 and equal and idem
    return ok, f"fuzz crashes {crashes}/10000; bench file == preset: {equal}; format idempotent: {idem}"


# -- 9 ------------------------------------------------------------------------

def random_table(rng):
    n = int(rng.integers(2, 15))
    volts = np.cumsum(rng.uniform(0.05, 1.0, size=n))
    effs = rng.uniform(0, 1, size=n)
    if rng.random() < 0.3:
        effs[rng.integers(n)] = 1.0
    return TuningCurve(tuple(zip(volts.tolist(), effs.tolist())), threshold_volts=float(volts[0]))


def check_9():
    vals = (qplate_efficiency(math.pi), qplate_efficiency(0.0), qplate_efficiency(math.pi / 2))
    exact = vals == (1.0, 0.0, 0.5)
    rng = np.random.default_rng(9)
    curves = [bundled_tuning_curve()] + [random_table(rng) for _ in range(200)]
    monotone = hits = True
    for curve in curves:
        v = curve.voltages
        xs = np.linspace(v[0], v[-1], 97)
        ys = [voltage_to_delta(curve, x) for x in xs]
        monotone &= all(b >= a for a, b in zip(ys, ys[1:]))
        d = curve.retardations()
        hits &= all(voltage_to_delta(curve, vi) == di for vi, di in zip(v, d))
        hits &= all(abs(qplate_efficiency(di) - e) < 1e-12 for di, e in zip(d, curve.efficiencies))
    ok = exact and monotone and hits
    return ok, (f"efficiency(pi, 0, pi/2) = {vals}; {len(curves)} tables monotone: {monotone}, "
                f"table points exact: {hits}")


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6,
          7: check_7, 8: check_8, 9: check_9}


@pytest.mark.parametrize("n", sorted(CHECKS))
def test_criterion(n, capsys):
    ok, detail = CHECKS[n]()
    assert report(capsys, n, ok, detail), detail


if __name__ == "__main__":
    results = [report(None, n, *CHECKS[n]()) for n in sorted(CHECKS)]
    sys.exit(0 if all(results) else 1)

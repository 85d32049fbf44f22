import json
import math

import numpy as np
import pytest
from conftest import angles
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qtransfer.elements import (
    HWP,
    PBS,
    QWP,
    Attenuator,
    Dagger,
    DovePrism,
    Mirror,
    PathDovePrism,
    PhaseShift,
    QPlate,
    SagnacPSI,
    TuningCurve,
    bundled_tuning_curve,
    dove_prism,
    hwp,
    mirror,
    pbs,
    qplate,
    qplate_efficiency,
    qwp,
    sagnac_psi,
    voltage_to_delta,
)
from qtransfer.errors import BoundsError, NonInvertibleError, RangeError, TopologyError
from qtransfer.hilbert import (
    ModeOperator,
    Pol,
    Space,
    apply,
    check_unitary,
    mode,
    operators_close,
    product_state,
    state_fidelity,
)

S4 = Space(4)
S2P = Space(2, paths=2)


def amp(s, pol, oam, path=0):
    return s.amplitude(mode(pol, oam, path))


def out_of(op, pol, l, space=S4, path=0):
    return apply(op, product_state(pol, {l: 1}, space, path=path))


def same_up_to_phase(s, t, tol=1e-12):
    return abs(abs(np.vdot(s.vector(), t.vector())) - 1) < tol


class TestWaveplates:
    def test_hwp_pi8_makes_diagonal(self):
        out = out_of(hwp(math.pi / 8, S4), "H", 0)
        assert same_up_to_phase(out, product_state("A", {0: 1}, S4))

    def test_hwp_zero(self):
        op = hwp(0, S4)
        assert abs(amp(out_of(op, "H", 1), "H", 1) - 1) < 1e-15
        assert abs(amp(out_of(op, "V", 1), "V", 1) + 1) < 1e-15

    def test_hwp_pi4_swaps(self):
        out = out_of(hwp(math.pi / 4, S4), "H", -3)
        assert abs(amp(out, "V", -3) - 1) < 1e-15

    def test_qwp_zero(self):
        op = qwp(0, S4)
        assert abs(amp(out_of(op, "H", 0), "H", 0) - 1) < 1e-15
        assert abs(amp(out_of(op, "V", 0), "V", 0) - 1j) < 1e-15

    def test_qwp_pi4_makes_circular(self):
        # with the diag(1, i) fast-axis convention H leaves right-circular
        out = out_of(qwp(math.pi / 4, S4), "H", 0)
        assert same_up_to_phase(out, product_state("R", {0: 1}, S4))
        assert abs(state_fidelity(out, product_state("L", {0: 1}, S4))) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(angles)
    def test_qwp_unitary(self, theta):
        assert check_unitary(qwp(theta, S4))

    def test_hwp_half_turn(self):
        assert operators_close(hwp(0.3, S4), hwp(0.3 + math.pi, S4), 1e-12)


class TestDovePrism:
    def test_h_plus2(self):
        out = out_of(dove_prism(math.pi / 16, S4), "H", 2)
        assert abs(amp(out, "H", 2) - np.exp(1j * math.pi / 4)) < 1e-15

    def test_v_minus2(self):
        out = out_of(dove_prism(math.pi / 16, S4), "V", -2)
        assert abs(amp(out, "V", -2) - np.exp(1j * math.pi / 4)) < 1e-15

    def test_zero_is_identity(self):
        assert operators_close(dove_prism(0, S4), ModeOperator.identity(S4), 1e-15)

    @settings(max_examples=50, deadline=None)
    @given(angles)
    def test_periodic_in_2pi(self, g):
        # integer l makes the phases exactly 2pi-periodic up to float round-off
        assert operators_close(dove_prism(g, S4), dove_prism(g + 2 * math.pi, S4), 1e-12)

    def test_psi_matches_dove_operator(self):
        assert operators_close(sagnac_psi(0.2, S4), dove_prism(0.2, S4), 1e-15)


class TestQPlate:
    def test_tuned_completes_transfer(self):
        op = qplate(1, math.pi, S4)
        assert same_up_to_phase(out_of(op, "R", 2), product_state("L", {0: 1}, S4))
        assert same_up_to_phase(out_of(op, "L", -2), product_state("R", {0: 1}, S4))

    def test_zero_retardation_identity(self):
        assert operators_close(qplate(1, 0, S4), ModeOperator.identity(S4), 1e-15)

    def test_half_retardation(self):
        out = out_of(qplate(1, math.pi / 2, S4), "L", 0)
        expected = (product_state("L", {0: 1}, S4).vector()
                    + 1j * product_state("R", {2: 1}, S4).vector()) / math.sqrt(2)
        assert np.abs(out.vector() - expected).max() < 1e-15
        conv = sum(abs(a) ** 2 for lab, a in out.amplitudes.items() if lab.oam == 2)
        assert abs(conv - 0.5) < 1e-12

    def test_overflow_raises(self):
        with pytest.raises(BoundsError):
            out_of(qplate(1, math.pi, S4), "L", 3)

    def test_bad_charge(self):
        with pytest.raises(ValueError):
            QPlate(0.3, math.pi)

    @pytest.mark.parametrize("q", [0.5, 1, 1.5])
    def test_basis_kets_shift_and_flip(self, q):
        op = qplate(q, math.pi, S4)
        s = int(2 * q)
        l = 0
        out_l = out_of(op, "L", l)
        assert out_l.oam_values() == {l + s}
        assert same_up_to_phase(out_l, product_state("R", {l + s: 1}, S4))
        out_r = out_of(op, "R", l)
        assert out_r.oam_values() == {l - s}
        assert same_up_to_phase(out_r, product_state("L", {l - s: 1}, S4))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 2 * math.pi, exclude_max=True), st.sampled_from([0.5, 1]),
           st.integers(0, 2**32 - 1))
    def test_conversion_probability_is_efficiency(self, delta, q, seed):
        rng = np.random.default_rng(seed)
        space = Space(4)
        jones = rng.normal(size=2) + 1j * rng.normal(size=2)
        jones /= np.linalg.norm(jones)
        l = int(rng.integers(-2, 3))
        out = apply(qplate(q, delta, space), product_state(jones, {l: 1}, space))
        converted = sum(abs(a) ** 2 for lab, a in out.amplitudes.items() if lab.oam != l)
        assert abs(converted - qplate_efficiency(delta)) < 1e-12

    def test_adjoint_inverts(self):
        e = QPlate(1, 1.1)
        op = e.adjoint().lower(S4) @ e.lower(S4)
        cols = [S4.index(lab) for lab in S4.labels if abs(lab.oam) <= 2]
        assert operators_close(op, ModeOperator.identity(S4), 1e-12, columns=cols)


def test_qplate_efficiency_values():
    assert qplate_efficiency(math.pi) == 1.0
    assert qplate_efficiency(0) == 0.0
    assert abs(qplate_efficiency(math.pi / 2) - 0.5) < 1e-15


class TestPBS:
    def test_transmit_h(self):
        out = out_of(pbs(S2P), "H", 1, S2P)
        assert abs(amp(out, "H", 1, 0) - 1) < 1e-15

    def test_reflect_v(self):
        out = out_of(pbs(S2P), "V", 1, S2P)
        assert abs(amp(out, "V", 1, 1) - 1j) < 1e-15

    def test_diagonal_splits(self):
        out = out_of(pbs(S2P), "A", 0, S2P)
        r2 = 1 / math.sqrt(2)
        assert abs(amp(out, "H", 0, 0) - r2) < 1e-15
        assert abs(amp(out, "V", 0, 1) - 1j * r2) < 1e-15

    def test_needs_two_paths(self):
        with pytest.raises(TopologyError):
            pbs(S4)

    def test_wiring_bijection(self):
        with pytest.raises(TopologyError):
            PBS(reflect=(0, 0)).lower(S2P)

    def test_unitary(self):
        assert check_unitary(pbs(S2P))


class TestMirror:
    def test_flip(self):
        out = out_of(mirror(S4), "H", 2)
        assert abs(amp(out, "H", -2) - 1) < 1e-15

    def test_involution(self):
        assert operators_close(mirror(S4) @ mirror(S4), ModeOperator.identity(S4), 1e-15)

    def test_gaussian_fixed(self):
        out = out_of(mirror(S4), "V", 0)
        assert abs(amp(out, "V", 0) - 1) < 1e-15


class TestAttenuator:
    def test_range(self):
        with pytest.raises(RangeError):
            Attenuator(1.5)

    def test_not_invertible(self):
        with pytest.raises(NonInvertibleError):
            Attenuator(0.5).adjoint()


def _random_element(rng, space):
    kind = rng.integers(7)
    t = float(rng.uniform(-2 * math.pi, 2 * math.pi))
    return [
        HWP(t), QWP(t), DovePrism(t), SagnacPSI(t), QPlate(float(rng.choice([0.5, 1])), t),
        PhaseShift(t, pol=str(rng.choice(["H", "V"])), oam=int(rng.integers(-2, 3))),
        Mirror(),
    ][kind]


def test_every_unitary_element_passes_check(rng):
    for _ in range(100):
        e = _random_element(rng, S4)
        assert e.unitary
        assert check_unitary(e.lower(S4)), e


def test_element_adjoints(rng):
    for _ in range(30):
        e = _random_element(rng, S4)
        op = e.adjoint().lower(S4) @ e.lower(S4)
        cols = [S4.index(lab) for lab in S4.labels if abs(lab.oam) <= 2]
        assert operators_close(op, ModeOperator.identity(S4), 1e-12, columns=cols), e


def psi_oracle(gamma: float, space: Space) -> ModeOperator:
    """Explicit loop: split on the PBS, opposite passes through the prism, recombine."""
    split = PBS()
    return Dagger(split).lower(space) @ PathDovePrism(gamma).lower(space) @ split.lower(space)


def test_psi_oracle_equivalence(rng):
    for _ in range(20):
        gamma = float(rng.uniform(-math.pi, math.pi))
        l = int(rng.integers(-2, 3))
        cols = [S2P.index(mode(p, l, 0)) for p in Pol]
        assert operators_close(psi_oracle(gamma, S2P), SagnacPSI(gamma).lower(S2P),
                               1e-10, columns=cols, up_to_phase=True)


def test_psi_on_diagonal_input():
    # after HWP(pi/8) the l = +-2 arms leave the loop as R and L (up to phase)
    s = apply(sagnac_psi(math.pi / 16, S4), product_state("A", {2: 1}, S4))
    assert same_up_to_phase(s, product_state("R", {2: 1}, S4))
    s = apply(sagnac_psi(math.pi / 16, S4), product_state("A", {-2: 1}, S4))
    assert same_up_to_phase(s, product_state("L", {-2: 1}, S4))


class TestTuningCurve:
    def test_peak_near_pi(self):
        curve = bundled_tuning_curve()
        assert abs(voltage_to_delta(curve, 4.5) - math.pi) < 0.25
        assert qplate_efficiency(voltage_to_delta(curve, 4.5)) >= 0.99 - 1e-12

    def test_table_points_exact(self):
        curve = bundled_tuning_curve()
        deltas = curve.retardations()
        for (v, eff), d in zip(curve.samples, deltas):
            assert voltage_to_delta(curve, v) == d
            assert abs(qplate_efficiency(d) - eff) < 1e-12

    def test_midpoint_between_neighbors(self):
        curve = bundled_tuning_curve()
        deltas = curve.retardations()
        v = curve.voltages
        for i in range(len(v) - 1):
            if v[i] < curve.threshold_volts:
                continue
            mid = voltage_to_delta(curve, (v[i] + v[i + 1]) / 2)
            assert deltas[i] <= mid <= deltas[i + 1]
            assert abs(mid - (deltas[i] + deltas[i + 1]) / 2) < 1e-12

    def test_below_threshold(self):
        curve = TuningCurve(((0, 0.1), (1, 0.2), (2, 0.5)), threshold_volts=1.5)
        assert voltage_to_delta(curve, 1.2) == curve.retardations()[0]

    def test_out_of_range(self):
        curve = bundled_tuning_curve()
        with pytest.raises(RangeError):
            voltage_to_delta(curve, 0.5)
        with pytest.raises(RangeError):
            voltage_to_delta(curve, 7.5)

    def test_json_round_trip(self, tmp_path):
        curve = bundled_tuning_curve()
        p = tmp_path / "c.json"
        p.write_text(curve.to_json())
        assert TuningCurve.from_json(p) == curve
        assert json.loads(curve.to_json())["threshold_volts"] == 2.2

    def test_validation(self):
        with pytest.raises(ValueError):
            TuningCurve(((1, 0), (1, 0.5)), 0)
        with pytest.raises(ValueError):
            TuningCurve(((1, 0), (2, 1.5)), 0)


@st.composite
def tuning_tables(draw):
    n = draw(st.integers(2, 12))
    steps = draw(st.lists(st.floats(0.01, 2.0), min_size=n - 1, max_size=n - 1))
    v0 = draw(st.floats(0, 5))
    volts = [v0]
    for s in steps:
        volts.append(volts[-1] + s)
    assume(all(b > a for a, b in zip(volts, volts[1:])))
    effs = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    return TuningCurve(tuple(zip(volts, effs)), threshold_volts=volts[0])


@settings(max_examples=200, deadline=None)
@given(tuning_tables(), st.data())
def test_voltage_to_delta_monotone_and_exact(curve, data):
    v = curve.voltages
    deltas = curve.retardations()
    assert np.all(np.diff(deltas) >= 0)
    for vi, di in zip(v, deltas):
        assert voltage_to_delta(curve, vi) == di
    xs = sorted(data.draw(st.lists(st.floats(float(v[0]), float(v[-1])), min_size=2, max_size=10)))
    ys = [voltage_to_delta(curve, x) for x in xs]
    assert all(b >= a for a, b in zip(ys, ys[1:]))
    for x, y in zip(xs, ys):
        assert abs(qplate_efficiency(y) - np.interp(x, v, curve.efficiencies)) <= 1.0

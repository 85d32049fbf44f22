"""Optical elements and their lowering to mode operators.

Conventions (fixed here, used everywhere):

* Waveplate matrices are ``R(t) J0 R(t)^T`` with ``R`` the active rotation.
  HWP: ``J0 = diag(1, -1)``; QWP: fast axis horizontal, ``J0 = diag(1, i)``.
* Dove prism, effective PSI-internal model: ``|H,l> -> e^{2il gamma}|H,l>``,
  ``|V,l> -> e^{-2il gamma}|V,l>``.
* Q-plate: ``U = cos(delta/2) I + i sin(delta/2) C`` with
  ``C|L,l> = |R,l+2q>`` and ``C|R,l> = |L,l-2q>``.
* PBS: transmits H unchanged, reflects V with phase ``i``.
* Mirror: ``l -> -l``, identity on polarization.
"""
from __future__ import annotations

import json
import math
from dataclasses import KW_ONLY, dataclass
from pathlib import Path

import numpy as np

from .errors import BoundsError, NonInvertibleError, RangeError, TopologyError
from .hilbert import POL_KETS, ModeLabel, ModeOperator, Pol, Space


def _jones(space: Space, J: np.ndarray, name: str) -> ModeOperator:
    """Lift a 2x2 polarization matrix to the full space (identity on oam/path)."""
    blocks = space.dim // 2
    return ModeOperator(space, np.kron(np.eye(blocks), J).astype(complex), name=name)


def _rotated(J0: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    return R @ J0 @ R.T


def _diagonal(space: Space, phases, name: str) -> ModeOperator:
    return ModeOperator(space, np.diag(np.asarray(phases, dtype=complex)), name=name)


@dataclass(frozen=True)
class OpticalElement:
    _: KW_ONLY
    transmittance: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise RangeError(f"transmittance {self.transmittance} outside [0, 1]")

    @property
    def unitary(self) -> bool:
        return True

    @property
    def qplate_charge(self) -> float:
        return 0.0

    def lower(self, space: Space) -> ModeOperator:
        raise NotImplementedError

    def adjoint(self) -> "OpticalElement":
        return Dagger(self, transmittance=self.transmittance)


@dataclass(frozen=True)
class HWP(OpticalElement):
    theta: float

    def lower(self, space):
        return _jones(space, _rotated(np.diag([1.0, -1.0]), self.theta), f"HWP({self.theta:g})")

    def adjoint(self):
        return self


@dataclass(frozen=True)
class QWP(OpticalElement):
    theta: float

    def lower(self, space):
        return _jones(space, _rotated(np.diag([1.0, 1j]), self.theta), f"QWP({self.theta:g})")


@dataclass(frozen=True)
class DovePrism(OpticalElement):
    gamma: float

    def lower(self, space):
        sign = {Pol.H: 1, Pol.V: -1}
        phases = [np.exp(2j * lab.oam * self.gamma * sign[lab.pol]) for lab in space.labels]
        return _diagonal(space, phases, f"Dove({self.gamma:g})")

    def adjoint(self):
        return DovePrism(-self.gamma, transmittance=self.transmittance)


@dataclass(frozen=True)
class SagnacPSI(OpticalElement):
    """Polarizing Sagnac loop with a Dove prism, as a single-path operator.

    H and V counter-propagate through the prism, so each picks up the opposite
    image-rotation phase. Assumes an even number of reflections in the loop.
    """

    gamma: float

    def lower(self, space):
        op = DovePrism(self.gamma).lower(space)
        return ModeOperator(space, op.matrix, name=f"PSI({self.gamma:g})")

    def adjoint(self):
        return SagnacPSI(-self.gamma, transmittance=self.transmittance)


@dataclass(frozen=True)
class PathDovePrism(OpticalElement):
    """Dove prism traversed in opposite directions on different paths.

    Polarization-independent; the phase sign is set by the propagation
    direction, ``-1`` on ``counter_paths``.
    """

    gamma: float
    counter_paths: tuple[int, ...] = (1,)

    def lower(self, space):
        phases = [np.exp(2j * lab.oam * self.gamma * (-1 if lab.path in self.counter_paths else 1))
                  for lab in space.labels]
        return _diagonal(space, phases, f"PathDove({self.gamma:g})")

    def adjoint(self):
        return PathDovePrism(-self.gamma, self.counter_paths, transmittance=self.transmittance)


@dataclass(frozen=True)
class QPlate(OpticalElement):
    q: float
    delta: float

    def __post_init__(self):
        super().__post_init__()
        if abs(2 * self.q - round(2 * self.q)) > 1e-12:
            raise ValueError(f"q-plate charge {self.q} is not a half-integer")
        if not math.isfinite(self.delta):
            raise ValueError("q-plate retardation must be finite")

    @property
    def qplate_charge(self):
        return self.q

    def lower(self, space):
        shift = round(2 * self.q)
        n = space.dim
        L, R = POL_KETS["L"], POL_KETS["R"]
        C = np.zeros((n, n), dtype=complex)
        G = np.zeros((n, n), dtype=complex)
        s2 = qplate_efficiency(self.delta)

        def embed(ket, l, p):
            v = np.zeros(n, dtype=complex)
            v[space.index(ModeLabel(Pol.H, l, p))] = ket[0]
            v[space.index(ModeLabel(Pol.V, l, p))] = ket[1]
            return v

        for p in range(space.paths):
            for l in range(-space.lmax, space.lmax + 1):
                for src, dst, dl in ((L, R, shift), (R, L, -shift)):
                    bra = embed(src, l, p)
                    if abs(l + dl) <= space.lmax:
                        C += np.outer(embed(dst, l + dl, p), bra.conj())
                    else:
                        G += s2 * np.outer(bra, bra.conj())
        M = math.cos(self.delta / 2) * np.eye(n) + 1j * math.sin(self.delta / 2) * C
        return ModeOperator(space, M, G if np.any(G) else None,
                            name=f"QP(q={self.q:g}, delta={self.delta:g})")

    def adjoint(self):
        return QPlate(self.q, -self.delta, transmittance=self.transmittance)


@dataclass(frozen=True)
class PBS(OpticalElement):
    """Polarizing beam splitter with explicit path wiring.

    ``transmit[p]`` / ``reflect[p]`` give the output path for H / V entering on
    path ``p``. Defaults: H keeps its path, V swaps paths 0 and 1.
    """

    transmit: tuple[int, ...] | None = None
    reflect: tuple[int, ...] | None = None
    phase: complex = 1j

    def _wiring(self, paths: int):
        if paths < 2:
            raise TopologyError("PBS needs at least two paths")
        t = tuple(range(paths)) if self.transmit is None else tuple(self.transmit)
        if self.reflect is None:
            r = (1, 0) + tuple(range(2, paths))
        else:
            r = tuple(self.reflect)
        for name, w in (("transmit", t), ("reflect", r)):
            if sorted(w) != list(range(paths)):
                raise TopologyError(f"PBS {name} wiring {w} is not a bijection on {paths} paths")
        return t, r

    def lower(self, space):
        t, r = self._wiring(space.paths)
        M = np.zeros((space.dim, space.dim), dtype=complex)
        for j, lab in enumerate(space.labels):
            if lab.pol == Pol.H:
                M[space.index(lab._replace(path=t[lab.path])), j] = 1
            else:
                M[space.index(lab._replace(path=r[lab.path])), j] = self.phase
        return ModeOperator(space, M, name="PBS")


@dataclass(frozen=True)
class Mirror(OpticalElement):
    def lower(self, space):
        M = np.zeros((space.dim, space.dim), dtype=complex)
        for j, lab in enumerate(space.labels):
            M[space.index(lab._replace(oam=-lab.oam)), j] = 1
        return ModeOperator(space, M, name="Mirror")

    def adjoint(self):
        return self


@dataclass(frozen=True)
class PhaseShift(OpticalElement):
    """Phase ``e^{i phi}`` on every mode matching the (optional) filter."""

    phi: float
    pol: str | None = None
    oam: int | None = None
    path: int | None = None

    def lower(self, space):
        if self.oam is not None and abs(self.oam) > space.lmax:
            raise BoundsError(f"phase filter oam={self.oam} outside lmax={space.lmax}")
        if self.path is not None and not 0 <= self.path < space.paths:
            raise BoundsError(f"phase filter path={self.path} outside {space.paths} paths")
        phases = np.ones(space.dim, dtype=complex)
        phases[space.indices(pol=self.pol, oam=self.oam, path=self.path)] = np.exp(1j * self.phi)
        return _diagonal(space, phases, f"Phase({self.phi:g})")

    def adjoint(self):
        return PhaseShift(-self.phi, self.pol, self.oam, self.path, transmittance=self.transmittance)


@dataclass(frozen=True)
class Attenuator(OpticalElement):
    eta: float

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.eta <= 1.0:
            raise RangeError(f"attenuator transmittance {self.eta} outside [0, 1]")

    @property
    def unitary(self):
        return False

    def lower(self, space):
        return ModeOperator(space, math.sqrt(self.eta) * np.eye(space.dim, dtype=complex),
                            unitary=False, name=f"Att({self.eta:g})")

    def adjoint(self):
        raise NonInvertibleError("attenuators are not invertible")


@dataclass(frozen=True)
class Dagger(OpticalElement):
    """Adjoint of a leak-free element (the element traversed backwards)."""

    element: OpticalElement

    def lower(self, space):
        return self.element.lower(space).adjoint()

    def adjoint(self):
        return self.element


# -- operation-level constructors -------------------------------------------

def hwp(theta: float, space: Space) -> ModeOperator:
    return HWP(theta).lower(space)


def qwp(theta: float, space: Space) -> ModeOperator:
    return QWP(theta).lower(space)


def dove_prism(gamma: float, space: Space) -> ModeOperator:
    return DovePrism(gamma).lower(space)


def qplate(q: float, delta: float, space: Space) -> ModeOperator:
    return QPlate(q, delta).lower(space)


def pbs(space: Space, transmit=None, reflect=None) -> ModeOperator:
    return PBS(transmit, reflect).lower(space)


def sagnac_psi(gamma: float, space: Space) -> ModeOperator:
    return SagnacPSI(gamma).lower(space)


def mirror(space: Space) -> ModeOperator:
    return Mirror().lower(space)


def attenuator(eta: float, space: Space) -> ModeOperator:
    return Attenuator(eta).lower(space)


def qplate_efficiency(delta: float) -> float:
    """Fraction of light converted by a q-plate of retardation ``delta``.

    ``sin^2(delta/2)``, exact at multiples of pi/2 where float sin is not.
    """
    quarters = 2 * delta / math.pi
    if quarters == round(quarters):
        return (0.0, 0.5, 1.0, 0.5)[int(quarters) % 4]
    return math.sin(delta / 2) ** 2


# -- electrical tuning --------------------------------------------------------

@dataclass(frozen=True)
class TuningCurve:
    samples: tuple[tuple[float, float], ...]
    threshold_volts: float

    def __post_init__(self):
        samples = tuple((float(v), float(e)) for v, e in self.samples)
        if not samples:
            raise ValueError("tuning curve needs at least one sample")
        volts = [v for v, _ in samples]
        if any(b <= a for a, b in zip(volts, volts[1:])):
            raise ValueError("tuning curve voltages must be strictly increasing")
        if any(not 0.0 <= e <= 1.0 for _, e in samples):
            raise ValueError("tuning curve efficiencies must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)

    @property
    def voltages(self) -> np.ndarray:
        return np.array([v for v, _ in self.samples])

    @property
    def efficiencies(self) -> np.ndarray:
        return np.array([e for _, e in self.samples])

    def retardations(self) -> np.ndarray:
        """Unwrapped retardation at each sample.

        ``sin^2(delta/2)`` rises on ``[0, pi]`` and falls on ``[pi, 2pi]``;
        every turning point of the efficiency samples advances the branch, so
        the result is non-decreasing for any valid table.
        """
        eff = self.efficiencies
        u = 2 * np.arcsin(np.sqrt(eff))
        steps = np.sign(np.diff(eff))
        moving = steps[steps != 0]
        # a table that starts out falling begins on the descending branch
        branch = 1 if moving.size and moving[0] < 0 else 0
        direction = moving[0] if moving.size else 0
        out = np.empty_like(u)
        for i in range(len(eff)):
            if i > 0 and steps[i - 1] != 0:
                if steps[i - 1] != direction:
                    branch += 1
                direction = steps[i - 1]
            out[i] = branch * math.pi + (u[i] if branch % 2 == 0 else math.pi - u[i])
        return out

    @classmethod
    def from_json(cls, path) -> "TuningCurve":
        data = json.loads(Path(path).read_text())
        return cls(tuple(tuple(s) for s in data["samples"]), float(data["threshold_volts"]))

    def to_json(self) -> str:
        return json.dumps({"threshold_volts": self.threshold_volts,
                           "samples": [list(s) for s in self.samples]})


def voltage_to_delta(curve: TuningCurve, volts: float) -> float:
    """Retardation at ``volts`` by monotone interpolation of the table."""
    v = curve.voltages
    if not v[0] <= volts <= v[-1]:
        raise RangeError(f"{volts} V outside the calibrated range [{v[0]}, {v[-1]}] V")
    deltas = curve.retardations()
    if volts < curve.threshold_volts:
        return float(deltas[0])
    return float(np.interp(volts, v, deltas))


def bundled_tuning_curve() -> TuningCurve:
    """Bundled QP1-shaped calibration: threshold 2.2 V, peak near 4.5 V."""
    from importlib.resources import files

    return TuningCurve.from_json(files("qtransfer") / "data" / "qp1_tuning.json")

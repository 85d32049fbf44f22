"""Circuits, transmittance ledger and the transferrer presets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .elements import (
    HWP,
    Attenuator,
    OpticalElement,
    PhaseShift,
    QPlate,
    SagnacPSI,
    qplate_efficiency,
)
from .errors import (
    BoundsError,
    ConfigurationError,
    NonInvertibleError,
    NormalizationError,
)
from .hilbert import (
    POL_KETS,
    ModeLabel,
    ModeOperator,
    PhotonState,
    Pol,
    Space,
    apply,
    as_pol,
    default_lmax,
    product_state,
)

FLIP = {"L": "R", "R": "L"}


@dataclass(frozen=True)
class Postselection:
    """Keep only amplitude matching the filter (a PBS port, a fiber mode...)."""

    pol: str | None = None
    path: int | None = None
    oam: int | None = None

    def apply(self, s: PhotonState) -> PhotonState:
        p = None if self.pol is None else as_pol(self.pol)
        kept = {lab: a for lab, a in s.amplitudes.items()
                if (p is None or lab.pol == p)
                and (self.path is None or lab.path == self.path)
                and (self.oam is None or lab.oam == self.oam)}
        return PhotonState(s.space, kept)


@dataclass(frozen=True)
class TransferMap:
    """Achieved mapping ``|H>|l1> -> |pol1>|l_final>``, ``|H>|l2> -> |pol2>|l_final>``."""

    l1: int
    l2: int
    pol1: str
    pol2: str
    l_final: int

    def expected(self, alpha: complex, beta: complex, space: Space) -> PhotonState:
        jones = alpha * POL_KETS[self.pol1] + beta * POL_KETS[self.pol2]
        return product_state(jones, {self.l_final: 1}, space, normalize=True)


@dataclass(frozen=True)
class Circuit:
    space: Space
    elements: tuple[OpticalElement, ...] = ()
    postselection: Postselection | None = None
    input_lmax: int | None = None
    transfer_map: TransferMap | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def ledger(self) -> float:
        """Product of all element transmittances, attenuators included."""
        factors = [e.transmittance for e in self.elements]
        factors += [e.eta for e in self.elements if isinstance(e, Attenuator)]
        return math.prod(factors)

    @property
    def safe_input_lmax(self) -> int:
        if self.input_lmax is not None:
            return self.input_lmax
        return self.space.lmax - default_lmax((e.qplate_charge for e in self.elements), 0)

    def with_elements(self, elements: Sequence[OpticalElement]) -> "Circuit":
        return replace(self, elements=tuple(elements))


@dataclass(frozen=True)
class TransferResult:
    output: PhotonState
    success_probability: float
    survival_probability: float


def compose(c: Circuit, lossless: bool = False) -> ModeOperator:
    """Product of lowered elements in propagation order.

    Attenuators enter as ``sqrt(eta)`` unless ``lossless``. Raises
    :class:`BoundsError` when q-plates would push any input with
    ``|l| <= safe_input_lmax`` out of the space.
    """
    op = ModeOperator.identity(c.space)
    for e in c.elements:
        if lossless and isinstance(e, Attenuator):
            continue
        op = e.lower(c.space) @ op
    bound = c.safe_input_lmax
    if bound < 0:
        raise BoundsError(f"lmax={c.space.lmax} leaves no room for the circuit's q-plates")
    leaky = op.leaky_indices()
    bad = [c.space.labels[i] for i in leaky if abs(c.space.labels[i].oam) <= bound]
    if bad:
        raise BoundsError(f"q-plates map input mode {bad[0]} beyond lmax={c.space.lmax}")
    return op


def dove_angle(l1: int, l2: int) -> float:
    """Dove-prism angle that makes the two OAM arms leave the loop orthogonally polarized."""
    if l1 == l2:
        raise ConfigurationError("degenerate OAM subspace: l1 == l2")
    return math.pi / (4 * (l1 - l2))


def _snap_phase(phi: float) -> float:
    """Wrap to (-pi, pi] and snap onto a small rational multiple of pi if within 1e-12."""
    phi = math.remainder(phi, 2 * math.pi)
    if phi <= -math.pi:
        phi += 2 * math.pi
    frac = Fraction(phi / math.pi).limit_denominator(256)
    snapped = float(frac) * math.pi
    return snapped if abs(snapped - phi) < 1e-12 else phi


def deterministic_transferrer(l1: int = 2, l2: int = -2, q: float = 1, *,
                              space: Space | None = None,
                              dove_offset: float = 0.0,
                              qplate_delta: float = math.pi) -> Circuit:
    """HWP(pi/8) -> Sagnac/Dove loop -> compensation C -> q-plate.

    The q-plate must bring both arms to one OAM value: either
    ``l1 - 2q == l2 + 2q`` (arm l1 leaves the loop R-polarized) or
    ``l1 + 2q == l2 - 2q`` (arm l1 leaves L-polarized). C is computed for the
    nominal Dove angle; ``dove_offset`` and ``qplate_delta`` perturb the built
    circuit without touching C.
    """
    gamma = dove_angle(l1, l2)
    shift = 2 * q
    if math.isclose(l1 - shift, l2 + shift):
        pol1, pol2, l_final = "R", "L", l1 - shift
    elif math.isclose(l1 + shift, l2 - shift):
        pol1, pol2, l_final = "L", "R", l1 + shift
    else:
        raise ConfigurationError(
            f"q={q} cannot bring l1={l1} and l2={l2} to a common OAM (needs 4q = +-(l1 - l2))")
    l_final = int(round(l_final))
    input_lmax = max(abs(l1), abs(l2))
    if space is None:
        space = Space(default_lmax([q], input_lmax))

    core = (HWP(math.pi / 8), SagnacPSI(gamma))
    probe = Circuit(space, core, input_lmax=input_lmax)
    op = compose(probe)
    arms = []
    for l in (l1, l2):
        out = apply(op, product_state("H", {l: 1}, space))
        arms.append((out.amplitude(ModeLabel(Pol.H, l)), out.amplitude(ModeLabel(Pol.V, l))))
    (h1, v1), (h2, v2) = arms
    # V/H ratio of the circular target: L = (1, i)/sqrt2, R = (1, -i)/sqrt2
    target = {"L": 1j, "R": -1j}
    phi_v = np.angle(target[pol1] * h1 / v1)
    if abs(np.exp(1j * phi_v) * v2 / h2 - target[pol2]) > 1e-9:
        raise ConfigurationError("loop outputs are not orthogonal; Dove angle condition violated")
    phi_rel = np.angle(h2) - np.angle(h1)

    compensation = []
    if abs(math.remainder(phi_v, 2 * math.pi)) > 1e-12:
        compensation.append(PhaseShift(_snap_phase(phi_v), pol="V"))
    compensation.append(PhaseShift(_snap_phase(phi_rel), oam=l1))
    elements = (HWP(math.pi / 8), SagnacPSI(gamma + dove_offset), *compensation,
                QPlate(q, qplate_delta))
    return Circuit(space, elements, input_lmax=input_lmax,
                   transfer_map=TransferMap(l1, l2, FLIP[pol1], FLIP[pol2], l_final),
                   name=f"det-transferrer(l1={l1}, l2={l2}, q={q:g})")


def probabilistic_transferrer_pi_to_oam(q: float = 1, *, space: Space | None = None,
                                        qplate_delta: float = math.pi) -> Circuit:
    """Q-plate followed by a PBS whose transmitted (H) port is kept.

    Maps ``(a|L> + b|R>)|0>`` to ``|H>(a|+2q> + b|-2q>)`` with probability 1/2.
    """
    if space is None:
        space = Space(default_lmax([q], 0))
    return Circuit(space, (QPlate(q, qplate_delta),), postselection=Postselection(pol="H"),
                   input_lmax=0, name=f"prob-transferrer(q={q:g})")


def probabilistic_success(alpha: complex, beta: complex, delta: float = math.pi) -> float:
    """Closed-form success of the q-plate + H-port transferrer on ``(a|L> + b|R>)|0>``.

    The converted part always splits evenly at the PBS; the unconverted part at
    ``l = 0`` passes with ``|a + b|^2 / 2``.
    """
    eta = qplate_efficiency(delta)
    return (eta + (1 - eta) * abs(alpha + beta) ** 2) / 2


def inverse(c: Circuit) -> Circuit:
    """Same components traversed in the opposite direction."""
    if c.postselection is not None:
        raise NonInvertibleError("postselecting circuits are not invertible")
    if any(isinstance(e, Attenuator) for e in c.elements):
        raise NonInvertibleError("circuits with attenuators are not invertible")
    return Circuit(c.space, tuple(e.adjoint() for e in reversed(c.elements)),
                   input_lmax=c.input_lmax, name=f"inverse({c.name})" if c.name else "")


MUB_NAMES = ("+", "-", "h", "v", "a", "d")

_r2 = 1 / math.sqrt(2)
MUB_COEFFS: dict[str, tuple[complex, complex]] = {
    "+": (1, 0),
    "-": (0, 1),
    "h": (_r2, _r2),
    "v": (-1j * _r2, 1j * _r2),
    "a": ((1 - 1j) / 2, (1 + 1j) / 2),
    "d": ((1 + 1j) / 2, (1 - 1j) / 2),
}


def mub_label(name: str, l: int) -> str:
    return {"+": f"+{l}", "-": f"-{l}"}.get(name, name)


def mub_states(l: int, space: Space | None = None, pol: str = "H") -> dict[str, PhotonState]:
    """The six states of the three mutually unbiased bases of ``{|+l>, |-l>}``.

    Keys are ``"+l"``, ``"-l"``, ``"h"``, ``"v"``, ``"a"``, ``"d"``.
    """
    if l <= 0:
        raise ValueError("l must be a positive integer")
    space = space or Space(l)
    if l > space.lmax:
        raise BoundsError(f"l={l} exceeds lmax={space.lmax}")
    return {mub_label(n, l): product_state(pol, {l: a, -l: b}, space)
            for n, (a, b) in MUB_COEFFS.items()}


def mub_coefficients(label: str) -> tuple[complex, complex]:
    """(alpha, beta) of a MUB label such as ``"+2"``, ``"-2"``, ``"h"``."""
    if label in MUB_COEFFS:
        return MUB_COEFFS[label]
    if label[:1] in "+-" and label[1:].isdigit():
        return MUB_COEFFS[label[0]]
    raise ValueError(f"unknown MUB label {label!r}")


def run_transfer(c: Circuit, state: PhotonState) -> TransferResult:
    """Run a normalized input through ``c``.

    Success counts only postselection; the ledger multiplies in for survival.
    """
    if abs(state.norm2 - 1) > 1e-9:
        raise NormalizationError(f"input must be normalized, got norm2={state.norm2}")
    out = apply(compose(c, lossless=True), state)
    if c.postselection is not None:
        out = c.postselection.apply(out)
    success = out.norm2
    return TransferResult(out, success, success * c.ledger)

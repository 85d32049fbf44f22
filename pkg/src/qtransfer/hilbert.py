"""State vectors and mode operators over polarization x OAM x path.

Basis kets are labelled ``(pol, oam, path)`` with ``pol`` in {H, V}. Derived
polarization kets use

    |L> = (|H> + i|V>)/sqrt2      |R> = (|H> - i|V>)/sqrt2
    |A> = (|H> + |V>)/sqrt2       |D> = (|H> - |V>)/sqrt2

States are sparse maps from labels to amplitudes. Operators are small dense
matrices over the truncated space together with a *leak* Gram matrix that
records amplitude an element would push beyond ``|l| > lmax``. Keeping the
leak lets q-plates stay exactly isometric on the truncated space
(``M^H M + G = I``) while any attempt to actually populate an out-of-range
mode raises :class:`BoundsError`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    BoundsError,
    EmptyStateError,
    NormalizationError,
    SpaceMismatchError,
)

NORM_EPS = 1e-12
LEAK_TOL = 1e-12

SQRT1_2 = 1 / np.sqrt(2)


class Pol(enum.IntEnum):
    H = 0
    V = 1


POL_KETS: Mapping[str, np.ndarray] = MappingProxyType({
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "A": np.array([1, 1], dtype=complex) * SQRT1_2,
    "D": np.array([1, -1], dtype=complex) * SQRT1_2,
    "L": np.array([1, 1j], dtype=complex) * SQRT1_2,
    "R": np.array([1, -1j], dtype=complex) * SQRT1_2,
})


def pol_ket(name: str | Sequence[complex]) -> np.ndarray:
    """Jones vector for a named polarization, or pass an explicit 2-vector through."""
    if isinstance(name, str):
        try:
            return POL_KETS[name].copy()
        except KeyError:
            raise ValueError(f"unknown polarization {name!r}") from None
    vec = np.asarray(name, dtype=complex)
    if vec.shape != (2,):
        raise ValueError("polarization vector must have two components")
    return vec


def as_pol(p) -> Pol:
    if isinstance(p, Pol):
        return p
    if isinstance(p, str):
        return Pol[p]
    return Pol(int(p))


class ModeLabel(NamedTuple):
    pol: Pol
    oam: int
    path: int = 0


def mode(pol, oam: int, path: int = 0) -> ModeLabel:
    return ModeLabel(as_pol(pol), int(oam), int(path))


@dataclass(frozen=True)
class Space:
    """Truncated mode space: ``|oam| <= lmax`` and ``0 <= path < paths``."""

    lmax: int
    paths: int = 1

    def __post_init__(self):
        if self.lmax < 0 or self.paths < 1:
            raise ValueError(f"invalid space bounds lmax={self.lmax} paths={self.paths}")

    @property
    def dim(self) -> int:
        return 2 * (2 * self.lmax + 1) * self.paths

    @cached_property
    def labels(self) -> tuple[ModeLabel, ...]:
        return tuple(
            ModeLabel(pol, l, p)
            for p in range(self.paths)
            for l in range(-self.lmax, self.lmax + 1)
            for pol in Pol
        )

    def contains(self, label: ModeLabel) -> bool:
        return abs(label.oam) <= self.lmax and 0 <= label.path < self.paths

    def index(self, label: ModeLabel) -> int:
        if not self.contains(label):
            raise BoundsError(f"mode {label} outside space lmax={self.lmax}, paths={self.paths}")
        return (label.path * (2 * self.lmax + 1) + label.oam + self.lmax) * 2 + int(label.pol)

    def indices(self, *, pol=None, oam=None, path=None) -> list[int]:
        """Indices of all labels matching the given (optional) filter values."""
        p = None if pol is None else as_pol(pol)
        return [
            i for i, lab in enumerate(self.labels)
            if (p is None or lab.pol == p)
            and (oam is None or lab.oam == oam)
            and (path is None or lab.path == path)
        ]


def default_lmax(qplate_charges: Iterable[float], input_lmax: int) -> int:
    """Smallest bound such that no q-plate can map an input out of the space."""
    return int(input_lmax + sum(round(2 * abs(q)) for q in qplate_charges))


@dataclass(frozen=True)
class PhotonState:
    """Sub-normalized single-photon state; squared norm is the survival probability."""

    space: Space
    amplitudes: Mapping[ModeLabel, complex]

    def __post_init__(self):
        for lab in self.amplitudes:
            if not self.space.contains(lab):
                raise BoundsError(f"mode {lab} outside space lmax={self.space.lmax}")
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(self.amplitudes)))
        if self.norm2 > 1 + NORM_EPS:
            raise NormalizationError(f"squared norm {self.norm2} exceeds 1")

    @property
    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, label: ModeLabel) -> complex:
        return self.amplitudes.get(label, 0j)

    def vector(self) -> np.ndarray:
        v = np.zeros(self.space.dim, dtype=complex)
        for lab, a in self.amplitudes.items():
            v[self.space.index(lab)] = a
        return v

    @classmethod
    def from_vector(cls, space: Space, vec: np.ndarray, drop: float = 1e-15) -> "PhotonState":
        amps = {lab: complex(a) for lab, a in zip(space.labels, vec) if abs(a) > drop}
        return cls(space, amps)

    def normalized(self) -> "PhotonState":
        n = np.sqrt(self.norm2)
        if n == 0:
            raise EmptyStateError("cannot normalize the zero state")
        return PhotonState(self.space, {k: v / n for k, v in self.amplitudes.items()})

    def in_space(self, space: Space) -> "PhotonState":
        """Re-embed into another space; fails on amplitudes that do not fit."""
        return PhotonState(space, self.amplitudes)

    def oam_values(self) -> set[int]:
        return {lab.oam for lab in self.amplitudes}


def make_state(entries, space: Space, normalize: bool = False) -> PhotonState:
    """Build a state from ``(label, amplitude)`` pairs.

    Labels may be :class:`ModeLabel` or plain ``(pol, oam[, path])`` tuples with
    ``pol`` given as ``"H"``/``"V"``. Amplitudes for repeated labels add.
    """
    entries = list(entries.items() if isinstance(entries, Mapping) else entries)
    if not entries:
        raise EmptyStateError("no entries given")
    amps: dict[ModeLabel, complex] = {}
    for lab, a in entries:
        lab = mode(*lab)
        if not space.contains(lab):
            raise BoundsError(f"mode {lab} outside space lmax={space.lmax}, paths={space.paths}")
        amps[lab] = amps.get(lab, 0j) + complex(a)
    amps = {k: v for k, v in amps.items() if v != 0}
    if not amps:
        raise EmptyStateError("all amplitudes are zero")
    state = PhotonState(space, amps) if not normalize else PhotonState(space, amps).normalized()
    return state


def product_state(pol, oam_amplitudes: Mapping[int, complex], space: Space,
                  path: int = 0, normalize: bool = False) -> PhotonState:
    """``|pol> (sum_l c_l |l>)`` on a single path."""
    jones = pol_ket(pol)
    entries = [((p, l, path), c * jones[int(p)])
               for l, c in oam_amplitudes.items() for p in Pol]
    return make_state(entries, space, normalize=normalize)


def _check_same(a: Space, b: Space):
    if a != b:
        raise SpaceMismatchError(f"space mismatch: {a} vs {b}")


def inner_product(a: PhotonState, b: PhotonState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_same(a.space, b.space)
    return complex(sum(np.conj(amp) * b.amplitude(lab) for lab, amp in a.amplitudes.items()))


def state_fidelity(a: PhotonState, b: PhotonState) -> float:
    for s in (a, b):
        if abs(s.norm2 - 1) > 1e-9:
            raise NormalizationError(f"state fidelity needs normalized states, got norm2={s.norm2}")
    return min(1.0, abs(inner_product(a, b)) ** 2)


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Matrix ``M`` on the truncated space plus leak Gram matrix ``G``.

    ``G`` is Hermitian PSD; an input ``v`` sends ``v^H G v`` of probability out
    of the space. Composition ``A @ B`` means "B first, then A".
    """

    space: Space
    matrix: np.ndarray
    leak: np.ndarray | None = None
    unitary: bool = True
    name: str = field(default="")

    def __post_init__(self):
        n = self.space.dim
        if self.matrix.shape != (n, n):
            raise SpaceMismatchError(f"matrix shape {self.matrix.shape} does not match dim {n}")
        if self.leak is not None and self.leak.shape != (n, n):
            raise SpaceMismatchError("leak matrix shape mismatch")

    @classmethod
    def identity(cls, space: Space) -> "ModeOperator":
        return cls(space, np.eye(space.dim, dtype=complex), name="identity")

    @property
    def leak_gram(self) -> np.ndarray:
        if self.leak is None:
            return np.zeros((self.space.dim,) * 2, dtype=complex)
        return self.leak

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        _check_same(self.space, other.space)
        M = self.matrix @ other.matrix
        if self.leak is None and other.leak is None:
            G = None
        else:
            G = other.matrix.conj().T @ self.leak_gram @ other.matrix + other.leak_gram
        return ModeOperator(self.space, M, G, self.unitary and other.unitary)

    def adjoint(self) -> "ModeOperator":
        if self.leak is not None and np.abs(self.leak).max() > LEAK_TOL:
            raise BoundsError("adjoint of a truncated (leaking) operator is not defined; "
                              "use the element-level adjoint")
        return ModeOperator(self.space, self.matrix.conj().T, None, self.unitary,
                            name=f"{self.name}^dagger" if self.name else "")

    def leaky_indices(self, tol: float = LEAK_TOL) -> list[int]:
        return [i for i, g in enumerate(np.real(np.diag(self.leak_gram))) if g > tol]


def apply(op: ModeOperator, s: PhotonState) -> PhotonState:
    _check_same(op.space, s.space)
    v = s.vector()
    if op.leak is not None:
        lost = float(np.real(np.vdot(v, op.leak @ v)))
        if lost > LEAK_TOL:
            raise BoundsError(f"operator maps probability {lost:.3g} beyond |l| > {op.space.lmax}")
    return PhotonState.from_vector(op.space, op.matrix @ v)


def check_unitary(op: ModeOperator, tol: float = 1e-10) -> bool:
    """True iff ``max |M^H M + G - I| < tol``, i.e. unitary once leaks are counted."""
    M = op.matrix
    if M.shape[0] != M.shape[1]:
        return False
    gram = M.conj().T @ M + op.leak_gram
    return bool(np.abs(gram - np.eye(M.shape[0])).max() < tol)


def operators_close(a: ModeOperator, b: ModeOperator, tol: float = 1e-10, *,
                    columns: Sequence[int] | None = None, up_to_phase: bool = False) -> bool:
    """Compare two operators column-wise, optionally only on ``columns``."""
    _check_same(a.space, b.space)
    cols = list(range(a.space.dim)) if columns is None else list(columns)
    A, B = a.matrix[:, cols], b.matrix[:, cols]
    if up_to_phase:
        k = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        if abs(B[k]) < tol or abs(A[k]) < tol:
            return bool(np.abs(A - B).max() < tol)
        A = A * (B[k] / A[k]) / abs(B[k] / A[k])
    return bool(np.abs(A - B).max() < tol)


def safe_columns(op: ModeOperator, tol: float = LEAK_TOL) -> list[int]:
    """Basis kets the operator maps without any leak."""
    leaky = set(op.leaky_indices(tol))
    return [i for i in range(op.space.dim) if i not in leaky]

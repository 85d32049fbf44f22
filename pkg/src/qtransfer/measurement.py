"""Polarization analysis, photon counting, fidelity and single-qubit tomography.

Bloch/Stokes axes: ``x = H - V``, ``y = A - D``, ``z = R - L``, so |R> sits at
``(0, 0, +1)``. Density matrices are written in the H/V basis.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import NormalizationError, QTransferError
from .hilbert import POL_KETS, ModeLabel, PhotonState, Pol, pol_ket

BASES: dict[str, tuple[str, str]] = {"RL": ("R", "L"), "HV": ("H", "V"), "AD": ("A", "D")}
OAM_BASES = ("+-", "hv", "ad")

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Stokes axis -> Pauli operator in the H/V basis
STOKES_OPS = {"HV": SIGMA_Z, "AD": SIGMA_X, "RL": -SIGMA_Y}


class MissingBasisError(QTransferError):
    pass


class ZeroCountsError(QTransferError):
    pass


@dataclass(frozen=True)
class CountTable:
    """Coincidence counts for the two outcomes of one analysis basis.

    ``plus`` belongs to the first letter of the label (R of "RL"). Counts may be
    expected values (floats) when modelling the infinite-statistics limit.
    """

    basis: str
    plus: float
    minus: float

    def __post_init__(self):
        if self.basis not in BASES and self.basis not in OAM_BASES:
            raise ValueError(f"unknown basis label {self.basis!r}")
        if self.plus < 0 or self.minus < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> float:
        return self.plus + self.minus


@dataclass(frozen=True)
class DensityMatrix2:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("expected a 2x2 matrix")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-12:
            raise ValueError("density matrix trace is not 1")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_bloch(cls, r) -> "DensityMatrix2":
        x, y, z = r
        m = (np.eye(2) + x * STOKES_OPS["HV"] + y * STOKES_OPS["AD"] + z * STOKES_OPS["RL"]) / 2
        return cls(m)

    @classmethod
    def pure(cls, ket) -> "DensityMatrix2":
        v = pol_ket(ket)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @property
    def bloch(self) -> np.ndarray:
        return np.array([np.real(np.trace(self.matrix @ STOKES_OPS[b])) for b in ("HV", "AD", "RL")])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def fidelity(self, ket) -> float:
        """<psi|rho|psi> against a pure polarization target."""
        v = pol_ket(ket)
        v = v / np.linalg.norm(v)
        return float(np.real(v.conj() @ self.matrix @ v))


@dataclass(frozen=True)
class EfficiencyBudget:
    components: Mapping[str, float]

    def __post_init__(self):
        for name, eta in self.components.items():
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"component {name!r} transmittance {eta} outside [0, 1]")
        object.__setattr__(self, "components", dict(self.components))


REFERENCE_BUDGET = EfficiencyBudget({"optics": 0.648, "fiber": 0.5})


def polarization_qubit(s: PhotonState, oam: int, path: int = 0) -> np.ndarray:
    """Unnormalized Jones vector of the component at (oam, path)."""
    return np.array([s.amplitude(ModeLabel(Pol.H, oam, path)),
                     s.amplitude(ModeLabel(Pol.V, oam, path))])


def project_probability(s: PhotonState, basis: str, outcome: str,
                        oam: int | None = None, path: int | None = None) -> float:
    """``|<outcome|s>|^2`` on the polarization, summed over the selected modes.

    With ``oam``/``path`` left as None every spatial mode contributes (bucket
    detector); fixing them models a single-mode analysis port.
    """
    if abs(s.norm2 - 1) > 1e-9:
        raise NormalizationError(f"state must be normalized, got norm2={s.norm2}")
    if outcome not in BASES[basis]:
        raise ValueError(f"outcome {outcome!r} is not in basis {basis}")
    bra = POL_KETS[outcome].conj()
    modes = {(lab.oam, lab.path) for lab in s.amplitudes}
    total = 0.0
    for l, p in modes:
        if (oam is None or l == oam) and (path is None or p == path):
            total += abs(bra @ polarization_qubit(s, l, p)) ** 2
    return float(total)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent generator for trial ``trial`` of a seeded run."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("sampling needs an explicit seed or Generator")
    return np.random.default_rng(seed)


def sample_counts(p_plus: float, n_pairs: float, efficiency: float = 1.0, seed=None, *,
                  basis: str = "HV", background: float = 0.0) -> CountTable:
    """Two independent Poisson draws with means ``N eta p`` and ``N eta (1 - p)``.

    ``background`` is a flat mean count added to each detector.
    """
    if not 0.0 <= p_plus <= 1.0:
        raise ValueError(f"p_plus={p_plus} outside [0, 1]")
    if n_pairs <= 0:
        raise ValueError("expected pair count must be positive")
    rng = _rng(seed)
    mean = n_pairs * efficiency
    plus, minus = rng.poisson([mean * p_plus + background, mean * (1 - p_plus) + background])
    return CountTable(basis, int(plus), int(minus))


def fidelity_from_counts(t: CountTable) -> tuple[float, float]:
    """``F = C_max / (C_max + C_min)`` with Poissonian error ``sqrt(F(1-F)/N)``."""
    n = t.total
    if n <= 0:
        raise ZeroCountsError(f"no counts in basis {t.basis}")
    f = max(t.plus, t.minus) / n
    return f, math.sqrt(f * (1 - f) / n)


def linear_inversion(tables: Mapping[str, CountTable]) -> np.ndarray:
    """Raw Stokes-vector reconstruction, before any physical projection."""
    r = []
    for b in ("HV", "AD", "RL"):
        if b not in tables:
            raise MissingBasisError(f"no counts for basis {b}")
        t = tables[b]
        if t.total <= 0:
            raise ZeroCountsError(f"no counts in basis {b}")
        r.append((t.plus - t.minus) / t.total)
    x, y, z = r
    return (np.eye(2) + x * STOKES_OPS["HV"] + y * STOKES_OPS["AD"] + z * STOKES_OPS["RL"]) / 2


def physical_projection(rho) -> DensityMatrix2:
    """Nearest unit-trace PSD matrix in Frobenius norm.

    For a qubit this clips a Bloch vector longer than one back onto the sphere.
    """
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix2) else rho, dtype=complex)
    m = (m + m.conj().T) / 2
    r = np.array([np.real(np.trace(m @ STOKES_OPS[b])) for b in ("HV", "AD", "RL")])
    length = np.linalg.norm(r)
    if length > 1:
        r = r / length
    return DensityMatrix2.from_bloch(r)


def tomography(tables) -> DensityMatrix2:
    """Linear inversion over RL/HV/AD tables followed by physical projection."""
    if not isinstance(tables, Mapping):
        tables = {t.basis: t for t in tables}
    return physical_projection(linear_inversion(tables))


def expected_tables(jones, total: float = 1.0) -> dict[str, CountTable]:
    """Exact-probability (noise-free) tables for a polarization state."""
    v = pol_ket(jones)
    v = v / np.linalg.norm(v)
    out = {}
    for b, (plus, minus) in BASES.items():
        out[b] = CountTable(b, total * abs(POL_KETS[plus].conj() @ v) ** 2,
                            total * abs(POL_KETS[minus].conj() @ v) ** 2)
    return out


def sampled_tables(jones, n_pairs: float, seed, efficiency: float = 1.0,
                   background: float = 0.0) -> dict[str, CountTable]:
    """Poisson-sampled tables, one seeded draw per basis from a shared Generator."""
    rng = _rng(seed)
    exact = expected_tables(jones)
    return {b: sample_counts(t.plus, n_pairs, efficiency, rng, basis=b, background=background)
            for b, t in exact.items()}


def overall_efficiency(b: EfficiencyBudget) -> float:
    return math.prod(b.components.values())


def load_counts(path) -> dict[str, CountTable]:
    data = json.loads(Path(path).read_text())
    bases = data["bases"]
    tables = {}
    for b, counts in bases.items():
        if len(counts) != 2:
            raise ValueError(f"basis {b} needs exactly two counts")
        tables[b] = CountTable(b, counts[0], counts[1])
    return tables


def load_budget(path) -> EfficiencyBudget:
    data = json.loads(Path(path).read_text())
    return EfficiencyBudget({k: float(v) for k, v in data["components"].items()})

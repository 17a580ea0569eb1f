"""
Spin-chain models, symmetry-sector bases and sector-restricted operators.

Conventions
-----------
Sites are numbered 1..L. A computational basis state is an L-bit integer whose
most significant bit is site 1, so the bit-string written left to right is
read as a binary number (``|01>`` on two sites is the integer 1). Bit value 0
is spin up (Z = +1), bit value 1 is spin down (Z = -1). Pauli operators are
used unnormalised (eigenvalues +/-1), not spin-1/2 operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

GOLDEN_FIELD = (math.sqrt(5.0) - 1.0) / 2.0
PAULI_LETTERS = frozenset("IXYZ")


class SymmetryViolation(ValueError):
    """An operator maps part of a symmetry sector outside of it."""


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """``coefficient * P_1 (x) P_2 (x) ... (x) P_L`` with ``P_i`` in {I, X, Y, Z}."""

    coefficient: float
    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("PauliString needs at least one site")
        bad = set(self.letters) - PAULI_LETTERS
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")
        coeff = complex(self.coefficient)
        if coeff.imag != 0.0:
            raise ValueError("PauliString coefficients must be real")
        object.__setattr__(self, "coefficient", float(coeff.real))

    @property
    def sites(self) -> int:
        return len(self.letters)

    def masks(self) -> tuple[int, int, int]:
        """Return ``(flip_mask, sign_mask, n_y)`` over the bit encoding."""
        L = len(self.letters)
        flip = sign = 0
        n_y = 0
        for i, ch in enumerate(self.letters):
            bit = 1 << (L - 1 - i)
            if ch in "XY":
                flip |= bit
            if ch in "YZ":
                sign |= bit
            if ch == "Y":
                n_y += 1
        return flip, sign, n_y

    def apply(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Act on computational states: ``P|s> = amp(s) |target(s)>``."""
        states = np.asarray(states, dtype=np.int64)
        flip, sign, n_y = self.masks()
        parity = np.bitwise_count(states & sign) & 1
        amps = self.coefficient * (1.0 - 2.0 * parity)
        if n_y % 4:
            amps = amps * (1j ** (n_y % 4))
        return states ^ flip, amps

    def to_dense(self) -> np.ndarray:
        """Full ``2^L x 2^L`` matrix; only meant for small L."""
        n = 1 << self.sites
        states = np.arange(n, dtype=np.int64)
        targets, amps = self.apply(states)
        out = np.zeros((n, n), dtype=np.result_type(amps, float))
        out[targets, states] = amps
        return out


def pauli_string(L: int, ops: dict[int, str], coefficient: float = 1.0) -> PauliString:
    """Build a string from ``{site: letter}`` with 1-based sites."""
    letters = ["I"] * L
    for site, letter in ops.items():
        if not 1 <= site <= L:
            raise ValueError(f"site {site} outside 1..{L}")
        letters[site - 1] = letter
    return PauliString(coefficient, "".join(letters))


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def sample_disorder_fields(seed: int, realization_index: int, L: int,
                           halfwidth: float = 0.75) -> np.ndarray:
    """Uniform random fields on [-halfwidth, halfwidth] for one disorder realization.

    The generator is Philox keyed by ``(seed, realization_index)``, so each
    realization can be produced on its own, in any order, on any worker. Site
    ``i`` always receives the ``i``-th draw of its realization's stream.
    """
    if seed < 0 or realization_index < 0:
        raise ValueError("seed and realization_index must be non-negative")
    key = np.array([seed, realization_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.uniform(-halfwidth, halfwidth, size=L)


@dataclass(frozen=True)
class MixedFieldIsing:
    """``J sum Z_i Z_{i+1} + w sum X_i + h sum Z_i`` on an open chain."""

    J: float = 1.0
    w: float = 1.05
    h: float = GOLDEN_FIELD

    name = "ising"

    def terms(self, L: int) -> list[PauliString]:
        out = [pauli_string(L, {i: "Z", i + 1: "Z"}, self.J) for i in range(1, L)]
        out += [pauli_string(L, {i: "X"}, self.w) for i in range(1, L + 1)]
        out += [pauli_string(L, {i: "Z"}, self.h) for i in range(1, L + 1)]
        return out

    def params(self) -> dict:
        return {"J": self.J, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class RandomFieldXXZ:
    """``J sum (XX + YY) + J_z sum ZZ + sum h_i Z_i`` with ``h_i`` uniform on [-W, W]."""

    J: float = 1.0
    Jz: float = 1.05
    field_halfwidth: float = 0.75
    seed: int = 0
    realization: int = 0

    name = "xxz"

    def fields(self, L: int) -> np.ndarray:
        return sample_disorder_fields(self.seed, self.realization, L, self.field_halfwidth)

    def terms(self, L: int) -> list[PauliString]:
        out = []
        for i in range(1, L):
            out.append(pauli_string(L, {i: "X", i + 1: "X"}, self.J))
            out.append(pauli_string(L, {i: "Y", i + 1: "Y"}, self.J))
            out.append(pauli_string(L, {i: "Z", i + 1: "Z"}, self.Jz))
        for i, h in enumerate(self.fields(L), start=1):
            out.append(pauli_string(L, {i: "Z"}, float(h)))
        return out

    def params(self) -> dict:
        return {"J": self.J, "Jz": self.Jz, "field_halfwidth": self.field_halfwidth,
                "seed": self.seed, "realization": self.realization}


@dataclass(frozen=True)
class Custom:
    """Arbitrary real-weighted sum of Pauli strings."""

    pauli_terms: tuple[PauliString, ...] = ()

    name = "custom"

    def terms(self, L: int) -> list[PauliString]:
        for t in self.pauli_terms:
            if t.sites != L:
                raise ValueError(f"custom term {t.letters!r} does not have {L} sites")
        return list(self.pauli_terms)

    def params(self) -> dict:
        return {"terms": [[t.coefficient, t.letters] for t in self.pauli_terms]}


@dataclass(frozen=True)
class HamiltonianSpec:
    model: MixedFieldIsing | RandomFieldXXZ | Custom
    sites: int
    boundary: str = "open"

    def __post_init__(self):
        if self.sites < 1:
            raise ValueError("sites must be positive")
        if self.boundary != "open":
            raise ValueError("only open boundary conditions are supported")

    def terms(self) -> list[PauliString]:
        return self.model.terms(self.sites)

    def default_sector(self) -> "SymmetrySector":
        if isinstance(self.model, MixedFieldIsing):
            return SymmetrySector.parity(+1)
        if isinstance(self.model, RandomFieldXXZ):
            return SymmetrySector.total_sz(0)
        return SymmetrySector.none()

    def to_dict(self) -> dict:
        return {"model": self.model.name, "params": self.model.params(),
                "sites": self.sites, "boundary": self.boundary}


# ---------------------------------------------------------------------------
# Symmetry sectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetrySector:
    """``kind`` is ``"parity"`` (value +/-1), ``"sz"`` (value = sum_i Z_i) or ``"none"``."""

    kind: str
    value: int = 0

    def __post_init__(self):
        if self.kind not in ("parity", "sz", "none"):
            raise ValueError(f"unknown sector kind {self.kind!r}")
        if self.kind == "parity" and self.value not in (1, -1):
            raise ValueError("reflection parity must be +1 or -1")

    @classmethod
    def parity(cls, value: int = 1) -> "SymmetrySector":
        return cls("parity", value)

    @classmethod
    def total_sz(cls, value: int = 0) -> "SymmetrySector":
        return cls("sz", value)

    @classmethod
    def none(cls) -> "SymmetrySector":
        return cls("none", 0)

    @classmethod
    def parse(cls, text: str) -> "SymmetrySector":
        text = text.strip().lower()
        if text == "none":
            return cls.none()
        if text.startswith("parity"):
            return cls.parity(int(text[len("parity"):] or 1))
        if text.startswith("sz"):
            return cls.total_sz(int(text[2:] or 0))
        raise ValueError(f"cannot parse sector {text!r}")

    def __str__(self) -> str:
        if self.kind == "parity":
            return "parity+1" if self.value == 1 else "parity-1"
        if self.kind == "sz":
            return f"sz{self.value}"
        return "none"


def _n_down(L: int, sector: SymmetrySector) -> int:
    if (L - sector.value) % 2 or abs(sector.value) > L:
        raise ValueError(f"sum of Z = {sector.value} impossible on {L} sites")
    return (L - sector.value) // 2


def sector_dimensions(L: int, sector: SymmetrySector) -> tuple[int, int]:
    """Exact ``(dim_in_sector, dim_complement)``; they always sum to ``2**L``."""
    if L < 1:
        raise ValueError("L must be positive")
    total = 1 << L
    if sector.kind == "none":
        return total, 0
    if sector.kind == "sz":
        dim = math.comb(L, _n_down(L, sector))
        return dim, total - dim
    palindromes = 1 << ((L + 1) // 2)
    even = (total + palindromes) // 2
    odd = (total - palindromes) // 2
    return (even, odd) if sector.value == 1 else (odd, even)


def reflect_states(states: np.ndarray, L: int) -> np.ndarray:
    """Image of each bit-string under site reflection ``i -> L + 1 - i``."""
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(states)
    for k in range(L):
        out |= ((states >> k) & 1) << (L - 1 - k)
    return out


@dataclass
class SectorBasis:
    """Orthonormal sector basis stored as a sparse list of amplitudes.

    Basis vector ``k`` is ``sum_m coef[m] |support[m]>`` over all ``m`` with
    ``column[m] == k``. ``representatives[k]`` is the smallest bit-string in
    vector ``k``; vectors are ordered by it.
    """

    L: int
    sector: SymmetrySector
    representatives: np.ndarray
    support: np.ndarray
    column: np.ndarray
    coef: np.ndarray
    _isometry: sp.csc_matrix | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.representatives)

    def vector(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.column == k
        return self.support[mask], self.coef[mask]

    def isometry(self) -> sp.csc_matrix:
        """Sparse ``2^L x dim`` matrix whose columns are the basis vectors."""
        if self._isometry is None:
            self._isometry = sp.csc_matrix(
                (self.coef, (self.support, self.column)), shape=(1 << self.L, self.dim))
        return self._isometry

    def to_dense(self) -> np.ndarray:
        return self.isometry().toarray()


def build_sector_basis(L: int, sector: SymmetrySector) -> SectorBasis:
    dim, _ = sector_dimensions(L, sector)
    if sector.kind == "none":
        states = np.arange(1 << L, dtype=np.int64)
        return SectorBasis(L, sector, states, states, states.copy(), np.ones(len(states)))

    if sector.kind == "sz":
        states = np.arange(1 << L, dtype=np.int64)
        states = states[np.bitwise_count(states) == _n_down(L, sector)]
        return SectorBasis(L, sector, states, states, np.arange(len(states)),
                           np.ones(len(states)))

    states = np.arange(1 << L, dtype=np.int64)
    mirrored = reflect_states(states, L)
    reps = states[states <= mirrored] if sector.value == 1 else states[states < mirrored]
    reps_mirror = reflect_states(reps, L)
    paired = reps != reps_mirror
    cols = np.arange(len(reps))
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    sign = 1.0 if sector.value == 1 else -1.0
    support = np.concatenate([reps, reps_mirror[paired]])
    column = np.concatenate([cols, cols[paired]])
    coef = np.concatenate([np.where(paired, inv_sqrt2, 1.0),
                           np.full(int(paired.sum()), sign * inv_sqrt2)])
    assert len(reps) == dim
    return SectorBasis(L, sector, reps, support, column, coef)


def build_operator(terms: Iterable[PauliString], basis: SectorBasis, tol: float = 1e-10) -> np.ndarray:
    """Dense matrix of ``sum(terms)`` in the sector basis.

    The sum (not each term) must leave the sector invariant; the leakage
    ``(1 - V V^T) H V`` is evaluated exactly on the sparse full-space action.
    Returns a real array unless a term carries an odd number of Y letters.
    """
    n = 1 << basis.L
    rows, cols, vals = [], [], []
    for term in terms:
        if term.sites != basis.L:
            raise ValueError(f"term {term.letters!r} does not act on {basis.L} sites")
        if term.coefficient == 0.0:
            continue
        targets, amps = term.apply(basis.support)
        rows.append(targets)
        cols.append(basis.column)
        vals.append(amps * basis.coef)
    if not rows:
        return np.zeros((basis.dim, basis.dim))

    data = np.concatenate(vals)
    if np.iscomplexobj(data) and not np.any(data.imag):
        data = data.real
    W = sp.csc_matrix((data, (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, basis.dim))
    V = basis.isometry()
    H_sparse = (V.T @ W).tocsc()
    leak = W - V @ H_sparse
    leak_max = np.abs(leak.data).max() if leak.nnz else 0.0
    if leak_max > tol:
        raise SymmetryViolation(
            f"operator leaks out of sector {basis.sector} on L={basis.L} (max {leak_max:.3g})")

    H = H_sparse.toarray()
    herm_dev = np.abs(H - H.conj().T).max()
    if herm_dev > 1e-12 * max(1.0, np.abs(H).max()):
        raise ValueError(f"operator is not Hermitian (deviation {herm_dev:.3g})")
    H = 0.5 * (H + H.conj().T)
    return H


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


def center_site(L: int) -> int:
    """``(L+1)/2`` for odd L, ``L/2`` for even L."""
    return (L + 1) // 2


@dataclass(frozen=True)
class Observable:
    """A single Pauli-string observable placed relative to the chain.

    ``kind`` is ``"single_site_Z_center"``, ``"two_site_ZZ_center"`` or
    ``"custom"``; custom observables give ``pauli`` letters on explicit
    1-based ``sites``.
    """

    kind: str = "single_site_Z_center"
    pauli: str = ""
    sites: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("single_site_Z_center", "two_site_ZZ_center", "custom"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "custom" and (not self.pauli or len(self.pauli) != len(self.sites)):
            raise ValueError("custom observables need matching pauli letters and sites")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))

    def string(self, L: int) -> PauliString:
        if self.kind == "single_site_Z_center":
            return pauli_string(L, {center_site(L): "Z"})
        if self.kind == "two_site_ZZ_center":
            if L % 2:
                raise ValueError("the two-site center observable needs even L")
            return pauli_string(L, {L // 2: "Z", L // 2 + 1: "Z"})
        return pauli_string(L, dict(zip(self.sites, self.pauli)))

    @property
    def label(self) -> str:
        if self.kind == "custom":
            return "".join(f"{p}{s}" for p, s in zip(self.pauli, self.sites))
        return self.kind

    def to_dict(self) -> dict:
        return {"kind": self.kind, "pauli": self.pauli, "sites": list(self.sites)}


def _comb(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


def predicted_m1(observable: Observable, sector: SymmetrySector, L: int) -> Fraction:
    """Closed-form sector average ``Tr(O)/D`` for the two built-in observables."""
    supported = sector in (SymmetrySector.parity(1), SymmetrySector.total_sz(0))
    if observable.kind == "single_site_Z_center" and supported:
        if sector.kind == "sz" and L % 2:
            raise ValueError("the S_z = 0 sector needs even L")
        return Fraction(0)
    if observable.kind == "two_site_ZZ_center" and supported:
        if L % 2 or L < 2:
            raise ValueError("the two-site formula needs even L >= 2")
        if sector.kind == "parity":
            return Fraction(1, 2 ** (L // 2) + 1)
        h = L // 2
        return Fraction(2 * (_comb(L - 2, h - 2) - _comb(L - 2, h - 1)), math.comb(L, h))
    raise ValueError(f"no closed form for {observable.kind} in sector {sector}")


def model_from_dict(name: str, params: dict | None = None, terms: Sequence | None = None):
    """Model instance from a serialized name plus parameter overrides."""
    params = dict(params or {})
    if name == "ising":
        return MixedFieldIsing(**params)
    if name == "xxz":
        return RandomFieldXXZ(**params)
    if name == "custom":
        raw = terms if terms is not None else params.get("terms", [])
        return Custom(tuple(PauliString(float(c), str(l)) for c, l in raw))
    raise ValueError(f"unknown model {name!r}")

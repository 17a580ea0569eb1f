"""
Brute-force cross-checks of the fast statistics on small random instances.

Every reference value here is computed from masked dense tensors or dense
Kronecker-product Hamiltonians, independently of the inclusion-exclusion and
row-sum shortcuts used by the library proper.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cumulants import (correlation_function, exact_pattern_sums, free_cumulant, otoc_point,
                        pattern_sum, restricted_cycle_sum, set_partitions)
from .eth import closed_form_terms, crossing_term, diagonal_moments, lt_decompose, p_term, window_partition
from .model import (MixedFieldIsing, PauliString, RandomFieldXXZ, SymmetrySector, build_operator,
                    build_sector_basis, sector_dimensions)
from .spectral import SpectralData

IDENTITY_RTOL = 1e-9
DECOMP_RTOL = 1e-10
SUM_RTOL = 1e-9
REL_FLOOR = 1e-6


def rel_err(a, b, floor: float = REL_FLOOR) -> float:
    """``|a - b| / max(|b|, floor)``; the floor keeps near-zero references meaningful."""
    return float(abs(a - b) / max(abs(b), floor))


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_orthogonal(rng: np.random.Generator, D: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((D, D)))
    return q * np.sign(np.diag(r))


def random_involution(rng: np.random.Generator, D: int) -> SpectralData:
    """Real symmetric ``O = Q diag(+-1) Q^T`` with a random number of -1 eigenvalues."""
    signs = np.ones(D)
    signs[: rng.integers(0, D + 1)] = -1.0
    Q = random_orthogonal(rng, D)
    O = (Q * signs) @ Q.T
    O = 0.5 * (O + O.T)
    E = np.sort(rng.standard_normal(D)) * np.sqrt(D)
    return SpectralData.from_arrays(E, O)


def random_pauli_observable(rng: np.random.Generator, L: int) -> SpectralData:
    """A random real Pauli string in the eigenbasis of a random real symmetric Hamiltonian."""
    D = 2 ** L
    while True:
        letters = "".join(rng.choice(list("IXZY"), size=L))
        if letters.count("Y") % 2 == 0 and set(letters) != {"I"}:
            break
    # an even number of Y letters makes the string real
    P = PauliString(1.0, letters).to_dense().real
    H = rng.standard_normal((D, D))
    H = 0.5 * (H + H.T)
    E, V = np.linalg.eigh(H)
    O = V.T @ P @ V
    return SpectralData.from_arrays(E, 0.5 * (O + O.T))


def random_hermitian(rng: np.random.Generator, D: int, complex_: bool) -> np.ndarray:
    A = rng.standard_normal((D, D))
    if complex_:
        A = A + 1j * rng.standard_normal((D, D))
    return 0.5 * (A + A.conj().T)


# ---------------------------------------------------------------------------
# brute-force references
# ---------------------------------------------------------------------------


def distinct_mask(D: int, q: int) -> np.ndarray:
    """Boolean ``D^q`` tensor, true where all q indices are pairwise distinct."""
    idx = np.indices((D,) * q)
    mask = np.ones((D,) * q, dtype=bool)
    for a, b in itertools.combinations(range(q), 2):
        mask &= idx[a] != idx[b]
    return mask


def brute_cycle_sum(legs) -> complex:
    q = len(legs)
    D = legs[0].shape[0]
    letters = "abcd"[:q]
    subs = ",".join(letters[m] + letters[(m + 1) % q] for m in range(q))
    full = np.einsum(subs + "->" + letters, *legs)
    return complex(full[distinct_mask(D, q)].sum())


def brute_error_terms(o: np.ndarray) -> dict:
    """Pairwise-distinct restricted sums defining the mixed t = 0 error terms."""
    D = o.shape[0]
    d = np.real(np.diag(o))
    a = np.abs(o) ** 2
    m2d = distinct_mask(D, 2)
    m3d = distinct_mask(D, 3)
    k1 = d.mean()
    k2 = a[m2d].sum() / D
    tri = np.real(np.einsum("ij,jk,ki->ijk", o, o, o))
    k3 = tri[m3d].sum() / D
    s21 = (d[:, None] * a)[m2d].sum() / D
    s211_1 = ((d ** 2)[:, None] * a)[m2d].sum() / D
    s211_2 = (d[:, None] * d[None, :] * a)[m2d].sum() / D
    s31 = (d[:, None, None] * tri)[m3d].sum() / D
    s22 = np.einsum("ij,jk->ijk", a, a)[m3d].sum() / D
    return {"F21": s21 - k2 * k1, "F31": s31 - k3 * k1, "F211_1": s211_1 - k2 * k1 ** 2,
            "F211_2": s211_2 - k2 * k1 ** 2, "F22": s22 - k2 ** 2, "k2_0": k2}


def brute_window_parts(E: np.ndarray, d: np.ndarray, delta: float, p: int) -> tuple[float, float]:
    """Longitudinal/transverse split from explicit per-window loops."""
    n_win = max(1, int(np.ceil((E[-1] - E[0]) / delta)))
    F_L = 0.0
    means, weights = [], []
    for n in range(n_win):
        lo, hi = E[0] + n * delta, E[0] + (n + 1) * delta
        sel = (E >= lo) & ((E < hi) if n < n_win - 1 else (E <= E[-1]))
        if not sel.any():
            continue
        w = sel.sum() / E.size
        mu = d[sel].mean()
        F_L += w * (np.mean(d[sel] ** p) - mu ** p)
        means.append(mu)
        weights.append(w)
    means, weights = np.array(means), np.array(weights)
    F_T = np.sum(weights * means ** p) - np.sum(weights * means) ** p
    return float(F_L), float(F_T)


def dense_operator(terms, L: int) -> np.ndarray:
    """Sum of Pauli strings as a full ``2^L`` matrix, built from Kronecker products."""
    single = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]], dtype=complex),
              "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1.0, -1.0])}
    H = np.zeros((2 ** L, 2 ** L), dtype=complex)
    for term in terms:
        m = np.ones((1, 1), dtype=complex)
        for ch in term.letters:
            m = np.kron(m, single[ch])
        H += term.coefficient * m
    return H


def dense_sector_projector(L: int, sector: SymmetrySector) -> np.ndarray:
    """Orthonormal columns spanning the sector, from eigenvectors of the symmetry generator."""
    D = 2 ** L
    states = np.arange(D)
    if sector.kind == "parity":
        refl = np.array([int(format(s, f"0{L}b")[::-1], 2) for s in states])
        R = np.zeros((D, D))
        R[refl, states] = 1.0
        w, V = np.linalg.eigh(R)
        return V[:, np.abs(w - sector.value) < 1e-8]
    if sector.kind == "sz":
        downs = np.array([bin(s).count("1") for s in states])
        keep = (L - 2 * downs) == sector.value
        return np.eye(D)[:, keep]
    return np.eye(D)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    cases: int
    max_error: float
    tolerance: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<24} cases={self.cases:<4} max_err={self.max_error:.3e} "
                f"tol={self.tolerance:.0e}")


@dataclass
class OracleReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def check_identities(n_cases: int = 200, seed: int = 0, p_convention: str = "unrestricted") -> CheckResult:
    """Involution closed forms against brute restricted sums, window split and ``m2 + k2 = 1``."""
    rng = np.random.default_rng(seed)
    res = CheckResult("identities", n_cases, 0.0, IDENTITY_RTOL)
    for case in range(n_cases):
        if case % 2:
            sd = random_pauli_observable(rng, int(rng.integers(2, 6)))
        else:
            sd = random_involution(rng, int(rng.integers(4, 51)))
        m1, m2, m3, m4 = diagonal_moments(sd)
        C = crossing_term(sd)
        P = p_term(sd, p_convention)
        closed = closed_form_terms(m1, m2, m3, m4, C, P)
        ref = brute_error_terms(sd.o_eig)
        # (error, tolerance) per identity
        # the closed forms cancel O(m2) summands, so relative error is taken
        # against max(|reference|, largest summand)
        scale = max(m2, m4, abs(P), C, REL_FLOOR)
        errs = {k: (rel_err(closed[k], ref[k], floor=scale), IDENTITY_RTOL)
                for k in ("F21", "F31", "F211_1", "F211_2", "F22")}
        errs["m2+k2"] = (abs(m2 + ref["k2_0"] - 1.0), DECOMP_RTOL)
        delta = float(rng.uniform(0.3, 3.0)) * np.sqrt(sd.dim) / 4
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            window = window_partition(sd.eigenvalues, delta)
        for p in (2, 3, 4):
            F_L, F_T = lt_decompose(sd, window, p)
            total = np.mean(sd.diagonal ** p) - m1 ** p
            bL, bT = brute_window_parts(sd.eigenvalues, sd.diagonal, delta, p)
            # scale by the summand magnitude: F_p is a difference of O(mean |d|^p) numbers
            dscale = float(np.mean(np.abs(sd.diagonal) ** p))
            errs[f"split{p}"] = (rel_err(F_L + F_T, total, floor=dscale), DECOMP_RTOL)
            errs[f"L{p}"] = (rel_err(F_L, bL, floor=dscale), IDENTITY_RTOL)
            errs[f"T{p}"] = (rel_err(F_T, bT, floor=dscale), IDENTITY_RTOL)
        res.max_error = max(res.max_error, max(e for e, _ in errs.values()))
        bad = [(k, e) for k, (e, tol) in errs.items() if e > tol]
        if bad:
            res.failures.append((case, bad))
    return res


def check_restricted_sums(n_cases: int = 200, seed: int = 1, max_dim: int = 14) -> CheckResult:
    """Inclusion-exclusion restricted cycle sums against masked brute force."""
    rng = np.random.default_rng(seed)
    res = CheckResult("restricted-sums", n_cases, 0.0, SUM_RTOL)
    for case in range(n_cases):
        q = int(rng.integers(2, 5))
        D = int(rng.integers(2, max_dim + 1))
        O = random_hermitian(rng, D, complex_=bool(case % 3 == 0))
        E = np.sort(rng.standard_normal(D))
        sd = SpectralData.from_arrays(E, O)
        times = tuple(rng.uniform(-3, 3, size=q - 1))
        fast = restricted_cycle_sum(sd, q, times)
        legs = [np.exp(1j * np.subtract.outer(sd.eigenvalues, sd.eigenvalues) * t) * sd.o_eig for t in times]
        legs.append(sd.o_eig)
        ref = brute_cycle_sum(legs)
        err = rel_err(fast, ref, floor=max(REL_FLOOR, 1e-12 * D ** q))
        res.max_error = max(res.max_error, err)
        if err > SUM_RTOL:
            res.failures.append((case, q, D, err))
    return res


def check_partition_completeness(seed: int = 2, D: int = 12) -> CheckResult:
    """Exact-pattern sums over all set partitions add up to the unrestricted trace."""
    rng = np.random.default_rng(seed)
    res = CheckResult("partition-completeness", 3, 0.0, SUM_RTOL)
    for q in (2, 3, 4):
        legs = [rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D)) for _ in range(q)]
        exact = exact_pattern_sums(legs)
        letters = "abcd"[:q]
        subs = ",".join(letters[m] + letters[(m + 1) % q] for m in range(q))
        total = complex(np.einsum(subs + "->", *legs))
        err = rel_err(sum(exact.values()), total, floor=1.0)
        err = max(err, rel_err(exact[set_partitions(q)[0]], brute_cycle_sum(legs), floor=1.0))
        res.max_error = max(res.max_error, err)
        if err > SUM_RTOL:
            res.failures.append((q, err))
    return res


def check_otoc_fast_path(n_cases: int = 6, seed: int = 3) -> CheckResult:
    """Rank-update OTOC evaluation against the generic restricted-sum route."""
    rng = np.random.default_rng(seed)
    res = CheckResult("otoc-fast-path", n_cases, 0.0, SUM_RTOL)
    for case in range(n_cases):
        D = int(rng.integers(8, 90))
        sd = random_involution(rng, D)
        t = float(rng.uniform(0, 4))
        otoc, k4, k2 = otoc_point(sd, t)
        ref_otoc = correlation_function(sd, 4, (t, 0.0, t)).real
        ref_k4 = free_cumulant(sd, 4, (t, 0.0, t)).real
        ref_k2 = free_cumulant(sd, 2, (t,)).real
        err = max(rel_err(otoc, ref_otoc, 1.0), rel_err(k4, ref_k4, 1.0), rel_err(k2, ref_k2, 1.0))
        res.max_error = max(res.max_error, err)
        if err > SUM_RTOL:
            res.failures.append((case, D, err))
    return res


def check_sector_build(sizes=(2, 3, 4, 5, 6, 7, 8), seed: int = 4) -> CheckResult:
    """Sector Hamiltonian spectra against dense Kronecker builds projected onto the sector."""
    res = CheckResult("sector-build", 0, 0.0, 1e-10)
    cases = []
    for L in sizes:
        cases += [(MixedFieldIsing(), L, SymmetrySector.parity(v)) for v in (1, -1)]
        if L % 2 == 0:
            cases.append((RandomFieldXXZ(seed=seed), L, SymmetrySector.total_sz(0)))
    for model, L, sector in cases:
        if sector_dimensions(L, sector)[0] == 0:
            continue
        basis = build_sector_basis(L, sector)
        H = build_operator(model.terms(L), basis)
        B = dense_sector_projector(L, sector)
        Hd = B.T @ dense_operator(model.terms(L), L) @ B
        ev = np.linalg.eigvalsh(H)
        ref = np.linalg.eigvalsh(Hd)
        err = float(np.max(np.abs(ev - ref))) if ev.shape == ref.shape else np.inf
        res.cases += 1
        res.max_error = max(res.max_error, err)
        if err > res.tolerance:
            res.failures.append((model.name, L, str(sector), err))
    return res


def run_oracle(seed: int = 0, p_convention: str = "unrestricted", n_cases: int = 200) -> OracleReport:
    """All oracle suites; ``p_convention`` exists to demonstrate that a wrong convention is caught."""
    return OracleReport([
        check_identities(n_cases, seed, p_convention),
        check_restricted_sums(n_cases, seed + 1),
        check_partition_completeness(seed + 2),
        check_otoc_fast_path(seed=seed + 3),
        check_sector_build(seed=seed + 4),
    ])

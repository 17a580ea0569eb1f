"""
Diagonal moments, ETH error terms at t = 0 and their energy-window decomposition.

Notation: ``d_i = O_ii``, ``m_k = mean(d^k)``, ``k2_0 = D^-1 sum_{i!=j} |O_ij|^2``,
``C = D^-1 sum_{i!=j} |O_ij|^4`` and ``P = D^-1 sum_{ij} |O_ij|^2 O_ii O_jj``
(``i = j`` included). Restricted sums ``i != j != k`` run over pairwise
distinct indices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import SpectralData

INVOLUTION_TOL = 1e-8

P_CONVENTIONS = ("unrestricted", "restricted")


@dataclass
class WindowPartition:
    """Fixed-width energy windows ``[E_min + n*delta, E_min + (n+1)*delta)``, last one closed.

    Only populated windows are kept. ``window_ids[w]`` is the position ``n`` of
    populated window ``w`` and ``members[w]`` its ``(start, stop)`` slice into
    the sorted spectrum.
    """

    delta: float
    edges: np.ndarray
    window_ids: np.ndarray
    members: list[tuple[int, int]]
    d_E: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.d_E.sum())

    @property
    def P_E(self) -> np.ndarray:
        return self.d_E / self.dim

    def labels(self) -> np.ndarray:
        """Populated-window index of every eigenstate."""
        return np.repeat(np.arange(len(self.d_E)), self.d_E)

    def means(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        sums = np.add.reduceat(values, [a for a, _ in self.members])
        return sums / self.d_E


def window_partition(eigenvalues: np.ndarray, delta: float, anchor: float | None = None) -> WindowPartition:
    """Split a sorted spectrum into windows of width ``delta``.

    By default the first window starts at the lowest level and the last one
    is closed. With ``anchor`` the window edges sit at ``anchor + n * delta``
    (``anchor = -delta/2`` centres a window on E = 0).
    """
    E = np.asarray(eigenvalues, dtype=float)
    if delta <= 0:
        raise ValueError("window width must be positive")
    if E.size == 0:
        raise ValueError("empty spectrum")
    if np.any(np.diff(E) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    span = E[-1] - E[0]
    if E.size > 1 and delta < span / (E.size - 1):
        warnings.warn(f"window width {delta:g} is below the mean level spacing; "
                      "windows hold at most one level", RuntimeWarning, stacklevel=2)
    if anchor is None:
        base = E[0]
        n_windows = max(1, math.ceil(span / delta))
        idx = np.minimum(np.floor((E - base) / delta).astype(np.int64), n_windows - 1)
    else:
        idx = np.floor((E - anchor) / delta).astype(np.int64)
        first = int(idx[0])
        idx -= first
        base = anchor + first * delta
        n_windows = int(idx[-1]) + 1
    counts = np.bincount(idx, minlength=n_windows)
    ids = np.flatnonzero(counts)
    d_E = counts[ids]
    stops = np.cumsum(d_E)
    members = [(int(b - c), int(b)) for b, c in zip(stops, d_E)]
    edges = base + delta * np.arange(n_windows + 1)
    return WindowPartition(float(delta), edges, ids, members, d_E)


@dataclass
class MomentSet:
    m1: float
    m2: float
    m3: float
    m4: float
    k2_0: float
    crossing_C: float
    term_P: float


def diagonal_moments(spectral: SpectralData, k_max: int = 4) -> np.ndarray:
    """``[m_1, ..., m_kmax]`` with ``m_k = mean(O_ii^k)``."""
    d = spectral.diagonal
    return np.array([np.mean(d ** k) for k in range(1, k_max + 1)])


def lt_decompose(spectral: SpectralData, window: WindowPartition, p: int) -> tuple[float, float]:
    """Longitudinal (within-window) and transverse (between-window) parts of ``m_p - m_1^p``."""
    if p not in (2, 3, 4):
        raise ValueError("power must be 2, 3 or 4")
    d = spectral.diagonal
    if window.dim != d.size:
        raise ValueError("window partition does not match the spectrum")
    P = window.P_E
    mu = window.means(d)
    mu_p = window.means(d ** p)
    F_L = float(np.sum(P * (mu_p - mu ** p)))
    F_T = float(np.sum(P * mu ** p) - np.sum(P * mu) ** p)
    return F_L, F_T


def _abs2(o: np.ndarray) -> np.ndarray:
    return o.real ** 2 + o.imag ** 2 if np.iscomplexobj(o) else o * o


def crossing_term(spectral: SpectralData) -> float:
    a2 = _abs2(spectral.o_eig)
    d2 = spectral.diagonal ** 2
    return float((np.sum(a2 * a2) - np.sum(d2 * d2)) / spectral.dim)


def p_term(spectral: SpectralData, convention: str = "unrestricted") -> float:
    """``D^-1 d^T |O|^2 d``; ``"restricted"`` drops the ``i = j`` terms."""
    if convention not in P_CONVENTIONS:
        raise ValueError(f"unknown P convention {convention!r}")
    d = spectral.diagonal
    val = d @ (_abs2(spectral.o_eig) @ d)
    if convention == "restricted":
        val -= np.sum(d ** 4)
    return float(np.real(val) / spectral.dim)


def involution_deviation(o: np.ndarray) -> float:
    """``max |O^2 - 1|``."""
    sq = o @ o
    sq[np.diag_indices_from(sq)] -= 1.0
    return float(np.abs(sq).max())


@dataclass
class ErrorTermReport:
    F11: float
    F11_L: float
    F11_T: float
    F111: float
    F111_L: float
    F111_T: float
    F1111: float
    F1111_L: float
    F1111_T: float
    F21: float
    F31: float
    F211_1: float
    F211_2: float
    F22: float
    moments: MomentSet
    window: float
    involution_flag: bool
    method: str = "closed"
    p_convention: str = "unrestricted"

    def as_row(self) -> dict:
        row = asdict(self)
        moments = row.pop("moments")
        row.update(moments)
        row["C"] = row.pop("crossing_C")
        row["P"] = row.pop("term_P")
        return row


def direct_restricted_terms(spectral: SpectralData) -> dict:
    """The t = 0 factorisation errors evaluated from restricted sums, valid for any O.

    Costs one matrix product (for ``sum_{i!=j!=k} O_ij O_jk O_ki O_ii``);
    everything else is elementwise.
    """
    o = spectral.o_eig
    D = spectral.dim
    d = spectral.diagonal
    o0 = o.copy()
    o0[np.diag_indices(D)] = 0.0
    a = _abs2(o0)
    row = a.sum(axis=1)
    k1 = d.mean()
    k2 = row.sum() / D
    cube_diag = np.real(np.sum((o0 @ o0) * o0.T, axis=1))
    k3 = cube_diag.sum() / D
    s21 = d @ row / D
    s211_1 = (d * d) @ row / D
    s211_2 = d @ (a @ d) / D
    s22 = (np.sum(row ** 2) - np.sum(a * a)) / D
    s31 = d @ cube_diag / D
    return {"F21": float(s21 - k2 * k1), "F31": float(s31 - k3 * k1),
            "F211_1": float(s211_1 - k2 * k1 ** 2), "F211_2": float(s211_2 - k2 * k1 ** 2),
            "F22": float(s22 - k2 ** 2), "k2_0": float(k2), "k3_0": float(k3)}


def closed_form_terms(m1, m2, m3, m4, C, P) -> dict:
    """Closed forms that hold when ``O^2 = 1``."""
    return {"F21": -m3 + m1 * m2,
            # k3(0,0) = 2 m3 - 2 m1 for an involution, hence the 2 m1 (m1 - m3) term
            "F31": -m2 + 2 * m4 + 2 * m1 * (m1 - m3) - P,
            "F211_1": m2 - m4 - m1 ** 2 * (1 - m2),
            "F211_2": -m4 - m1 ** 2 * (1 - m2) + P,
            "F22": m4 - m2 ** 2 - C,
            "k2_0": 1.0 - m2}


def error_terms(spectral: SpectralData, window: WindowPartition, method: str = "auto",
                p_convention: str = "unrestricted") -> ErrorTermReport:
    """All t = 0 error terms for one spectrum.

    ``method="auto"`` uses the involution closed forms when ``max|O^2 - 1|``
    is below ``INVOLUTION_TOL`` and the restricted sums otherwise.
    """
    if method not in ("auto", "closed", "direct"):
        raise ValueError(f"unknown method {method!r}")
    m1, m2, m3, m4 = diagonal_moments(spectral)
    C = crossing_term(spectral)
    P = p_term(spectral, p_convention)
    involution = involution_deviation(spectral.o_eig) < INVOLUTION_TOL
    if method == "closed" or (method == "auto" and involution):
        mixed = closed_form_terms(m1, m2, m3, m4, C, P)
        used = "closed"
    else:
        mixed = direct_restricted_terms(spectral)
        used = "direct"
    parts = {p: lt_decompose(spectral, window, p) for p in (2, 3, 4)}
    return ErrorTermReport(
        F11=m2 - m1 ** 2, F11_L=parts[2][0], F11_T=parts[2][1],
        F111=m3 - m1 ** 3, F111_L=parts[3][0], F111_T=parts[3][1],
        F1111=m4 - m1 ** 4, F1111_L=parts[4][0], F1111_T=parts[4][1],
        F21=mixed["F21"], F31=mixed["F31"], F211_1=mixed["F211_1"], F211_2=mixed["F211_2"],
        F22=mixed["F22"],
        moments=MomentSet(m1, m2, m3, m4, mixed["k2_0"], C, P),
        window=window.delta, involution_flag=involution, method=used, p_convention=p_convention)


@dataclass
class TransversePrediction:
    F11_T: float
    F1111_T: float
    C0: float
    dO_dE: float
    measured_F11_T: float
    measured_F1111_T: float
    higher_order: bool


class InsufficientWindows(ValueError):
    pass


def transverse_prediction(spectral: SpectralData, window: WindowPartition,
                          stencil: int = 1) -> TransversePrediction:
    """Saddle-point estimates ``F11_T ~ C0 O'^2`` and ``F1111_T ~ 3 C0^2 O'^4``.

    ``C0`` is the energy variance of the (zero-mean) sector spectrum and ``O'``
    the slope of window means between the windows ``stencil`` positions on
    either side of the one containing E = 0, taken against their mean energies.
    """
    E = spectral.eigenvalues
    d = spectral.diagonal
    C0 = float(np.mean(E ** 2))
    lookup = {int(n): w for w, n in enumerate(window.window_ids)}
    e_min = window.edges[0]
    n0 = min(int(np.floor((0.0 - e_min) / window.delta)), len(window.edges) - 2)
    lo, hi = lookup.get(n0 - stencil), lookup.get(n0 + stencil)
    if n0 not in lookup or lo is None or hi is None:
        raise InsufficientWindows(f"need populated windows {n0 - stencil}..{n0 + stencil} around E = 0")
    mu = window.means(d)
    e_bar = window.means(E)
    slope = float((mu[hi] - mu[lo]) / (e_bar[hi] - e_bar[lo]))
    pred2 = C0 * slope ** 2
    pred4 = 3.0 * C0 ** 2 * slope ** 4
    meas2 = lt_decompose(spectral, window, 2)[1]
    meas4 = lt_decompose(spectral, window, 4)[1]
    return TransversePrediction(pred2, pred4, C0, slope, meas2, meas4,
                                higher_order=bool(pred2 < 1e-2 * abs(meas2)))

"""
Restricted cycle sums, free cumulants and infinite-temperature correlators.

A q-leg cycle sum is ``sum M1[i1,i2] M2[i2,i3] ... Mq[iq,i1]`` where leg ``m``
is ``O(t_m)`` in the eigenbasis for ``m < q`` and ``O`` itself for ``m = q``.
The free cumulant restricts the indices to be pairwise distinct. That sum is
obtained by Moebius inversion on the lattice of set partitions of the q index
positions: each partition is a coincidence pattern, evaluated as an
unrestricted contraction in which the indices of a block are identified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import blas

from .spectral import SpectralData, heisenberg_matrix

Partition = tuple[tuple[int, ...], ...]

K1_TOL = 1e-8
DISTINCTNESS = "pairwise"


@lru_cache(maxsize=None)
def set_partitions(q: int) -> tuple[Partition, ...]:
    """All set partitions of ``range(q)`` as sorted tuples of sorted blocks."""
    if q < 1:
        raise ValueError("q must be positive")

    def grow(partial: list[list[int]], k: int):
        if k == q:
            yield tuple(tuple(b) for b in partial)
            return
        for b in partial:
            b.append(k)
            yield from grow(partial, k + 1)
            b.pop()
        partial.append([k])
        yield from grow(partial, k + 1)
        partial.pop()

    return tuple(sorted(grow([], 0), key=lambda p: (-len(p), p)))


def _refines(fine: Partition, coarse: Partition) -> bool:
    owner = {x: i for i, block in enumerate(coarse) for x in block}
    return all(len({owner[x] for x in block}) == 1 for block in fine)


def moebius(fine: Partition, coarse: Partition) -> int:
    """Moebius function of the partition lattice for ``fine <= coarse``."""
    if not _refines(fine, coarse):
        return 0
    out = 1
    for block in coarse:
        n = sum(1 for b in fine if b[0] in block)
        out *= (-1) ** (n - 1) * math.factorial(n - 1)
    return out


def pattern_sum(legs: Sequence[np.ndarray], partition: Partition) -> complex:
    """Cycle sum over all index tuples that are constant on each block (unrestricted otherwise)."""
    q = len(legs)
    label = {}
    for i, block in enumerate(partition):
        for x in block:
            label[x] = chr(ord("a") + i)
    subs = ",".join(label[m] + label[(m + 1) % q] for m in range(q))
    return complex(np.einsum(subs + "->", *legs, optimize="greedy"))


def exact_pattern_sums(legs: Sequence[np.ndarray]) -> dict[Partition, complex]:
    """Cycle sum restricted to tuples whose coincidence pattern is exactly each partition.

    The finest partition's entry is the pairwise-distinct sum; all entries add
    up to the unrestricted trace.
    """
    parts = set_partitions(len(legs))
    S = {p: pattern_sum(legs, p) for p in parts}
    return {p: sum(moebius(p, s) * S[s] for s in parts if _refines(p, s)) for p in parts}


def cycle_legs(spectral: SpectralData, q: int, times: Sequence[float]) -> list[np.ndarray]:
    times = tuple(float(t) for t in times)
    if len(times) != q - 1:
        raise ValueError(f"q={q} needs {q - 1} time arguments, got {len(times)}")
    cache: dict[float, np.ndarray] = {}
    legs = []
    for t in times:
        if t not in cache:
            cache[t] = heisenberg_matrix(spectral, t)
        legs.append(cache[t])
    legs.append(spectral.o_eig)
    return legs


def restricted_cycle_sum(spectral: SpectralData, q: int, times: Sequence[float] = ()) -> complex:
    """``sum_{i1..iq pairwise distinct} e^{i w.t} O_{i1 i2} ... O_{iq i1}``."""
    if q not in (2, 3, 4):
        raise ValueError("q must be 2, 3 or 4")
    times = tuple(times) if len(times) else (0.0,) * (q - 1)
    if spectral.dim < q:
        # no tuple of q pairwise-distinct indices exists
        return 0j
    legs = cycle_legs(spectral, q, times)
    parts = set_partitions(q)
    finest = parts[0]
    return sum(moebius(finest, p) * pattern_sum(legs, p) for p in parts)


def free_cumulant(spectral: SpectralData, q: int, times: Sequence[float] = ()) -> complex:
    """``k_q(t) = D^-1 x restricted cycle sum``; ``k_1`` is the diagonal mean."""
    if q == 1:
        return complex(spectral.diagonal.mean())
    return restricted_cycle_sum(spectral, q, times) / spectral.dim


def correlation_function(spectral: SpectralData, q: int, times: Sequence[float] = ()) -> complex:
    """``<O(t_1) ... O(t_{q-1}) O(0)>`` at infinite temperature."""
    if q not in (2, 3, 4):
        raise ValueError("q must be 2, 3 or 4")
    times = tuple(times) if len(times) else (0.0,) * (q - 1)
    legs = cycle_legs(spectral, q, times)
    prod = legs[0]
    for leg in legs[1:-1]:
        prod = prod @ leg
    return complex(np.sum(prod * legs[-1].T)) / spectral.dim


def eth_prediction(spectral: SpectralData, q: int, times: Sequence[float] = ()) -> complex:
    """Full-ETH approximation of the q-point correlator in terms of free cumulants."""
    times = tuple(float(t) for t in times) if len(times) else (0.0,) * (q - 1)
    k1 = free_cumulant(spectral, 1)
    if q == 2:
        return free_cumulant(spectral, 2, times) + k1 ** 2
    if q == 3:
        t1, t2 = times
        k2_sum = sum(free_cumulant(spectral, 2, (t,)) for t in (t1 - t2, t1, t2))
        return free_cumulant(spectral, 3, times) + k2_sum * k1 + k1 ** 3
    if q == 4:
        t1, t2, t3 = times
        if t2 != 0.0 or t1 != t3:
            raise ValueError("the q=4 prediction is only available for the (t, 0, t) pattern")
        if abs(k1) > K1_TOL:
            raise ValueError(f"the q=4 prediction assumes k1 = 0 (got {k1.real:.3g})")
        k2 = free_cumulant(spectral, 2, (t1,))
        return free_cumulant(spectral, 4, times) + 2 * k2 ** 2
    raise ValueError("q must be 2, 3 or 4")


# ---------------------------------------------------------------------------
# OTOC time series
# ---------------------------------------------------------------------------


def _weighted_square(o0: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Symmetric ``o0 @ diag(w) @ o0`` for real symmetric ``o0``, via rank-k updates."""
    D = o0.shape[0]
    if D < 64:
        return (o0 * w) @ o0
    out = np.zeros((D, D), order="F")
    for mask, sign in ((w > 0, 1.0), (w < 0, -1.0)):
        if not mask.any():
            continue
        rows = o0[mask] * np.sqrt(np.abs(w[mask]))[:, None]
        # rows.T is F-ordered, so syrk reads it without a copy
        out = blas.dsyrk(sign, rows.T, c=out, beta=1.0, trans=0, lower=0, overwrite_c=1)
    upper = np.triu(out)
    return upper + np.triu(upper, 1).T


def otoc_point(spectral: SpectralData, t: float) -> tuple[float, float, float]:
    """``(OTOC(t), k4(t,0,t), k2(t))`` for real symmetric ``o_eig``.

    With ``G0 = O0 diag(e^{-iEt}) O0`` (``O0`` the off-diagonal part) every
    pattern reduces to elementwise work, so one point costs two symmetric
    rank-D updates.
    """
    o = spectral.o_eig
    if np.iscomplexobj(o):
        legs = cycle_legs(spectral, 4, (t, 0.0, t))
        full = complex(np.sum((legs[0] @ legs[1]) * (legs[2] @ legs[3]).T)) / spectral.dim
        return full.real, free_cumulant(spectral, 4, (t, 0.0, t)).real, free_cumulant(spectral, 2, (t,)).real
    D = spectral.dim
    E = spectral.eigenvalues
    d = spectral.diagonal
    ph = np.exp(1j * E * t)
    o0 = o.copy()
    o0[np.diag_indices(D)] = 0.0
    a0 = o0 * o0

    g_re = _weighted_square(o0, ph.real)
    g_im = -_weighted_square(o0, ph.imag)

    def phase_quadratic(re, im):
        # sum_ab ph_a ph_b (re + i im)_ab^2
        sq = (re * re - im * im) + 2j * (re * im)
        return complex(ph @ (sq @ ph))

    t_all = phase_quadratic(g_re, g_im)
    r = ph * (a0 @ ph.conj())
    t_ac = np.sum(r * r)
    t_bd = np.sum(np.conj(r) ** 2)
    ph2 = ph * ph
    t_both = ph2 @ ((a0 * a0) @ ph2.conj())
    k4 = (t_all - t_ac - t_bd + t_both) / D
    k2 = np.sum(r) / D

    # add back the diagonal of O: G = G0 + O0 (phi* d) + (d phi*) O0 + diag(d^2 phi*)
    u = ph.conj() * d
    corr = o0 * (u[None, :] + u[:, None])
    g_re += corr.real
    g_im += corr.imag
    g_re[np.diag_indices(D)] += (d * d * ph.conj()).real
    g_im[np.diag_indices(D)] += (d * d * ph.conj()).imag
    full = phase_quadratic(g_re, g_im) / D
    return full.real, k4.real, k2.real


@dataclass
class OtocSeries:
    times: np.ndarray
    otoc: np.ndarray
    otoc_eth: np.ndarray
    k2: np.ndarray
    k4: np.ndarray
    e_avg: float
    e_mid: float
    T: float
    dt: float
    integrand: str = "corrected"

    def summary(self) -> dict:
        return {"e_avg": self.e_avg, "e_mid": self.e_mid, "T": self.T, "dt": self.dt,
                "integrand": self.integrand, "distinctness": DISTINCTNESS,
                "quadrature": "trapezoid"}


def averaged_error(times, otoc, otoc_eth, otoc_mid: float, integrand: str = "corrected") -> float:
    """Time-averaged OTOC error on ``[0, T]``.

    ``"corrected"`` averages ``|OTOC_ETH(t) - OTOC(t)|``; ``"signed"`` takes the
    modulus of the average of ``OTOC_ETH(t) - OTOC(t)``, so errors of opposite
    sign cancel; ``"literal"`` averages ``OTOC_ETH(t) - OTOC(T/2)``.
    """
    T = times[-1] - times[0]
    if integrand == "corrected":
        return float(trapezoid(np.abs(otoc_eth - otoc), times) / T)
    if integrand == "signed":
        return float(abs(trapezoid(otoc_eth - otoc, times) / T))
    if integrand == "literal":
        return float(abs(trapezoid(otoc_eth, times) / T - otoc_mid))
    raise ValueError(f"unknown integrand {integrand!r}")


INTEGRANDS = ("corrected", "signed", "literal")


def otoc_series(spectral: SpectralData, T: float = 8.0, dt: float = 0.05,
                integrand: str = "corrected") -> OtocSeries:
    """OTOC(t) and its ETH prediction on the uniform grid ``0, dt, ..., T``."""
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    k1 = spectral.diagonal.mean()
    if abs(k1) > K1_TOL:
        raise ValueError(f"the OTOC prediction assumes k1 = 0 (got {k1:.3g})")
    times = np.linspace(0.0, T, n + 1)
    vals = np.array([otoc_point(spectral, float(t)) for t in times])
    otoc, k4, k2 = vals.T
    eth = k4 + 2 * k2 ** 2
    if n % 2 == 0:
        mid_otoc, mid_eth = otoc[n // 2], eth[n // 2]
    else:
        o_mid, k4_mid, k2_mid = otoc_point(spectral, T / 2)
        mid_otoc, mid_eth = o_mid, k4_mid + 2 * k2_mid ** 2
    return OtocSeries(times, otoc, eth, k2, k4,
                      e_avg=averaged_error(times, otoc, eth, mid_otoc, integrand),
                      e_mid=float(abs(mid_eth - mid_otoc)), T=float(T), dt=float(dt),
                      integrand=integrand)

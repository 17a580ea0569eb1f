"""Dense eigendecomposition, eigenbasis observables and level statistics."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import HamiltonianSpec, Observable, SymmetrySector, build_operator, build_sector_basis

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-12


class DiagonalizationError(RuntimeError):
    pass


class DegeneracyWarning(UserWarning):
    pass


@dataclass
class SpectralData:
    """Sector spectrum with ``sum(eigenvalues) == 0`` and the observable in the eigenbasis.

    ``o_eig[i, j] = <E_i| O |E_j>``; ``energy_offset`` is the sector-mean
    energy that was subtracted from the raw eigenvalues.
    """

    eigenvalues: np.ndarray
    o_eig: np.ndarray
    energy_offset: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diagonal(self.o_eig)).copy()

    @classmethod
    def from_arrays(cls, eigenvalues, o_eig, shift: bool = True, meta: dict | None = None):
        """Wrap raw arrays, optionally shifting energies to zero mean."""
        E = np.asarray(eigenvalues, dtype=float)
        offset = float(E.mean()) if shift else 0.0
        return cls(E - offset, np.asarray(o_eig), offset, dict(meta or {}))


def diagonalize(H: np.ndarray, key: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a dense Hermitian matrix, eigenvalues ascending.

    Backed by LAPACK's divide-and-conquer symmetric solver (Householder
    tridiagonalisation followed by the tridiagonal eigensolve).
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    dev = np.abs(H - H.conj().T).max() if H.size else 0.0
    if dev > HERMITIAN_TOL * max(1.0, np.abs(H).max()):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3g})")
    try:
        w, v = scipy.linalg.eigh(H, driver="evd", check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        try:
            w, v = scipy.linalg.eigh(H, driver="evr", check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            raise DiagonalizationError(f"eigensolver failed for matrix {key or '<unnamed>'}: {exc}") from exc
    return w, v


def rotate_observable(O_sector: np.ndarray, eigenvectors: np.ndarray) -> np.ndarray:
    """``V^dagger O V``, symmetrised to remove rounding asymmetry."""
    O_sector = np.asarray(O_sector)
    V = np.asarray(eigenvectors)
    if O_sector.shape != (V.shape[0], V.shape[0]):
        raise ValueError(f"dimension mismatch: O {O_sector.shape} vs V {V.shape}")
    d = np.diagonal(O_sector)
    if np.count_nonzero(O_sector - np.diag(d)) == 0:
        out = (V.conj().T * d) @ V
    else:
        out = V.conj().T @ (O_sector @ V)
    return 0.5 * (out + out.conj().T)


def phases(eigenvalues: np.ndarray, t: float) -> np.ndarray:
    return np.exp(1j * np.asarray(eigenvalues) * t)


def heisenberg_matrix(spectral: SpectralData, t: float) -> np.ndarray:
    """Eigenbasis matrix of ``O(t) = e^{iHt} O e^{-iHt}``: ``e^{i(E_i - E_j)t} O_ij``."""
    if t == 0:
        return spectral.o_eig.copy()
    ph = phases(spectral.eigenvalues, t)
    return ph[:, None] * spectral.o_eig * ph.conj()[None, :]


def spacing_ratio(eigenvalues: np.ndarray, tol: float = DEGENERACY_TOL) -> float:
    """Mean of ``min(s_n, s_{n+1}) / max(s_n, s_{n+1})`` over the ``D - 2`` interior ratios."""
    E = np.asarray(eigenvalues, dtype=float)
    if E.size < 3:
        raise ValueError("need at least three levels")
    if np.any(np.diff(E) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    s = np.diff(E)
    if np.any(s < tol):
        warnings.warn(f"{int(np.sum(s < tol))} level spacings below {tol:g}", DegeneracyWarning,
                      stacklevel=2)
    lo = np.minimum(s[:-1], s[1:])
    hi = np.maximum(s[:-1], s[1:])
    r = np.divide(lo, hi, out=np.zeros_like(lo), where=hi > 0)
    return float(r.mean())


def compute_spectral_data(spec: HamiltonianSpec, observable: Observable,
                          sector: SymmetrySector | None = None) -> SpectralData:
    """Build, diagonalize and rotate for one ``(model, L, sector, observable)``."""
    sector = sector or spec.default_sector()
    L = spec.sites
    basis = build_sector_basis(L, sector)
    H = build_operator(spec.terms(), basis)
    O = build_operator([observable.string(L)], basis)
    key = f"{spec.model.name} L={L} {sector}"
    w, v = diagonalize(H, key=key)
    if np.iscomplexobj(v) and not np.iscomplexobj(O):
        O = O.astype(complex)
    o_eig = rotate_observable(O, v)
    if np.iscomplexobj(o_eig) and not np.any(o_eig.imag):
        o_eig = o_eig.real
    offset = float(w.mean())
    E = w - offset
    if len(E) > 1:
        min_gap = float(np.diff(E).min())
        if min_gap < 1e-10:
            warnings.warn(f"{key}: minimum level spacing {min_gap:.3g} suggests an unresolved symmetry",
                          DegeneracyWarning, stacklevel=2)
    meta = {"hamiltonian": spec.to_dict(), "sector": str(sector), "observable": observable.to_dict(),
            "dim": basis.dim, "trace_H": float(np.real(np.trace(H))),
            "trace_H2": float(np.real(np.vdot(H, H)))}
    log.debug("diagonalized %s (dim %d)", key, basis.dim)
    return SpectralData(E, o_eig, offset, meta)

"""Eigendecomposition and matrix logarithm for small complex Hermitian matrices.

The solver is a cyclic Jacobi iteration with complex (phase-carrying) plane
rotations. It is written for the 4x4 coin-space density matrices but works for
any small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stepcoin.errors import NotPSDError, StepcoinError, ValidationError

__all__ = [
    "HERMITIAN_TOL",
    "ZERO_TOL",
    "EigenDecomposition",
    "as_hermitian",
    "eig_hermitian",
    "log_on_support",
]

HERMITIAN_TOL = 1e-12
ZERO_TOL = 1e-12
SWEEP_TOL = 1e-14
MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order and eigenvectors as the columns of ``vectors``."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.values) @ v.conj().T

    def support(self, zero_tol: float = ZERO_TOL) -> np.ndarray:
        return self.values > zero_tol


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate squareness and conjugate symmetry, return the exactly Hermitian part."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if asym > tol * max(1.0, float(np.max(np.abs(a)))):
        raise ValidationError(f"matrix is not Hermitian (max |M - M^H| = {asym:.3e})")
    return 0.5 * (a + a.conj().T)


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eig_hermitian(m, tol: float = SWEEP_TOL, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Diagonalize a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation in the (p, q) plane is ``D R D^H`` where ``D`` strips the
    phase of ``a_pq`` and ``R`` is the classical real Jacobi rotation, so the
    (p, q) entry is annihilated exactly. Sweeps stop once the off-diagonal
    Frobenius norm is below ``tol`` times the full norm.
    """
    a = as_hermitian(m).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(a))
    for _ in range(max_sweeps):
        if _off_norm(a) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g == 0.0:
                    continue
                phase = apq / g
                theta = (a[q, q].real - a[p, p].real) / (2.0 * g)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                u = np.eye(n, dtype=np.complex128)
                u[p, p] = c
                u[q, q] = c
                u[p, q] = s * phase
                u[q, p] = -s * phase.conjugate()
                a = u.conj().T @ a @ u
                a[p, q] = a[q, p] = 0.0
                v = v @ u
    else:
        if _off_norm(a) > tol * scale:
            raise StepcoinError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def log_on_support(d: EigenDecomposition, zero_tol: float = ZERO_TOL):
    """Matrix logarithm restricted to the support.

    Eigenvalues at or below ``zero_tol`` count as exact zeros and contribute
    nothing. Returns ``(V log(L+) V^H, mask)`` where ``mask`` flags the
    eigenvalues kept.

    Raises NotPSDError if an eigenvalue is below ``-zero_tol``.
    """
    if np.any(d.values < -zero_tol):
        raise NotPSDError(f"negative eigenvalue {d.values.min():.3e}")
    mask = d.values > zero_tol
    logs = np.zeros_like(d.values)
    logs[mask] = np.log(d.values[mask])
    return (d.vectors * logs) @ d.vectors.conj().T, mask

"""Dense spin operators and Hermitian linear algebra for systems up to 6 levels.

Energies are angular frequencies (rad/us) and times are microseconds, so
``propagator(H, t)`` is ``exp(-i H t)`` with no extra factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitianError, UnsupportedSpinError

HERMITIAN_RTOL = 1e-12


def spin_operators(spin: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Sx, Sy, Sz)`` for spin 1/2 or spin 1 with hbar = 1.

    Basis order is descending m, i.e. ``|+1>, |0>, |-1>`` for spin 1.
    """
    if np.isclose(spin, 0.5):
        sx = np.array([[0, 1], [1, 0]], dtype=complex) / 2
        sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
        sz = np.array([[1, 0], [0, -1]], dtype=complex) / 2
    elif np.isclose(spin, 1.0):
        r = 1 / np.sqrt(2)
        sx = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
        sy = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
        sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    else:
        raise UnsupportedSpinError(f"spin must be 1/2 or 1, got {spin!r}")
    return sx, sy, sz


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    m = np.asarray(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * max(scale, 1e-300))


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with gauge-fixed orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def fix_gauge(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so that its largest-magnitude entry is real positive.

    Ties in magnitude are broken by the lowest index, which keeps the choice
    deterministic for symmetric states such as (|+1> - |-1>)/sqrt(2).
    """
    out = np.array(vectors, dtype=complex, copy=True)
    mags = np.abs(out)
    cols = np.arange(out.shape[1])
    # first index within rounding of the column maximum
    idx = np.argmax(mags >= mags.max(axis=0) * (1 - 1e-9), axis=0)
    out *= np.exp(-1j * np.angle(out[idx, cols]))
    out[idx, cols] = out[idx, cols].real
    return out


def eigh(m: np.ndarray) -> EigenDecomposition:
    """Hermitian eigendecomposition with a reproducible eigenvector gauge."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m):
        raise NotHermitianError("matrix is not Hermitian")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NotHermitianError(f"eigendecomposition did not converge: {exc}") from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=fix_gauge(v))


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """Exact ``exp(-i H t)`` for Hermitian ``H`` via its eigendecomposition."""
    dec = eigh(h)
    v = dec.eigenvectors
    return (v * np.exp(-1j * dec.eigenvalues * t)) @ v.conj().T

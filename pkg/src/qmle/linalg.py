"""Cholesky-factor parameterization of density matrices and small dense helpers.

A density matrix of dimension ``M`` is written as ``rho = T^dagger T`` where ``T`` is
lower triangular with a real diagonal.  The ``M**2`` real numbers describing ``T``
are packed into a flat vector as follows::

    t[0:M]            diagonal of T (real)
    t[M:]             (Re, Im) pairs of the strictly lower entries, row by row

so for ``M = 2`` the vector ``[a, b, c, d]`` encodes ``T = [[a, 0], [c + 1j*d, b]]``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DegenerateFactorError",
    "num_params",
    "dim_from_params",
    "params_to_factor",
    "factor_to_params",
    "factor_to_density",
    "params_to_density",
    "density_to_params",
    "eigenvalues_hermitian",
    "is_density_matrix",
    "fidelity",
    "trace_distance",
]

HERMITIAN_TOL = 1e-10


class DegenerateFactorError(ValueError):
    """Raised when ``T^dagger T`` has zero trace."""


def num_params(dim: int) -> int:
    return dim * dim


def dim_from_params(n: int) -> int:
    dim = int(round(np.sqrt(n)))
    if dim < 1 or dim * dim != n:
        raise ValueError(f"parameter vector length {n} is not a perfect square")
    return dim


def _lower_indices(dim):
    # row-major order of the strictly lower triangle
    return np.tril_indices(dim, -1)


def params_to_factor(t, dim: int | None = None) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1:
        raise ValueError("parameter vector must be one-dimensional")
    if dim is None:
        dim = dim_from_params(t.size)
    elif t.size != dim * dim:
        raise ValueError(f"expected {dim * dim} parameters for dim {dim}, got {t.size}")
    if not np.all(np.isfinite(t)):
        raise ValueError("parameter vector contains non-finite entries")
    T = np.zeros((dim, dim), dtype=complex)
    T[np.diag_indices(dim)] = t[:dim]
    rows, cols = _lower_indices(dim)
    pairs = t[dim:].reshape(-1, 2)
    T[rows, cols] = pairs[:, 0] + 1j * pairs[:, 1]
    return T


def factor_to_params(T) -> np.ndarray:
    T = np.asarray(T, dtype=complex)
    dim = T.shape[0]
    if T.shape != (dim, dim):
        raise ValueError("factor must be square")
    if np.any(np.triu(T, 1) != 0):
        raise ValueError("factor must be lower triangular")
    diag = np.diagonal(T)
    if np.any(diag.imag != 0):
        raise ValueError("factor diagonal must be real")
    rows, cols = _lower_indices(dim)
    lower = T[rows, cols]
    out = np.empty(dim * dim)
    out[:dim] = diag.real
    out[dim::2] = lower.real
    out[dim + 1 :: 2] = lower.imag
    return out


def factor_to_density(T) -> np.ndarray:
    """Return ``T^dagger T / Tr(T^dagger T)``."""
    T = np.asarray(T, dtype=complex)
    rho = T.conj().T @ T
    tr = np.trace(rho).real
    if not tr > 0:
        raise DegenerateFactorError("factor has zero norm; density matrix undefined")
    rho = rho / tr
    # exact Hermiticity, rounding in the product can leave 1 ulp asymmetry
    return 0.5 * (rho + rho.conj().T)


def params_to_density(t, dim: int | None = None) -> np.ndarray:
    return factor_to_density(params_to_factor(t, dim))


def density_to_params(rho, floor: float = 0.0) -> np.ndarray:
    """Invert :func:`factor_to_density` for a positive matrix.

    ``rho = T^dagger T`` with ``T`` lower triangular is obtained from the ordinary
    (upper) Cholesky factor of the index-reversed matrix.  ``floor`` is added to the
    diagonal, which allows rank-deficient inputs.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    A = rho + floor * np.eye(dim)
    # J A J = L L^dagger with J the exchange matrix, so A = T^dagger T for the
    # lower-triangular T = J L^dagger J
    J = np.eye(dim)[::-1]
    L = np.linalg.cholesky(J @ A @ J)
    T = np.tril(J @ L.conj().T @ J)
    T[np.diag_indices(dim)] = np.diagonal(T).real
    return factor_to_params(T)


def eigenvalues_hermitian(A, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(0.5 * (A + A.conj().T))


def is_density_matrix(rho, atol_herm=1e-12, atol_eig=1e-10, atol_trace=1e-8) -> bool:
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > atol_herm:
        return False
    if abs(np.trace(rho).real - 1.0) > atol_trace:
        return False
    return bool(eigenvalues_hermitian(rho)[0] >= -atol_eig)


def fidelity(rho, psi) -> float:
    """Overlap ``<psi|rho|psi>`` of a density matrix with a pure state."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex).ravel()
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"dimension mismatch: rho {rho.shape}, psi {psi.size}")
    value = float(np.real(psi.conj() @ rho @ psi))
    if value < -1e-12 or value > 1 + 1e-12:
        raise ValueError(f"overlap {value} outside [0, 1]; is psi normalized?")
    return min(max(value, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    ev = eigenvalues_hermitian(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(ev)))

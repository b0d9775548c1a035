"""Hot loops of the likelihood: batched positive-form probabilities and their gradient.

Two interchangeable backends are provided.  ``numba`` (default when importable)
compiles explicit loops that exploit the triangular shape of ``T``; ``numpy`` uses
vectorized ``einsum``/``matmul``.  Select with the environment variable
``QMLE_BACKEND=numba|numpy`` or :func:`set_backend`.  ``QMLE_THREADS`` caps the
number of numba worker threads.

Both backends reduce over records in fixed-size chunks whose partial sums are
combined in a fixed order, so results do not depend on the thread count.
"""

from __future__ import annotations

import os

import numpy as np

CHUNK = 256

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_backend = os.environ.get("QMLE_BACKEND", "numba" if HAVE_NUMBA else "numpy").lower()
if _backend not in ("numba", "numpy"):
    raise ImportError(f"QMLE_BACKEND must be 'numba' or 'numpy', got {_backend!r}")
if _backend == "numba" and not HAVE_NUMBA:
    _backend = "numpy"


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def get_backend() -> str:
    return _backend


def configure_threads() -> int | None:
    """Apply ``QMLE_THREADS`` to numba; returns the thread count in effect."""
    if not HAVE_NUMBA:
        return None
    limit = os.environ.get("QMLE_THREADS")
    if limit:
        numba.set_num_threads(max(1, min(int(limit), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


# -- numpy ------------------------------------------------------------------------------


def _probabilities_numpy(T, V):
    W = V @ T.T
    return np.einsum("ijk->i", W.real**2 + W.imag**2)


def _weighted_gram_numpy(V, w):
    n = V.shape[0]
    dim = V.shape[2]
    out = np.zeros((dim, dim), dtype=complex)
    for start in range(0, n, CHUNK):
        sl = slice(start, start + CHUNK)
        Vw = V[sl] * w[sl, None, None]
        out += np.einsum("ijm,ijn->mn", Vw, V[sl].conj())
    return out


# -- numba ------------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _probabilities_numba(T, V, start):
        n, nj, dim = V.shape
        out = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for j in range(nj):
                s = start[i, j]
                for k in range(s, dim):
                    re = 0.0
                    im = 0.0
                    for m in range(s, k + 1):  # T lower triangular, v zero below s
                        t = T[k, m]
                        v = V[i, j, m]
                        re += t.real * v.real - t.imag * v.imag
                        im += t.real * v.imag + t.imag * v.real
                    acc += re * re + im * im
            out[i] = acc
        return out

    @njit(parallel=True, cache=True)
    def _weighted_gram_numba(V, w, start, chunk):
        n, nj, dim = V.shape
        nchunks = (n + chunk - 1) // chunk
        partial = np.zeros((nchunks, dim, dim), dtype=np.complex128)
        for c in prange(nchunks):
            stop = min(n, (c + 1) * chunk)
            for i in range(c * chunk, stop):
                wi = w[i]
                if wi == 0.0:
                    continue
                for j in range(nj):
                    s = start[i, j]
                    for m in range(s, dim):
                        vm = V[i, j, m] * wi
                        for q in range(s, dim):
                            partial[c, m, q] += vm * V[i, j, q].conjugate()
        out = np.zeros((dim, dim), dtype=np.complex128)
        for c in range(nchunks):
            out += partial[c]
        return out


# -- dispatch ---------------------------------------------------------------------------


def leading_zeros(V: np.ndarray) -> np.ndarray:
    """Index of the first nonzero component of every ``v_ij`` (``D`` if all zero)."""
    nz = V != 0
    return np.where(nz.any(axis=2), nz.argmax(axis=2), V.shape[2]).astype(np.int64)


def probabilities(T: np.ndarray, V: np.ndarray, start: np.ndarray | None = None) -> np.ndarray:
    """``p_i = sum_j ||T v_ij||^2`` for lower-triangular ``T`` and ``V`` of shape ``(N, J, D)``.

    ``start`` (from :func:`leading_zeros`) lets the compiled loop skip the zero head
    of each vector; noise order ``j`` of a homodyne vector starts at Fock level ``j``.
    """
    T = np.ascontiguousarray(T, dtype=np.complex128)
    if _backend == "numba":
        return _probabilities_numba(T, V, leading_zeros(V) if start is None else start)
    return _probabilities_numpy(T, V)


def weighted_gram(V: np.ndarray, w: np.ndarray, start: np.ndarray | None = None) -> np.ndarray:
    """``R = sum_i w_i sum_j |v_ij><v_ij|``."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if _backend == "numba":
        return _weighted_gram_numba(V, w, leading_zeros(V) if start is None else start, CHUNK)
    return _weighted_gram_numpy(V, w)


configure_threads()

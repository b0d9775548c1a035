"""Asymptotic error bars of the maximum-likelihood estimate.

Around the maximum, ``exp L`` is approximately Gaussian with curvature matrix
``G = -d^2 L / dt dt'``.  Restricting to the unit-trace surface, whose normal is
``u = d Tr(T^dagger T) / dt = 2 t``, gives the parameter covariance

    V = G^-1 - G^-1 u u^T G^-1 / (u^T G^-1 u),

which is then pushed through ``rho = T^dagger T`` by linear error propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import params_to_factor

__all__ = [
    "NotAtMaximumError",
    "CovarianceReport",
    "hessian_at_optimum",
    "covariance",
    "density_jacobian",
    "propagate_to_density",
    "analyze",
]

# Null-space cut for the pseudo-inverse, relative to the largest eigenvalue of G.
# The finite-difference Hessian is only accurate to about step**2 ~ 1e-8 relative,
# so exactly flat directions show up at that level rather than at rounding level.
NULL_RTOL = 1e-7
# Curvature more negative than this (relative) means the point is not a maximum.
NEGATIVE_RTOL = 1e-3


class NotAtMaximumError(ValueError):
    """``u^T G^-1 u <= 0``: the point is not a constrained maximum."""


@dataclass
class CovarianceReport:
    G: np.ndarray
    u: np.ndarray
    V: np.ndarray
    std_re: np.ndarray
    std_im: np.ndarray
    condition_number: float
    null_directions: int
    flagged: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "std_re": self.std_re.tolist(),
            "std_im": self.std_im.tolist(),
            "condition_number": self.condition_number,
            "null_directions": self.null_directions,
        }


def hessian_at_optimum(f, t, rel_step: float = 1e-4, return_flags: bool = False):
    """Central finite-difference Hessian of ``-f`` at ``t``, symmetrized.

    ``f`` is the log-likelihood; it may expose ``evaluate(t) -> (value, n_clamped)``,
    in which case entries whose stencil touched a clamped probability are flagged.
    """
    t = np.asarray(t, dtype=float)
    n = t.size
    h = rel_step * np.maximum(1.0, np.abs(t))
    evaluate = getattr(f, "evaluate", None)
    flags = np.zeros((n, n), dtype=bool)

    def value(x):
        if evaluate is None:
            return f(x), False
        v, clamped = evaluate(x)
        return v, clamped > 0

    f0, c0 = value(t)
    plus = np.empty(n)
    minus = np.empty(n)
    cplus = np.zeros(n, dtype=bool)
    cminus = np.zeros(n, dtype=bool)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        plus[i], cplus[i] = value(t + e)
        minus[i], cminus[i] = value(t - e)
    H = np.empty((n, n))
    for i in range(n):
        H[i, i] = (plus[i] - 2 * f0 + minus[i]) / h[i] ** 2
        flags[i, i] = c0 or cplus[i] or cminus[i]
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            fpp, a = value(t + ei + ej)
            fpm, b = value(t + ei - ej)
            fmp, c = value(t - ei + ej)
            fmm, d = value(t - ei - ej)
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
            flags[i, j] = flags[j, i] = a or b or c or d
    G = -H
    G = 0.5 * (G + G.T)
    if return_flags:
        return G, flags
    return G


def _pinv_sym(G, rtol):
    w, vecs = np.linalg.eigh(G)
    scale = np.max(np.abs(w))
    if w[0] < -NEGATIVE_RTOL * scale:
        raise NotAtMaximumError(f"curvature matrix has eigenvalue {w[0]:.3e}; not a maximum")
    # flat directions can come out slightly negative when the optimum is inexact
    keep = w > rtol * scale
    inv = (vecs[:, keep] / w[keep]) @ vecs[:, keep].T
    kept = np.abs(w[keep])
    cond = float(kept.max() / kept.min()) if kept.size else float("inf")
    return inv, int((~keep).sum()), cond


def covariance(G, u, rtol: float = NULL_RTOL):
    """Constrained covariance ``V``; returns ``(V, null_directions, condition_number)``.

    Eigen-directions of ``G`` below ``rtol`` times the largest eigenvalue are treated
    as a null space and excluded from the (pseudo-)inverse.  Raises
    :class:`NotAtMaximumError` for clearly negative curvature or ``u^T G^-1 u <= 0``.
    """
    G = np.asarray(G, dtype=float)
    u = np.asarray(u, dtype=float)
    Ginv, nnull, cond = _pinv_sym(G, rtol)
    Gu = Ginv @ u
    denom = float(u @ Gu)
    if not denom > 0:
        raise NotAtMaximumError(f"u^T G^-1 u = {denom:.3e} <= 0; not a constrained maximum")
    V = Ginv - np.outer(Gu, Gu) / denom
    return 0.5 * (V + V.T), nnull, cond


def density_jacobian(t) -> np.ndarray:
    """Jacobian of ``rho = T^dagger T`` with respect to the packed parameters.

    Returns a complex array ``J[m, n, p] = d rho_mn / d t_p``.
    """
    t = np.asarray(t, dtype=float)
    T = params_to_factor(t)
    dim = T.shape[0]
    J = np.empty((dim, dim, t.size), dtype=complex)
    for p in range(t.size):
        e = np.zeros_like(t)
        e[p] = 1.0
        dT = params_to_factor(e, dim)
        J[:, :, p] = dT.conj().T @ T + T.conj().T @ dT
    return J


def propagate_to_density(V, t):
    """Standard deviations of ``Re rho_mn`` and ``Im rho_mn`` given parameter covariance ``V``."""
    J = density_jacobian(t)
    Jr, Ji = J.real, J.imag
    var_re = np.einsum("mnp,pq,mnq->mn", Jr, V, Jr)
    var_im = np.einsum("mnp,pq,mnq->mn", Ji, V, Ji)
    return np.sqrt(np.clip(var_re, 0, None)), np.sqrt(np.clip(var_im, 0, None))


def analyze(loglik, t, rel_step: float = 1e-4, rtol: float = NULL_RTOL) -> CovarianceReport:
    """Hessian, constrained covariance and density-matrix error bars at an optimum."""
    t = np.asarray(t, dtype=float)
    G, flags = hessian_at_optimum(loglik, t, rel_step, return_flags=True)
    u = 2.0 * t
    V, nnull, cond = covariance(G, u, rtol)
    std_re, std_im = propagate_to_density(V, t)
    return CovarianceReport(G, u, V, std_re, std_im, cond, nnull, flags if flags.any() else None)

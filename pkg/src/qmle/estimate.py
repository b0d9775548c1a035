"""Maximum-likelihood reconstruction over the Cholesky-factor parameters.

The objective is the log-likelihood with a fixed Lagrange term,

    L(t) = sum_i ln Tr(T^dagger T F_i) - N Tr(T^dagger T),

whose maximizer automatically has ``Tr(T^dagger T) = 1``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .linalg import (
    DegenerateFactorError,
    density_to_params,
    eigenvalues_hermitian,
    factor_to_density,
    params_to_factor,
)
from .povm import Records, SchemeConfig, positive_form_vectors

__all__ = [
    "PROB_FLOOR",
    "OptimizerKind",
    "OptimizerConfig",
    "EstimationResult",
    "LogLikelihood",
    "log_likelihood",
    "gradient_log_likelihood",
    "nelder_mead",
    "mle_estimate",
]

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-300


class OptimizerKind(str, enum.Enum):
    SIMPLEX = "simplex"
    GRADIENT = "gradient"


@dataclass
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.SIMPLEX
    max_iter: int | None = None  # per restart; default 200 * M**2
    ftol: float = 1e-8
    step: float = 0.1
    restarts: int = 3
    initial: np.ndarray | None = None  # starting parameter vector; default I / sqrt(M)
    resolve_ties: bool = True

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)
        if self.ftol <= 0 or self.step <= 0:
            raise ValueError("tolerances and step must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class EstimationResult:
    rho: np.ndarray
    params: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    evaluations: int = 0
    optimizer: str = "simplex"
    history: list = field(default_factory=list, repr=False)
    raw_trace: float = 1.0  # Tr(T^dagger T) at the optimizer's point, before normalization

    def to_json(self) -> dict:
        return {
            "rho_re": self.rho.real.tolist(),
            "rho_im": self.rho.imag.tolist(),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "params": self.params.tolist(),
            "raw_trace": self.raw_trace,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EstimationResult":
        rho = np.array(data["rho_re"]) + 1j * np.array(data["rho_im"])
        return cls(
            rho=rho,
            params=np.array(data["params"], dtype=float),
            loglik=float(data["loglik"]),
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
            raw_trace=float(data.get("raw_trace", 1.0)),
        )


class LogLikelihood:
    """Log-likelihood of a fixed record set as a function of the packed parameters.

    The positive-form vectors of all records are built once at construction.
    """

    def __init__(self, records: Records, cfg: SchemeConfig, vectors: np.ndarray | None = None):
        if len(records) == 0:
            raise ValueError("no records")
        self.cfg = cfg
        self.dim = cfg.dim
        self.n = len(records)
        V = positive_form_vectors(records, cfg) if vectors is None else vectors
        self.V = np.ascontiguousarray(V, dtype=np.complex128)
        if self.V.shape[2] != self.dim:
            raise ValueError("vector dimension does not match the scheme")
        self.start = _kernels.leading_zeros(self.V)
        self.evaluations = 0

    @classmethod
    def from_vectors(cls, V, cfg: SchemeConfig) -> "LogLikelihood":
        obj = cls.__new__(cls)
        obj.cfg = cfg
        obj.dim = cfg.dim
        obj.V = np.ascontiguousarray(V, dtype=np.complex128)
        obj.n = obj.V.shape[0]
        obj.start = _kernels.leading_zeros(obj.V)
        obj.evaluations = 0
        return obj

    def factor(self, t) -> np.ndarray:
        return params_to_factor(t, self.dim)

    def probabilities(self, t) -> np.ndarray:
        return _kernels.probabilities(self.factor(t), self.V, self.start)

    def evaluate(self, t) -> tuple[float, int]:
        """Value and number of records whose probability hit the floor."""
        t = np.asarray(t, dtype=float)
        norm = float(t @ t)
        if norm == 0.0:
            raise DegenerateFactorError("all-zero factor")
        p = self.probabilities(t)
        clamped = p < PROB_FLOOR
        self.evaluations += 1
        return float(np.sum(np.log(np.maximum(p, PROB_FLOOR)))) - self.n * norm, int(clamped.sum())

    def __call__(self, t) -> float:
        return self.evaluate(t)[0]

    def gradient(self, t) -> np.ndarray:
        return self.value_and_gradient(t)[1]

    def value_and_gradient(self, t) -> tuple[float, np.ndarray]:
        """Exact gradient with respect to the packed parameters.

        With ``R = sum_i F_i / p_i`` the matrix derivative is ``2 T R - 2 N T``; the
        packed gradient takes real parts on the diagonal and (Re, Im) below it.
        Records with clamped probability are left out of ``R``.
        """
        t = np.asarray(t, dtype=float)
        T = self.factor(t)
        norm = float(t @ t)
        if norm == 0.0:
            raise DegenerateFactorError("all-zero factor")
        p = _kernels.probabilities(T, self.V, self.start)
        ok = p >= PROB_FLOOR
        w = np.where(ok, 1.0 / np.where(ok, p, 1.0), 0.0)
        R = _kernels.weighted_gram(self.V, w, self.start)
        G = 2.0 * (T @ R) - 2.0 * self.n * T
        self.evaluations += 1
        value = float(np.sum(np.log(np.maximum(p, PROB_FLOOR)))) - self.n * norm
        return value, _pack_matrix_gradient(G)


def _pack_matrix_gradient(G: np.ndarray) -> np.ndarray:
    dim = G.shape[0]
    rows, cols = np.tril_indices(dim, -1)
    out = np.empty(dim * dim)
    out[:dim] = np.diagonal(G).real
    out[dim::2] = G[rows, cols].real
    out[dim + 1 :: 2] = G[rows, cols].imag
    return out


def log_likelihood(t, records: Records, cfg: SchemeConfig) -> float:
    return LogLikelihood(records, cfg)(t)


def gradient_log_likelihood(t, records: Records, cfg: SchemeConfig) -> np.ndarray:
    return LogLikelihood(records, cfg).gradient(t)


# -- optimizers -------------------------------------------------------------------------


@dataclass
class _SimplexRun:
    x: np.ndarray
    fx: float
    iterations: int
    converged: bool
    history: list


def nelder_mead(f, x0, step=0.1, ftol=1e-8, max_iter=1000, history=None) -> _SimplexRun:
    """Downhill simplex minimization of ``f`` starting from an axis-aligned simplex.

    Uses dimension-adapted coefficients (Gao and Han) which behave better than the
    classic ones beyond a handful of parameters.  Converged when, over a full cycle
    of ``n + 1`` iterations, the best value changed by less than ``ftol`` relative
    and the simplex spread in ``f`` is below the same tolerance.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    alpha, gamma = 1.0, 1.0 + 2.0 / n
    rho, sigma = 0.75 - 1.0 / (2 * n), 1.0 - 1.0 / n
    if n == 1:
        gamma, rho, sigma = 2.0, 0.5, 0.5
    sim = np.vstack([x0, x0 + step * np.eye(n)])
    fsim = np.array([f(v) for v in sim])
    history = [] if history is None else history
    tiny = 1e-300
    cycle_best = fsim.min()
    converged = False
    it = 0
    while it < max_iter:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        history.append(float(fsim[0]))
        if (it + 1) % (n + 1) == 0:
            spread = abs(fsim[-1] - fsim[0]) <= ftol * (abs(fsim[0]) + abs(fsim[-1])) / 2 + tiny
            stalled = abs(cycle_best - fsim[0]) <= ftol * abs(fsim[0]) + tiny
            if spread and stalled:
                converged = True
                break
            cycle_best = fsim[0]
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - sim[-1])
        fr = f(xr)
        if fr < fsim[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
                continue
        else:
            xc = centroid - rho * (centroid - sim[-1])
            fc = f(xc)
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
                continue
        sim[1:] = sim[0] + sigma * (sim[1:] - sim[0])
        fsim[1:] = [f(v) for v in sim[1:]]
    best = int(np.argmin(fsim))
    return _SimplexRun(sim[best].copy(), float(fsim[best]), it, converged, history)


def _initial_params(dim: int) -> np.ndarray:
    t = np.zeros(dim * dim)
    t[:dim] = 1.0 / math.sqrt(dim)
    return t


def _run_simplex(L: LogLikelihood, t0, opt: OptimizerConfig, max_iter: int):
    history: list[float] = []
    neg = lambda t: -L(t)  # noqa: E731
    run = nelder_mead(neg, t0, opt.step, opt.ftol, max_iter, history)
    best_x, best_f, total_it = run.x, run.fx, run.iterations
    converged = run.converged
    for _ in range(opt.restarts):
        run = nelder_mead(neg, best_x, opt.step, opt.ftol, max_iter, history)
        total_it += run.iterations
        improved = best_f - run.fx
        if run.fx < best_f:
            best_x, best_f = run.x, run.fx
        converged = run.converged
        if converged and improved <= opt.ftol * abs(best_f):
            break
    # the history holds per-iteration best values of -L; report the best-ever L
    best_ever = np.minimum.accumulate(np.asarray(history)) if history else np.array([best_f])
    return best_x, -best_f, total_it, converged, (-best_ever).tolist()


def _run_gradient(L: LogLikelihood, t0, opt: OptimizerConfig, max_iter: int):
    history: list[float] = []

    def fun(t):
        value, grad = L.value_and_gradient(t)
        return -value, -grad

    def callback(xk):
        history.append(L(xk))

    res = minimize(
        fun,
        t0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iter, "ftol": opt.ftol * 1e-4, "gtol": 1e-9, "maxcor": 30},
    )
    converged = bool(res.success) or (res.status == 2 and res.nit > 0)
    if res.nit >= max_iter:
        converged = False
    best_ever = np.maximum.accumulate(np.asarray(history)) if history else np.array([-res.fun])
    return res.x, -float(res.fun), int(res.nit), converged, best_ever.tolist()


def _hermitian_basis(dim: int) -> np.ndarray:
    """Real coordinates of Hermitian matrices: diagonal, then (Re, Im) of the upper triangle."""
    basis = []
    for k in range(dim):
        E = np.zeros((dim, dim), dtype=complex)
        E[k, k] = 1.0
        basis.append(E)
    for m, n in zip(*np.triu_indices(dim, 1)):
        E = np.zeros((dim, dim), dtype=complex)
        E[m, n] = E[n, m] = 1.0
        basis.append(E)
        E = np.zeros((dim, dim), dtype=complex)
        E[m, n], E[n, m] = 1j, -1j
        basis.append(E)
    return np.array(basis)


def unidentifiable_directions(V: np.ndarray, rel_tol: float = 1e-20) -> np.ndarray:
    """Hermitian matrices ``B`` with ``Tr(B F_i) = 0`` for every record and ``Tr B = 0``.

    These are exact null directions of the likelihood in density-matrix space.
    """
    dim = V.shape[2]
    basis = _hermitian_basis(dim)
    gram = np.zeros((dim * dim, dim * dim))
    trace_row = np.real(np.trace(basis, axis1=1, axis2=2))
    gram += np.outer(trace_row, trace_row)
    for start in range(0, V.shape[0], 4096):
        F = np.einsum("ijm,ijn->imn", V[start : start + 4096], V[start : start + 4096].conj())
        A = np.real(np.einsum("kmn,inm->ik", basis, F))
        gram += A.T @ A
    w, vecs = np.linalg.eigh(gram)
    null = vecs[:, w <= rel_tol * w[-1]]
    return np.einsum("kq,kmn->qmn", null, basis)


def resolve_ties(rho: np.ndarray, t: np.ndarray, V: np.ndarray):
    """Pick a canonical member of a non-unique likelihood maximum.

    When the records cannot distinguish some directions of density-matrix space,
    every state ``rho + sum_k s_k B_k`` that stays positive is equally likely.  The
    estimate is moved along those directions toward the maximally mixed state, as
    far as positivity allows.  Informationally complete data leave it unchanged.
    """
    B = unidentifiable_directions(V)
    if B.shape[0] == 0:
        return rho, t
    dim = rho.shape[0]
    target = np.eye(dim) / dim - rho
    design = B.reshape(B.shape[0], -1).T
    design = np.vstack([design.real, design.imag])
    rhs = np.concatenate([target.ravel().real, target.ravel().imag])
    s, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    step = np.einsum("q,qmn->mn", s, B)

    def psd(f):
        return eigenvalues_hermitian(rho + f * step, tol=1e-8)[0] >= -1e-12

    frac = 1.0
    if not psd(1.0):
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if psd(mid) else (lo, mid)
        frac = lo
    new = rho + frac * step
    new = 0.5 * (new + new.conj().T)
    new /= np.trace(new).real
    try:
        new_t = density_to_params(new)
    except np.linalg.LinAlgError:
        new_t = density_to_params(new, floor=1e-13)
        new_t /= np.linalg.norm(new_t)
    return factor_to_density(params_to_factor(new_t, dim)), new_t


def mle_estimate(records: Records, cfg: SchemeConfig, opt: OptimizerConfig | None = None,
                 likelihood: LogLikelihood | None = None) -> EstimationResult:
    """Maximum-likelihood density matrix for ``records``.

    Non-convergence within the iteration budget is reported through
    ``converged=False``; the best point found is still returned.
    """
    opt = OptimizerConfig() if opt is None else opt
    L = LogLikelihood(records, cfg) if likelihood is None else likelihood
    dim = cfg.dim
    t0 = _initial_params(dim) if opt.initial is None else np.asarray(opt.initial, dtype=float)
    max_iter = opt.max_iter if opt.max_iter is not None else 200 * dim * dim
    if opt.kind is OptimizerKind.SIMPLEX:
        t, value, iters, converged, history = _run_simplex(L, t0, opt, max_iter)
    else:
        t, value, iters, converged, history = _run_gradient(L, t0, opt, max_iter)
    rho = factor_to_density(params_to_factor(t, dim))
    raw_trace = float(t @ t)
    if opt.resolve_ties:
        rho, t = resolve_ties(rho, t, L.V)
    # report the unit-trace point: the exact maximizer has Tr(T^dagger T) = 1
    t = np.asarray(t, dtype=float) / math.sqrt(float(t @ t))
    log.info("%s: L=%.6f after %d iterations (converged=%s)", opt.kind.value, value, iters, converged)
    return EstimationResult(
        rho=rho,
        params=t,
        loglik=value,
        iterations=iters,
        converged=converged,
        evaluations=L.evaluations,
        optimizer=opt.kind.value,
        history=history,
        raw_trace=raw_trace,
    )

"""Monte Carlo generation of measurement records from a known pure state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .povm import (
    Records,
    Scheme,
    SchemeConfig,
    hermite_table,
    spin_coherent,
    standard_grid,
    twomode_rotation_columns,
)
from .states import PureState

__all__ = [
    "SimulationSpec",
    "inverse_cdf_sample",
    "sample_homodyne1",
    "sample_homodyne2",
    "sample_spinpair",
    "sample_spin",
    "simulate",
]

_BATCH = 256


@dataclass
class SimulationSpec:
    """What to simulate.

    ``fixed`` pins measurement settings for tests, e.g. ``{"phi": 0.0}`` for
    single-mode homodyne, ``{"theta": 0.0, "psi0": 0.0, "psi1": 0.0}`` for two-mode
    or ``{"omega": (0, 0)}`` / ``{"omega_a": ..., "omega_b": ...}`` for spins.
    """

    state: PureState | np.ndarray
    config: SchemeConfig
    n: int
    seed: int
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample count must be >= 1")
        self.seed = int(self.seed)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def density(self) -> np.ndarray:
        if isinstance(self.state, PureState):
            return self.state.density()
        return np.asarray(self.state, dtype=complex)


def inverse_cdf_sample(grid: np.ndarray, pdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Draw from tabulated densities by linear interpolation of the trapezoid CDF.

    ``pdf`` has shape ``(..., len(grid))``; ``u`` has the leading shape of ``pdf``.
    """
    pdf = np.atleast_2d(pdf)
    u = np.atleast_1d(u)
    steps = 0.5 * (pdf[:, 1:] + pdf[:, :-1]) * np.diff(grid)
    cdf = np.concatenate([np.zeros((pdf.shape[0], 1)), np.cumsum(steps, axis=1)], axis=1)
    cdf /= cdf[:, -1:]
    out = np.empty(pdf.shape[0])
    for i in range(pdf.shape[0]):
        out[i] = np.interp(u[i], cdf[i], grid)
    return out


def _add_detector_noise(xq, eta, rng):
    if eta == 1.0:
        return xq
    return np.sqrt(eta) * xq + rng.normal(0.0, np.sqrt((1.0 - eta) / 2.0), size=xq.shape)


def _require_pure(spec):
    if not isinstance(spec.state, PureState):
        raise TypeError("homodyne simulation needs a pure state")
    return spec.state


def sample_homodyne1(spec: SimulationSpec) -> Records:
    """Outcomes ``(x, phi)`` with uniform LO phase and Gaussian-smeared quadratures."""
    state = _require_pure(spec)
    cfg = spec.config
    if len(state.dims) != 1 or state.dim != cfg.cutoffs[0]:
        raise ValueError("state does not match the single-mode cutoff")
    rng = spec.rng()
    grid = standard_grid(cfg.cutoffs[0])
    if "phi" in spec.fixed:
        phi = np.full(spec.n, float(spec.fixed["phi"]))
    else:
        phi = rng.uniform(0.0, 2 * np.pi, spec.n)
    u = rng.uniform(size=spec.n)
    psi = hermite_table(state.dim - 1, grid)
    levels = np.arange(state.dim)
    xq = np.empty(spec.n)
    for start in range(0, spec.n, _BATCH):
        sl = slice(start, start + _BATCH)
        # |<x| exp(-i phi n) |psi>|^2 for each record's phase
        amp = (state.amplitudes * np.exp(-1j * np.outer(phi[sl], levels))) @ psi
        xq[sl] = inverse_cdf_sample(grid, amp.real**2 + amp.imag**2, u[sl])
    x = _add_detector_noise(xq, cfg.eta, rng)
    return Records(Scheme.HOMODYNE1, x=x, phi=phi)


def _poincare_angles(n, rng):
    cos_polar = rng.uniform(-1.0, 1.0, n)
    azimuth = rng.uniform(0.0, 2 * np.pi, n)
    overall = rng.uniform(0.0, 2 * np.pi, n)
    theta = 0.5 * np.arccos(cos_polar)
    psi0 = overall
    psi1 = np.mod(overall + azimuth, 2 * np.pi)
    return theta, psi0, psi1


def sample_homodyne2(spec: SimulationSpec) -> Records:
    """Outcomes ``(x, theta, psi0, psi1)`` for single-LO homodyning of two modes.

    Settings are area-uniform on the Poincare sphere (``theta`` is half the polar
    angle, ``psi1 - psi0`` the azimuth) with an independent uniform overall phase.
    """
    state = _require_pure(spec)
    cfg = spec.config
    if state.dims != cfg.cutoffs:
        raise ValueError("state does not match the two-mode cutoffs")
    rng = spec.rng()
    if spec.fixed:
        theta = np.full(spec.n, float(spec.fixed.get("theta", 0.0)))
        psi0 = np.full(spec.n, float(spec.fixed.get("psi0", 0.0)))
        psi1 = np.full(spec.n, float(spec.fixed.get("psi1", 0.0)))
    else:
        theta, psi0, psi1 = _poincare_angles(spec.n, rng)
    u = rng.uniform(size=spec.n)
    K = cfg.cutoffs[0] + cfg.cutoffs[1] - 1
    grid = standard_grid(K)
    psi = hermite_table(K - 1, grid)
    xq = np.empty(spec.n)
    for start in range(0, spec.n, _BATCH):
        sl = slice(start, start + _BATCH)
        cols = twomode_rotation_columns(theta[sl], psi0[sl], psi1[sl], cfg.cutoffs)
        rotated = cols @ state.amplitudes  # (batch, K, K): amplitudes d[n1, n2] of U|psi>
        # mode-1 quadrature marginal: sum over n2 of |sum_n1 d[n1, n2] <x|n1>|^2
        amp = np.einsum("bnm,nx->bmx", rotated, psi)
        xq[sl] = inverse_cdf_sample(grid, np.sum(amp.real**2 + amp.imag**2, axis=1), u[sl])
    x = _add_detector_noise(xq, cfg.eta, rng)
    return Records(Scheme.HOMODYNE2, x=x, theta=theta, psi0=psi0, psi1=psi1)


def _uniform_sphere(n, rng):
    polar = np.arccos(rng.uniform(-1.0, 1.0, n))
    azimuth = rng.uniform(0.0, 2 * np.pi, n)
    return np.stack([polar, azimuth], axis=1)


def _flip(omega):
    return np.stack([np.pi - omega[:, 0], np.mod(omega[:, 1] + np.pi, 2 * np.pi)], axis=1)


def _axes(spec, key, rng):
    if key in spec.fixed:
        return np.tile(np.asarray(spec.fixed[key], dtype=float), (spec.n, 1))
    return _uniform_sphere(spec.n, rng)


def sample_spinpair(spec: SimulationSpec) -> Records:
    """Joint spin measurements along independent random axes.

    The stored directions are the realized ones: an axis is flipped when that
    particle's outcome is "down" along it.
    """
    rho = spec.density()
    if rho.shape != (4, 4):
        raise ValueError("spin-pair simulation needs a two-qubit state")
    rng = spec.rng()
    axis_a = _axes(spec, "omega_a", rng)
    axis_b = _axes(spec, "omega_b", rng)
    u = rng.uniform(size=spec.n)
    options_a = (axis_a, _flip(axis_a))
    options_b = (axis_b, _flip(axis_b))
    probs = np.empty((spec.n, 4))
    for k, (sa, sb) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        va = spin_coherent(options_a[sa])
        vb = spin_coherent(options_b[sb])
        v = (va[:, :, None] * vb[:, None, :]).reshape(-1, 4)
        probs[:, k] = np.real(np.einsum("im,mn,in->i", v.conj(), rho, v))
    probs = np.clip(probs, 0.0, None)
    cdf = np.cumsum(probs, axis=1)
    outcome = np.minimum((u[:, None] * cdf[:, -1:] > cdf).sum(axis=1), 3)
    flip_a = outcome >= 2
    flip_b = (outcome % 2) == 1
    omega_a = np.where(flip_a[:, None], options_a[1], options_a[0])
    omega_b = np.where(flip_b[:, None], options_b[1], options_b[0])
    return Records(Scheme.SPINPAIR, omega_a=omega_a, omega_b=omega_b)


def sample_spin(spec: SimulationSpec) -> Records:
    """Single spin-1/2 measured along random (or fixed) axes; realized directions stored."""
    rho = spec.density()
    if rho.shape != (2, 2):
        raise ValueError("spin simulation needs a qubit state")
    rng = spec.rng()
    axis = _axes(spec, "omega", rng)
    u = rng.uniform(size=spec.n)
    v = spin_coherent(axis)
    p_up = np.clip(np.real(np.einsum("im,mn,in->i", v.conj(), rho, v)), 0.0, 1.0)
    down = u >= p_up
    omega = np.where(down[:, None], _flip(axis), axis)
    return Records(Scheme.SPIN, omega=omega)


def simulate(spec: SimulationSpec) -> Records:
    sampler = {
        Scheme.HOMODYNE1: sample_homodyne1,
        Scheme.HOMODYNE2: sample_homodyne2,
        Scheme.SPINPAIR: sample_spinpair,
        Scheme.SPIN: sample_spin,
    }[spec.config.scheme]
    return sampler(spec)

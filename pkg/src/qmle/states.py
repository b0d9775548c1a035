"""Reference pure states in truncated Fock / spin bases and their quadrature densities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .povm import hermite_table, standard_grid

__all__ = [
    "TruncationWarning",
    "PureState",
    "coherent_state",
    "squeezed_vacuum",
    "squeezing_for_mean_photon",
    "two_mode_bell",
    "singlet",
    "custom_state",
    "state_from_spec",
    "ideal_quadrature_pdf",
    "marginal_quadrature_pdf",
    "quadrature_matrix",
]

TRUNCATION_THRESHOLD = 0.01


class TruncationWarning(UserWarning):
    """More than 1% of a state's norm falls outside the Fock cutoff."""


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...]
    truncated_weight: float = 0.0
    label: str = ""

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != int(np.prod(self.dims)):
            raise ValueError(f"{amps.size} amplitudes do not match dims {self.dims}")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("state has zero norm")
        object.__setattr__(self, "amplitudes", amps / norm)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def joint(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amplitudes.reshape(self.dims)


def _truncate(amps: np.ndarray, total_norm_sq: float, cutoff: int, label: str) -> PureState:
    kept = float(np.sum(np.abs(amps) ** 2))
    lost = max(0.0, 1.0 - kept / total_norm_sq)
    if lost > TRUNCATION_THRESHOLD:
        warnings.warn(
            f"{label}: {lost:.2%} of the norm lies above the cutoff {cutoff}",
            TruncationWarning,
            stacklevel=3,
        )
    return PureState(amps, (cutoff,), truncated_weight=lost, label=label)


def coherent_state(alpha: complex, cutoff: int) -> PureState:
    """Coherent state truncated to ``cutoff`` Fock levels and renormalized."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    alpha = complex(alpha)
    n = np.arange(cutoff)
    if alpha == 0:
        amps = (n == 0).astype(complex)
    else:
        # alpha**n / sqrt(n!) in log magnitude to survive large cutoffs
        logmag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        amps = np.exp(logmag - 0.5 * abs(alpha) ** 2) * np.exp(1j * n * np.angle(alpha))
    return _truncate(amps, 1.0, cutoff, f"coherent({alpha:g})")


def squeezing_for_mean_photon(mean_photon: float) -> float:
    """Squeezing parameter ``r`` with ``sinh(r)**2`` equal to the mean photon number."""
    if mean_photon < 0:
        raise ValueError("mean photon number must be nonnegative")
    return math.asinh(math.sqrt(mean_photon))


def squeezed_vacuum(r: float, cutoff: int) -> PureState:
    """Squeezed vacuum with real squeezing parameter ``r``.

    Amplitudes ``c_2n ~ (-tanh r)**n sqrt((2n)!) / (2**n n!)``: for ``r > 0`` the
    ``phi = 0`` quadrature has the reduced variance ``exp(-2r) / 2``.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    amps = np.zeros(cutoff, dtype=complex)
    tr = math.tanh(r)
    for k in range(0, (cutoff + 1) // 2):
        n = 2 * k
        if n >= cutoff:
            break
        if tr == 0 and k > 0:
            continue
        logc = 0.5 * gammaln(n + 1) - k * math.log(2) - gammaln(k + 1)
        amps[n] = (-tr) ** k * math.exp(logc) / math.sqrt(math.cosh(r))
    return _truncate(amps, 1.0, cutoff, f"squeezed(r={r:g})")


def two_mode_bell(variant: str, cutoff: int) -> PureState:
    """``psi1 = (|00> + |11>)/sqrt2`` or ``psi2 = (|01> + |10>)/sqrt2`` with equal per-mode cutoff."""
    if cutoff < 2:
        raise ValueError("per-mode cutoff must be >= 2")
    amps = np.zeros((cutoff, cutoff), dtype=complex)
    variant = variant.lower()
    if variant == "psi1":
        amps[0, 0] = amps[1, 1] = 1 / math.sqrt(2)
    elif variant == "psi2":
        amps[0, 1] = amps[1, 0] = 1 / math.sqrt(2)
    else:
        raise ValueError(f"unknown Bell variant {variant!r}")
    return PureState(amps, (cutoff, cutoff), label=variant)


def singlet() -> PureState:
    """``(|ud> - |du>)/sqrt2`` in the basis ``{uu, ud, du, dd}``."""
    return PureState(np.array([0, 1, -1, 0]) / math.sqrt(2), (2, 2), label="singlet")


def custom_state(amplitudes, dims) -> PureState:
    amps = [complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a) for a in amplitudes]
    return PureState(np.array(amps), tuple(dims), label="custom")


def state_from_spec(spec: dict, cutoffs) -> PureState:
    """Build a state from a JSON-style description.

    Recognized forms::

        {"type": "coherent", "alpha_re": 1.0, "alpha_im": 0.0}
        {"type": "squeezed", "mean_photon": 0.5}
        {"type": "bell", "variant": "psi1" | "psi2"}
        {"type": "singlet"}
        {"type": "custom", "amplitudes": [...]}   # numbers or [re, im] pairs
    """
    kind = spec.get("type")
    cutoffs = tuple(cutoffs)
    if kind == "coherent":
        alpha = complex(spec.get("alpha_re", 0.0), spec.get("alpha_im", 0.0))
        return coherent_state(alpha, cutoffs[0])
    if kind == "squeezed":
        if "r" in spec:
            return squeezed_vacuum(float(spec["r"]), cutoffs[0])
        return squeezed_vacuum(squeezing_for_mean_photon(float(spec["mean_photon"])), cutoffs[0])
    if kind == "bell":
        if len(set(cutoffs)) != 1:
            raise ValueError("Bell states need equal per-mode cutoffs")
        return two_mode_bell(spec.get("variant", "psi1"), cutoffs[0])
    if kind == "singlet":
        return singlet()
    if kind == "custom":
        return custom_state(spec["amplitudes"], spec.get("dims", cutoffs))
    raise ValueError(f"unknown state type {kind!r}")


def ideal_quadrature_pdf(state: PureState, phi: float, x):
    """Quadrature density ``|<x| exp(-i phi n) |psi>|^2`` of a single-mode state."""
    if len(state.dims) != 1:
        raise ValueError("single-mode state required")
    x = np.asarray(x, dtype=float)
    psi = hermite_table(state.dim - 1, x)
    coeffs = state.amplitudes * np.exp(-1j * phi * np.arange(state.dim))
    amp = np.tensordot(coeffs, psi, axes=1)
    return amp.real**2 + amp.imag**2


def marginal_quadrature_pdf(joint, x):
    """Mode-1 quadrature density of a two-mode state given as ``d[n1, n2]``."""
    joint = np.asarray(joint, dtype=complex)
    psi = hermite_table(joint.shape[0] - 1, np.asarray(x, dtype=float))
    amp = np.tensordot(joint.T, psi, axes=1)  # (n2, x)
    return np.sum(amp.real**2 + amp.imag**2, axis=0)


def quadrature_matrix(cutoff: int, phi: float = 0.0) -> np.ndarray:
    """Truncated matrix of ``(a exp(-i phi) + a^dagger exp(i phi)) / sqrt(2)``."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    x = (a * np.exp(-1j * phi) + a.conj().T * np.exp(1j * phi)) / math.sqrt(2)
    return x


def default_grid(state: PureState) -> np.ndarray:
    return standard_grid(max(state.dims))

"""Measurement records and positive-form outcome probabilities.

Every supported measurement has POVM elements of the form ``F = sum_j |v_j><v_j|``,
so that ``Tr(T^dagger T F) = sum_j ||T v_j||^2`` is a sum of squared moduli and can
never go negative.  :func:`positive_form_vectors` builds the ``v_j`` for a whole
record set once; the likelihood then only needs batched matrix-vector products.

Conventions
-----------
* Fock index ``n`` runs over ``0 .. M-1``; two-mode states are flattened as
  ``n1 * M2 + n2``.
* Quadrature ``x_phi = (a exp(-i phi) + a^dagger exp(i phi)) / sqrt(2)``; the vacuum
  quadrature density is ``exp(-x**2) / sqrt(pi)``.
* Two-mode rotation ``U`` satisfies
  ``U^dagger a U = exp(-i psi0) cos(theta) a + exp(-i psi1) sin(theta) b``.
* Spin states use the basis ``{up, down}`` and pairs ``{uu, ud, du, dd}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import gammaln

__all__ = [
    "Scheme",
    "SchemeConfig",
    "Records",
    "hermite_psi",
    "hermite_table",
    "bcoeff",
    "standard_grid",
    "homodyne1_vectors",
    "homodyne1_prob",
    "twomode_unitary",
    "homodyne2_vectors",
    "homodyne2_prob",
    "spin_coherent",
    "spin_vectors",
    "spinpair_vectors",
    "spinpair_prob",
    "positive_form_vectors",
    "povm_matrix_oracle",
]


class Scheme(str, enum.Enum):
    HOMODYNE1 = "homodyne1"
    HOMODYNE2 = "homodyne2"
    SPINPAIR = "spinpair"
    SPIN = "spin"


SCHEME_COLUMNS = {
    Scheme.HOMODYNE1: ("x", "phi"),
    Scheme.HOMODYNE2: ("x", "theta", "psi0", "psi1"),
    Scheme.SPINPAIR: ("omega_a", "omega_b"),
    Scheme.SPIN: ("omega",),
}

_ANGLE_COLUMNS = ("omega", "omega_a", "omega_b")


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme tag, detector efficiency and Fock cutoff(s)."""

    scheme: Scheme
    eta: float = 1.0
    cutoffs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        cutoffs = self.cutoffs
        if isinstance(cutoffs, (int, np.integer)):
            cutoffs = (int(cutoffs),)
        cutoffs = tuple(int(c) for c in cutoffs)
        if not cutoffs:
            cutoffs = {Scheme.SPINPAIR: (2, 2), Scheme.SPIN: (2,)}.get(self.scheme, ())
        if self.scheme is Scheme.HOMODYNE2 and len(cutoffs) == 1:
            cutoffs = cutoffs * 2
        object.__setattr__(self, "cutoffs", cutoffs)
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.eta}")
        expected = {Scheme.HOMODYNE1: 1, Scheme.HOMODYNE2: 2, Scheme.SPINPAIR: 2, Scheme.SPIN: 1}
        if len(cutoffs) != expected[self.scheme]:
            raise ValueError(f"{self.scheme.value} needs {expected[self.scheme]} cutoff(s), got {cutoffs}")
        if any(c < 1 for c in cutoffs):
            raise ValueError("cutoffs must be >= 1")
        if self.scheme in (Scheme.SPINPAIR, Scheme.SPIN) and any(c != 2 for c in cutoffs):
            raise ValueError("spin schemes have dimension 2 per particle")

    @property
    def dim(self) -> int:
        return int(np.prod(self.cutoffs))


class Records:
    """Columnar storage of measurement outcomes for a single scheme.

    Columns are float arrays; Bloch directions are ``(N, 2)`` arrays of
    ``(polar, azimuth)`` angles.
    """

    def __init__(self, scheme, **columns):
        self.scheme = Scheme(scheme)
        names = SCHEME_COLUMNS[self.scheme]
        if set(columns) != set(names):
            raise ValueError(f"{self.scheme.value} records need columns {names}, got {sorted(columns)}")
        self.columns = {}
        n = None
        for name in names:
            col = np.array(columns[name], dtype=float)
            if name in _ANGLE_COLUMNS:
                col = col.reshape(-1, 2)
            else:
                col = col.reshape(-1)
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name!r} has non-finite entries")
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise ValueError("record columns have different lengths")
            self.columns[name] = col

    def __len__(self):
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name):
        return self.columns[name]

    def take(self, index) -> "Records":
        return Records(self.scheme, **{k: v[index] for k, v in self.columns.items()})

    def row(self, i: int) -> dict:
        return {k: (v[i].tolist() if v.ndim > 1 else float(v[i])) for k, v in self.columns.items()}

    def __repr__(self):
        return f"Records({self.scheme.value}, n={len(self)})"


# -- harmonic-oscillator eigenfunctions -------------------------------------------------


def hermite_table(nmax: int, x) -> np.ndarray:
    """Values ``<n|x>`` for ``n = 0 .. nmax`` as an array of shape ``(nmax + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_psi(n: int, x):
    """Normalized oscillator eigenfunction ``psi_n(x)`` by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    val = hermite_table(n, x)[n]
    return float(val) if np.ndim(val) == 0 else val


def bcoeff(n: int, j: int, eta: float) -> float:
    """``sqrt(binom(n + j, n) * eta**n * (1 - eta)**j)``, evaluated in log space."""
    if n < 0 or j < 0:
        raise ValueError("indices must be nonnegative")
    if eta == 1.0:
        return 1.0 if j == 0 else 0.0
    logb = gammaln(n + j + 1) - gammaln(n + 1) - gammaln(j + 1)
    logb += n * math.log(eta) + j * math.log1p(-eta)
    return float(np.exp(0.5 * logb))


def _bcoeff_table(dim: int, eta: float) -> np.ndarray:
    """``B[j, n] = bcoeff(n, j, eta)`` for ``n + j < dim``."""
    B = np.zeros((dim, dim))
    for j in range(dim):
        for n in range(dim - j):
            B[j, n] = bcoeff(n, j, eta)
    return B


def standard_grid(cutoff: int, points: int = 4001) -> np.ndarray:
    half = math.sqrt(2 * cutoff) + 4.0
    return np.linspace(-half, half, points)


# -- single-mode homodyne ---------------------------------------------------------------


def _homodyne_w(x, dim: int, eta: float, phi=None) -> np.ndarray:
    """Vectors ``w[i, j, m] = B_{m, m-j} <m-j|x_i> exp(i (m-j) phi_i)``; zero for ``m < j``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    njumps = 1 if eta == 1.0 else dim
    psi = hermite_table(dim - 1, x).T  # (N, dim)
    if phi is None:
        amp = psi.astype(complex)
    else:
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        amp = psi * np.exp(1j * np.outer(phi, np.arange(dim)))
    B = _bcoeff_table(dim, eta)
    W = np.zeros((x.size, njumps, dim), dtype=complex)
    for j in range(njumps):
        W[:, j, j:] = amp[:, : dim - j] * B[j, : dim - j]
    return W


def homodyne1_vectors(x, phi, cutoff: int, eta: float) -> np.ndarray:
    """Positive-form vectors for imperfect homodyne detection, shape ``(N, J, cutoff)``.

    ``J = cutoff`` noise orders (a single one for ``eta == 1``).
    """
    return _homodyne_w(x, cutoff, eta, phi)


def homodyne1_prob(T, x: float, phi: float, eta: float) -> float:
    """Probability density ``Tr(T^dagger T H(x; phi))`` for one homodyne outcome."""
    T = np.asarray(T, dtype=complex)
    V = homodyne1_vectors(x, phi, T.shape[0], eta)[0]
    W = V @ T.T
    return float(np.sum(W.real**2 + W.imag**2))


# -- two-mode homodyne ------------------------------------------------------------------


def _beamsplitter_block(total: int, theta) -> np.ndarray:
    """Real rotation block ``D[..., m1, n1] = <m1, N-m1| R^dagger |n1, N-n1>``.

    ``R^dagger a^dagger R = cos a^dagger + sin b^dagger`` and
    ``R^dagger b^dagger R = -sin a^dagger + cos b^dagger``; the matrix is the
    Wigner small-d matrix of spin ``N/2`` written as a finite sum.
    """
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    D = np.zeros(theta.shape + (total + 1, total + 1))
    lf = gammaln(np.arange(total + 1) + 1.0)  # log n!
    for n1 in range(total + 1):
        n2 = total - n1
        for m1 in range(total + 1):
            m2 = total - m1
            norm = math.exp(0.5 * (lf[m1] + lf[m2] - lf[n1] - lf[n2]))
            acc = 0.0
            for k in range(max(0, m1 - n2), min(n1, m1) + 1):
                coef = math.comb(n1, k) * math.comb(n2, m1 - k) * (-1) ** (m1 - k)
                acc = acc + coef * c ** (k + n2 - m1 + k) * s ** (n1 - k + m1 - k)
            D[..., m1, n1] = norm * acc
    return D


def twomode_unitary(theta, psi0, psi1, cutoffs, max_total: int | None = None) -> np.ndarray:
    """Matrix of ``U(theta, psi0, psi1)`` on the truncated two-mode Fock space.

    Elements are exact; ``U`` is unitary on every photon-number block that the
    cutoffs contain completely.  Blocks above ``max_total`` photons are left zero.
    Accepts arrays of angles, in which case a stack of matrices is returned.
    """
    if isinstance(cutoffs, (int, np.integer)):
        cutoffs = (int(cutoffs), int(cutoffs))
    m1max, m2max = cutoffs
    theta, psi0, psi1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (theta, psi0, psi1)))
    U = np.zeros(theta.shape + (m1max * m2max, m1max * m2max), dtype=complex)
    # U = P_left R P_right with P_left = exp(-i psi0 n_a + i psi1 n_b),
    # P_right = exp(-i (psi1 - psi0) n_b)
    top = m1max + m2max - 2 if max_total is None else min(max_total, m1max + m2max - 2)
    for total in range(top + 1):
        states = [(n1, total - n1) for n1 in range(total + 1) if n1 < m1max and total - n1 < m2max]
        if not states:
            continue
        Rdag = _beamsplitter_block(total, theta)
        for m1, m2 in states:
            for n1, n2 in states:
                left = np.exp(-1j * psi0 * m1 + 1j * psi1 * m2)
                right = np.exp(-1j * (psi1 - psi0) * n2)
                # <m|R|n> = <n|R^dagger|m> since the block is real
                U[..., m1 * m2max + m2, n1 * m2max + n2] = left * Rdag[..., n1, m1] * right
    return U


def _twomode_out_cutoff(cutoffs) -> int:
    # highest photon number reachable from the truncated input space, plus one
    return cutoffs[0] + cutoffs[1] - 1


def _twomode_embedding(cutoffs, out_cutoff):
    """Indices of the truncated input basis inside the square out_cutoff**2 space."""
    m1max, m2max = cutoffs
    return np.array([n1 * out_cutoff + n2 for n1 in range(m1max) for n2 in range(m2max)])


def twomode_rotation_columns(theta, psi0, psi1, cutoffs) -> np.ndarray:
    """Columns of ``U`` for every truncated input state, in the enlarged output space.

    Shape ``(..., K, K, M1*M2)`` with ``K = M1 + M2 - 1`` so that no amplitude
    rotated out of the input cutoff is lost.
    """
    K = _twomode_out_cutoff(cutoffs)
    U = twomode_unitary(theta, psi0, psi1, (K, K), max_total=K - 1)
    cols = U[..., _twomode_embedding(cutoffs, K)]
    return cols.reshape(cols.shape[:-2] + (K, K, cols.shape[-1]))


def homodyne2_vectors(x, theta, psi0, psi1, cutoffs, eta: float) -> np.ndarray:
    """Positive-form vectors ``v_{j, n2}[m] = sum_n1 <m|U^dagger|n1 + j, n2> B <n1|x>``."""
    if isinstance(cutoffs, (int, np.integer)):
        cutoffs = (int(cutoffs), int(cutoffs))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    K = _twomode_out_cutoff(cutoffs)
    nmax = K - 1
    W = _homodyne_w(x, K, eta)  # (N, J, K): w[j, o1]
    Ucols = twomode_rotation_columns(theta, psi0, psi1, cutoffs).reshape(x.size, K, K, -1)
    # v[i, j, n2, m] = sum_o1 w[i, j, o1] conj(U[i, o1, n2, m])
    V = np.einsum("ijo,ionm->ijnm", W, Ucols.conj())
    J = W.shape[1]
    keep = [(j, n2) for j in range(J) for n2 in range(K) if j + n2 <= nmax]
    jj, nn = zip(*keep)
    return V[:, list(jj), list(nn), :]


def homodyne2_prob(T, x, theta, psi0, psi1, cutoffs, eta: float) -> float:
    T = np.asarray(T, dtype=complex)
    V = homodyne2_vectors(x, theta, psi0, psi1, cutoffs, eta)[0]
    W = V @ T.T
    return float(np.sum(W.real**2 + W.imag**2))


# -- spins ------------------------------------------------------------------------------


def spin_coherent(omega) -> np.ndarray:
    """``cos(polar/2)|up> + exp(i azimuth) sin(polar/2)|down>``.

    ``omega`` is ``(polar, azimuth)`` or an array of such pairs.
    """
    omega = np.asarray(omega, dtype=float)
    polar, azim = omega[..., 0], omega[..., 1]
    return np.stack([np.cos(polar / 2) + 0j, np.exp(1j * azim) * np.sin(polar / 2)], axis=-1)


def spin_vectors(omega) -> np.ndarray:
    return spin_coherent(np.asarray(omega, dtype=float).reshape(-1, 2))[:, None, :]


def spinpair_vectors(omega_a, omega_b) -> np.ndarray:
    a = spin_coherent(np.asarray(omega_a, dtype=float).reshape(-1, 2))
    b = spin_coherent(np.asarray(omega_b, dtype=float).reshape(-1, 2))
    return (a[:, :, None] * b[:, None, :]).reshape(-1, 1, 4)


def spinpair_prob(T, omega_a, omega_b) -> float:
    """``sum_mu |<mu|T|omega_a, omega_b>|^2``."""
    T = np.asarray(T, dtype=complex)
    if T.shape != (4, 4):
        raise ValueError("spin-pair factor must be 4x4")
    v = spinpair_vectors(omega_a, omega_b)[0, 0]
    w = T @ v
    return float(np.sum(w.real**2 + w.imag**2))


# -- dispatch ---------------------------------------------------------------------------


def positive_form_vectors(records: Records, cfg: SchemeConfig) -> np.ndarray:
    """Stacked vectors ``(N, J, dim)`` with ``Tr(rho F_i) = sum_j <v_ij|rho|v_ij>``."""
    if records.scheme is not cfg.scheme:
        raise ValueError(f"records are {records.scheme.value}, config is {cfg.scheme.value}")
    if cfg.scheme is Scheme.HOMODYNE1:
        return homodyne1_vectors(records["x"], records["phi"], cfg.cutoffs[0], cfg.eta)
    if cfg.scheme is Scheme.HOMODYNE2:
        return homodyne2_vectors(
            records["x"], records["theta"], records["psi0"], records["psi1"], cfg.cutoffs, cfg.eta
        )
    if cfg.scheme is Scheme.SPINPAIR:
        return spinpair_vectors(records["omega_a"], records["omega_b"])
    return spin_vectors(records["omega"])


# -- independent oracle -----------------------------------------------------------------


def _quadrature_povm_matrix(x: float, cutoff: int, eta: float, grid=None) -> np.ndarray:
    """``<m|H(x; 0)|n>`` by quadrature of the Gaussian-smeared position projector."""
    if not 0.0 < eta < 1.0:
        raise ValueError("oracle requires 0 < eta < 1")
    if grid is None:
        grid = standard_grid(cutoff)
    psi = hermite_table(cutoff - 1, grid)
    kernel = np.exp(-((x - np.sqrt(eta) * grid) ** 2) / (1.0 - eta)) / np.sqrt(np.pi * (1.0 - eta))
    integrand = psi[:, None, :] * psi[None, :, :] * kernel
    return simpson(integrand, x=grid, axis=-1)


def povm_matrix_oracle(record: dict, cfg: SchemeConfig) -> np.ndarray:
    """Direct matrix of the POVM element for one record (test-scale only).

    Homodyne elements are integrated numerically from the Gaussian-smeared quadrature
    projector; the two-mode element is the single-mode one conjugated by the rotation;
    spin elements are rank-one projectors.
    """
    if cfg.scheme is Scheme.HOMODYNE1:
        M = cfg.cutoffs[0]
        H0 = _quadrature_povm_matrix(record["x"], M, cfg.eta)
        phase = np.exp(1j * record["phi"] * np.arange(M))
        return phase[:, None] * H0 * phase.conj()[None, :]
    if cfg.scheme is Scheme.HOMODYNE2:
        K = _twomode_out_cutoff(cfg.cutoffs)
        H1 = np.kron(_quadrature_povm_matrix(record["x"], K, cfg.eta), np.eye(K))
        U = twomode_unitary(record["theta"], record["psi0"], record["psi1"], (K, K), max_total=K - 1)
        U = U[:, _twomode_embedding(cfg.cutoffs, K)]
        return U.conj().T @ H1 @ U
    if cfg.scheme is Scheme.SPINPAIR:
        v = np.kron(spin_coherent(record["omega_a"]), spin_coherent(record["omega_b"]))
    else:
        v = spin_coherent(record["omega"])
    return np.outer(v, v.conj())

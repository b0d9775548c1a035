import math

import numpy as np
import pytest
from scipy.integrate import simpson
from scipy.linalg import expm
from scipy.special import comb, eval_hermite

from qmle.linalg import factor_to_density, params_to_factor
from qmle.povm import (
    Records,
    Scheme,
    SchemeConfig,
    bcoeff,
    hermite_psi,
    hermite_table,
    homodyne1_prob,
    homodyne1_vectors,
    homodyne2_prob,
    homodyne2_vectors,
    positive_form_vectors,
    povm_matrix_oracle,
    spin_coherent,
    spinpair_prob,
    standard_grid,
    twomode_unitary,
)
from qmle.states import coherent_state


def psi_scipy(n, x):
    return np.exp(-x**2 / 2) * eval_hermite(n, x) / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))


def random_factor(rng, dim):
    return params_to_factor(rng.normal(size=dim * dim))


def ladder_ops(cutoff):
    a1 = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    eye = np.eye(cutoff)
    return np.kron(a1, eye), np.kron(eye, a1)


def expm_unitary(theta, psi0, psi1, cutoff):
    a, b = ladder_ops(cutoff)
    na, nb = a.conj().T @ a, b.conj().T @ b
    return (expm(-1j * (psi0 * na - psi1 * nb))
            @ expm(theta * (a.conj().T @ b - a @ b.conj().T))
            @ expm(-1j * (psi1 - psi0) * nb))


# -- config and records -----------------------------------------------------------------


def test_scheme_config_validation():
    assert SchemeConfig("homodyne2", 0.9, (3,)).cutoffs == (3, 3)
    assert SchemeConfig("spinpair").dim == 4
    assert SchemeConfig("homodyne1", 0.8, 6).dim == 6
    with pytest.raises(ValueError):
        SchemeConfig("homodyne1", 0.0, (4,))
    with pytest.raises(ValueError):
        SchemeConfig("homodyne1", 1.2, (4,))
    with pytest.raises(ValueError):
        SchemeConfig("spinpair", 1.0, (3, 3))
    with pytest.raises(ValueError):
        SchemeConfig("homodyne1", 1.0, ())


def test_records_validation():
    rec = Records("homodyne1", x=[0.1, 0.2], phi=[0.0, 1.0])
    assert len(rec) == 2 and rec.row(1) == {"x": 0.2, "phi": 1.0}
    with pytest.raises(ValueError):
        Records("homodyne1", x=[0.1])
    with pytest.raises(ValueError):
        Records("homodyne1", x=[0.1, 0.2], phi=[0.0])
    with pytest.raises(ValueError):
        Records("homodyne1", x=[np.nan], phi=[0.0])
    with pytest.raises(ValueError):
        positive_form_vectors(rec, SchemeConfig("spin"))


# -- Hermite functions and binomial weights ---------------------------------------------


def test_hermite_matches_scipy():
    x = np.linspace(-6, 6, 301)
    table = hermite_table(20, x)
    for n in range(21):
        assert np.allclose(table[n], psi_scipy(n, x), atol=1e-12)
    assert hermite_psi(3, 0.4) == pytest.approx(psi_scipy(3, 0.4), abs=1e-14)
    with pytest.raises(ValueError):
        hermite_psi(-1, 0.0)


def test_hermite_orthonormal_at_high_order():
    # the recurrence stays accurate where explicit polynomials overflow
    x = np.linspace(-25, 25, 20001)
    table = hermite_table(150, x)
    # trapezoid weights are spectrally accurate for these rapidly decaying integrands
    gram = (table * (x[1] - x[0])) @ table.T
    assert np.allclose(gram, np.eye(151), atol=1e-8)
    assert np.all(np.isfinite(hermite_table(400, np.array([0.0, 30.0]))))


@pytest.mark.parametrize("eta", [0.3, 0.8, 0.95])
def test_bcoeff(eta):
    for n in range(8):
        for j in range(8):
            direct = math.sqrt(comb(n + j, n) * eta**n * (1 - eta) ** j)
            assert bcoeff(n, j, eta) == pytest.approx(direct, rel=1e-12)
    # each input photon number m splits binomially over the surviving count
    for m in range(10):
        assert sum(bcoeff(m - j, j, eta) ** 2 for j in range(m + 1)) == pytest.approx(1.0, abs=1e-12)
    assert bcoeff(3, 0, 1.0) == 1.0 and bcoeff(3, 2, 1.0) == 0.0
    assert bcoeff(500, 500, 0.5) > 0


# -- single-mode homodyne ---------------------------------------------------------------


def test_homodyne_vector_shapes():
    assert homodyne1_vectors([0.1, 0.2, 0.3], [0, 1, 2], 5, 0.8).shape == (3, 5, 5)
    assert homodyne1_vectors([0.1], [0], 5, 1.0).shape == (1, 1, 5)


def test_homodyne1_ideal_matches_wavefunction(rng):
    # eta = 1: probability density is |<x| exp(-i phi n) psi>|^2 for pure input
    for _ in range(10):
        c = rng.normal(size=5) + 1j * rng.normal(size=5)
        c /= np.linalg.norm(c)
        x, phi = rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi)
        amp = sum(c[n] * np.exp(-1j * n * phi) * psi_scipy(n, x) for n in range(5))
        rho = np.outer(c, c.conj())
        V = homodyne1_vectors(x, phi, 5, 1.0)[0]
        p = np.real(np.einsum("jm,mn,jn->", V.conj(), rho, V))
        assert p == pytest.approx(abs(amp) ** 2, rel=1e-10, abs=1e-14)


def test_homodyne1_normalized_and_phase_covariant(rng):
    grid = standard_grid(6, 6001)
    T = random_factor(rng, 6)
    rho = factor_to_density(T)
    T = T / math.sqrt(np.trace(T.conj().T @ T).real)
    for eta in (0.6, 1.0):
        dens = [homodyne1_prob(T, x, 0.7, eta) for x in grid]
        assert simpson(dens, x=grid) == pytest.approx(1.0, abs=1e-9)
    # rotating the state by exp(-i s n) shifts the LO phase
    s = 0.9
    R = np.diag(np.exp(-1j * s * np.arange(6)))
    rho_rot = R @ rho @ R.conj().T
    V1 = homodyne1_vectors(0.3, 0.5, 6, 0.8)[0]
    V2 = homodyne1_vectors(0.3, 0.5 + s, 6, 0.8)[0]
    p1 = np.real(np.einsum("jm,mn,jn->", V1.conj(), rho_rot, V1))
    p2 = np.real(np.einsum("jm,mn,jn->", V2.conj(), rho, V2))
    assert p1 == pytest.approx(p2, rel=1e-12)


def test_homodyne1_against_oracle(rng):
    cfg = SchemeConfig("homodyne1", 0.8, (6,))
    for _ in range(10):
        T = random_factor(rng, 6)
        rho = T.conj().T @ T
        x, phi = rng.uniform(-3, 3), rng.uniform(0, 2 * np.pi)
        F = povm_matrix_oracle({"x": x, "phi": phi}, cfg)
        assert homodyne1_prob(T, x, phi, 0.8) == pytest.approx(np.trace(rho @ F).real, rel=1e-9)


# -- two-mode rotation ------------------------------------------------------------------


def test_twomode_unitary_matches_matrix_exponential(rng):
    C = 8
    low = [n1 * C + n2 for n1 in range(4) for n2 in range(4) if n1 + n2 < C]
    for _ in range(5):
        th, p0, p1 = rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)
        U = twomode_unitary(th, p0, p1, (C, C))
        assert np.allclose(U[np.ix_(low, low)], expm_unitary(th, p0, p1, C)[np.ix_(low, low)], atol=1e-12)


def test_twomode_unitary_mode_transformation(rng):
    # U^dagger a U = exp(-i psi0) cos(theta) a + exp(-i psi1) sin(theta) b on complete blocks
    C = 7
    a, b = ladder_ops(C)
    low = [n1 * C + n2 for n1 in range(C) for n2 in range(C) if n1 + n2 <= C - 2]
    th, p0, p1 = 0.6, 1.1, -0.4
    U = twomode_unitary(th, p0, p1, (C, C))
    lhs = U.conj().T @ a @ U
    rhs = np.exp(-1j * p0) * np.cos(th) * a + np.exp(-1j * p1) * np.sin(th) * b
    assert np.allclose(lhs[np.ix_(low, low)], rhs[np.ix_(low, low)], atol=1e-12)
    full = [n1 * C + n2 for n1 in range(C) for n2 in range(C) if n1 + n2 <= C - 1]
    Ub = U[np.ix_(full, full)]
    assert np.allclose(Ub.conj().T @ Ub, np.eye(len(full)), atol=1e-12)


def test_twomode_unitary_vectorized():
    th = np.array([0.1, 0.5])
    U = twomode_unitary(th, 0.2, 0.3, (3, 3))
    assert U.shape == (2, 9, 9)
    assert np.allclose(U[1], twomode_unitary(0.5, 0.2, 0.3, (3, 3)))


def test_homodyne2_theta_zero_reduces_to_single_mode(rng):
    # theta = 0 measures mode 1 only: the density is the mode-1 marginal
    T = random_factor(rng, 4)
    rho = factor_to_density(T)
    rho1 = np.einsum("aibi->ab", rho.reshape(2, 2, 2, 2))
    p2 = homodyne2_prob(T, 0.4, 0.0, 0.3, 0.3, (2, 2), 0.9) / np.trace(T.conj().T @ T).real
    V = homodyne1_vectors(0.4, 0.3, 2, 0.9)[0]
    p1 = np.real(np.einsum("jm,mn,jn->", V.conj(), rho1, V))
    assert p2 == pytest.approx(p1, rel=1e-10)


def test_homodyne2_normalized(rng):
    T = random_factor(rng, 9)
    T = T / math.sqrt(np.trace(T.conj().T @ T).real)
    grid = standard_grid(5, 4001)
    V = homodyne2_vectors(grid, np.full(grid.size, 0.8), 0.3, 1.2, (3, 3), 0.85)
    W = V @ T.T
    dens = np.sum(np.abs(W) ** 2, axis=(1, 2))
    assert simpson(dens, x=grid) == pytest.approx(1.0, abs=1e-9)


def test_homodyne2_against_oracle(rng):
    cfg = SchemeConfig("homodyne2", 0.9, (2, 3))
    for _ in range(5):
        T = random_factor(rng, 6)
        rho = T.conj().T @ T
        rec = {"x": rng.uniform(-2, 2), "theta": rng.uniform(0, np.pi / 2),
               "psi0": rng.uniform(0, 2 * np.pi), "psi1": rng.uniform(0, 2 * np.pi)}
        F = povm_matrix_oracle(rec, cfg)
        p = homodyne2_prob(T, rec["x"], rec["theta"], rec["psi0"], rec["psi1"], cfg.cutoffs, cfg.eta)
        assert p == pytest.approx(np.trace(rho @ F).real, rel=1e-9)


# -- spins ------------------------------------------------------------------------------


def test_spin_coherent_states():
    assert np.allclose(spin_coherent([0, 0]), [1, 0])
    assert np.allclose(spin_coherent([np.pi, 0]), [0, 1], atol=1e-15)
    v = spin_coherent([np.pi / 2, np.pi / 2])
    sy = np.array([[0, -1j], [1j, 0]])
    assert np.real(v.conj() @ sy @ v) == pytest.approx(1.0)


def test_spinpair_singlet_anticorrelation(rng):
    psi = np.array([0, 1, -1, 0]) / math.sqrt(2)
    for _ in range(10):
        om = np.array([rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)])
        flipped = np.array([np.pi - om[0], om[1] + np.pi])
        rho = np.outer(psi, psi.conj())
        v_same = np.kron(spin_coherent(om), spin_coherent(om))
        v_opp = np.kron(spin_coherent(om), spin_coherent(flipped))
        assert np.real(v_same.conj() @ rho @ v_same) == pytest.approx(0.0, abs=1e-14)
        assert np.real(v_opp.conj() @ rho @ v_opp) == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        spinpair_prob(np.eye(2), [0, 0], [0, 0])


# -- worked examples --------------------------------------------------------------------


def test_hermite_examples():
    assert hermite_psi(0, 0.0) == pytest.approx(math.pi**-0.25, abs=1e-15)
    assert hermite_psi(0, 0.0) == pytest.approx(0.751126, abs=1e-6)
    assert hermite_psi(1, 0.0) == 0.0
    grid = standard_grid(20)
    table = hermite_table(20, grid)
    gram = np.array([[simpson(table[n] * table[m], x=grid) for m in range(21)] for n in range(21)])
    assert np.allclose(gram, np.eye(21), atol=1e-8)
    big = hermite_table(100, np.linspace(-20, 20, 401))
    assert np.all(np.isfinite(big)) and np.abs(big).max() < 1.0


def test_bcoeff_examples():
    assert bcoeff(2, 1, 0.8) == pytest.approx(math.sqrt(0.384), rel=1e-12)
    assert bcoeff(2, 1, 0.8) == pytest.approx(0.61968, abs=1e-5)
    for j in range(6):
        assert bcoeff(0, j, 0.7) == pytest.approx(0.3 ** (j / 2), rel=1e-12)


def _vacuum_factor(dim):
    T = np.zeros((dim, dim), dtype=complex)
    T[0, 0] = 1.0
    return T


def test_homodyne1_vacuum_with_loss():
    T = _vacuum_factor(5)
    for x in (-2.0, -0.3, 0.0, 1.1):
        for phi in (0.0, 1.3):
            assert homodyne1_prob(T, x, phi, 0.8) == pytest.approx(math.exp(-x * x) / math.sqrt(math.pi), rel=1e-12)


@pytest.mark.parametrize("phi", [0.0, 0.7, 2.0])
def test_homodyne1_coherent_is_gaussian(phi):
    alpha, eta, M = 1.0, 0.8, 30
    c = coherent_state(alpha, M).amplitudes
    T = np.zeros((M, M), dtype=complex)
    T[0] = c.conj()  # T^dagger T = |c><c|
    mean = math.sqrt(2 * eta) * alpha * math.cos(phi)
    for x in np.linspace(-2, 3, 11):
        gauss = math.exp(-((x - mean) ** 2)) / math.sqrt(math.pi)
        assert homodyne1_prob(T, x, phi, eta) == pytest.approx(gauss, abs=1e-6)


def test_twomode_unitary_examples():
    C = 4
    U0 = twomode_unitary(0.0, 0.8, 1.9, (C, C))
    assert np.allclose(np.abs(U0), np.eye(C * C), atol=1e-14)
    for th in (0.3, 1.0):
        U = twomode_unitary(th, 0.4, 2.2, (C, C))
        i10, i01 = 1 * C + 0, 0 * C + 1
        assert abs(U[i10, i10]) ** 2 == pytest.approx(math.cos(th) ** 2, abs=1e-12)
        assert abs(U[i10, i01]) ** 2 == pytest.approx(math.sin(th) ** 2, abs=1e-12)


def test_homodyne2_vacuum_marginal():
    T = _vacuum_factor(9)
    for x in (-1.5, 0.0, 0.6):
        for psi0, psi1 in ((0.0, 0.0), (1.2, -0.5)):
            p = homodyne2_prob(T, x, 0.0, psi0, psi1, (3, 3), 0.8)
            assert p == pytest.approx(math.exp(-x * x) / math.sqrt(math.pi), rel=1e-12)


def test_homodyne2_bell_moments_match_operator():
    # one photon shared over |01> + |10>, measured along the theta = pi/4 mode
    C = 2
    psi = np.zeros(C * C, dtype=complex)
    psi[0 * C + 1] = psi[1 * C + 0] = 1 / math.sqrt(2)
    T = np.zeros((C * C, C * C), dtype=complex)
    T[0] = psi.conj()
    th = np.pi / 4
    grid = standard_grid(2 * C, 4001)
    V = homodyne2_vectors(grid, np.full(grid.size, th), 0.0, 0.0, (C, C), 1.0)
    dens = np.sum(np.abs(V @ T.T) ** 2, axis=(1, 2))
    # operator oracle on an untruncated-enough space
    big = 4
    a, b = ladder_ops(big)
    xop = (a * math.cos(th) + b * math.sin(th))
    xop = (xop + xop.conj().T) / math.sqrt(2)
    v = np.zeros(big * big, dtype=complex)
    v[0 * big + 1] = v[1 * big + 0] = 1 / math.sqrt(2)
    m1 = np.real(v.conj() @ xop @ v)
    m2 = np.real(v.conj() @ xop @ xop @ v)
    assert simpson(dens, x=grid) == pytest.approx(1.0, abs=1e-6)
    assert simpson(grid * dens, x=grid) == pytest.approx(m1, abs=1e-5)
    assert simpson(grid**2 * dens, x=grid) == pytest.approx(m2, abs=1e-5)


def test_spin_coherent_pauli_expectations(rng):
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    for _ in range(20):
        th, ph = rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)
        v = spin_coherent([th, ph])
        bloch = [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
        for s, b in zip(paulis, bloch):
            assert np.real(v.conj() @ s @ v) == pytest.approx(b, abs=1e-10)
    assert abs(spin_coherent([np.pi, 0.0])[0]) < 1e-15


def test_spinpair_prob_examples(rng):
    psi = np.array([0, 1, -1, 0]) / math.sqrt(2)
    Ts = np.zeros((4, 4), dtype=complex)
    Ts[0] = psi
    assert spinpair_prob(Ts, [0.0, 0.0], [np.pi, 0.0]) == pytest.approx(0.5, abs=1e-12)
    om = [rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)]
    assert spinpair_prob(Ts, om, om) == pytest.approx(0.0, abs=1e-12)
    Tm = np.eye(4) / 2
    for _ in range(5):
        oa = [rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)]
        ob = [rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)]
        assert spinpair_prob(Tm, oa, ob) == pytest.approx(0.25, abs=1e-12)


def test_oracle_completeness_and_structure():
    cfg = SchemeConfig("homodyne1", 0.8, (4,))
    xs = np.linspace(-8, 8, 321)
    for phi in (0.0, 0.9):
        Fs = np.array([povm_matrix_oracle({"x": x, "phi": phi}, cfg) for x in xs])
        assert np.allclose(simpson(Fs, x=xs, axis=0), np.eye(4), atol=1e-4)
        for x, F in zip(xs[::40], Fs[::40]):
            assert F[0, 0].real == pytest.approx(math.exp(-x * x) / math.sqrt(math.pi), abs=1e-8)
            assert np.allclose(F, F.conj().T, atol=1e-10)
            assert np.linalg.eigvalsh(F).min() >= -1e-10


def test_probability_linear_in_rho(rng):
    # mixing density matrices mixes probabilities
    cfg = SchemeConfig("homodyne1", 0.8, (5,))
    recs = Records("homodyne1", x=rng.uniform(-2, 2, 20), phi=rng.uniform(0, 2 * np.pi, 20))
    V = positive_form_vectors(recs, cfg)
    rho1, rho2 = factor_to_density(random_factor(rng, 5)), factor_to_density(random_factor(rng, 5))

    def probs(rho):
        return np.real(np.einsum("ijm,mn,ijn->i", V.conj(), rho, V))

    for w in (0.2, 0.5, 0.9):
        mix = w * rho1 + (1 - w) * rho2
        T = np.linalg.cholesky(mix + 1e-14 * np.eye(5)).conj().T
        direct = np.real(np.einsum("ijm,mn,ijn->i", V.conj(), T.conj().T @ T, V))
        assert np.allclose(probs(mix), w * probs(rho1) + (1 - w) * probs(rho2), rtol=1e-12)
        assert np.allclose(direct, probs(mix), rtol=1e-8)

import math

import numpy as np
import pytest
from scipy import integrate
from sklearn.base import clone

from photon_splitter.errors import CutoffTooLarge, DomainError, NoConvergence, TooFewPhases
from photon_splitter.experiments import generate_tomography_dataset
from photon_splitter.fock import DensityMatrix, PureState, fidelity, make_fock_state
from photon_splitter.measurement import QuadratureSamples
from photon_splitter.tomography import (
    HomodyneTomography,
    analytic_fock_wigner,
    bin_povm,
    bin_samples,
    mle_reconstruct,
    wigner_from_density,
)

from conftest import exact_density, hermite_wavefunction

PHASES = np.arange(12) * math.pi / 12


def dataset(rho, n_per_phase, seed=0):
    return generate_tomography_dataset(rho, PHASES, n_per_phase, seed)


# ---------------------------------------------------------------------- binning


def test_bin_totals_match_sample_counts():
    data = bin_samples(dataset(make_fock_state((0,)), 10_000 // 12 + 1), 50)
    assert data.counts.sum() == 12 * (10_000 // 12 + 1)
    np.testing.assert_array_equal(data.totals, np.full(12, 10_000 // 12 + 1))
    assert data.n_bins == 50 and np.all(data.counts >= 0)


def test_symmetric_state_histogram_is_symmetric():
    samples = generate_tomography_dataset(make_fock_state((1,)), [0.0, 1.0, 2.0], 100_000, 3)
    data = bin_samples(
        QuadratureSamples(np.concatenate([samples.x, [-8.0, 8.0]]), np.concatenate([samples.theta, [0, 0]])),
        20,
    )
    counts = data.counts[1]
    mirrored = counts[::-1]
    # Poisson noise on each pair of mirror bins
    z = (counts - mirrored) / np.sqrt(np.maximum(counts + mirrored, 1))
    assert np.max(np.abs(z)) < 5


def test_binning_preconditions():
    two_phase = QuadratureSamples(np.linspace(-1, 1, 10), [0.0] * 5 + [1.0] * 5)
    with pytest.raises(TooFewPhases):
        bin_samples(two_phase, 50)
    three = QuadratureSamples(np.linspace(-1, 1, 9), [0.0, 1.0, 2.0] * 3)
    with pytest.raises(DomainError):
        bin_samples(three, 10)


# ------------------------------------------------------------------------- POVM


@pytest.mark.parametrize("theta", [0.0, 0.7, 2.5])
def test_povm_completeness(theta):
    edges = np.linspace(-8, 8, 51)
    povm = bin_povm(theta, edges, 6)
    np.testing.assert_allclose(povm.sum(axis=0), np.eye(7), atol=1e-6)
    for element in povm:
        np.testing.assert_allclose(element, element.conj().T, atol=1e-14)
        eig = np.linalg.eigvalsh(element)
        assert eig.min() > -1e-10 and eig.max() < 1 + 1e-8


def test_symmetric_bin_kills_odd_element():
    povm = bin_povm(0.4, np.array([-0.7, 0.7]), 3)
    assert abs(povm[0, 0, 1]) < 1e-15


@pytest.mark.parametrize("a,b", [(-0.3, 0.9), (0.5, 2.0), (-3.0, -1.0)])
def test_single_photon_bin_probability(a, b):
    povm = bin_povm(1.3, np.array([a, b]), 6)[0]
    oracle = integrate.quad(lambda x: hermite_wavefunction(1, x) ** 2, a, b)[0]
    assert povm[1, 1].real == pytest.approx(oracle, abs=1e-12)


def test_povm_reproduces_phase_dependent_density():
    rho = PureState.from_amplitudes([1, 0.6j, 0.3, 0, 0, 0, 0], 1, 6).to_density().elements
    edges = np.array([-2.0, -0.4, 0.1, 1.5])
    for theta in (0.0, 0.9, 2.2):
        povm = bin_povm(theta, edges, 6)
        p = exact_density(rho, theta)
        for k in range(3):
            probability = np.trace(povm[k] @ rho).real
            assert probability == pytest.approx(integrate.quad(p, edges[k], edges[k + 1])[0], abs=1e-10)


# ------------------------------------------------------------------------- MLE


def reconstruct(rho, n_per_phase, seed=0, **kw):
    return mle_reconstruct(bin_samples(dataset(rho, n_per_phase, seed), 50), **kw)


def test_vacuum_reconstruction():
    result = reconstruct(make_fock_state((0,)), 100_000 // 12 + 1)
    assert result.density.elements[0, 0].real >= 0.99


def test_single_photon_reconstruction():
    result = reconstruct(make_fock_state((1,)), 10_000, seed=4)
    rho = result.density.elements
    assert rho[1, 1].real >= 0.95
    assert result.converged
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
    assert np.linalg.eigvalsh(rho).min() >= -1e-8
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)


def test_mixture_reconstruction():
    mix = DensityMatrix.diagonal([0.5, 0.5], 6)
    rho = reconstruct(mix, 10_000, seed=5).density.elements
    assert abs(rho[0, 0].real - 0.5) <= 0.03
    assert abs(rho[1, 1].real - 0.5) <= 0.03
    assert abs(rho[0, 1]) < 0.03


def test_coherent_superposition_reconstruction():
    target = PureState.from_amplitudes([1, 1j, 0, 0, 0, 0, 0], 1, 6)
    rho = reconstruct(target, 10_000, seed=6).density
    assert fidelity(rho, target) > 0.97


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_likelihood_is_monotone(seed):
    heralded = DensityMatrix.diagonal([0.05, 0.9, 0.05], 6)
    result = reconstruct(heralded, 2_000, seed=seed)
    assert np.all(np.diff(result.log_likelihood) >= -1e-9)


def test_iteration_limit_warns():
    with pytest.warns(NoConvergence):
        result = reconstruct(make_fock_state((1,)), 2_000, max_iters=3)
    assert not result.converged and result.n_iter == 3


def test_reconstruction_needs_three_phases():
    data = bin_samples(dataset(make_fock_state((0,)), 200), 20)
    short = type(data)(data.phases[:2], data.edges, data.counts[:2])
    with pytest.raises(TooFewPhases):
        mle_reconstruct(short)


# ---------------------------------------------------------------------- Wigner


def test_analytic_wigner_values():
    assert analytic_fock_wigner(1, 0.0, 0.0) == pytest.approx(-1 / math.pi)
    assert analytic_fock_wigner(0, 0.6, 0.8) == pytest.approx(math.exp(-1) / math.pi)


@pytest.mark.parametrize("n", [0, 1])
def test_fock_wigner_at_origin(n):
    w = wigner_from_density(make_fock_state((n,)), np.array([0.0]), np.array([0.0]))
    assert w.W[0, 0] == pytest.approx((-1) ** n / math.pi, abs=1e-12)


def test_vacuum_wigner_is_gaussian():
    x = np.linspace(-3, 3, 13)
    w = wigner_from_density(make_fock_state((0,)), x, x).W
    expected = np.exp(-(x[:, None] ** 2) - x[None, :] ** 2) / math.pi
    np.testing.assert_allclose(w, expected, atol=1e-12)


@pytest.mark.parametrize("n", range(7))
def test_wigner_cross_oracle(n):
    x = np.linspace(-3, 3, 21)
    w = wigner_from_density(make_fock_state((n,)), x, x).W
    ref = analytic_fock_wigner(n, x[:, None], x[None, :])
    assert np.max(np.abs(w - ref)) < 1e-6


def test_wigner_far_from_origin():
    x = np.array([-5.0, 0.0, 5.0])
    for n in (0, 3, 6):
        w = wigner_from_density(make_fock_state((n,)), x, x).W
        np.testing.assert_allclose(w, analytic_fock_wigner(n, x[:, None], x[None, :]), atol=1e-10)


def test_wigner_normalization_and_marginal():
    x = np.linspace(-5, 5, 201)
    rho = PureState.from_amplitudes([1, 0.5, 0.5j, 0, 0, 0, 0], 1, 6)
    grid = wigner_from_density(rho, x, x)
    assert abs(grid.normalization() - 1) < 1e-3
    # integrating over p gives the x quadrature density
    marginal = grid.W.sum(axis=1) * (x[1] - x[0])
    expected = np.array([exact_density(rho.to_density().elements, 0.0)(v) for v in x])
    np.testing.assert_allclose(marginal, expected, atol=1e-6)
    assert grid.value_at(0.01, -0.01) == pytest.approx(grid.W[100, 100])


def test_wigner_rejects_large_cutoffs():
    with pytest.raises(CutoffTooLarge):
        wigner_from_density(make_fock_state((0,), 17), np.zeros(1), np.zeros(1))
    with pytest.raises(CutoffTooLarge):
        wigner_from_density(make_fock_state((0,)), np.array([40.0]), np.zeros(1))
    with pytest.raises(CutoffTooLarge):
        analytic_fock_wigner(17, 0.0, 0.0)


# -------------------------------------------------------------------- estimator


def test_estimator_params_and_clone():
    est = HomodyneTomography(cutoff=4, n_bins=30)
    assert est.get_params() == {"cutoff": 4, "n_bins": 30, "max_iters": 2000, "tol": 1e-7}
    copy = clone(est.set_params(tol=1e-6))
    assert copy.tol == 1e-6 and not hasattr(copy, "density_matrix_")


def test_estimator_fit_on_array_and_samples():
    samples = dataset(make_fock_state((1,)), 5_000, seed=9)
    X = np.column_stack([samples.theta, samples.x])
    a = HomodyneTomography().fit(X)
    b = HomodyneTomography().fit(samples)
    np.testing.assert_array_equal(a.density_matrix_.elements, b.density_matrix_.elements)
    assert a.density_matrix_.elements[1, 1].real > 0.9
    assert a.converged_ and a.n_iter_ > 0
    # the fitted single-photon state explains the data better than vacuum does
    vacuum_fit = HomodyneTomography().fit(dataset(make_fock_state((0,)), 5_000, seed=10))
    assert a.score(X) > vacuum_fit.score(X)
    w = a.wigner(np.array([0.0]), np.array([0.0]))
    assert w.W[0, 0] < -0.25


def test_estimator_score_matches_exact_density():
    samples = dataset(make_fock_state((1,)), 500, seed=1)
    est = HomodyneTomography(cutoff=2)
    est.fit(samples)
    rho = est.density_matrix_.elements
    manual = np.mean([math.log(exact_density(rho, s.theta)(s.x)) for s in samples])
    assert est.score(samples) == pytest.approx(manual, rel=1e-10)

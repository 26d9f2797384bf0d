import math

import numpy as np
from scipy import integrate
from scipy.special import eval_hermite, factorial

from photon_splitter.fock import apply_two_mode, beam_splitter, make_fock_state


def split_photon_state(phi=math.pi / 2, cutoff=6):
    """(|1,0> + e^{i phi} |0,1>) / sqrt(2), prepared on a 50:50 beam splitter."""
    return apply_two_mode(beam_splitter(0.5, phi, cutoff), make_fock_state((1, 0), cutoff))


def hermite_wavefunction(n, x):
    """Closed-form oscillator eigenfunction via explicit Hermite polynomials."""
    return eval_hermite(n, x) * np.exp(-x * x / 2) / (np.pi**0.25 * math.sqrt(2.0**n * factorial(n)))


def exact_density(rho, theta):
    """p(x|theta) for a single-mode density matrix, built from closed-form wavefunctions."""
    d = rho.shape[0]

    def p(x):
        amp = np.array([hermite_wavefunction(n, x) * np.exp(-1j * n * theta) for n in range(d)])
        return float(np.real(amp @ rho @ amp.conj()))

    return p


def bin_probabilities(rho, theta, edges):
    p = exact_density(rho, theta)
    return np.array([integrate.quad(p, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])])


def chi_square_pvalue(samples, rho, theta, n_bins=50, span=5.0):
    """Chi-square goodness-of-fit of samples against the exact density (tails merged)."""
    from scipy import stats

    edges = np.linspace(-span, span, n_bins + 1)
    edges[0], edges[-1] = -np.inf, np.inf
    expected = bin_probabilities(rho, theta, edges) * len(samples)
    observed = np.histogram(samples, bins=edges)[0]
    keep = expected >= 5
    # fold sparse tail bins into their neighbours' totals
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    if exp[-1] < 5:
        obs, exp = obs[:-1], exp[:-1]
        exp = exp * obs.sum() / exp.sum()
    return stats.chisquare(obs, exp).pvalue


def joint_cell_probabilities(state, theta1, theta2, edges, nodes=40):
    """Exact cell probabilities of the joint density by Gauss-Legendre quadrature."""
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    d = state.cutoff + 1
    c = state.tensor
    k = np.arange(d)
    coeff = c * np.exp(-1j * (k[:, None] * theta1 + k[None, :] * theta2))
    cells = []
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * gx + 0.5 * (a + b)
        psi = np.array([hermite_wavefunction(n, x) for n in range(d)])
        cells.append((psi, 0.5 * (b - a) * gw))
    out = np.zeros((len(cells), len(cells)))
    for i, (p1, w1) in enumerate(cells):
        for j, (p2, w2) in enumerate(cells):
            amp = np.einsum("mn,mi,nj->ij", coeff, p1, p2)
            out[i, j] = np.einsum("i,j,ij->", w1, w2, np.abs(amp) ** 2)
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

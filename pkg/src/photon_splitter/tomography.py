"""Homodyne state tomography and Wigner functions.

Phase-tagged quadrature samples are histogrammed per phase, each bin is turned into a
POVM element in the truncated Fock basis, and the density matrix is found by the
iterative maximum-likelihood ``R rho R`` fixed point. :class:`HomodyneTomography`
wraps the pipeline as a scikit-learn estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_laguerre
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import CutoffTooLarge, DimensionMismatch, DomainError, NoConvergence, TooFewPhases
from .fock import DEFAULT_GRID, DensityMatrix, as_density, wavefunction_table
from .measurement import QuadratureSamples

MAX_WIGNER_CUTOFF = 16
MAX_DISPLACEMENT_DIM = 512
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True, eq=False)
class BinnedData:
    phases: np.ndarray  # (K,)
    edges: np.ndarray  # (B + 1,), shared by all phases
    counts: np.ndarray  # (K, B)

    @property
    def totals(self):
        return self.counts.sum(axis=1)

    @property
    def n_bins(self):
        return self.edges.size - 1


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    W: np.ndarray  # W[i, j] = W(x[i], p[j])

    def normalization(self):
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.W.sum() * dx * dp)

    def value_at(self, x, p):
        i = int(np.argmin(np.abs(self.x - x)))
        j = int(np.argmin(np.abs(self.p - p)))
        return float(self.W[i, j])


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    density: DensityMatrix
    log_likelihood: np.ndarray = field(repr=False)  # mean log-likelihood per sample, per step
    n_iter: int = 0
    converged: bool = False


def bin_samples(samples, n_bins=50):
    """Histogram each phase over one common range spanning every sample."""
    if n_bins < 20:
        raise DomainError(f"need at least 20 bins, got {n_bins}")
    phases = np.unique(samples.theta)
    if phases.size < 3:
        raise TooFewPhases(f"samples cover {phases.size} phase(s); at least 3 are needed")
    lo, hi = float(samples.x.min()), float(samples.x.max())
    if not lo < hi:
        raise DomainError("samples span a zero-width range")
    edges = np.linspace(lo, hi, n_bins + 1)
    counts = np.stack(
        [np.histogram(samples.x[samples.theta == th], bins=edges)[0] for th in phases]
    )
    return BinnedData(phases, edges, counts)


def bin_overlaps(edges, cutoff):
    """``int_bin psi_m psi_n dx`` for every bin, shape ``(B, d, d)`` (Gauss-Legendre)."""
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    psi = wavefunction_table(cutoff, nodes)  # (d, B, G)
    weighted = psi * (half[:, None] * _GAUSS_WEIGHTS[None, :])[None]
    return np.einsum("mbg,nbg->bmn", weighted, psi)


def bin_povm(theta, edges, cutoff):
    """POVM elements of the quadrature bins at LO phase ``theta``, shape ``(B, d, d)``.

    ``Pi_mn = exp(i (m - n) theta) int_bin psi_m psi_n dx`` so that
    ``Tr[Pi rho]`` is the probability that ``x_theta`` falls in the bin.
    """
    overlaps = bin_overlaps(edges, cutoff)
    phase = np.exp(1j * theta * np.arange(cutoff + 1))
    return overlaps * phase[None, :, None] * phase.conj()[None, None, :]


def _povm_set(data, cutoff, grid):
    edges = np.array(data.edges, dtype=float)
    # outer bins absorb the tails so each phase's POVM resolves the identity
    edges[0] = min(edges[0], grid.x_min)
    edges[-1] = max(edges[-1], grid.x_max)
    overlaps = bin_overlaps(edges, cutoff)
    phase = np.exp(1j * np.outer(data.phases, np.arange(cutoff + 1)))  # (K, d)
    povms = overlaps[None] * phase[:, None, :, None] * phase.conj()[:, None, None, :]
    return povms.reshape(-1, cutoff + 1, cutoff + 1)


def _probabilities(povms, rho):
    return np.einsum("jab,ba->j", povms, rho).real


def mle_reconstruct(data, cutoff=6, max_iters=2000, tol=1e-7, grid=DEFAULT_GRID):
    """Maximum-likelihood density matrix from binned homodyne data.

    Iterates ``rho <- R rho R / Tr(R rho R)`` with ``R = sum_j (f_j / p_j) Pi_j``.
    Should a full step ever lower the likelihood, the step is diluted
    (``R -> (1 + eps R) / (1 + eps)`` with halving ``eps``), which restores monotone
    ascent. Stops when the largest element change drops below ``tol``.
    """
    if data.phases.size < 3:
        raise TooFewPhases("at least 3 phases are required")
    d = cutoff + 1
    counts = data.counts.ravel().astype(float)
    keep = counts > 0
    povms = _povm_set(data, cutoff, grid)[keep]
    counts = counts[keep]
    total = counts.sum()
    freqs = counts / total
    eye = np.eye(d)

    def mean_loglik(rho):
        p = _probabilities(povms, rho)
        return float(np.dot(freqs, np.log(np.clip(p, 1e-300, None)))), p

    rho = eye.astype(complex) / d
    loglik, probs = mean_loglik(rho)
    history = [loglik]
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        R = np.einsum("j,jab->ab", freqs / probs, povms)
        eps = None
        step = R
        while True:
            new = step @ rho @ step
            new = 0.5 * (new + new.conj().T)
            new /= np.trace(new).real
            new_loglik, new_probs = mean_loglik(new)
            if new_loglik >= loglik - 1e-13 or (eps is not None and eps < 1e-12):
                break
            eps = 0.5 if eps is None else 0.5 * eps
            step = (eye + eps * R) / (1.0 + eps)
        if new_loglik < loglik:
            # no ascent even with a vanishing step: already at the maximum
            new, new_loglik, new_probs = rho, loglik, probs
        change = float(np.max(np.abs(new - rho)))
        rho, loglik, probs = new, new_loglik, new_probs
        history.append(loglik)
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"R rho R iteration stopped after {max_iters} steps without reaching tol={tol}",
            NoConvergence,
            stacklevel=2,
        )
    density = DensityMatrix.from_matrix(rho, 1, cutoff, normalize=True)
    return ReconstructionResult(density, np.array(history), n_iter, converged)


# ------------------------------------------------------------------------ Wigner


def analytic_fock_wigner(n, x, p):
    """``W_n(x, p) = ((-1)^n / pi) L_n(2 (x^2 + p^2)) exp(-(x^2 + p^2))``."""
    if n > MAX_WIGNER_CUTOFF:
        raise CutoffTooLarge(f"n={n} exceeds {MAX_WIGNER_CUTOFF}")
    s = np.asarray(x, dtype=float) ** 2 + np.asarray(p, dtype=float) ** 2
    value = (-1) ** n / math.pi * eval_laguerre(n, 2.0 * s) * np.exp(-s)
    return float(value) if np.ndim(value) == 0 else value


def displacement_padding(max_alpha):
    """Extra Fock levels needed for displaced states at ``|alpha| <= max_alpha``.

    Fitted so the displaced-parity Wigner value matches the Laguerre closed form to
    better than 1e-10 for n <= 6 and |alpha| up to 10.
    """
    return max(8, int(math.ceil(max_alpha**2 + 10.0 * max_alpha + 10.0)))


def wigner_from_density(state, x, p, chunk=2048):
    """``W(x, p) = (1/pi) Tr[rho D(alpha) P D(alpha)^dag]``, ``alpha = (x + i p)/sqrt(2)``.

    ``P`` is the photon-number parity. With ``x = (a + a^dag)/sqrt(2)`` the vacuum
    is a Gaussian of variance 1/2 and ``W`` integrates to one over ``dx dp``.
    ``D(alpha) = R(phi) exp(r (a^dag - a)) R(phi)^dag`` is evaluated in a padded Fock
    space from one eigendecomposition of the generator ``a^dag - a``.
    """
    rho = as_density(state)
    if rho.num_modes != 1:
        raise DimensionMismatch("Wigner functions are computed for single-mode states")
    if rho.cutoff > MAX_WIGNER_CUTOFF:
        raise CutoffTooLarge(f"cutoff {rho.cutoff} exceeds {MAX_WIGNER_CUTOFF}")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    alpha = ((x[:, None] + 1j * p[None, :]) / math.sqrt(2.0)).ravel()
    d = rho.cutoff + 1
    dim = d + displacement_padding(float(np.abs(alpha).max(initial=0.0)))
    if dim > MAX_DISPLACEMENT_DIM:
        raise CutoffTooLarge(
            f"displacements up to |alpha|={np.abs(alpha).max():.3g} need {dim} levels"
        )
    # i (a^dag - a) is Hermitian; a^dag - a = -i V diag(lam) V^dag
    gen = np.diag(np.sqrt(np.arange(1, dim)), -1) - np.diag(np.sqrt(np.arange(1, dim)), 1)
    lam, vecs = np.linalg.eigh(1j * gen)
    top = vecs[:d]  # rows 0..cutoff
    vh = vecs.conj().T
    parity = (-1.0) ** np.arange(dim)
    levels = np.arange(d)

    values = np.empty(alpha.size)
    for start in range(0, alpha.size, chunk):
        a = alpha[start : start + chunk]
        r, phi = np.abs(a), np.angle(a)
        # rows 0..cutoff of exp(r (a^dag - a)), then conjugate by the phase rotation
        b = (top[None] * np.exp(-1j * r[:, None, None] * lam[None, None, :])) @ vh
        q = np.einsum("snk,k,smk->snm", b, parity, b.conj())
        rot = np.exp(1j * phi[:, None] * levels[None, :])
        q = q * rot[:, :, None] * rot.conj()[:, None, :]
        values[start : start + chunk] = np.einsum("mn,snm->s", rho.elements, q).real
    return WignerGrid(x, p, values.reshape(x.size, p.size) / math.pi)


# ------------------------------------------------------------------ estimator API


def _as_samples(X):
    if isinstance(X, QuadratureSamples):
        return X
    X = check_array(X, ensure_min_features=2)
    if X.shape[1] != 2:
        raise DimensionMismatch("expected two columns: (theta, x)")
    return QuadratureSamples(X[:, 1], X[:, 0])


class HomodyneTomography(BaseEstimator):
    """Maximum-likelihood single-mode tomography from phase-tagged homodyne data.

    Parameters
    ----------
    cutoff : int
        Largest photon number kept in the reconstruction.
    n_bins : int
        Histogram bins per phase.
    max_iters, tol :
        Stopping rule of the ``R rho R`` iteration.

    ``fit`` accepts an ``(n_samples, 2)`` array of ``(theta, x)`` rows or a
    :class:`~photon_splitter.measurement.QuadratureSamples`.
    """

    def __init__(self, cutoff=6, n_bins=50, max_iters=2000, tol=1e-7):
        self.cutoff = cutoff
        self.n_bins = n_bins
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y=None):
        samples = _as_samples(X)
        self.binned_ = bin_samples(samples, self.n_bins)
        result = mle_reconstruct(self.binned_, self.cutoff, self.max_iters, self.tol)
        self.density_matrix_ = result.density
        self.log_likelihood_ = result.log_likelihood
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    def score(self, X, y=None):
        """Mean log-density of the samples under the fitted state."""
        check_is_fitted(self, "density_matrix_")
        samples = _as_samples(X)
        psi = wavefunction_table(self.cutoff, samples.x)  # (d, n)
        rot = np.exp(-1j * np.outer(np.arange(self.cutoff + 1), samples.theta))
        amp = psi * rot
        dens = np.einsum("ms,mn,ns->s", amp, self.density_matrix_.elements, amp.conj()).real
        return float(np.mean(np.log(np.clip(dens, 1e-300, None))))

    def wigner(self, x, p):
        check_is_fitted(self, "density_matrix_")
        return wigner_from_density(self.density_matrix_, x, p)

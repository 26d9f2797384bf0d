"""Click (energy) detectors and homodyne (quadrature) detectors.

Both detector families come with an exact probability oracle and a Monte Carlo
sampler that draws from it.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb

from .errors import DimensionMismatch, DomainError, SpecCountMismatch
from .fock import (
    DEFAULT_GRID,
    DensityMatrix,
    PureState,
    as_density,
    check_grid,
    partial_trace,
    quadrature_density,
    wavefunction_table,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")


@dataclass(frozen=True)
class ClickRecord:
    pattern: tuple
    trial_index: int


@dataclass(frozen=True)
class QuadratureSample:
    x: float
    theta: float
    mode: int
    trial_index: int


class ClickRecords:
    """Columnar sequence of :class:`ClickRecord` (one boolean row per trial)."""

    def __init__(self, patterns, start_index=0):
        self.patterns = np.asarray(patterns, dtype=bool)
        self.patterns.setflags(write=False)
        self.start_index = int(start_index)

    def __len__(self):
        return self.patterns.shape[0]

    def __getitem__(self, i):
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        return ClickRecord(tuple(bool(b) for b in self.patterns[i]), self.start_index + i)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def counts(self):
        """Number of trials per click pattern, every pattern present."""
        k = self.patterns.shape[1]
        codes = self.patterns.astype(np.int64) @ (1 << np.arange(k - 1, -1, -1))
        tally = np.bincount(codes, minlength=2**k)
        return {pattern: int(tally[i]) for i, pattern in enumerate(click_patterns(k))}


class QuadratureSamples:
    """Columnar sequence of :class:`QuadratureSample`."""

    def __init__(self, x, theta, mode=0, trial_index=None):
        self.x = np.asarray(x, dtype=float)
        n = self.x.size
        self.theta = np.broadcast_to(np.asarray(theta, dtype=float) % TWO_PI, (n,)).copy()
        self.mode = np.broadcast_to(np.asarray(mode, dtype=np.int64), (n,)).copy()
        if trial_index is None:
            trial_index = np.arange(n)
        self.trial_index = np.asarray(trial_index, dtype=np.int64)
        for arr in (self.x, self.theta, self.mode, self.trial_index):
            if arr.shape != (n,):
                raise DimensionMismatch("sample columns must have equal length")
            arr.setflags(write=False)

    def __len__(self):
        return self.x.size

    def __getitem__(self, i):
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        return QuadratureSample(
            float(self.x[i]), float(self.theta[i]), int(self.mode[i]), int(self.trial_index[i])
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def concatenate(cls, parts):
        parts = list(parts)
        return cls(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.theta for p in parts]),
            np.concatenate([p.mode for p in parts]),
            np.concatenate([p.trial_index for p in parts]),
        )

    def phases(self):
        return np.unique(self.theta)


# ----------------------------------------------------------------- click detectors


def click_patterns(num_modes):
    """All click patterns in a fixed order: ``(False, ..., False)`` first."""
    return list(itertools.product((False, True), repeat=num_modes))


def _resolve_specs(state, specs):
    specs = [s if isinstance(s, DetectorSpec) else DetectorSpec(float(s)) for s in specs]
    if len(specs) != state.num_modes:
        raise SpecCountMismatch(
            f"{len(specs)} detector specs given for a {state.num_modes}-mode state"
        )
    return specs


def click_probabilities(state, specs):
    """Exact probability of every click pattern for binary detectors with losses.

    A detector of efficiency ``eta`` has no-click element ``sum_n (1-eta)^n |n><n|``.
    """
    specs = _resolve_specs(state, specs)
    pn = state.photon_numbers()
    n = np.arange(state.cutoff + 1)
    table = {}
    for pattern in click_patterns(state.num_modes):
        prob = pn
        for clicked, spec in zip(pattern, specs):
            miss = (1.0 - spec.efficiency) ** n
            # contracting axis 0 each time walks through the modes in order
            prob = np.tensordot(prob, 1.0 - miss if clicked else miss, axes=([0], [0]))
        table[pattern] = float(prob)
    total = sum(table.values())
    return {k: v / total for k, v in table.items()}


def sample_click_patterns(state, specs, n_trials, rng):
    """``(n_trials, num_modes)`` boolean array drawn from :func:`click_probabilities`."""
    probs = click_probabilities(state, specs)
    patterns = np.array(list(probs), dtype=bool)
    p = np.clip(np.array(list(probs.values())), 0.0, None)
    idx = rng.choice(len(p), size=int(n_trials), p=p / p.sum())
    return patterns[idx]


def sample_clicks(state, specs, n_trials, rng, start_index=0):
    return ClickRecords(sample_click_patterns(state, specs, n_trials, rng), start_index)


# ---------------------------------------------------------------- homodyne detection


def apply_loss(state, efficiency):
    """Pure-loss channel: the mode passes a beam splitter of transmittance ``efficiency``
    whose other input is vacuum, and the reflected mode is discarded."""
    rho = as_density(state)
    if rho.num_modes != 1:
        raise DimensionMismatch("apply_loss acts on single-mode states")
    if not 0.0 <= efficiency <= 1.0:
        raise DomainError(f"efficiency must lie in [0, 1], got {efficiency!r}")
    if efficiency == 1.0:
        return rho
    d = rho.cutoff + 1
    n = np.arange(d)
    out = np.zeros((d, d), dtype=complex)
    for k in range(d):
        # Kraus operator E_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>
        coeff = np.where(
            n >= k,
            np.sqrt(comb(n, k) * efficiency ** np.clip(n - k, 0, None) * (1 - efficiency) ** k),
            0.0,
        )
        kraus = np.zeros((d, d))
        kraus[n[k:] - k, n[k:]] = coeff[k:]
        out += kraus @ rho.elements @ kraus.T
    return DensityMatrix.from_matrix(out, 1, rho.cutoff, normalize=True)


_CDF_CACHE = {}
_CDF_LOCK = threading.Lock()


def _content_key(rho, theta, grid):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(rho.elements).tobytes())
    h.update(np.float64(theta % TWO_PI).tobytes())
    h.update(repr((grid.x_min, grid.x_max, grid.n_points)).encode())
    return h.hexdigest()


def cumulative_trapezoid(values, dx):
    out = np.empty_like(values)
    out[..., 0] = 0.0
    np.cumsum(0.5 * dx * (values[..., 1:] + values[..., :-1]), axis=-1, out=out[..., 1:])
    return out


def cdf_table(state, theta, grid=DEFAULT_GRID):
    """Normalized cumulative distribution of ``x_theta`` tabulated on ``grid``.

    Tables are cached by a hash of the state, phase and grid.
    """
    rho = as_density(state)
    key = _content_key(rho, theta, grid)
    with _CDF_LOCK:
        cached = _CDF_CACHE.get(key)
    if cached is not None:
        return cached
    density = np.clip(quadrature_density(rho, theta, grid), 0.0, None)
    cdf = cumulative_trapezoid(density, grid.spacing)
    cdf /= cdf[-1]
    cdf.setflags(write=False)
    with _CDF_LOCK:
        cdf = _CDF_CACHE.setdefault(key, cdf)
    return cdf


def invert_cdf(cdf, xs, u):
    """Piecewise-linear inverse of a tabulated CDF."""
    idx = np.searchsorted(cdf, u, side="left")
    idx = np.clip(idx, 1, cdf.size - 1)
    lo, hi = cdf[idx - 1], cdf[idx]
    width = hi - lo
    frac = np.divide(u - lo, width, out=np.full_like(u, 0.5), where=width > 0)
    return xs[idx - 1] + np.clip(frac, 0.0, 1.0) * (xs[idx] - xs[idx - 1])


def sample_homodyne(
    state, theta, n_samples, rng, grid=DEFAULT_GRID, efficiency=1.0, mode=0, start_index=0
):
    """Draw quadrature outcomes at LO phase ``theta`` by inverse-CDF lookup.

    A detection ``efficiency`` below one mixes vacuum into the state first.
    """
    rho = as_density(state)
    if rho.num_modes != 1:
        raise DimensionMismatch("sample_homodyne needs a single-mode state")
    rho = apply_loss(rho, efficiency)
    cdf = cdf_table(rho, theta, grid)
    x = invert_cdf(cdf, grid.values, rng.random(int(n_samples)))
    return QuadratureSamples(x, theta, mode, start_index + np.arange(int(n_samples)))


@lru_cache(maxsize=64)
def _pair_cumulatives(cutoff, grid):
    """Cumulative integrals of ``psi_m psi_n`` over ``grid`` for all ``m <= n``."""
    psi = wavefunction_table(cutoff, grid.values)
    products = psi[:, None, :] * psi[None, :, :]
    cums = cumulative_trapezoid(products, grid.spacing)
    cums.setflags(write=False)
    return cums


def _conditional_quantiles(weights, pairs, cums, targets_u, xs):
    """Invert per-sample CDFs ``sum_p w_sp F_p`` by vectorized bisection on the grid."""
    basis = np.stack([cums[m, n] for m, n in pairs])  # (P, G)
    totals = weights @ basis[:, -1]
    targets = targets_u * totals
    g = basis.shape[1]
    lo = np.ones(weights.shape[0], dtype=np.int64)
    hi = np.full(weights.shape[0], g - 1, dtype=np.int64)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        val = np.einsum("sp,ps->s", weights, basis[:, mid])
        above = val >= targets
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid + 1)
    c_lo = np.einsum("sp,ps->s", weights, basis[:, lo - 1])
    c_hi = np.einsum("sp,ps->s", weights, basis[:, lo])
    width = c_hi - c_lo
    frac = np.divide(targets - c_lo, width, out=np.full_like(targets, 0.5), where=width > 0)
    return xs[lo - 1] + np.clip(frac, 0.0, 1.0) * (xs[lo] - xs[lo - 1])


def sample_joint_homodyne(state, theta1, theta2, n_samples, rng, grid=DEFAULT_GRID, start_index=0):
    """Simultaneous homodyne outcomes on both modes of a two-mode pure state.

    ``x1`` comes from its exact marginal; ``x2`` from the exact conditional density
    ``|sum_n b_n(x1) exp(-i n theta2) psi_n(x2)|^2`` with
    ``b_n(x1) = sum_m c_{mn} exp(-i m theta1) psi_m(x1)``.
    Returns one :class:`QuadratureSamples` per mode, aligned by trial.
    """
    if not isinstance(state, PureState) or state.num_modes != 2:
        raise DimensionMismatch("sample_joint_homodyne needs a two-mode pure state")
    n = int(n_samples)
    d = state.cutoff + 1
    coeffs = state.tensor
    occupied = np.nonzero(np.abs(coeffs) > 1e-14)
    check_grid(int(max(occupied[0].max(initial=0), occupied[1].max(initial=0))), grid)
    xs = grid.values
    u1 = rng.random(n)
    u2 = rng.random(n)

    marginal = partial_trace(state, (0,))
    x1 = invert_cdf(cdf_table(marginal, theta1, grid), xs, u1)

    support = [k for k in range(d) if np.any(np.abs(coeffs[:, k]) > 1e-14)]
    rot1 = np.exp(-1j * theta1 * np.arange(d))
    rot2 = np.exp(-1j * theta2 * np.arange(d))
    psi1 = wavefunction_table(state.cutoff, x1)  # (d, n)
    # conditional amplitudes of mode 2, shape (n, d)
    beta = np.einsum("mk,m,ms->sk", coeffs, rot1, psi1) * rot2[None, :]
    pairs, cols = [], []
    for i, m in enumerate(support):
        for k in support[i:]:
            pairs.append((m, k))
            w = np.real(beta[:, m].conj() * beta[:, k])
            cols.append(w if m == k else 2.0 * w)
    weights = np.stack(cols, axis=1)
    x2 = _conditional_quantiles(weights, pairs, _pair_cumulatives(state.cutoff, grid), u2, xs)
    index = start_index + np.arange(n)
    return QuadratureSamples(x1, theta1, 0, index), QuadratureSamples(x2, theta2, 1, index)

"""Truncated Fock-space states, two-mode linear optics and quadrature wavefunctions.

Conventions used throughout the package:

* basis tuples ``(n_0, ..., n_{M-1})`` are flattened in row-major order;
* the quadrature measured at local-oscillator phase ``theta`` is
  ``x_theta = (a exp(-i theta) + a^dagger exp(i theta)) / sqrt(2)``, so the vacuum
  variance is 1/2 and ``<x, theta | n> = exp(-i n theta) psi_n(x)``;
* a beam splitter with transmittance ``t`` and phase ``phi`` maps
  ``|1, 0> -> sqrt(t) |1, 0> + exp(i phi) sqrt(1 - t) |0, 1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .constants import EPSILON_0, HBAR
from .errors import (
    CutoffExceeded,
    DimensionMismatch,
    DomainError,
    GridTooNarrow,
    ModeIndexError,
)

DEFAULT_CUTOFF = 6
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8
#: Largest tail mass of a quadrature density tolerated outside the grid.
TAIL_TOL = 1e-6
# amplitude mass allowed in sectors a two-mode unitary cannot represent
_LEAK_TOL = 1e-20


def _readonly(array, dtype=complex):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_shape_params(num_modes, cutoff):
    if int(num_modes) != num_modes or num_modes < 1:
        raise DomainError(f"num_modes must be a positive integer, got {num_modes!r}")
    if int(cutoff) != cutoff or cutoff < 1:
        raise DomainError(f"cutoff must be a positive integer, got {cutoff!r}")


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector over ``num_modes`` modes truncated at ``cutoff``."""

    num_modes: int
    cutoff: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_shape_params(self.num_modes, self.cutoff)
        amps = _readonly(np.ravel(self.amplitudes))
        if amps.size != (self.cutoff + 1) ** self.num_modes:
            raise DimensionMismatch(
                f"expected {(self.cutoff + 1) ** self.num_modes} amplitudes, got {amps.size}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (squared norm {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, num_modes, cutoff, normalize=True):
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise DomainError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(num_modes, cutoff, amps)

    @property
    def dim(self):
        return self.amplitudes.size

    @property
    def tensor(self):
        return self.amplitudes.reshape((self.cutoff + 1,) * self.num_modes)

    def amplitude(self, ns):
        return complex(self.tensor[tuple(ns)])

    def photon_numbers(self):
        """Joint photon-number distribution, shaped ``(cutoff + 1,) * num_modes``."""
        return np.abs(self.tensor) ** 2

    def to_density(self):
        return DensityMatrix(
            self.num_modes, self.cutoff, np.outer(self.amplitudes, self.amplitudes.conj())
        )

    def __repr__(self):
        return f"PureState(num_modes={self.num_modes}, cutoff={self.cutoff})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive, unit-trace operator on the truncated Fock space."""

    num_modes: int
    cutoff: int
    elements: np.ndarray

    def __post_init__(self):
        _check_shape_params(self.num_modes, self.cutoff)
        rho = _readonly(self.elements)
        dim = (self.cutoff + 1) ** self.num_modes
        if rho.shape != (dim, dim):
            raise DimensionMismatch(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise DomainError("density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > NORM_TOL:
            raise DomainError(f"density matrix trace is {trace!r}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise DomainError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "elements", rho)

    @classmethod
    def from_matrix(cls, matrix, num_modes, cutoff, normalize=False):
        """Build from an arbitrary matrix, symmetrizing away round-off asymmetry."""
        rho = np.asarray(matrix, dtype=complex)
        rho = 0.5 * (rho + rho.conj().T)
        if normalize:
            rho = rho / np.trace(rho).real
        return cls(num_modes, cutoff, rho)

    @classmethod
    def diagonal(cls, weights, cutoff=None):
        """Single-mode state diagonal in the Fock basis."""
        weights = np.asarray(weights, dtype=float)
        if cutoff is None:
            cutoff = max(weights.size - 1, 1)
        padded = np.zeros(cutoff + 1)
        padded[: weights.size] = weights
        return cls(1, cutoff, np.diag(padded / padded.sum()).astype(complex))

    @property
    def dim(self):
        return self.elements.shape[0]

    def photon_numbers(self):
        return np.real(np.diag(self.elements)).reshape((self.cutoff + 1,) * self.num_modes)

    def to_density(self):
        return self

    def __repr__(self):
        return f"DensityMatrix(num_modes={self.num_modes}, cutoff={self.cutoff})"


State = Union[PureState, DensityMatrix]


def as_density(state):
    return state.to_density()


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid of quadrature values."""

    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = 4096

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise DomainError("x_min must be smaller than x_max")
        if self.n_points < 2:
            raise DomainError("a grid needs at least two points")

    @property
    def values(self):
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def spacing(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)


DEFAULT_GRID = QuadratureGrid()


# --------------------------------------------------------------------------- states


def make_fock_state(ns, cutoff=DEFAULT_CUTOFF):
    """Product Fock state ``|n_0, n_1, ...>``.

    >>> make_fock_state((1, 0), cutoff=2).amplitude((1, 0))
    (1+0j)
    """
    ns = tuple(int(n) for n in ns)
    if not ns:
        raise DomainError("at least one mode is required")
    if any(n < 0 for n in ns):
        raise DomainError(f"photon numbers must be nonnegative, got {ns}")
    if any(n > cutoff for n in ns):
        raise CutoffExceeded(f"photon numbers {ns} exceed cutoff {cutoff}")
    tensor = np.zeros((cutoff + 1,) * len(ns), dtype=complex)
    tensor[ns] = 1.0
    return PureState(len(ns), cutoff, tensor.ravel())


def vacuum(num_modes=1, cutoff=DEFAULT_CUTOFF):
    return make_fock_state((0,) * num_modes, cutoff)


def annihilation(cutoff):
    """Truncated annihilation operator, ``(cutoff + 1)`` square."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def quadrature_operator(theta, cutoff):
    a = annihilation(cutoff)
    return (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2.0)


# ------------------------------------------------------------------ two-mode optics


def _block_generator(k, phi):
    """Mixing generator ``exp(i phi) a b^dag - exp(-i phi) a^dag b`` on ``{|m, k-m>}``."""
    gen = np.zeros((k + 1, k + 1), dtype=complex)
    for m in range(1, k + 1):
        # a b^dag |m, k-m> = sqrt(m (k-m+1)) |m-1, k-m+1>
        amp = math.sqrt(m * (k - m + 1))
        gen[m - 1, m] += np.exp(1j * phi) * amp
        gen[m, m - 1] -= np.exp(-1j * phi) * amp
    return gen


@dataclass(frozen=True, eq=False)
class TwoModeUnitary:
    """Photon-number-conserving unitary stored as one block per total photon number.

    ``blocks[k]`` acts on the basis ``|m, k - m>``, ``m = 0..k``. Only sectors with
    ``k <= cutoff`` fit inside a per-mode truncation, so those are the ones kept.
    """

    cutoff: int
    blocks: tuple
    transmittance: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if len(self.blocks) != self.cutoff + 1:
            raise DimensionMismatch("need one block per total photon number 0..cutoff")
        blocks = []
        for k, block in enumerate(self.blocks):
            block = _readonly(block)
            if block.shape != (k + 1, k + 1):
                raise DimensionMismatch(f"block {k} has shape {block.shape}")
            blocks.append(block)
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def identity(cls, cutoff=DEFAULT_CUTOFF):
        return cls(cutoff, tuple(np.eye(k + 1) for k in range(cutoff + 1)))

    def matrix(self):
        """Dense matrix on the ``(cutoff + 1)**2`` two-mode space.

        Sectors that the truncation cuts (total photon number above ``cutoff``) get
        the identity; :func:`apply_two_mode` refuses states with support there.
        """
        return _dense_two_mode(self)

    def max_unitarity_error(self):
        return max(np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0]))) for b in self.blocks)


def _pair_index(m, n, cutoff):
    return m * (cutoff + 1) + n


def _dense_two_mode(unitary):
    cutoff = unitary.cutoff
    dim = (cutoff + 1) ** 2
    full = np.eye(dim, dtype=complex)
    for k, block in enumerate(unitary.blocks):
        idx = [_pair_index(m, k - m, cutoff) for m in range(k + 1)]
        full[np.ix_(idx, idx)] = block
    return full


@lru_cache(maxsize=None)
def _overflow_mask(cutoff):
    m, n = np.divmod(np.arange((cutoff + 1) ** 2), cutoff + 1)
    mask = m + n > cutoff
    mask.setflags(write=False)
    return mask


def beam_splitter(t=0.5, phi=math.pi / 2, cutoff=DEFAULT_CUTOFF):
    """Beam splitter with transmittance ``t`` and reflection phase ``phi``.

    Each total-photon-number block is the exact matrix exponential of the mixing
    generator at angle ``arccos(sqrt(t))``.
    """
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise DomainError(f"transmittance must lie in [0, 1], got {t!r}")
    phi = float(phi) % (2 * math.pi)
    angle = math.acos(math.sqrt(t))
    blocks = tuple(expm(angle * _block_generator(k, phi)) for k in range(cutoff + 1))
    return TwoModeUnitary(cutoff, blocks, transmittance=float(t), phase=phi)


def _check_modes(state, modes):
    for mode in modes:
        if int(mode) != mode or not 0 <= mode < state.num_modes:
            raise ModeIndexError(f"mode {mode!r} out of range for {state.num_modes} modes")
    if len(set(modes)) != len(modes):
        raise ModeIndexError(f"modes must be distinct, got {tuple(modes)}")


def _apply_to_axes(tensor, matrix, axes):
    """Contract ``matrix`` into the given tensor axes (first axes of the operator)."""
    d = tensor.shape[axes[0]]
    moved = np.moveaxis(tensor, axes, range(len(axes)))
    flat = moved.reshape(d ** len(axes), -1)
    out = (matrix @ flat).reshape(moved.shape)
    return np.moveaxis(out, range(len(axes)), axes)


def _check_no_overflow(tensor, axes, cutoff):
    d = cutoff + 1
    moved = np.moveaxis(tensor, axes, (0, 1)).reshape(d * d, -1)
    leaked = np.sum(np.abs(moved[_overflow_mask(cutoff)]) ** 2)
    if leaked > _LEAK_TOL:
        raise CutoffExceeded(
            "state has support on photon numbers the two-mode truncation cannot hold; "
            "raise the cutoff"
        )


def apply_two_mode(unitary, state, modes=(0, 1)):
    """Apply ``unitary`` to modes ``(i, j)`` of a pure state or density matrix."""
    modes = tuple(modes)
    if len(modes) != 2:
        raise ModeIndexError("exactly two modes are required")
    _check_modes(state, modes)
    if unitary.cutoff != state.cutoff:
        raise DimensionMismatch(
            f"unitary cutoff {unitary.cutoff} differs from state cutoff {state.cutoff}"
        )
    full = unitary.matrix()
    d, num_modes = state.cutoff + 1, state.num_modes
    if isinstance(state, PureState):
        tensor = state.tensor
        _check_no_overflow(tensor, modes, state.cutoff)
        out = _apply_to_axes(tensor, full, modes)
        return PureState.from_amplitudes(out.ravel(), num_modes, state.cutoff)
    tensor = state.elements.reshape((d,) * (2 * num_modes))
    diag = np.real(np.diag(state.elements)).reshape((d,) * num_modes)
    _check_no_overflow(np.sqrt(diag), modes, state.cutoff)
    out = _apply_to_axes(tensor, full, modes)
    bra_axes = tuple(num_modes + m for m in modes)
    out = _apply_to_axes(out, full.conj(), bra_axes)
    return DensityMatrix.from_matrix(out.reshape(d**num_modes, d**num_modes), num_modes, state.cutoff)


def phase_shift(state, mode, theta):
    """Multiply the ``n``-photon component of ``mode`` by ``exp(i n theta)``."""
    _check_modes(state, (mode,))
    d = state.cutoff + 1
    phases = np.exp(1j * theta * np.arange(d))
    shape = [1] * state.num_modes
    shape[mode] = d
    factor = phases.reshape(shape)
    if isinstance(state, PureState):
        return PureState(state.num_modes, state.cutoff, (state.tensor * factor).ravel())
    diag = (np.ones((d,) * state.num_modes) * factor).ravel()
    rho = diag[:, None] * state.elements * diag.conj()[None, :]
    return DensityMatrix.from_matrix(rho, state.num_modes, state.cutoff)


def partial_trace(state, keep):
    """Reduced density matrix on the modes in ``keep`` (kept in ascending order)."""
    keep = tuple(sorted(int(k) for k in keep))
    if not keep:
        raise ModeIndexError("keep must name at least one mode")
    _check_modes(state, keep)
    n, d = state.num_modes, state.cutoff + 1
    traced = [m for m in range(n) if m not in keep]
    if isinstance(state, PureState):
        ket = state.tensor
        ket_idx = list(range(n))
        bra_idx = [m if m in traced else n + m for m in range(n)]
        out_idx = list(keep) + [n + m for m in keep]
        reduced = np.einsum(ket, ket_idx, ket.conj(), bra_idx, out_idx)
    else:
        rho = state.elements.reshape((d,) * (2 * n))
        idx = list(range(n)) + [m if m in traced else n + m for m in range(n)]
        out_idx = list(keep) + [n + m for m in keep]
        reduced = np.einsum(rho, idx, out_idx)
    size = d ** len(keep)
    return DensityMatrix.from_matrix(reduced.reshape(size, size), len(keep), state.cutoff)


# ----------------------------------------------------------------- quadratures


def wavefunction_table(n_max, x):
    """Harmonic-oscillator eigenfunctions ``psi_0..psi_{n_max}`` at points ``x``.

    Uses the normalized three-term recurrence
    ``psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}``,
    which stays finite where explicit Hermite polynomials overflow.
    """
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for n in range(1, n_max):
        table[n + 1] = math.sqrt(2.0 / (n + 1)) * x * table[n] - math.sqrt(n / (n + 1)) * table[n - 1]
    return table


def quadrature_wavefunction(n, x):
    """``psi_n(x) = H_n(x) exp(-x^2/2) / (pi^(1/4) sqrt(2^n n!))``."""
    if int(n) != n or n < 0:
        raise DomainError(f"photon number must be a nonnegative integer, got {n!r}")
    values = wavefunction_table(int(n), x)[int(n)]
    return float(values) if np.ndim(values) == 0 else values


@lru_cache(maxsize=None)
def _tail_mass(n, x_min, x_max):
    def f(x):
        return float(wavefunction_table(n, x)[n]) ** 2

    upper = integrate.quad(f, x_max, np.inf, limit=200)[0] if x_max < 40 else 0.0
    lower = integrate.quad(f, -np.inf, x_min, limit=200)[0] if x_min > -40 else 0.0
    return upper + lower


def highest_populated(rho, threshold=1e-14):
    """Largest photon number with population above ``threshold`` (single mode)."""
    pops = np.real(np.diag(rho))
    occupied = np.nonzero(pops > threshold)[0]
    return int(occupied[-1]) if occupied.size else 0


def check_grid(n_max, grid):
    """Raise :class:`GridTooNarrow` if some ``psi_n``, ``n <= n_max``, leaks off the grid."""
    tail = max(_tail_mass(n, float(grid.x_min), float(grid.x_max)) for n in range(n_max + 1))
    if tail > TAIL_TOL:
        raise GridTooNarrow(
            f"grid [{grid.x_min}, {grid.x_max}] loses {tail:.2e} probability for n <= {n_max}"
        )


def _single_mode(state):
    rho = as_density(state)
    if rho.num_modes != 1:
        raise DimensionMismatch(f"expected a single-mode state, got {rho.num_modes} modes")
    return rho


def rotated_elements(rho, theta):
    """``rho_mn exp(i (n - m) theta)``: the state seen by a detector at LO phase ``theta``."""
    phases = np.exp(1j * theta * np.arange(rho.shape[0]))
    return phases.conj()[:, None] * rho * phases[None, :]


def quadrature_density(state, theta, grid=DEFAULT_GRID):
    """Probability density ``p(x | theta)`` of a single-mode state on ``grid``."""
    rho = _single_mode(state)
    check_grid(highest_populated(rho.elements), grid)
    psi = wavefunction_table(rho.cutoff, grid.values)
    rotated = rotated_elements(rho.elements, theta)
    return np.einsum("mx,mn,nx->x", psi, rotated, psi).real


def quadrature_moment(state, theta, order, mode=0):
    """Exact ``<x_theta^order>`` on one mode of a state.

    The operator power is formed in a space padded by ``order`` levels and then
    truncated, so no matrix element is lost to the cutoff.
    """
    rho = partial_trace(state, (mode,)) if state.num_modes > 1 else as_density(state)
    pad = rho.cutoff + order
    op = np.linalg.matrix_power(quadrature_operator(theta, pad), order)
    op = op[: rho.cutoff + 1, : rho.cutoff + 1]
    return float(np.real(np.trace(rho.elements @ op)))


def expectation_xx(state, theta1, theta2):
    """Exact ``<x_theta1 (x) x_theta2>`` for a two-mode state."""
    if state.num_modes != 2:
        raise DimensionMismatch("expectation_xx needs a two-mode state")
    op = np.kron(
        quadrature_operator(theta1, state.cutoff), quadrature_operator(theta2, state.cutoff)
    )
    if isinstance(state, PureState):
        return float(np.vdot(state.amplitudes, op @ state.amplitudes).real)
    return float(np.real(np.trace(state.elements @ op)))


def zero_point_field_variance(frequency, volume):
    """Vacuum electric-field variance ``hbar nu / (epsilon_0 V)`` in V^2/m^2."""
    if not frequency > 0 or not volume > 0:
        raise DomainError("frequency and mode volume must be positive")
    return HBAR * frequency / (EPSILON_0 * volume)


def fidelity(state, target):
    """Overlap ``<target| rho |target>`` of a state with a pure target."""
    rho = as_density(state)
    if rho.num_modes != target.num_modes or rho.cutoff != target.cutoff:
        raise DimensionMismatch("state and target live in different spaces")
    value = np.vdot(target.amplitudes, rho.elements @ target.amplitudes).real
    return float(min(max(value, 0.0), 1.0))

"""End-to-end experiment protocols.

Each ``run_*`` function prepares a state, pushes it through linear optics, samples a
detector model and returns an :class:`ExperimentReport` holding per-point tables,
scalar estimates with standard errors and the exact oracle values they estimate.

Randomness is drawn from :func:`photon_splitter.streams.stream` sub-streams keyed by
(point, chunk), so results are identical for any ``threads`` value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TooFewPhases
from .fock import (
    DEFAULT_CUTOFF,
    DEFAULT_GRID,
    DensityMatrix,
    apply_two_mode,
    beam_splitter,
    expectation_xx,
    make_fock_state,
    phase_shift,
    quadrature_moment,
)
from .measurement import (
    QuadratureSamples,
    apply_loss,
    click_probabilities,
    sample_click_patterns,
    sample_homodyne,
    sample_joint_homodyne,
)
from .sources import HeraldedSourceSpec, heralded_photon
from .streams import chunk_sizes, parallel_map, stream
from .tomography import HomodyneTomography, wigner_from_density

CLICK_CHUNK = 1 << 16
SAMPLE_CHUNK = 1 << 15


def uniform_phases(count, period=2.0 * math.pi):
    return [period * k / count for k in range(count)]


DEFAULT_MZ_PHASES = tuple(uniform_phases(16))
DEFAULT_RELATIVE_PHASES = tuple(uniform_phases(12))


@dataclass
class ExperimentReport:
    name: str
    config_echo: dict
    seed: int
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    #: non-tabular outputs such as a bitstream or a density matrix
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        for table_name, table in self.tables.items():
            lengths = {len(np.asarray(col)) for col in table.values()}
            if len(lengths) > 1:
                raise ValueError(f"table {table_name!r} has columns of unequal length")
        for key, value in self.summary.items():
            value = int(value) if isinstance(value, (int, np.integer)) else float(value)
            if not math.isfinite(value):
                raise ValueError(f"summary value {key!r} is not finite")
            self.summary[key] = value


def _two_mode_input(kind, cutoff, squeezing=0.1, herald_efficiency=1.0):
    """Input state on modes (a, b); ``kind`` names what enters port a."""
    if kind == "photon":
        return make_fock_state((1, 0), cutoff)
    if kind == "vacuum":
        return make_fock_state((0, 0), cutoff)
    if kind == "two_photon":
        return make_fock_state((2, 0), cutoff)
    if kind == "heralded":
        signal, _ = heralded_photon(HeraldedSourceSpec(squeezing, herald_efficiency, cutoff))
        idler_vac = np.zeros((cutoff + 1, cutoff + 1))
        idler_vac[0, 0] = 1.0
        return DensityMatrix.from_matrix(np.kron(signal.elements, idler_vac), 2, cutoff)
    raise DomainError(f"unknown input {kind!r}")


def _single_mode_input(kind, cutoff, squeezing=0.1, herald_efficiency=1.0):
    if kind == "photon":
        return make_fock_state((1,), cutoff).to_density()
    if kind == "vacuum":
        return make_fock_state((0,), cutoff).to_density()
    if kind == "two_photon":
        return make_fock_state((2,), cutoff).to_density()
    if kind == "mixture":
        return DensityMatrix.diagonal([0.5, 0.5], cutoff)
    if kind == "heralded":
        return heralded_photon(HeraldedSourceSpec(squeezing, herald_efficiency, cutoff))[0]
    raise DomainError(f"unknown input {kind!r}")


def _sample_clicks_chunked(state, specs, n_trials, seed, point, threads):
    sizes = chunk_sizes(n_trials, CLICK_CHUNK)
    parts = parallel_map(
        lambda i: sample_click_patterns(state, specs, sizes[i], stream(seed, point, i)),
        range(len(sizes)),
        threads,
    )
    return np.concatenate(parts) if parts else np.zeros((0, state.num_modes), bool)


def _binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# ------------------------------------------------------------------ click experiments


def run_anticoincidence(
    eta_c=1.0,
    eta_d=1.0,
    n_trials=100_000,
    seed=0,
    input="photon",
    cutoff=DEFAULT_CUTOFF,
    squeezing=0.1,
    herald_efficiency=1.0,
    threads=1,
):
    """One photon on a 50:50 beam splitter with click detectors on both outputs.

    ``alpha = P(both) / (P(c) P(d))`` is the anticorrelation parameter; it vanishes
    for a single photon and equals one for independent (classical) clicks.
    """
    state = apply_two_mode(
        beam_splitter(0.5, cutoff=cutoff),
        _two_mode_input(input, cutoff, squeezing, herald_efficiency),
    )
    specs = [eta_c, eta_d]
    exact = click_probabilities(state, specs)
    patterns = _sample_clicks_chunked(state, specs, n_trials, seed, 0, threads)
    c, d = patterns[:, 0], patterns[:, 1]
    counts = {
        "none": int(np.sum(~c & ~d)),
        "c_only": int(np.sum(c & ~d)),
        "d_only": int(np.sum(~c & d)),
        "both": int(np.sum(c & d)),
    }
    n = int(n_trials)
    n_c, n_d = counts["c_only"] + counts["both"], counts["d_only"] + counts["both"]
    if counts["both"] == 0:
        alpha = 0.0
        # one coincidence is the resolution of the estimate
        alpha_se = n / (n_c * n_d) if n_c and n_d else 0.0
    else:
        alpha = n * counts["both"] / (n_c * n_d)
        alpha_se = alpha * math.sqrt(1.0 / counts["both"] + 1.0 / n_c + 1.0 / n_d)

    keys = [(False, False), (True, False), (False, True), (True, True)]
    names = ["none", "c_only", "d_only", "both"]
    table = {
        "click_c": np.array([int(k[0]) for k in keys]),
        "click_d": np.array([int(k[1]) for k in keys]),
        "count": np.array([counts[nm] for nm in names]),
        "frequency": np.array([counts[nm] / n for nm in names]),
        "probability_exact": np.array([exact[k] for k in keys]),
        "stderr": np.array([_binomial_se(exact[k], n) for k in keys]),
    }
    summary = {}
    for nm, key in zip(names, keys):
        summary[f"counts_{nm}"] = counts[nm]
        summary[f"rate_{nm}"] = counts[nm] / n
        summary[f"rate_{nm}_stderr"] = _binomial_se(counts[nm] / n, n)
        summary[f"probability_{nm}_exact"] = exact[key]
    summary["alpha"] = alpha
    summary["alpha_stderr"] = alpha_se
    summary["n_trials"] = n
    echo = dict(eta_c=eta_c, eta_d=eta_d, n_trials=n, input=input, cutoff=cutoff)
    return ExperimentReport("anticoincidence", echo, seed, {"patterns": table}, summary)


def _sinusoid_fit(phases, values, sigmas):
    """Weighted fit of ``a + b cos(phase) + c sin(phase)``; returns params and covariance."""
    phases = np.asarray(phases, dtype=float)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    w = 1.0 / np.asarray(sigmas, dtype=float)
    params, *_ = np.linalg.lstsq(design * w[:, None], values * w, rcond=None)
    cov = np.linalg.pinv((design * w[:, None]).T @ (design * w[:, None]))
    return params, cov


def run_mach_zehnder(
    phases=DEFAULT_MZ_PHASES,
    n_trials_per_phase=10_000,
    seed=0,
    eta_c=1.0,
    eta_d=1.0,
    input="photon",
    cutoff=DEFAULT_CUTOFF,
    squeezing=0.1,
    herald_efficiency=1.0,
    threads=1,
):
    """Single photon through a Mach-Zehnder interferometer with an arm phase ``dphi``.

    The symmetric output is the port the exact oracle sends the photon to at zero
    path difference; its click probability follows ``cos^2(dphi / 2)``.
    """
    phases = [float(p) for p in phases]
    if not phases:
        raise DomainError("phase list is empty")
    bs = beam_splitter(0.5, cutoff=cutoff)
    source = _two_mode_input(input, cutoff, squeezing, herald_efficiency)
    specs = [eta_c, eta_d]

    def interferometer(state, dphi):
        return apply_two_mode(bs, phase_shift(apply_two_mode(bs, state), 1, dphi))

    # locate the symmetric port with an ideal photon at equal arm lengths
    ideal = click_probabilities(interferometer(make_fock_state((1, 0), cutoff), 0.0), [1, 1])
    symmetric = 0 if ideal[(True, False)] > ideal[(False, True)] else 1

    def one_phase(i):
        out = interferometer(source, phases[i])
        exact = click_probabilities(out, specs)
        p_sym = sum(p for k, p in exact.items() if k[symmetric])
        pats = _sample_clicks_chunked(out, specs, n_trials_per_phase, seed, i, 1)
        return pats, p_sym

    results = parallel_map(one_phase, range(len(phases)), threads)
    n = int(n_trials_per_phase)
    port0 = np.array([int(r[0][:, 0].sum()) for r in results])
    port1 = np.array([int(r[0][:, 1].sum()) for r in results])
    both = np.array([int(np.sum(r[0][:, 0] & r[0][:, 1])) for r in results])
    none = np.array([int(np.sum(~r[0][:, 0] & ~r[0][:, 1])) for r in results])
    exact_sym = np.array([r[1] for r in results])
    sym_counts = port0 if symmetric == 0 else port1
    est_sym = sym_counts / n
    se_exact = np.sqrt(np.clip(exact_sym * (1 - exact_sym), 0, None) / n)
    z = np.abs(est_sym - exact_sym) / np.maximum(se_exact, 1.0 / n)

    sigmas = np.sqrt(np.maximum(n * exact_sym * (1 - exact_sym), 1.0))
    (a, b, c), cov = _sinusoid_fit(phases, sym_counts.astype(float), sigmas)
    amp = math.hypot(b, c)
    visibility = amp / a if a > 0 else 0.0
    if a > 0 and amp > 0:
        grad = np.array([-amp / a**2, b / (amp * a), c / (amp * a)])
        visibility_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    else:
        visibility_se = 0.0

    table = {
        "phase": np.array(phases),
        "counts_port0": port0,
        "counts_port1": port1,
        "counts_both": both,
        "counts_none": none,
        "p_symmetric_estimate": est_sym,
        "p_symmetric_stderr": se_exact,
        "p_symmetric_exact": exact_sym,
    }
    summary = {
        "symmetric_port": symmetric,
        "visibility": visibility,
        "visibility_stderr": visibility_se,
        "max_abs_z": float(z.max()),
        "max_port_sum_deviation": int(np.max(np.abs(port0 + port1 - n))),
        "n_trials_per_phase": n,
    }
    echo = dict(
        phases=phases, n_trials_per_phase=n, eta_c=eta_c, eta_d=eta_d, input=input, cutoff=cutoff
    )
    return ExperimentReport("mach_zehnder", echo, seed, {"fringes": table}, summary)


# --------------------------------------------------------------- homodyne experiments


def pearson_with_stderr(x, y):
    """Pearson correlation and its asymptotic (distribution-free) standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(np.mean(dx * dx)), math.sqrt(np.mean(dy * dy))
    u, v = dx / sx, dy / sy
    r = float(np.mean(u * v))
    influence = u * v - 0.5 * r * (u * u + v * v)
    return r, float(np.std(influence) / math.sqrt(x.size))


def run_dual_homodyne(
    relative_phases=DEFAULT_RELATIVE_PHASES,
    phi_bs=math.pi / 2,
    n_pairs_per_point=100_000,
    input="photon",
    seed=0,
    cutoff=DEFAULT_CUTOFF,
    threads=1,
):
    """Homodyne detectors on both beam-splitter outputs, swept over ``theta1 - theta2``.

    The single-photon correlation is ``(1/2) cos(dtheta + phi_bs)``; with the photon
    blocked it vanishes for every phase.
    """
    phases = [float(p) for p in relative_phases]
    if not phases:
        raise DomainError("relative phase list is empty")
    state = apply_two_mode(beam_splitter(0.5, phi_bs, cutoff), _two_mode_input(input, cutoff))
    sizes = chunk_sizes(n_pairs_per_point, SAMPLE_CHUNK)

    def one_point(i):
        theta1, theta2 = phases[i] % (2 * math.pi), 0.0
        x1, x2 = [], []
        for k, size in enumerate(sizes):
            a, b = sample_joint_homodyne(state, theta1, theta2, size, stream(seed, i, k))
            x1.append(a.x)
            x2.append(b.x)
        x1, x2 = np.concatenate(x1), np.concatenate(x2)
        r, r_se = pearson_with_stderr(x1, x2)
        cov_exact = expectation_xx(state, theta1, theta2)
        var1 = quadrature_moment(state, theta1, 2, mode=0)
        var2 = quadrature_moment(state, theta2, 2, mode=1)
        return r, r_se, cov_exact / math.sqrt(var1 * var2), float(np.mean(x1 * x2))

    rows = parallel_map(one_point, range(len(phases)), threads)
    corr = np.array([r[0] for r in rows])
    corr_se = np.array([r[1] for r in rows])
    exact = np.array([r[2] for r in rows])
    (offset, b, c), cov = _sinusoid_fit(phases, corr, corr_se)
    # corr = A cos(dtheta + psi) = A cos(psi) cos(dtheta) - A sin(psi) sin(dtheta)
    amplitude = math.hypot(b, c)
    fitted_phase = math.atan2(-c, b) % (2 * math.pi)
    if amplitude > 0:
        grad = np.array([0.0, b / amplitude, c / amplitude])
        amplitude_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    else:
        amplitude_se = float(math.sqrt(cov[1, 1]))
    z = corr / corr_se
    table = {
        "relative_phase": np.array(phases),
        "correlation": corr,
        "stderr": corr_se,
        "correlation_exact": exact,
        "mean_product": np.array([r[3] for r in rows]),
    }
    summary = {
        "amplitude": amplitude,
        "amplitude_stderr": amplitude_se,
        "fitted_phase": fitted_phase,
        "offset": float(offset),
        "max_abs_correlation": float(np.max(np.abs(corr))),
        "max_abs_deviation": float(np.max(np.abs(corr - exact))),
        "n_correlated": int(np.sum(z > 3)),
        "n_anticorrelated": int(np.sum(z < -3)),
        "n_uncorrelated": int(np.sum(np.abs(z) <= 3)),
        "n_pairs_per_point": int(n_pairs_per_point),
    }
    echo = dict(
        relative_phases=phases, phi_bs=phi_bs, n_pairs_per_point=int(n_pairs_per_point),
        input=input, cutoff=cutoff,
    )
    return ExperimentReport("dual_homodyne", echo, seed, {"correlations": table}, summary)


def _sample_chunked(rho, theta, n, seed, point, threads, efficiency=1.0):
    sizes = chunk_sizes(n, SAMPLE_CHUNK)
    parts = parallel_map(
        lambda k: sample_homodyne(rho, theta, sizes[k], stream(seed, point, k),
                                  efficiency=efficiency).x,
        range(len(sizes)),
        threads,
    )
    return np.concatenate(parts)


def run_snr_wavepacket(
    n_samples=100_000,
    seed=0,
    collection_efficiency=1.0,
    input="photon",
    cutoff=DEFAULT_CUTOFF,
    n_bootstrap=200,
    threads=1,
):
    """Added quadrature noise of a mode-matched single photon over vacuum noise.

    ``SNR = (Var_signal - Var_vacuum) / Var_vacuum``: 2 for an ideal photon, ``2 eta``
    after a collection efficiency ``eta``.
    """
    if n_samples < 10_000:
        raise DomainError("n_samples must be at least 10^4")
    signal = _single_mode_input(input, cutoff)
    reference = _single_mode_input("vacuum", cutoff)
    x_sig = _sample_chunked(signal, 0.0, n_samples, seed, 0, threads, collection_efficiency)
    x_ref = _sample_chunked(reference, 0.0, n_samples, seed, 1, threads)

    def snr(a, b):
        return (np.var(a, ddof=1) - np.var(b, ddof=1)) / np.var(b, ddof=1)

    estimate = float(snr(x_sig, x_ref))
    rng = stream(seed, 2)
    boot = np.empty(int(n_bootstrap))
    for k in range(boot.size):
        boot[k] = snr(
            x_sig[rng.integers(0, x_sig.size, x_sig.size)],
            x_ref[rng.integers(0, x_ref.size, x_ref.size)],
        )
    lossy = apply_loss(signal, collection_efficiency)
    var_sig_exact = quadrature_moment(lossy, 0.0, 2) - quadrature_moment(lossy, 0.0, 1) ** 2
    var_ref_exact = quadrature_moment(reference, 0.0, 2)
    exact = (var_sig_exact - var_ref_exact) / var_ref_exact

    var_sig, var_ref = float(np.var(x_sig, ddof=1)), float(np.var(x_ref, ddof=1))
    table = {
        "is_signal": np.array([0, 1]),
        "variance": np.array([var_ref, var_sig]),
        "variance_stderr": np.array(
            [float(np.std(x_ref**2) / math.sqrt(n_samples)), float(np.std(x_sig**2) / math.sqrt(n_samples))]
        ),
        "variance_exact": np.array([var_ref_exact, var_sig_exact]),
    }
    summary = {
        "snr": estimate,
        "snr_stderr": float(np.std(boot, ddof=1)),
        "snr_exact": exact,
        "variance_signal": var_sig,
        "variance_vacuum": var_ref,
        "n_samples": int(n_samples),
    }
    echo = dict(
        n_samples=int(n_samples), collection_efficiency=collection_efficiency, input=input,
        cutoff=cutoff, n_bootstrap=int(n_bootstrap),
    )
    return ExperimentReport("snr_wavepacket", echo, seed, {"variances": table}, summary)


def von_neumann(bits):
    """Von Neumann extractor: 01 -> 0, 10 -> 1, 00 and 11 dropped."""
    bits = np.asarray(bits, dtype=np.uint8)
    pairs = bits[: bits.size - bits.size % 2].reshape(-1, 2)
    keep = pairs[:, 0] != pairs[:, 1]
    return pairs[keep, 0]


def bit_statistics(bits):
    """Monobit fraction, Wald-Wolfowitz runs z-score and lag-1 serial correlation."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size
    ones = int(bits.sum())
    frac = ones / n
    runs = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    zeros = n - ones
    expected = 2.0 * ones * zeros / n + 1.0
    variance = (expected - 1.0) * (expected - 2.0) / (n - 1.0)
    runs_z = (runs - expected) / math.sqrt(variance) if variance > 0 else 0.0
    b = bits.astype(float)
    if b[:-1].std() > 0 and b[1:].std() > 0:
        serial = float(np.corrcoef(b[:-1], b[1:])[0, 1])
    else:
        serial = 0.0
    return {
        "length": n,
        "ones_fraction": frac,
        "bias": frac - 0.5,
        "bias_stderr": 0.5 / math.sqrt(n),
        "runs": runs,
        "runs_z": runs_z,
        "serial_correlation": serial,
    }


def run_qrng(n_bits=1_000_000, extractor="none", seed=0, cutoff=DEFAULT_CUTOFF, threads=1):
    """Random bits from the sign of vacuum quadrature samples."""
    if n_bits < 10_000:
        raise DomainError("n_bits must be at least 10^4")
    if extractor not in ("none", "von_neumann"):
        raise DomainError(f"unknown extractor {extractor!r}")
    vac = _single_mode_input("vacuum", cutoff)
    x = _sample_chunked(vac, 0.0, n_bits, seed, 0, threads)
    raw = (x > 0).astype(np.uint8)
    streams_ = [("raw", raw)]
    output = raw
    if extractor == "von_neumann":
        output = von_neumann(raw)
        streams_.append(("von_neumann", output))
    stats = [bit_statistics(b) for _, b in streams_]
    table = {"stage": np.arange(len(stats))}
    for key in stats[0]:
        table[key] = np.array([s[key] for s in stats])
    summary = {f"raw_{k}": v for k, v in stats[0].items()}
    summary.update({f"output_{k}": v for k, v in stats[-1].items()})
    summary["n_pairs"] = int(n_bits) // 2
    echo = dict(n_bits=int(n_bits), extractor=extractor, cutoff=cutoff)
    return ExperimentReport(
        "qrng", echo, seed, {"bit_statistics": table}, summary, artifacts={"bits": output}
    )


# ------------------------------------------------------------------------ tomography


def generate_tomography_dataset(state, phases, n_per_phase, seed, threads=1, grid=DEFAULT_GRID):
    """Phase-tagged homodyne samples of a single-mode state, one sub-stream per phase."""
    phases = [float(p) for p in phases]
    if len(set(phases)) < 3:
        raise TooFewPhases("need at least 3 distinct phases")
    if any(not 0.0 <= p < math.pi for p in phases):
        raise DomainError("tomography phases must lie in [0, pi)")
    n = int(n_per_phase)
    parts = parallel_map(
        lambda j: sample_homodyne(state, phases[j], n, stream(seed, j), grid, start_index=j * n),
        range(len(phases)),
        threads,
    )
    return QuadratureSamples.concatenate(parts)


def run_tomography(
    input="photon",
    tomography_phases=12,
    n_per_phase=10_000,
    n_bins=50,
    cutoff=DEFAULT_CUTOFF,
    max_iters=2000,
    tol=1e-7,
    wigner_extent=3.0,
    wigner_points=61,
    squeezing=0.1,
    herald_efficiency=1.0,
    seed=0,
    threads=1,
):
    """Simulate a homodyne tomography run and reconstruct the state and its Wigner function."""
    target = _single_mode_input(input, cutoff, squeezing, herald_efficiency)
    phases = uniform_phases(int(tomography_phases), math.pi)
    samples = generate_tomography_dataset(target, phases, n_per_phase, seed, threads)
    model = HomodyneTomography(cutoff, n_bins, max_iters, tol).fit(samples)
    rho = model.density_matrix_
    axis = np.linspace(-wigner_extent, wigner_extent, int(wigner_points))
    grid = wigner_from_density(rho, axis, axis)
    exact_origin = wigner_from_density(target, [0.0], [0.0]).W[0, 0]
    origin = wigner_from_density(rho, [0.0], [0.0]).W[0, 0]
    xs, ps = np.meshgrid(axis, axis, indexing="ij")
    variances = np.array([np.var(samples.x[samples.theta == th], ddof=1) for th in np.unique(samples.theta)])
    exact_var = np.array([quadrature_moment(target, th, 2) - quadrature_moment(target, th, 1) ** 2
                          for th in np.unique(samples.theta)])

    pops = np.real(np.diag(rho.elements))
    best_overlap = float(np.real(np.trace(rho.elements @ target.elements)))
    summary = {f"rho_{k}{k}": float(pops[k]) for k in range(min(3, cutoff + 1))}
    summary.update(
        {
            "abs_rho_01": float(abs(rho.elements[0, 1])),
            "overlap_with_target": best_overlap,
            "wigner_origin": float(origin),
            "wigner_origin_exact": float(exact_origin),
            "wigner_normalization": grid.normalization(),
            "log_likelihood": float(model.log_likelihood_[-1]),
            "n_iter": int(model.n_iter_),
            "converged": int(model.converged_),
            "max_phase_variance_deviation": float(np.max(np.abs(variances - exact_var))),
            "n_samples": len(samples),
        }
    )
    tables = {
        "samples": {
            "trial_index": samples.trial_index,
            "mode": samples.mode,
            "theta": samples.theta,
            "x": samples.x,
        },
        "wigner": {"x": xs.ravel(), "p": ps.ravel(), "W": grid.W.ravel()},
        "phase_variances": {
            "theta": np.unique(samples.theta),
            "variance": variances,
            "variance_exact": exact_var,
        },
    }
    echo = dict(
        input=input, tomography_phases=int(tomography_phases), n_per_phase=int(n_per_phase),
        n_bins=int(n_bins), cutoff=cutoff, max_iters=int(max_iters), tol=tol,
        wigner_extent=wigner_extent, wigner_points=int(wigner_points),
    )
    return ExperimentReport(
        "tomography", echo, seed, tables, summary,
        artifacts={"density_matrix": rho, "wigner": grid},
    )

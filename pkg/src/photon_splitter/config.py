"""Flat ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment, lists are comma separated::

    experiment = mach_zehnder
    seed = 42
    phases = 0.0, 1.5707963267948966, 3.141592653589793
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, fields

from .errors import ParseError, ValidationError
from .experiments import DEFAULT_MZ_PHASES, DEFAULT_RELATIVE_PHASES
from .streams import MAX_SEED

INPUTS = ("photon", "vacuum", "two_photon", "heralded", "mixture")
EXTRACTORS = ("none", "von_neumann")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "anticoincidence"
    seed: int = 0
    out_dir: str = "out"
    cutoff: int = 6
    input: str = "photon"
    eta_c: float = 1.0
    eta_d: float = 1.0
    n_trials: int = 100_000
    phases: tuple = DEFAULT_MZ_PHASES
    n_trials_per_phase: int = 10_000
    relative_phases: tuple = DEFAULT_RELATIVE_PHASES
    phi_bs: float = math.pi / 2
    n_pairs_per_point: int = 100_000
    n_samples: int = 100_000
    collection_efficiency: float = 1.0
    n_bootstrap: int = 200
    n_bits: int = 1_000_000
    extractor: str = "none"
    squeezing: float = 0.1
    herald_efficiency: float = 1.0
    tomography_phases: int = 12
    n_per_phase: int = 10_000
    n_bins: int = 50
    max_iters: int = 2000
    tol: float = 1e-7
    wigner_extent: float = 3.0
    wigner_points: int = 61

    def __post_init__(self):
        validate(self)

    def echo(self):
        """Effective parameters as a plain dict (the output location is not a parameter)."""
        out = asdict(self)
        out.pop("out_dir")
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def digest(self):
        text = serialize_config(self, include_out_dir=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_TYPES = {f.name: f.type for f in fields(RunConfig)}

# key: (lower, upper, upper bound inclusive)
_RANGES = {
    "eta_c": (0.0, 1.0, True),
    "eta_d": (0.0, 1.0, True),
    "collection_efficiency": (0.0, 1.0, True),
    "herald_efficiency": (0.0, 1.0, True),
    "squeezing": (0.0, 1.0, False),
    "seed": (0, MAX_SEED, True),
    "cutoff": (1, 16, True),
    "n_trials": (1, math.inf, True),
    "n_trials_per_phase": (1, math.inf, True),
    "n_pairs_per_point": (1, math.inf, True),
    "n_samples": (1, math.inf, True),
    "n_bootstrap": (1, math.inf, True),
    "n_bits": (1, math.inf, True),
    "n_per_phase": (1, math.inf, True),
    "max_iters": (1, math.inf, True),
    "tomography_phases": (3, math.inf, True),
    "n_bins": (20, math.inf, True),
    "wigner_points": (2, math.inf, True),
    "tol": (0.0, math.inf, True),
    "wigner_extent": (0.0, 8.0, True),
}
_STRICT_LOWER = {"tol", "wigner_extent"}
_CHOICES = {"input": INPUTS, "extractor": EXTRACTORS}


def validate(config):
    for key, (lo, hi, hi_inclusive) in _RANGES.items():
        value = getattr(config, key)
        if isinstance(value, float) and not math.isfinite(value):
            raise ValidationError(key, f"must be finite, got {value!r}")
        too_low = value <= lo if key in _STRICT_LOWER else value < lo
        too_high = value > hi if hi_inclusive else value >= hi
        if too_low or too_high:
            left = "(" if key in _STRICT_LOWER else "["
            right = "]" if hi_inclusive else ")"
            raise ValidationError(key, f"{value!r} outside {left}{lo}, {hi}{right}")
    for key, choices in _CHOICES.items():
        if getattr(config, key) not in choices:
            raise ValidationError(key, f"{getattr(config, key)!r} not one of {', '.join(choices)}")
    for key in ("phases", "relative_phases"):
        values = getattr(config, key)
        if not values:
            raise ValidationError(key, "list is empty")
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(key, "phases must be finite")
    if not config.experiment or any(c.isspace() for c in config.experiment):
        raise ValidationError("experiment", "name must be a nonempty word")


def _convert(key, text):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(text, 10)
        if kind == "float":
            return float(text)
        if kind == "tuple":
            return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise ValidationError(key, f"cannot read {text!r} as {kind}") from None
    return text


def parse_config(text):
    """Parse config text into a validated :class:`RunConfig`; omitted keys take defaults."""
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("missing key", line=lineno)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", line=lineno)
        seen[key] = lineno
        if key not in _TYPES:
            raise ValidationError(key, f"unknown key (line {lineno})")
        values[key] = _convert(key, value)
    return RunConfig(**values)


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config, include_out_dir=True):
    lines = []
    for f in fields(RunConfig):
        if f.name == "out_dir" and not include_out_dir:
            continue
        lines.append(f"{f.name} = {_format(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"

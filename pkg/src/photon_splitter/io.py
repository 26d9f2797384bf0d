"""Serialization of reports, tables, sample sets and density matrices.

Floats are written with ``repr``, the shortest decimal string that round-trips a
64-bit float, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fock import DensityMatrix
from .measurement import QuadratureSamples

SAMPLE_COLUMNS = ("trial_index", "mode", "theta", "x")


def format_number(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, table):
    columns = list(table)
    data = [np.asarray(table[c]) for c in columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=",", lineterminator="\n")
        writer.writerow(columns)
        for row in zip(*data):
            writer.writerow([format_number(v) for v in row])


def read_csv(path):
    """Columns of a numeric CSV; integer-looking columns come back as int64."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    table = {}
    for i, name in enumerate(header):
        cells = [r[i] for r in rows]
        if all(c.lstrip("-").isdigit() for c in cells):
            table[name] = np.array([int(c) for c in cells], dtype=np.int64)
        else:
            table[name] = np.array([float(c) for c in cells])
    return table


def samples_table(samples):
    return {
        "trial_index": samples.trial_index,
        "mode": samples.mode,
        "theta": samples.theta,
        "x": samples.x,
    }


def write_samples(path, samples):
    write_csv(path, samples_table(samples))


def read_samples(path):
    table = read_csv(path)
    missing = [c for c in SAMPLE_COLUMNS if c not in table]
    if missing:
        raise ValueError(f"{path}: missing sample columns {missing}")
    return QuadratureSamples(table["x"], table["theta"], table["mode"], table["trial_index"])


def density_to_dict(rho):
    return {
        "num_modes": rho.num_modes,
        "cutoff": rho.cutoff,
        "real": rho.elements.real.tolist(),
        "imag": rho.elements.imag.tolist(),
    }


def write_density(path, rho):
    Path(path).write_text(json.dumps(density_to_dict(rho), indent=2) + "\n", encoding="utf-8")


def read_density(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    elements = np.array(data["real"]) + 1j * np.array(data["imag"])
    return DensityMatrix.from_matrix(elements, data["num_modes"], data["cutoff"])


def write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_report(out_dir, report, config_hash=None):
    """Write ``report.json`` plus one ``<table>.csv`` per table and any artifacts.

    Summary scalars sit at the top level of ``report.json`` next to the
    ``experiment``, ``seed``, ``config``, ``config_hash`` and ``files`` entries.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, table in report.tables.items():
        write_csv(out / f"{name}.csv", table)
    files = sorted(f"{name}.csv" for name in report.tables)
    rho = report.artifacts.get("density_matrix")
    if rho is not None:
        write_density(out / "density_matrix.json", rho)
        files.append("density_matrix.json")
    bits = report.artifacts.get("bits")
    if bits is not None:
        (out / "bits.bin").write_bytes(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes())
        files.append("bits.bin")
    payload = dict(report.summary)
    reserved = {"experiment", "seed", "config", "config_hash", "files"}
    clash = reserved & set(payload)
    if clash:
        raise ValueError(f"summary keys collide with report metadata: {sorted(clash)}")
    payload.update(
        experiment=report.name,
        seed=int(report.seed),
        config=report.config_echo,
        config_hash=config_hash,
        files=files,
    )
    write_json(out / "report.json", payload)
    return out / "report.json"

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_splitter.cli import EXPERIMENTS, dispatch, main
from photon_splitter.config import RunConfig, parse_config, serialize_config
from photon_splitter.errors import ParseError, ValidationError
from photon_splitter.experiments import generate_tomography_dataset
from photon_splitter.fock import make_fock_state
from photon_splitter.io import read_csv, read_density, write_samples
from photon_splitter.streams import chunk_sizes, stream

SMALL = {
    "anticoincidence": "n_trials = 70000\n",
    "mach_zehnder": "n_trials_per_phase = 3000\nphases = 0.0, 1.0, 2.5\n",
    "dual_homodyne": "n_pairs_per_point = 40000\nrelative_phases = 0.0, 1.5\n",
    "snr_wavepacket": "n_samples = 40000\nn_bootstrap = 20\n",
    "qrng": "n_bits = 70000\nextractor = von_neumann\n",
    "tomography": "n_per_phase = 40000\ntomography_phases = 3\nwigner_points = 5\n",
}


# ------------------------------------------------------------------- parsing


def test_minimal_config_gets_defaults():
    c = parse_config("experiment = anticoincidence\nseed = 42")
    assert c.experiment == "anticoincidence" and c.seed == 42
    assert c.eta_c == 1.0 and c.n_trials == 100_000 and c.cutoff == 6
    assert len(c.phases) == 16


def test_comments_blank_lines_and_lists():
    c = parse_config("# header\n\nexperiment = mach_zehnder  # trailing\nphases = 0.0, 1.5,3\n")
    assert c.phases == (0.0, 1.5, 3.0)


def test_out_of_range_efficiency():
    with pytest.raises(ValidationError) as info:
        parse_config("eta_c = 1.5")
    assert info.value.key == "eta_c"


@pytest.mark.parametrize(
    "text,key",
    [
        ("squeezing = 1.0", "squeezing"),
        ("n_trials = 0", "n_trials"),
        ("seed = -1", "seed"),
        ("seed = 18446744073709551616", "seed"),
        ("cutoff = 3.5", "cutoff"),
        ("extractor = xor", "extractor"),
        ("bogus = 1", "bogus"),
        ("phases = ", "phases"),
        ("tol = nan", "tol"),
    ],
)
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    assert info.value.key == key


def test_duplicate_key_reports_line():
    with pytest.raises(ParseError) as info:
        parse_config("experiment = qrng\n# note\nseed = 1\nseed = 2\n")
    assert info.value.line == 4


def test_malformed_line_reports_line():
    with pytest.raises(ParseError) as info:
        parse_config("seed = 1\njust words\n")
    assert info.value.line == 2


words = st.from_regex(r"[a-z][a-z0-9_]{0,11}", fullmatch=True)
unit = st.floats(0.0, 1.0)
phase_lists = st.lists(st.floats(-10.0, 10.0), min_size=1, max_size=5).map(tuple)

configs = st.builds(
    RunConfig,
    experiment=words,
    seed=st.integers(0, 2**64 - 1),
    out_dir=words,
    cutoff=st.integers(1, 16),
    input=st.sampled_from(["photon", "vacuum", "two_photon", "heralded", "mixture"]),
    eta_c=unit,
    eta_d=unit,
    n_trials=st.integers(1, 10**9),
    phases=phase_lists,
    relative_phases=phase_lists,
    phi_bs=st.floats(-10.0, 10.0),
    collection_efficiency=unit,
    extractor=st.sampled_from(["none", "von_neumann"]),
    squeezing=st.floats(0.0, 0.999),
    herald_efficiency=unit,
    tol=st.floats(1e-15, 1.0),
    wigner_extent=st.floats(0.1, 8.0),
)


@settings(max_examples=200, deadline=None)
@given(configs)
def test_round_trip(config):
    assert parse_config(serialize_config(config)) == config


def test_digest_ignores_output_location():
    a = RunConfig(out_dir="a")
    b = RunConfig(out_dir="b")
    assert a.digest() == b.digest()
    assert RunConfig(seed=1).digest() != a.digest()


# ------------------------------------------------------------------- streams


def test_streams_are_addressed_not_ordered():
    a = stream(5, 1, 2).random(4)
    stream(5, 0).random(100)
    np.testing.assert_array_equal(stream(5, 1, 2).random(4), a)
    assert not np.array_equal(stream(5, 1, 3).random(4), a)
    assert not np.array_equal(stream(6, 1, 2).random(4), a)
    assert chunk_sizes(10, 4) == [4, 4, 2]
    with pytest.raises(ValueError):
        stream(-1)


# ------------------------------------------------------------------ dispatch


def run_cli(tmp_path, name, body, *extra):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(f"experiment = {name}\nseed = 3\n{body}", encoding="utf-8")
    out = tmp_path / f"out_{name}_{'_'.join(extra) or 'default'}"
    status = main(["run", "--config", str(cfg), "--out", str(out), *extra])
    return status, out


def test_anticoincidence_report_schema(tmp_path):
    status, out = run_cli(tmp_path, "anticoincidence", SMALL["anticoincidence"])
    assert status == 0
    report = json.loads((out / "report.json").read_text())
    assert {"counts_c_only", "counts_d_only", "counts_both", "counts_none", "alpha"} <= set(report)
    assert report["seed"] == 3 and report["experiment"] == "anticoincidence"
    assert report["config"]["n_trials"] == 70000
    raw = (out / "patterns.csv").read_bytes()
    assert raw.split(b"\n")[0].startswith(b"click_c,click_d,count,frequency,")
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_unknown_experiment(tmp_path):
    status, out = run_cli(tmp_path, "teleportation", "")
    assert status != 0
    error = json.loads((out / "error.json").read_text())
    assert error["code"] == "unknown_experiment"


def test_invalid_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eta_c = 2\n")
    out = tmp_path / "bad_out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) != 0
    error = json.loads((out / "error.json").read_text())
    assert error["key"] == "eta_c" and error["code"] == "validation_error"


def test_experiment_failure_writes_error(tmp_path):
    config = RunConfig(experiment="snr_wavepacket", n_samples=10, out_dir=str(tmp_path / "o"))
    assert dispatch(config) == 1
    assert json.loads((tmp_path / "o" / "error.json").read_text())["message"]


def test_seed_override(tmp_path):
    status, out = run_cli(tmp_path, "qrng", SMALL["qrng"], "--seed", "99")
    assert status == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 99


def output_bytes(out):
    return {p.name: p.read_bytes() for p in sorted(Path(out).iterdir())}


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_outputs_identical_across_runs_and_threads(tmp_path, name):
    _, first = run_cli(tmp_path, name, SMALL[name], "--threads", "1")
    (tmp_path / "again").mkdir()
    _, again = run_cli(tmp_path / "again", name, SMALL[name], "--threads", "1")
    reference = output_bytes(first)
    assert "report.json" in reference and len(reference) >= 2
    assert output_bytes(again) == reference
    for threads in ("2", "8"):
        _, out = run_cli(tmp_path, name, SMALL[name], "--threads", threads)
        assert output_bytes(out) == reference


def test_list_names_every_experiment(capsys):
    assert main(["list"]) == 0
    text = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert f"{name}:" in text


def test_reconstruct_from_samples_file(tmp_path):
    samples = generate_tomography_dataset(make_fock_state((1,)), np.arange(6) * math.pi / 6, 5000, 1)
    path = tmp_path / "samples.csv"
    write_samples(path, samples)
    out = tmp_path / "rec"
    assert main(["reconstruct", "--samples", str(path), "--out", str(out), "--wigner-points", "5"]) == 0
    rho = read_density(out / "density_matrix.json")
    assert rho.elements[1, 1].real > 0.9
    wigner = read_csv(out / "wigner.csv")
    assert list(wigner) == ["x", "p", "W"] and len(wigner["W"]) == 25
    assert wigner["W"][12] < -0.2


def test_tomography_run_writes_samples_that_reconstruct(tmp_path):
    status, out = run_cli(tmp_path, "tomography", SMALL["tomography"])
    assert status == 0
    assert (out / "samples.csv").read_text().startswith("trial_index,mode,theta,x\n")
    rec = tmp_path / "rec2"
    assert main(["reconstruct", "--samples", str(out / "samples.csv"), "--out", str(rec)]) == 0
    a = read_density(out / "density_matrix.json").elements
    b = read_density(rec / "density_matrix.json").elements
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "photon_splitter", "list"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "qrng" in proc.stdout

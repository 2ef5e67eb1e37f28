import json

import numpy as np
import pytest
from click.testing import CliRunner

from heterowave.cli import EXIT_INPUT, EXIT_VERIFY, cli, main


def read_csv(path):
    meta, rows = {}, []
    header = None
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            k, v = line[2:].split(": ", 1)
            meta[k] = v
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows


@pytest.fixture
def run(tmp_path):
    def _run(*args):
        out = tmp_path / "out"
        code = main(list(args) + ["--out-dir", str(out)])
        return code, out
    return _run


def test_coherence_outputs(run):
    code, out = run("coherence", "--regime", "wp", "--tau", "1.025", "--mode", "plus", "--n-xi", "51")
    assert code == 0
    meta, header, rows = read_csv(out / "g1_plus_tau1.025.csv")
    assert header == ["delta_xi", "g1_tilde"]
    assert meta["regime"] == "WP" and meta["n_xi"] == "51" and meta["Lambda"] == "1046.5"
    zero = [r for r in rows if float(r[0]) == 0.0]
    assert float(zero[0][1]) == pytest.approx(1.0, abs=1e-12)
    _, h2, summary = read_csv(out / "coherence_lengths.csv")
    assert h2 == ["mode", "tau", "lambda_over_Lambda", "capped"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 2
    assert manifest["config"]["n_xi"] == 51
    assert manifest["physical"]["gain_product"] == 1.0


def test_zero_time_flagged_undefined(run):
    code, out = run("coherence", "--regime", "wp", "--tau", "0", "--mode", "plus", "--n-xi", "31")
    assert code == 0
    _, _, rows = read_csv(out / "g1_plus_tau0.csv")
    assert all(r[1] == "nan" for r in rows)
    _, _, summary = read_csv(out / "coherence_lengths.csv")
    assert summary[0][2] == "nan"


def test_sp_coherence_length_shrinks(run):
    code, out = run("coherence", "--regime", "sp", "--mode", "plus", "--n-xi", "101",
                    "--delta-xi-points", "201")
    assert code == 0
    _, _, summary = read_csv(out / "coherence_lengths.csv")
    lam = {float(r[1]): float(r[2]) for r in summary}
    assert lam[0.12075] < lam[0.03025]


def test_crosscorr_defaults(run):
    code, out = run("crosscorr", "--regime", "wp", "--n-xi", "51")
    assert code == 0
    for tau in ("1.025", "4.025"):
        _, header, rows = read_csv(out / f"g2_cross_tau{tau}.csv")
        assert header == ["delta_xi", "g2_cross", "side"]
        vals = np.array([float(r[1]) for r in rows])
        assert np.all(vals[np.isfinite(vals)] > 1)
        zero = [r for r in rows if float(r[0]) == 0.0]
        assert [r[2] for r in zero] == ["left", "right"]
        assert zero[0][1] != zero[1][1]


def test_nonclassical_outputs(run):
    code, out = run("nonclassical", "--regime", "sp", "--n-xi", "31", "--tau", "0,0.01,0.02")
    assert code == 0
    _, header, rows = read_csv(out / "cauchy_schwarz_map.csv")
    assert header == ["xi1", "xi2", "V"] and len(rows) == 31 * 31
    for label in ("wp", "sp"):
        meta, header, rows = read_csv(out / f"series_{label}.csv")
        assert header == ["tau", "gamma_n_tau", "S", "E", "N_plus", "N_minus"]
        assert meta["regime"] == label.upper()
        assert rows[0][2] == "1" and rows[0][3] == "0"
    _, _, sp_rows = read_csv(out / "series_sp.csv")
    assert [float(r[0]) for r in sp_rows] == [0.0, 0.01, 0.02]


def test_byte_identical_reruns(tmp_path):
    args = ["crosscorr", "--regime", "sp", "--n-xi", "41", "--tau", "0.05"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "g2_cross_tau0.05.csv").read_bytes()
    b = (tmp_path / "b" / "g2_cross_tau0.05.csv").read_bytes()
    assert a == b
    assert b"\r" not in a


def test_twelve_significant_digits(run):
    code, out = run("crosscorr", "--regime", "wp", "--n-xi", "31", "--tau", "1.025")
    _, _, rows = read_csv(out / "g2_cross_tau1.025.csv")
    digits = max(len(r[1].replace(".", "").replace("-", "").lstrip("0")) for r in rows if r[1] != "nan")
    assert digits == 12


def test_flag_overrides_file(tmp_path, run):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("gamma_n = 5\nn_xi = 41\ntau_list = 0.2\n")
    code, out = run("coherence", "--config", str(cfg), "--n-xi", "31", "--mode", "minus")
    assert code == 0
    meta, _, _ = read_csv(out / "g1_minus_tau0.2.csv")
    assert meta["gamma_n"] == "5" and meta["n_xi"] == "31"
    code, out = run("coherence", "--config", str(cfg), "--gamma-n", "2", "--mode", "minus")
    meta, _, _ = read_csv(out / "g1_minus_tau0.2.csv")
    assert meta["gamma_n"] == "2" and meta["n_xi"] == "41"


@pytest.mark.parametrize("args", [
    ["coherence", "--tau", "abc"],
    ["coherence", "--tau", "-1"],
    ["coherence", "--regime", "xx"],
    ["coherence", "--n-xi", "2"],
    ["coherence", "--quad-tol", "0"],
    ["coherence", "--gamma-n", "-3"],
    ["nonclassical", "--gamma-n-tau", "-1"],
    ["coherence", "--no-such-flag"],
])
def test_validation_errors_exit_one(args, run, capsys):
    code, _ = run(*args)
    assert code == EXIT_INPUT


def test_config_error_names_line(tmp_path, run, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("atom_count = 10\nfoo = 1\n")
    code, _ = run("coherence", "--config", str(cfg))
    assert code == EXIT_INPUT
    assert "bad.cfg:2" in capsys.readouterr().err


def test_verify_quick(run):
    code, out = run("verify", "--quick")
    assert code == 0
    assert "PASS" in (out / "verify_report.tsv").read_text()


def test_verify_mutation_exit_code(run):
    code, out = run("verify", "--mutate-sigma")
    assert code == EXIT_VERIFY
    assert "FAIL" in (out / "verify_report.tsv").read_text()


def test_help_lists_commands():
    res = CliRunner().invoke(cli, ["--help"])
    assert res.exit_code == 0
    for name in ("coherence", "crosscorr", "nonclassical", "verify"):
        assert name in res.output

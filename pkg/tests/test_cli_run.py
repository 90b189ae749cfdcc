import csv
import json
import math

import pytest

from photonmux_hub.cli.interface import main
from photonmux_hub.cli.validation import (
    check_clock,
    check_denominators,
    check_headline,
    check_ideal_stages,
    check_one_db_regime,
    run_validation,
)
from photonmux_hub.core.models import McConfig, SourceConfig
from photonmux_hub.core.photon_stats import ideal_distribution

SOURCE = "m = 2\nmu = 0.3\n"


def _run(argv):
    try:
        main(argv)
    except SystemExit as exit_:
        return exit_.code or 0
    return 0


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_dist_lossless_matches_ideal(tmp_path, config_file, capsys):
    output = tmp_path / "dist.csv"
    code = _run(["dist", "--config", str(config_file(SOURCE)), "--output", str(output)])
    assert code == 0
    rows = _read_csv(output)
    expected = ideal_distribution(SourceConfig(m=2, mu=0.3))
    assert len(rows) == 31
    for row in rows:
        assert float(row["probability"]) == pytest.approx(
            expected.probs[int(row["n"])], abs=1e-12)
        assert row["m"] == "2"
    assert "P1" in capsys.readouterr().out


def test_default_output_directory_from_environment(tmp_path, config_file):
    code = _run(["dist", "--config", str(config_file(SOURCE))])
    assert code == 0
    assert (tmp_path / "results" / "dist.csv").exists()


def test_identical_inputs_identical_bytes(tmp_path, config_file):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    path = str(config_file(SOURCE))
    _run(["sweep", "--config", path, "--axis", "mu", "--values", "0.1,0.2",
          "--output", str(first)])
    _run(["sweep", "--config", path, "--axis", "mu", "--values", "0.1,0.2",
          "--output", str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_figure2_has_eleven_rows(tmp_path):
    output = tmp_path / "fig2.csv"
    assert _run(["figure", "--id", "fig2", "--output", str(output)]) == 0
    rows = _read_csv(output)
    assert [int(row["m"]) for row in rows] == list(range(11))


def test_figure_structured_with_gnuplot(tmp_path):
    output = tmp_path / "fig4.json"
    code = _run(["figure", "--id", "fig4", "--format", "structured",
                 "--m-values", "0,4", "--output", str(output), "--gnuplot", "true"])
    assert code == 0
    data = json.loads(output.read_text(encoding="utf-8"))
    assert data["kind"] == "fig4"
    assert data["metadata"]["figure_id"] == "fig4"
    assert len(data["records"]) == 2 * 2 * 50
    assert (tmp_path / "fig4.gp").exists()


def test_optimize_reports_result(tmp_path):
    output = tmp_path / "opt.csv"
    assert _run(["optimize", "--m", "0", "--output", str(output)]) == 0
    row = _read_csv(output)[0]
    assert float(row["mu_opt"]) == pytest.approx(1.0, abs=1e-5)
    assert row["converged"] == "true"


def test_optimize_structured_output(tmp_path):
    output = tmp_path / "opt.json"
    code = _run(["optimize", "--m", "0", "--format", "structured",
                 "--output", str(output)])
    assert code == 0
    record = json.loads(output.read_text(encoding="utf-8"))["records"][0]
    assert record["converged"] is True
    assert record["constraint_active"] is False
    assert record["mu_opt"] == pytest.approx(1.0, abs=1e-5)


def test_recommend_structured_output(tmp_path):
    output = tmp_path / "rec.json"
    code = _run(["recommend", "--snr-target", "50", "--e-h", "0.85", "--e-s", "0.9",
                 "--e-sw-db", "1.0", "--format", "structured",
                 "--output", str(output)])
    assert code == 0
    record = json.loads(output.read_text(encoding="utf-8"))["records"][0]
    assert record["feasible"] is True
    assert record["snr_at_opt"] >= 50.0 - 1e-6


def test_optimize_unreachable_target(tmp_path):
    output = tmp_path / "opt.csv"
    assert _run(["optimize", "--m", "0", "--snr-target", "1e9",
                 "--output", str(output)]) == 0
    row = _read_csv(output)[0]
    assert row["feasible"] == "false"
    assert math.isnan(float(row["p1_max"]))


def test_montecarlo_command(tmp_path, config_file):
    output = tmp_path / "mc.json"
    code = _run(["montecarlo", "--config", str(config_file(SOURCE)),
                 "--trials", "50000", "--format", "structured",
                 "--output", str(output)])
    assert code == 0
    data = json.loads(output.read_text(encoding="utf-8"))
    assert data["metadata"]["trials"] == 50_000
    assert data["metadata"]["comparison"]["passed"] is True


def test_headline_command(capsys):
    assert _run(["headline"]) == 0
    out = capsys.readouterr().out
    assert "p1_ratio" in out
    assert "clock_mhz" in out


def test_recommend_command(tmp_path):
    output = tmp_path / "rec.csv"
    code = _run(["recommend", "--snr-target", "50", "--e-h", "0.85", "--e-s", "0.9",
                 "--e-sw-db", "1.0", "--output", str(output)])
    assert code == 0
    row = _read_csv(output)[0]
    assert int(row["m"]) > 0
    assert float(row["snr_at_opt"]) >= 50.0 - 1e-6


def test_cli_writes_action_log(tmp_path):
    assert _run(["headline"]) == 0
    text = (tmp_path / "logs" / "actions.log").read_text(encoding="utf-8")
    assert "RUN headline" in text
    assert "result=OK" in text


def test_config_error_exit_and_record(config_file, capsys):
    code = _run(["dist", "--config", str(config_file("m = 4\nmu = 0.1\ne_h = 1.2\n"))])
    assert code == 1
    captured = capsys.readouterr()
    assert "Ошибка конфигурации" in captured.out
    record = json.loads(captured.err.strip().splitlines()[-1])
    assert record["error"] == "ConfigParseError"
    assert record["key"] == "e_h"
    assert record["line"] == 3


def test_truncation_error_exit(capsys):
    code = _run(["dist", "--m", "0", "--mu", "2.0", "--n-max", "5"])
    assert code == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "TruncationError"


def test_missing_command_prints_help(capsys):
    assert _run([]) == 1
    assert "photonmux" in capsys.readouterr().out


def test_validation_checks_without_montecarlo():
    report = run_validation(McConfig(1_000), include_montecarlo=False)
    assert report.passed, [(c.name, c.detail) for c in report.failed]
    assert {c.name for c in report.checks} >= {
        "reductions", "denominators", "normalization", "ideal_stages", "headline",
        "one_db_regime", "figure3_structure", "clock", "optimizer",
    }


def test_individual_checks():
    checks = (check_clock(), check_denominators(30))
    assert all(check.passed for check in checks)


def test_reference_bands_reported():
    for check in (check_ideal_stages(30), check_headline(30),
                  check_one_db_regime(30)):
        assert check.passed, check.detail
        assert "met=False" in check.detail


@pytest.mark.slow
def test_validate_command(tmp_path):
    output = tmp_path / "validation.csv"
    code = _run(["validate", "--trials", "1e6", "--seed", "42",
                 "--output", str(output)])
    assert code == 0
    assert all(row["passed"] == "true" for row in _read_csv(output))

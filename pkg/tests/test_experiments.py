import math

import numpy as np
import pytest

from photonmux_hub.core.exceptions import DomainError
from photonmux_hub.core.experiments import (
    RECORD_COLUMNS,
    SweepTable,
    clock_report,
    curve_maxima,
    custom_sweep,
    figure2,
    figure3,
    figure4,
    figure5,
    gnuplot_script,
    headline_report,
    recommend_stages,
)
from photonmux_hub.core.loss_model import output_distribution
from photonmux_hub.core.models import SourceConfig
from photonmux_hub.core.optimizer import max_p1_with_snr_floor
from photonmux_hub.core.photon_stats import poisson_vector


@pytest.fixture(scope="module")
def fig3_table():
    return figure3()


def test_figure2_rows_and_trend():
    table = figure2()
    assert len(table) == 11
    assert [r.source.m for r in table.records] == list(range(11))
    first = table.records[0]
    assert first.mu_opt == pytest.approx(1.0, abs=1e-5)
    assert first.p1 == pytest.approx(math.exp(-1), abs=1e-10)
    p1 = [r.p1 for r in table.records]
    assert all(a < b for a, b in zip(p1, p1[1:]))
    assert abs(table.records[-1].mandel_q + 0.99) <= 0.01


def test_figure3_half_db_peaks_at_three_stages(fig3_table):
    maxima = curve_maxima(fig3_table)
    half = [maxima[(0.5, m)][0] for m in range(7)]
    assert int(np.argmax(half)) == 3
    assert all(a > b for a, b in zip(half[3:], half[4:]))
    assert half[3] == pytest.approx(0.5255, abs=2e-3)


def test_figure3_one_db_stage_ranking(fig3_table):
    maxima = curve_maxima(fig3_table)
    single = maxima[(1.0, 0)][0]
    better = [m for m in range(1, 7) if maxima[(1.0, m)][0] > single]
    assert better == [1, 2, 3, 4]


def test_figure3_single_window_curve_is_thinned_poisson(fig3_table):
    for record in fig3_table.records:
        if record.source.m == 0 and record.source.e_sw_db == 0.5:
            mean = record.source.mu * record.source.e_s_tot
            assert record.p1 == pytest.approx(poisson_vector(mean, 1)[1], abs=1e-12)


def test_figure3_record_count(fig3_table):
    assert len(fig3_table) == 2 * 7 * 200


def test_figure4_loss_free_switch_column():
    table = figure4(il_grid=[0.0, 0.5, 2.0])
    for record in table.records:
        cfg = record.source
        if cfg.e_sw_db == 0.0:
            assert cfg.e_s_tot == pytest.approx(0.9)
        if cfg.mu == 0.1 and cfg.m == 4 and cfg.e_sw_db == 0.5:
            assert record.p1 == pytest.approx(0.4, abs=0.05)


def test_figure4_higher_stages_decay_faster():
    table = figure4(mu_values=[0.1], il_grid=[0.0, 2.0], m_values=[1, 6])
    p1 = {(r.source.m, r.source.e_sw_db): r.p1 for r in table.records}
    assert p1[(6, 0.0)] > p1[(1, 0.0)]
    assert p1[(6, 2.0)] / p1[(6, 0.0)] < p1[(1, 2.0)] / p1[(1, 0.0)]


def test_figure5_snr_floor():
    table = figure5(snr_grid=[50.0], m_values=[0, 4], il_db_values=[1.0])
    p1 = {r.source.m: r.p1 for r in table.records}
    assert p1[0] == pytest.approx(0.03787, abs=1e-3)
    assert p1[4] == pytest.approx(0.23867, abs=1e-3)
    for record in table.records:
        assert record.snr >= 50.0 - 1e-6
        assert record.snr_target == 50.0


def test_figure5_curves_fall_with_target():
    table = figure5(m_values=[0, 4], il_db_values=[0.5])
    p1 = {m: [r.p1 for r in table.records if r.source.m == m] for m in (0, 4)}
    for series in p1.values():
        assert len(series) == 6
        assert all(a >= b - 1e-9 for a, b in zip(series, series[1:]))
    assert p1[4][3] == pytest.approx(0.30861, abs=1e-3)


def test_figure2_mandel_parameter_falls_with_stages():
    q = [r.mandel_q for r in figure2().records]
    assert q[0] == pytest.approx(0.0, abs=1e-9)
    assert all(a >= b - 1e-9 for a, b in zip(q, q[1:]))


def test_figure5_unreachable_target_row():
    table = figure5(snr_grid=[1e9], m_values=[0], il_db_values=[0.5])
    record = table.records[0]
    assert not record.feasible
    assert math.isnan(record.p1)


def test_records_match_direct_calls(reference_source):
    table = custom_sweep(reference_source, "e_sw_db", [0.0, 0.5, 1.0])
    for record in table.records:
        direct = output_distribution(record.source)
        assert record.p1 == direct.p1
        assert record.p0 == direct.p0


def test_sweep_order_independent(reference_source):
    forward = custom_sweep(reference_source, "mu", [0.05, 0.1, 0.2])
    backward = custom_sweep(reference_source, "mu", [0.2, 0.1, 0.05])
    assert [r.p1 for r in forward.records] == [r.p1 for r in reversed(backward.records)]


def test_sweep_over_stages(reference_source):
    table = custom_sweep(reference_source, "m", [0, 2, 4])
    assert [r.source.m for r in table.records] == [0, 2, 4]


def test_sweep_rejects_unknown_axis(reference_source):
    with pytest.raises(DomainError):
        custom_sweep(reference_source, "temperature", [1.0])


def test_empty_table_rejected():
    with pytest.raises(DomainError):
        SweepTable("custom", ())


def test_table_columns_and_metadata(reference_source):
    table = custom_sweep(reference_source, "mu", [0.1]).to_result_table()
    assert table.columns == RECORD_COLUMNS
    assert len(table.rows[0]) == len(RECORD_COLUMNS)
    assert len(table.metadata["config_hash"]) == 64
    assert table.metadata["timestamp"] is None


def test_metadata_timestamp_from_environment(reference_source, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    table = custom_sweep(reference_source, "mu", [0.1])
    assert table.metadata["timestamp"] == "1970-01-01T00:00:00Z"


@pytest.mark.parametrize("m, period_ns, frequency_hz", [
    (4, 32.0, 31.25e6), (0, 2.0, 500e6), (10, 2048.0, 1 / 2048e-9),
])
def test_clock_report(m, period_ns, frequency_hz):
    report = clock_report(SourceConfig(m=m, delta_t0_ns=2.0))
    assert report.period_ns == pytest.approx(period_ns, rel=1e-12)
    assert report.frequency_hz == pytest.approx(frequency_hz, rel=1e-12)


def test_headline_report():
    report = headline_report()
    assert report["p1_m0"] == pytest.approx(0.07403, abs=2e-4)
    assert report["p1_m4"] == pytest.approx(0.3777, abs=2e-4)
    assert 4.0 <= report["p1_ratio"] <= 6.0
    assert report["snr_m4"] > report["snr_m0"]
    assert report["clock_mhz"] == pytest.approx(31.25)


def test_recommend_stages_for_high_snr():
    template = SourceConfig(e_h=0.85, e_s=0.9, e_sw_db=1.0)
    best = recommend_stages(template, 50.0)
    assert best is not None
    assert best.m > 0
    assert best.result.snr_at_opt >= 50.0 - 1e-6
    single = max_p1_with_snr_floor(template.replace(m=0), 50.0)
    assert best.result.p1_max > single.p1_max


def test_recommend_stages_unreachable():
    template = SourceConfig(e_h=0.85, e_s=0.9, e_sw_db=1.0)
    assert recommend_stages(template, 1e9, m_values=[0, 1]) is None


def test_gnuplot_script_has_one_curve_per_series():
    table = figure4(mu_values=[0.1], il_grid=[0.0, 1.0], m_values=[0, 2])
    script = gnuplot_script(table, "fig4.csv")
    assert script.startswith("set datafile separator ','")
    assert script.count("with lines") == 2
    assert "fig4.csv" in script

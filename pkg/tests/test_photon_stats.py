import math

import numpy as np
import pytest
from scipy.stats import poisson

from photonmux_hub.core.exceptions import (
    ConfigValidationError,
    DomainError,
    InconsistentRateError,
    TruncationError,
    UndefinedValueError,
)
from photonmux_hub.core.models import PhotonDistribution, SourceConfig
from photonmux_hub.core.photon_stats import (
    ideal_distribution,
    mandel_q,
    mean_photon_number,
    poisson_pmf,
    poisson_vector,
    snr,
)


def test_poisson_pmf_matches_scipy():
    for mu in (0.01, 0.5, 1.0, 2.0):
        for n in range(0, 12):
            assert poisson_pmf(mu, n) == pytest.approx(poisson.pmf(n, mu), rel=1e-12)


def test_poisson_pmf_zero_mean():
    assert poisson_pmf(0.0, 0) == 1.0
    assert poisson_pmf(0.0, 3) == 0.0


@pytest.mark.parametrize("mu, n", [(-0.1, 1), (0.5, -1)])
def test_poisson_pmf_rejects_negative(mu, n):
    with pytest.raises(DomainError):
        poisson_pmf(mu, n)


def test_poisson_vector_matches_scalar():
    vector = poisson_vector(0.7, 20)
    assert len(vector) == 21
    for n in range(21):
        assert vector[n] == pytest.approx(poisson_pmf(0.7, n), rel=1e-12)


def test_ideal_single_window_is_poisson():
    cfg = SourceConfig(m=0, mu=0.3)
    dist = ideal_distribution(cfg)
    assert np.allclose(dist.probs, poisson_vector(0.3, 30), atol=1e-15)


def test_ideal_vacuum_probability_uses_full_period():
    cfg = SourceConfig(m=3, mu=0.2)
    dist = ideal_distribution(cfg)
    assert dist.p0 == pytest.approx(math.exp(-1.6), rel=1e-14)
    assert dist.probs.sum() + dist.tail_mass == pytest.approx(1.0, abs=1e-12)


def test_ideal_poisson_optimum():
    dist = ideal_distribution(SourceConfig(m=0, mu=1.0))
    assert dist.p1 == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_ideal_zero_mean_is_vacuum():
    dist = ideal_distribution(SourceConfig(m=2, mu=0.0))
    assert dist.p0 == 1.0
    assert "vacuum" in dist.flags
    with pytest.raises(UndefinedValueError):
        mandel_q(dist)


def test_ideal_ignores_loss_fields():
    lossy = SourceConfig(m=2, mu=0.4, e_h=0.5, e_s=0.5, e_sw_db=1.0, r_dark=1e6)
    clean = SourceConfig(m=2, mu=0.4)
    assert np.array_equal(ideal_distribution(lossy).probs,
                          ideal_distribution(clean).probs)


def test_ideal_truncation_error():
    with pytest.raises(TruncationError) as error:
        ideal_distribution(SourceConfig(m=0, mu=2.0), n_max=5)
    assert error.value.n_max == 5
    assert error.value.tail_mass > 1e-9


def test_mandel_q_of_poisson_is_zero():
    dist = ideal_distribution(SourceConfig(m=0, mu=0.8))
    assert mandel_q(dist) == pytest.approx(0.0, abs=1e-12)
    assert mean_photon_number(dist) == pytest.approx(0.8, rel=1e-12)


def test_multiplexing_makes_light_sub_poissonian():
    dist = ideal_distribution(SourceConfig(m=4, mu=0.2))
    assert mandel_q(dist) < 0


def test_snr_is_p1_over_multi():
    dist = ideal_distribution(SourceConfig(m=1, mu=0.5))
    assert snr(dist) == pytest.approx(dist.p1 / dist.p_ge2, rel=1e-15)


def test_snr_without_multiphoton_events():
    dist = PhotonDistribution(np.array([0.5, 0.5, 0.0]))
    assert snr(dist) == math.inf


def test_distribution_rejects_unnormalized():
    with pytest.raises(DomainError):
        PhotonDistribution(np.array([0.5, 0.4]))


def test_source_rate_conversion():
    cfg = SourceConfig.from_rate(100e6, delta_t0_ns=2.0, m=4)
    assert cfg.mu == pytest.approx(0.2, rel=1e-12)


def test_source_inconsistent_rate():
    with pytest.raises(InconsistentRateError) as error:
        SourceConfig(mu=0.1, herald_rate_r=100e6, delta_t0_ns=2.0)
    assert error.value.field == "mu"


@pytest.mark.parametrize("field, value", [
    ("e_h", 1.2), ("e_s", -0.1), ("e_sw_db", -1.0), ("r_dark", -5.0),
    ("delta_t0_ns", 0.0), ("m", -1), ("m", 2.5),
])
def test_source_validation(field, value):
    with pytest.raises(ConfigValidationError) as error:
        SourceConfig(**{field: value})
    assert error.value.field == field


def test_source_replace_unbinds_rate():
    cfg = SourceConfig.from_rate(50e6)
    changed = cfg.replace(mu=0.3)
    assert changed.mu == 0.3
    assert changed.herald_rate_r is None
    slower = cfg.replace(delta_t0_ns=4.0)
    assert slower.mu == pytest.approx(0.2, rel=1e-12)


def test_source_derived_quantities():
    cfg = SourceConfig(m=4, mu=0.1, e_s=0.9, e_sw_db=0.5)
    assert cfg.n_windows == 16
    assert cfg.mu_T == pytest.approx(1.6)
    assert cfg.e_s_tot == pytest.approx(0.9 * 10 ** (-0.25), rel=1e-12)
    assert not cfg.is_lossless
    assert SourceConfig(m=2, mu=0.5).is_lossless


def test_vacuum_probability_falls_with_stages():
    p0 = [ideal_distribution(SourceConfig(m=m, mu=0.05)).p0 for m in range(0, 13)]
    assert all(a > b for a, b in zip(p0, p0[1:]))


@pytest.mark.parametrize("mu", [1e-6, 1e-3, 0.5, 2.0])
def test_ideal_normalizes_for_all_stages(mu):
    for m in range(0, 13):
        dist = ideal_distribution(SourceConfig(m=m, mu=mu))
        assert dist.probs.sum() + dist.tail_mass == pytest.approx(1.0, abs=1e-12)

import math

import numpy as np
import pytest

from isac_chansim.commgen import (
    RAY_OFFSETS,
    RAYS_PER_CLUSTER,
    azimuth_scaling_constant,
    build_rays,
    generate_cluster_azimuths,
    generate_cluster_delays,
    generate_cluster_powers,
    generate_cluster_zeniths,
    generate_link_clusters,
    zenith_scaling_constant,
)
from isac_chansim.scenario import (
    ClusterSpreads,
    LspSet,
    Propagation,
    Scenario,
    ScenarioKind,
)


class _PassThroughRng:
    """Stand-in generator: all signs +1, no Gaussian jitter."""

    def choice(self, values, size=None):
        return np.full(size, float(values[-1]))

    def standard_normal(self, size=None):
        return np.zeros(size)


def _circular_spread_deg(angles_rad, powers):
    # independent oracle: second central moment around the circular mean
    p = np.asarray(powers) / np.sum(powers)
    mean = np.angle(np.sum(p * np.exp(1j * angles_rad)))
    centered = np.angle(np.exp(1j * (np.asarray(angles_rad) - mean)))
    return math.degrees(math.sqrt(np.sum(p * centered**2)))


def test_ray_offset_table_shape():
    assert len(RAY_OFFSETS) == RAYS_PER_CLUSTER == 20
    assert np.sum(RAY_OFFSETS) == pytest.approx(0.0)
    # symmetric pairs
    assert sorted(RAY_OFFSETS) == sorted(-RAY_OFFSETS)


def test_delays_sorted_and_zero_based():
    rng = np.random.default_rng(0)
    d = generate_cluster_delays(100e-9, 2.3, 19, rng)
    assert d[0] == 0.0
    assert np.all(np.diff(d) >= 0.0)
    assert np.all(d >= 0.0)


def test_delay_scale_matches_exponential_mean():
    # raw draws are exponential with mean r_tau * DS = 230 ns; the minimum
    # subtraction shifts the sample mean by only r_tau*DS/n
    rng = np.random.default_rng(1)
    d = generate_cluster_delays(100e-9, 2.3, 100_000, rng)
    assert float(d.mean()) == pytest.approx(230e-9, abs=3e-9)


def test_delay_validation():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        generate_cluster_delays(0.0, 2.3, 10, rng)
    with pytest.raises(ValueError):
        generate_cluster_delays(1e-7, 1.0, 10, rng)
    with pytest.raises(ValueError):
        generate_cluster_delays(1e-7, 2.3, 0, rng)


def test_power_ratio_closed_form():
    # with shadowing off, a delay gap of r_tau*DS*ln(2)/(r_tau - 1)
    # halves the power
    ds, r_tau = 100e-9, 2.3
    tau = r_tau * ds * math.log(2.0) / (r_tau - 1.0)
    rng = np.random.default_rng(3)
    p = generate_cluster_powers(np.array([0.0, tau]), ds, r_tau, 0.0, rng)
    assert p[0] / p[1] == pytest.approx(2.0, rel=1e-12)
    assert p.sum() == pytest.approx(1.0, rel=1e-12)


def test_powers_normalized_and_positive():
    rng = np.random.default_rng(4)
    for _ in range(100):
        d = generate_cluster_delays(65e-9, 2.1, 19, rng)
        p = generate_cluster_powers(d, 65e-9, 2.1, 3.0, rng)
        assert p.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all(p > 0.0)


def test_scaling_constant_table_and_interpolation():
    assert azimuth_scaling_constant(12) == pytest.approx(1.146)
    assert azimuth_scaling_constant(20) == pytest.approx(1.289)
    assert zenith_scaling_constant(12) == pytest.approx(1.104)
    # interpolated between 12 and 14 entries
    c13 = azimuth_scaling_constant(13)
    assert 1.146 < c13 < 1.190
    # clamped outside the table
    assert azimuth_scaling_constant(3) == pytest.approx(0.779)
    assert azimuth_scaling_constant(40) == pytest.approx(1.358)


def test_azimuth_formula_spot_value():
    # a cluster at P/Pmax = 1/e sits 2*(ASA/1.4)/C away from the mean
    powers = np.ones(12)
    powers[3] = math.exp(-1.0)
    asa = 14.0
    ang = generate_cluster_azimuths(
        powers, asa, 0.0, Propagation.NLOS, _PassThroughRng()
    )
    expect = math.radians(2.0 * (asa / 1.4) / 1.146)
    assert ang[3] == pytest.approx(expect, rel=1e-12)
    assert ang[0] == pytest.approx(0.0, abs=1e-15)


def test_zenith_formula_spot_value():
    powers = np.ones(12)
    powers[5] = math.exp(-1.0)
    zsa = 7.0
    ang = generate_cluster_zeniths(
        powers, zsa, math.pi / 2, Propagation.NLOS, _PassThroughRng()
    )
    expect = math.pi / 2 + math.radians(zsa / 1.104)
    assert ang[5] == pytest.approx(expect, rel=1e-12)


def test_los_pins_first_cluster_on_direct_path():
    rng = np.random.default_rng(5)
    for _ in range(50):
        powers = generate_cluster_powers(
            generate_cluster_delays(30e-9, 3.0, 12, rng), 30e-9, 3.0, 3.0, rng
        )
        az = generate_cluster_azimuths(
            powers, 30.0, 1.0, Propagation.LOS, rng, k_db=9.0
        )
        zen = generate_cluster_zeniths(
            powers, 5.0, 1.4, Propagation.LOS, rng, k_db=9.0
        )
        assert az[0] == pytest.approx(1.0, abs=1e-12)
        assert zen[0] == pytest.approx(1.4, abs=1e-12)


def test_cluster_azimuth_spread_tracks_asa():
    # consistency of the inverse map: the realized power-weighted spread
    # averaged over seeds stays within 10% of the configured value
    asa = 30.0
    ratios = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        d = generate_cluster_delays(65e-9, 2.1, 19, rng)
        p = generate_cluster_powers(d, 65e-9, 2.1, 3.0, rng)
        az = generate_cluster_azimuths(p, asa, 0.0, Propagation.NLOS, rng)
        ratios.append(_circular_spread_deg(az, p) / asa)
    assert abs(float(np.mean(ratios)) - 1.0) < 0.10


def test_ray_fan_offsets():
    spreads = ClusterSpreads(c_asd_deg=3.0, c_asa_deg=17.0, c_zsa_deg=7.0)
    rng = np.random.default_rng(6)
    rays = build_rays(0.3, 1.5, -0.7, 1.6, spreads, 9.0, 3.0, rng)
    assert len(rays) == 20
    # departure azimuths keep table order
    aods = np.array([r.aod_rad for r in rays])
    assert np.allclose(aods, 0.3 + np.radians(3.0 * RAY_OFFSETS))
    # arrival azimuths are a permutation of the same fan
    aoas = np.array([r.aoa_rad for r in rays])
    assert np.allclose(
        np.sort(aoas), np.sort(-0.7 + np.radians(17.0 * RAY_OFFSETS))
    )
    zoas = np.array([r.zoa_rad for r in rays])
    assert np.allclose(
        np.sort(zoas), np.sort(1.6 + np.radians(7.0 * RAY_OFFSETS))
    )


def test_ray_xpr_and_phases():
    spreads = ClusterSpreads(3.0, 17.0, 7.0)
    rng = np.random.default_rng(7)
    xprs = []
    for _ in range(500):
        rays = build_rays(0.0, 1.5, 0.0, 1.5, spreads, 9.0, 3.0, rng)
        for r in rays:
            assert r.xpr_linear > 0.0
            assert r.phases.shape == (4,)
            assert np.all(r.phases >= 0.0) and np.all(r.phases < 2.0 * math.pi)
            xprs.append(r.xpr_linear)
    # median of the log-normal XPR is 10^(mean_db/10)
    assert float(np.median(xprs)) == pytest.approx(10.0 ** 0.9, rel=0.05)


def test_link_cluster_assembly():
    scenario = Scenario(ScenarioKind.UMI)
    lsps = LspSet(ds_s=65e-9, asa_deg=49.0, asd_deg=15.0, zsa_deg=7.3,
                  zsd_deg=2.0, sf_db=0.0)
    rng = np.random.default_rng(8)
    clusters = generate_link_clusters(
        scenario, Propagation.NLOS, lsps, 19,
        0.1, 1.5, 3.0, 1.6, rng,
    )
    assert len(clusters) == 19
    assert clusters[0].delay_s == 0.0
    assert all(len(c.rays) == 20 for c in clusters)
    total = sum(c.power for c in clusters)
    assert total == pytest.approx(1.0, rel=1e-12)
    delays = [c.delay_s for c in clusters]
    assert delays == sorted(delays)
    assert [c.index for c in clusters] == list(range(19))


def test_link_generation_is_deterministic():
    scenario = Scenario(ScenarioKind.UMA)
    lsps = LspSet(ds_s=266e-9, asa_deg=49.0, asd_deg=22.0, zsa_deg=11.0,
                  zsd_deg=2.0, sf_db=0.0)
    a = generate_link_clusters(
        scenario, Propagation.NLOS, lsps, 20, 0.0, 1.5, 0.0, 1.5,
        np.random.default_rng(99),
    )
    b = generate_link_clusters(
        scenario, Propagation.NLOS, lsps, 20, 0.0, 1.5, 0.0, 1.5,
        np.random.default_rng(99),
    )
    for ca, cb in zip(a, b):
        assert ca.delay_s == cb.delay_s
        assert ca.power == cb.power
        assert ca.aoa_rad == cb.aoa_rad
        for ra, rb in zip(ca.rays, cb.rays):
            assert ra.aoa_rad == rb.aoa_rad
            assert ra.xpr_linear == rb.xpr_linear
            assert np.array_equal(ra.phases, rb.phases)

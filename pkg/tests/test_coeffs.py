import cmath
import math

import numpy as np
import pytest

from isac_chansim.coeffs import (
    AntennaElement,
    RcsClass,
    RcsModel,
    assemble_link,
    comm_channel_coefficient,
    freespace_comm_pathloss,
    los_sensing_coefficient,
    nlos_sensing_coefficient,
    sample_rcs,
    scenario_pathloss_model,
    sensing_pathloss,
)
from isac_chansim.commgen import generate_link_clusters
from isac_chansim.geometry import SphericalAngles, Vec3
from isac_chansim.scenario import (
    LIGHT_SPEED,
    LspSet,
    Propagation,
    Scenario,
    ScenarioKind,
)
from isac_chansim.sensing import ClusterKind, EchoRay, SensingCluster

WAVELENGTH_28 = LIGHT_SPEED / 28e9


def test_los_sensing_unit_value():
    c = los_sensing_coefficient(
        AntennaElement(), AntennaElement(),
        target_position=Vec3(5, 0, 0), tx=Vec3(0, 0, 0), sx=Vec3(0, 0, 0),
        wavelength=WAVELENGTH_28,
    )
    assert c.value == pytest.approx(1.0 + 0.0j, abs=1e-12)
    assert c.delay_s == pytest.approx(10.0 / LIGHT_SPEED, rel=1e-12)
    assert c.doppler_hz == 0.0


def test_los_sensing_modulus_one_everywhere():
    rng = np.random.default_rng(3)
    tx = Vec3(0, 0, 0)
    for _ in range(300):
        target = Vec3(*rng.uniform(-50, 50, size=3))
        sx = Vec3(*rng.uniform(-5, 5, size=3))
        if (target - tx).norm() == 0 or (target - sx).norm() == 0:
            continue
        c = los_sensing_coefficient(
            AntennaElement(), AntennaElement(), target, tx, sx,
            wavelength=WAVELENGTH_28,
        )
        assert abs(abs(c.value) - 1.0) < 1e-12


def test_monostatic_receding_doppler():
    # target straight out on +x, receding at 1 m/s: doppler = 2 v / lambda
    c = los_sensing_coefficient(
        AntennaElement(), AntennaElement(),
        target_position=Vec3(20, 0, 0), tx=Vec3(0, 0, 0), sx=Vec3(0, 0, 0),
        wavelength=WAVELENGTH_28, velocity=Vec3(1, 0, 0),
    )
    assert c.doppler_hz == pytest.approx(186.8, abs=0.1)
    assert c.doppler_hz == pytest.approx(2.0 / WAVELENGTH_28, rel=1e-9)
    # approaching flips the sign
    c2 = los_sensing_coefficient(
        AntennaElement(), AntennaElement(),
        Vec3(20, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0),
        wavelength=WAVELENGTH_28, velocity=Vec3(-1, 0, 0),
    )
    assert c2.doppler_hz == pytest.approx(-2.0 / WAVELENGTH_28, rel=1e-9)


def test_element_offset_phase():
    # an offset of lambda/2 along the propagation direction adds exactly pi
    tx_el = AntennaElement(offset=Vec3(WAVELENGTH_28 / 2.0, 0.0, 0.0))
    c = los_sensing_coefficient(
        AntennaElement(), tx_el,
        target_position=Vec3(10, 0, 0), tx=Vec3(0, 0, 0), sx=Vec3(0, 0, 0),
        wavelength=WAVELENGTH_28,
    )
    assert c.value == pytest.approx(cmath.exp(1j * math.pi), abs=1e-9)
    # a full wavelength is periodic back to +1
    tx_el2 = AntennaElement(offset=Vec3(WAVELENGTH_28, 0.0, 0.0))
    c2 = los_sensing_coefficient(
        AntennaElement(), tx_el2,
        Vec3(10, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0),
        wavelength=WAVELENGTH_28,
    )
    assert c2.value == pytest.approx(1.0 + 0.0j, abs=1e-9)


def test_los_sensing_rejects_zero_leg():
    with pytest.raises(ValueError):
        los_sensing_coefficient(
            AntennaElement(), AntennaElement(),
            Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(5, 0, 0),
            wavelength=WAVELENGTH_28,
        )


def _diag_pattern(angles):
    return 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)


def test_nlos_sensing_isotropic_modulus_one():
    rng = np.random.default_rng(5)
    for _ in range(200):
        c = nlos_sensing_coefficient(
            AntennaElement(), AntennaElement(),
            SphericalAngles(rng.uniform(0, 2 * math.pi), rng.uniform(0.3, 2.8)),
            SphericalAngles(rng.uniform(0, 2 * math.pi), rng.uniform(0.3, 2.8)),
            xpr_linear=float(rng.uniform(0.1, 100.0)),
            phases=rng.uniform(0, 2 * math.pi, size=4),
            delay_s=1e-7, wavelength=WAVELENGTH_28,
        )
        assert abs(abs(c.value) - 1.0) < 1e-12


def test_nlos_sensing_bilinear_expansion():
    el = AntennaElement(pattern=_diag_pattern)
    zero_phases = np.zeros(4)
    # kappa -> infinity kills the cross terms: value -> 1
    c_inf = nlos_sensing_coefficient(
        el, el, SphericalAngles(0.3, 1.5), SphericalAngles(1.2, 1.4),
        xpr_linear=1e12, phases=zero_phases, delay_s=0.0,
        wavelength=WAVELENGTH_28,
    )
    assert c_inf.value == pytest.approx(1.0 + 0.0j, abs=1e-5)
    # kappa = 1 with zero phases sums all four half-power terms: value = 2
    c_one = nlos_sensing_coefficient(
        el, el, SphericalAngles(0.3, 1.5), SphericalAngles(1.2, 1.4),
        xpr_linear=1.0, phases=zero_phases, delay_s=0.0,
        wavelength=WAVELENGTH_28,
    )
    assert c_one.value == pytest.approx(2.0 + 0.0j, abs=1e-12)


def test_nlos_sensing_rejects_bad_xpr():
    with pytest.raises(ValueError):
        nlos_sensing_coefficient(
            AntennaElement(), AntennaElement(),
            SphericalAngles(0.0, 1.5), SphericalAngles(0.0, 1.5),
            xpr_linear=0.0, phases=np.zeros(4), delay_s=0.0,
            wavelength=WAVELENGTH_28,
        )


def test_comm_direct_coefficient():
    c = comm_channel_coefficient(
        AntennaElement(), AntennaElement(), WAVELENGTH_28,
        tx=Vec3(0, 0, 10), rx=Vec3(30, 40, 10),
    )
    assert c.value == pytest.approx(1.0 + 0.0j, abs=1e-12)
    assert c.delay_s == pytest.approx(50.0 / LIGHT_SPEED, rel=1e-12)
    # terminal moving along the link axis: the symmetric convention cancels
    c2 = comm_channel_coefficient(
        AntennaElement(), AntennaElement(), WAVELENGTH_28,
        tx=Vec3(0, 0, 0), rx=Vec3(100, 0, 0), velocity=Vec3(-3, 0, 0),
    )
    assert c2.doppler_hz == pytest.approx(0.0, abs=1e-12)


def test_comm_ray_coefficient_uses_ray_angles():
    rng = np.random.default_rng(11)
    scenario = Scenario(ScenarioKind.UMI)
    lsps = LspSet(ds_s=65e-9, asa_deg=49.0, asd_deg=15.0, zsa_deg=7.3,
                  zsd_deg=2.0, sf_db=0.0)
    clusters = generate_link_clusters(
        scenario, Propagation.NLOS, lsps, 19, 0.0, 1.5, math.pi, 1.6, rng
    )
    ray = clusters[2].rays[7]
    c = comm_channel_coefficient(
        AntennaElement(), AntennaElement(), WAVELENGTH_28,
        ray=ray, delay_s=2e-7, velocity=Vec3(1.0, 0.5, 0.0),
    )
    assert abs(abs(c.value) - 1.0) < 1e-12
    assert c.delay_s == 2e-7
    expect_doppler = (
        np.array([
            math.cos(ray.aod_rad) * math.sin(ray.zod_rad)
            + math.cos(ray.aoa_rad) * math.sin(ray.zoa_rad),
            math.sin(ray.aod_rad) * math.sin(ray.zod_rad)
            + math.sin(ray.aoa_rad) * math.sin(ray.zoa_rad),
            math.cos(ray.zod_rad) + math.cos(ray.zoa_rad),
        ]) @ np.array([1.0, 0.5, 0.0])
    ) / WAVELENGTH_28
    assert c.doppler_hz == pytest.approx(expect_doppler, rel=1e-9)


def test_freespace_pathloss_values():
    assert freespace_comm_pathloss(WAVELENGTH_28 / (4 * math.pi), WAVELENGTH_28) == pytest.approx(0.0, abs=1e-12)
    assert freespace_comm_pathloss(1.0, WAVELENGTH_28) == pytest.approx(61.39, abs=0.005)
    d = 17.3
    gap = freespace_comm_pathloss(2 * d, WAVELENGTH_28) - freespace_comm_pathloss(d, WAVELENGTH_28)
    assert gap == pytest.approx(20.0 * math.log10(2.0), rel=1e-12)
    with pytest.raises(ValueError):
        freespace_comm_pathloss(0.0, WAVELENGTH_28)


def test_sensing_pathloss_dual_route():
    # composed route (two one-way losses + aperture) against the direct
    # radar-equation expression
    pl = sensing_pathloss(1.0, 1.0, 0.0, WAVELENGTH_28)
    direct = 10.0 * math.log10(64.0 * math.pi**3 / WAVELENGTH_28**2)
    assert pl == pytest.approx(72.38, abs=0.01)
    assert pl == pytest.approx(direct, abs=1e-9)


def test_sensing_pathloss_properties():
    rng = np.random.default_rng(17)
    for _ in range(200):
        d1, d2 = rng.uniform(1, 500, size=2)
        sigma = rng.uniform(-30, 30)
        a = sensing_pathloss(d1, d2, sigma, WAVELENGTH_28)
        b = sensing_pathloss(d2, d1, sigma, WAVELENGTH_28)
        assert a == pytest.approx(b, abs=1e-9)
        # +10 dBsm of RCS takes 10 dB off the loss
        c = sensing_pathloss(d1, d2, sigma + 10.0, WAVELENGTH_28)
        assert a - c == pytest.approx(10.0, abs=1e-9)
    # the aperture term cancels when sigma equals it
    aperture = 10.0 * math.log10(WAVELENGTH_28**2 / (4 * math.pi))
    pl = sensing_pathloss(3.0, 7.0, aperture, WAVELENGTH_28)
    expect = (freespace_comm_pathloss(3.0, WAVELENGTH_28)
              + freespace_comm_pathloss(7.0, WAVELENGTH_28))
    assert pl == pytest.approx(expect, abs=1e-12)
    with pytest.raises(ValueError):
        sensing_pathloss(0.0, 1.0, 0.0, WAVELENGTH_28)


def test_sensing_pathloss_pluggable_model():
    flat = lambda d: 50.0
    aperture = 10.0 * math.log10(WAVELENGTH_28**2 / (4 * math.pi))
    pl = sensing_pathloss(10.0, 20.0, 5.0, WAVELENGTH_28, pl_model=flat)
    assert pl == pytest.approx(100.0 - 5.0 + aperture, abs=1e-12)


def test_scenario_pathloss_families():
    for kind in ScenarioKind:
        scenario = Scenario(kind)
        los = scenario_pathloss_model(scenario, Propagation.LOS)
        nlos = scenario_pathloss_model(scenario, Propagation.NLOS)
        last = 0.0
        for d in [10.0, 30.0, 100.0, 300.0, 1000.0]:
            pl_los, pl_nlos = los(d), nlos(d)
            assert pl_los > 0.0
            assert pl_nlos >= pl_los - 1e-9
            assert pl_los > last
            last = pl_los
        with pytest.raises(ValueError):
            los(0.0)


def test_rcs_ranges_and_mixture():
    rng = np.random.default_rng(23)
    cls, vals = sample_rcs(rng, rcs_class=RcsClass.PEDESTRIAN, size=5000)
    assert cls is RcsClass.PEDESTRIAN
    assert np.all((vals >= -20.0) & (vals <= 0.0))
    _, veh = sample_rcs(rng, rcs_class=RcsClass.VEHICLE, size=50_000)
    assert float(veh.mean()) == pytest.approx(10.0, abs=0.2)
    counts = {c: 0 for c in RcsClass}
    n = 20_000
    for _ in range(n):
        cls, _ = sample_rcs(rng, size=1)
        counts[cls] += 1
    assert counts[RcsClass.VEHICLE] / n == pytest.approx(0.30, abs=0.02)
    assert counts[RcsClass.PEDESTRIAN] / n == pytest.approx(0.20, abs=0.02)
    assert counts[RcsClass.ENVIRONMENT] / n == pytest.approx(0.50, abs=0.02)


def test_rcs_model_validation():
    with pytest.raises(ValueError):
        RcsModel(mixture={RcsClass.VEHICLE: 0.9})
    with pytest.raises(ValueError):
        RcsModel(ranges={**dict(RcsModel().ranges), RcsClass.VEHICLE: (5.0, 5.0)})


def _assemble(condition, sensing, seed=0, k_db=9.0):
    scenario = Scenario(ScenarioKind.UMI)
    rng = np.random.default_rng(seed)
    lsps = LspSet(ds_s=32e-9, asa_deg=41.0, asd_deg=14.0, zsa_deg=4.0,
                  zsd_deg=2.5, sf_db=1.7, k_db=k_db)
    n = 12 if condition is Propagation.LOS else 19
    tx, rx = Vec3(0, 0, 5), Vec3(8, 8, 1.5)
    clusters = generate_link_clusters(
        scenario, condition, lsps, n, 0.0, 1.5, math.pi, 1.6, rng
    )
    real = assemble_link(
        "bs0-ut0", 0, 0, scenario, condition, lsps, tx, rx, tx,
        clusters, sensing,
    )
    return real, clusters, tx, rx


def test_assemble_comm_only_nlos():
    real, clusters, _, _ = _assemble(Propagation.NLOS, [])
    assert len(real.comm_taps) == 19 * 20
    assert real.sensing_taps == []
    delays = [t.delay_s for t in real.comm_taps]
    assert delays == sorted(delays)
    assert [t.tap_id for t in real.comm_taps] == list(range(len(delays)))
    # isotropic unit coefficients: total tap power equals total cluster power
    total = sum(abs(t.amplitude) ** 2 for t in real.comm_taps)
    assert total == pytest.approx(1.0, rel=1e-9)
    # one pathloss value per link
    assert len({t.pathloss_db for t in real.comm_taps}) == 1


def test_assemble_comm_los_power_split():
    real, clusters, tx, rx = _assemble(Propagation.LOS, [])
    assert len(real.comm_taps) == 12 * 20 + 1
    total = sum(abs(t.amplitude) ** 2 for t in real.comm_taps)
    assert total == pytest.approx(1.0, rel=1e-9)
    direct = [t for t in real.comm_taps if t.ray_index is None]
    assert len(direct) == 1
    k_lin = 10.0 ** 0.9
    assert abs(direct[0].amplitude) ** 2 == pytest.approx(
        k_lin / (k_lin + 1.0), rel=1e-9
    )
    assert direct[0].delay_s == pytest.approx(
        (tx - rx).norm() / LIGHT_SPEED, rel=1e-12
    )


def _ut_target(tx, rx):
    d = (rx - tx).norm()
    from isac_chansim.sensing import echo_geometry
    delay, dep, arr = echo_geometry(rx, tx, tx)
    return SensingCluster(
        kind=ClusterKind.UT_TARGET, position=rx, source_link="bs0-ut0",
        power=1.0, condition=Propagation.LOS, rcs_class=RcsClass.VEHICLE,
        rcs_dbsm=np.array([12.5]), delay_s=delay, departure=dep, arrival=arr,
    )


def test_assemble_single_target_echo_power():
    scenario = Scenario(ScenarioKind.UMI)
    tx, rx = Vec3(0, 0, 5), Vec3(8, 8, 1.5)
    target = _ut_target(tx, rx)
    real, clusters, _, _ = _assemble(Propagation.LOS, [target])
    assert len(real.sensing_taps) == 1
    tap = real.sensing_taps[0]
    assert abs(abs(tap.amplitude) - 1.0) < 1e-12
    d = (rx - tx).norm()
    expect_pl = sensing_pathloss(d, d, 12.5, scenario.wavelength_m)
    assert tap.pathloss_db == pytest.approx(expect_pl, abs=1e-9)
    # received echo power composes exactly as tx power minus pathloss
    rx_power = real.tx_power_dbm + 20.0 * math.log10(abs(tap.amplitude)) - tap.pathloss_db
    assert rx_power == pytest.approx(real.tx_power_dbm - expect_pl, abs=1e-9)
    assert tap.delay_s == pytest.approx(2.0 * d / LIGHT_SPEED, rel=1e-12)


def test_assemble_nlos_sensing_cluster_fans_out():
    tx, rx = Vec3(0, 0, 5), Vec3(8, 8, 1.5)
    rng = np.random.default_rng(31)
    from isac_chansim.sensing import echo_geometry
    pos = Vec3(15, -4, 2)
    delay, dep, arr = echo_geometry(pos, tx, tx)
    rays = [
        EchoRay(
            d_aod_rad=float(rng.normal(0, 0.05)),
            d_zod_rad=float(rng.normal(0, 0.02)),
            d_aoa_rad=float(rng.normal(0, 0.05)),
            d_zoa_rad=float(rng.normal(0, 0.02)),
            xpr_linear=8.0,
            phases=rng.uniform(0, 2 * math.pi, size=4),
        )
        for _ in range(20)
    ]
    cluster = SensingCluster(
        kind=ClusterKind.SHARED, position=pos, source_link="bs0-ut0",
        power=0.25, condition=Propagation.NLOS, rcs_class=RcsClass.ENVIRONMENT,
        rcs_dbsm=rng.uniform(-50, 50, size=20), delay_s=delay,
        departure=dep, arrival=arr, echo_rays=rays,
    )
    real, clusters, _, _ = _assemble(Propagation.NLOS, [cluster])
    assert len(real.sensing_taps) == 20
    total = sum(abs(t.amplitude) ** 2 for t in real.sensing_taps)
    assert total == pytest.approx(0.25, rel=1e-9)
    # every ray charged its own radar pathloss
    assert len({t.pathloss_db for t in real.sensing_taps}) == 20
    assert all(t.kind == "shared" for t in real.sensing_taps)


def test_assemble_nlos_cluster_without_rays_is_rejected():
    tx, rx = Vec3(0, 0, 5), Vec3(8, 8, 1.5)
    bad = _ut_target(tx, rx)
    bad.condition = Propagation.NLOS
    bad.echo_rays = []
    with pytest.raises(ValueError):
        _assemble(Propagation.NLOS, [bad])

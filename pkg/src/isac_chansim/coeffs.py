"""Complex path coefficients, pathloss models and RCS sampling.

Communication and sensing paths share one bilinear structure: a receive
field pattern, a 2x2 polarization matrix, a transmit field pattern, element
phase terms and a Doppler phase.  Direct paths use the deterministic
diag(1, -1) polarization matrix; scattered rays use the random-phase matrix
with the ray's cross-polarization ratio.  Sensing pathloss follows the
radar equation built from two one-way legs, the target RCS, and the
effective aperture term.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .commgen import CommCluster, Ray, RAYS_PER_CLUSTER
from .geometry import SphericalAngles, Vec3, ZERO, angles_from_vector, direction_vector
from .scenario import LIGHT_SPEED, LspSet, Propagation, Scenario, ScenarioKind

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from .sensing import SensingCluster


def isotropic_pattern(angles: SphericalAngles) -> tuple[float, float]:
    """Unit co-polarized field everywhere."""
    return 1.0, 0.0


@dataclass(frozen=True)
class AntennaElement:
    """One antenna element: position offset in the array frame plus a
    field-pattern function returning (F_theta, F_phi) for a direction."""

    offset: Vec3 = ZERO
    pattern: Callable[[SphericalAngles], tuple[float, float]] = isotropic_pattern


@dataclass(frozen=True)
class PathCoefficient:
    value: complex
    delay_s: float
    doppler_hz: float


def _element_phase(element: AntennaElement, r_hat: Vec3, wavelength: float) -> complex:
    return cmath.exp(2j * math.pi * r_hat.dot(element.offset) / wavelength)


def _doppler_hz(r_hat_tx: Vec3, r_hat_rx: Vec3, velocity: Vec3, wavelength: float) -> float:
    return (r_hat_tx + r_hat_rx).dot(velocity) / wavelength


def _bilinear(
    f_rx: tuple[float, float], m: np.ndarray, f_tx: tuple[float, float]
) -> complex:
    return (
        f_rx[0] * (m[0, 0] * f_tx[0] + m[0, 1] * f_tx[1])
        + f_rx[1] * (m[1, 0] * f_tx[0] + m[1, 1] * f_tx[1])
    )


_DIRECT_POL = np.array([[1.0, 0.0], [0.0, -1.0]])


def _scattered_pol(xpr_linear: float, phases: np.ndarray) -> np.ndarray:
    if xpr_linear <= 0.0:
        raise ValueError("cross-polarization ratio must be positive")
    leak = math.sqrt(1.0 / xpr_linear)
    return np.array([
        [cmath.exp(1j * phases[0]), leak * cmath.exp(1j * phases[1])],
        [leak * cmath.exp(1j * phases[2]), cmath.exp(1j * phases[3])],
    ])


def _path_value(
    rx_element: AntennaElement,
    tx_element: AntennaElement,
    departure: SphericalAngles,
    arrival: SphericalAngles,
    pol: np.ndarray,
    velocity: Vec3,
    t: float,
    wavelength: float,
) -> tuple[complex, float]:
    r_tx = direction_vector(departure)
    r_rx = direction_vector(arrival)
    value = _bilinear(rx_element.pattern(arrival), pol, tx_element.pattern(departure))
    value *= _element_phase(tx_element, r_tx, wavelength)
    value *= _element_phase(rx_element, r_rx, wavelength)
    doppler = _doppler_hz(r_tx, r_rx, velocity, wavelength)
    value *= cmath.exp(2j * math.pi * doppler * t)
    return value, doppler


def los_sensing_coefficient(
    sx_element: AntennaElement,
    tx_element: AntennaElement,
    target_position: Vec3,
    tx: Vec3,
    sx: Vec3,
    wavelength: float,
    velocity: Vec3 = ZERO,
    t: float = 0.0,
) -> PathCoefficient:
    """Direct-echo coefficient for a line-of-sight sensing path.

    Unit directions point from each terminal toward the target, so a
    receding target produces a positive Doppler shift.
    """
    leg_out = target_position - tx
    leg_back = target_position - sx
    d1, d2 = leg_out.norm(), leg_back.norm()
    if d1 == 0.0 or d2 == 0.0:
        raise ValueError("sensing target coincides with a terminal")
    departure = angles_from_vector(leg_out)
    arrival = angles_from_vector(leg_back)
    value, doppler = _path_value(
        sx_element, tx_element, departure, arrival, _DIRECT_POL,
        velocity, t, wavelength,
    )
    return PathCoefficient(value, (d1 + d2) / LIGHT_SPEED, doppler)


def nlos_sensing_coefficient(
    sx_element: AntennaElement,
    tx_element: AntennaElement,
    departure: SphericalAngles,
    arrival: SphericalAngles,
    xpr_linear: float,
    phases: np.ndarray,
    delay_s: float,
    wavelength: float,
    velocity: Vec3 = ZERO,
    t: float = 0.0,
) -> PathCoefficient:
    """Scattered-echo coefficient for one sensing ray."""
    pol = _scattered_pol(xpr_linear, phases)
    value, doppler = _path_value(
        sx_element, tx_element, departure, arrival, pol,
        velocity, t, wavelength,
    )
    return PathCoefficient(value, delay_s, doppler)


def comm_channel_coefficient(
    rx_element: AntennaElement,
    tx_element: AntennaElement,
    wavelength: float,
    ray: Optional[Ray] = None,
    tx: Optional[Vec3] = None,
    rx: Optional[Vec3] = None,
    delay_s: float = 0.0,
    velocity: Vec3 = ZERO,
    t: float = 0.0,
) -> PathCoefficient:
    """Communication coefficient: a scattered ray, or the direct path when
    ``ray`` is omitted (then the terminal positions fix the geometry)."""
    if ray is None:
        if tx is None or rx is None:
            raise ValueError("direct path needs both terminal positions")
        sep = (rx - tx).norm()
        if sep == 0.0:
            raise ValueError("terminals coincide")
        departure = angles_from_vector(rx - tx)
        arrival = angles_from_vector(tx - rx)
        value, doppler = _path_value(
            rx_element, tx_element, departure, arrival, _DIRECT_POL,
            velocity, t, wavelength,
        )
        return PathCoefficient(value, sep / LIGHT_SPEED, doppler)
    pol = _scattered_pol(ray.xpr_linear, ray.phases)
    value, doppler = _path_value(
        rx_element, tx_element,
        SphericalAngles(ray.aod_rad, ray.zod_rad),
        SphericalAngles(ray.aoa_rad, ray.zoa_rad),
        pol, velocity, t, wavelength,
    )
    return PathCoefficient(value, delay_s, doppler)


def freespace_comm_pathloss(d_m: float, wavelength: float) -> float:
    """One-way free-space pathloss in dB."""
    if d_m <= 0.0:
        raise ValueError("distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * d_m / wavelength)


def scenario_pathloss_model(
    scenario: Scenario,
    condition: Propagation,
    h_ut_m: float = 1.5,
) -> Callable[[float], float]:
    """Closed-form distance-to-dB pathloss for the scenario family.

    Single-slope representative forms (below the breakpoint distance, with
    default street/building constants for the rural family).  Any callable
    d_m -> dB can replace these through the pathloss plug points.
    """
    f_ghz = scenario.carrier_frequency_hz / 1e9

    def umi_los(d):
        return 32.4 + 21.0 * math.log10(d) + 20.0 * math.log10(f_ghz)

    def uma_los(d):
        return 28.0 + 22.0 * math.log10(d) + 20.0 * math.log10(f_ghz)

    def rma_los(d):
        h = 5.0  # average building height, meters
        a = min(0.03 * h**1.72, 10.0)
        b = min(0.044 * h**1.72, 14.77)
        return (20.0 * math.log10(40.0 * math.pi * d * f_ghz / 3.0)
                + a * math.log10(d) - b + 0.002 * math.log10(h) * d)

    if scenario.kind is ScenarioKind.UMI:
        los = umi_los
        def nlos(d):
            return max(los(d), 22.4 + 35.3 * math.log10(d)
                       + 21.3 * math.log10(f_ghz) - 0.3 * (h_ut_m - 1.5))
    elif scenario.kind is ScenarioKind.UMA:
        los = uma_los
        def nlos(d):
            return max(los(d), 13.54 + 39.08 * math.log10(d)
                       + 20.0 * math.log10(f_ghz) - 0.6 * (h_ut_m - 1.5))
    else:
        los = rma_los
        def nlos(d):
            # fixed defaults: street width 20 m, building height 5 m, mast 35 m
            base = (161.04 - 7.1 * math.log10(20.0) + 7.5 * math.log10(5.0)
                    - (24.37 - 3.7 * (5.0 / 35.0) ** 2) * math.log10(35.0)
                    + (43.42 - 3.1 * math.log10(35.0)) * (math.log10(d) - 3.0)
                    + 20.0 * math.log10(f_ghz)
                    - (3.2 * math.log10(11.75 * h_ut_m) ** 2 - 4.97))
            return max(los(d), base)

    model = los if condition is Propagation.LOS else nlos

    def pathloss(d_m: float) -> float:
        if d_m <= 0.0:
            raise ValueError("distance must be positive")
        return model(max(d_m, 1.0))

    return pathloss


def sensing_pathloss(
    d1_m: float,
    d2_m: float,
    rcs_dbsm: float,
    wavelength: float,
    pl_model: Optional[Callable[[float], float]] = None,
) -> float:
    """Radar-equation pathloss in dB for a two-leg echo.

    Composes the configured one-way pathloss over both legs, subtracts the
    target RCS and adds the aperture term 10*log10(lambda^2 / 4pi).  With
    the free-space default this reproduces the direct radar-equation form.
    """
    if d1_m <= 0.0 or d2_m <= 0.0:
        raise ValueError("leg distances must be positive")
    if pl_model is None:
        pl = freespace_comm_pathloss
        pl1 = pl(d1_m, wavelength)
        pl2 = pl(d2_m, wavelength)
    else:
        pl1 = pl_model(d1_m)
        pl2 = pl_model(d2_m)
    aperture = 10.0 * math.log10(wavelength**2 / (4.0 * math.pi))
    return pl1 + pl2 - rcs_dbsm + aperture


class RcsClass(str, Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"
    ENVIRONMENT = "environment"

    @property
    def range_dbsm(self) -> tuple[float, float]:
        return _DEFAULT_RCS_RANGES[self]


_DEFAULT_RCS_RANGES = {
    RcsClass.PEDESTRIAN: (-20.0, 0.0),
    RcsClass.VEHICLE: (-5.0, 25.0),
    RcsClass.ENVIRONMENT: (-50.0, 50.0),
}

_DEFAULT_RCS_MIXTURE = {
    RcsClass.VEHICLE: 0.30,
    RcsClass.PEDESTRIAN: 0.20,
    RcsClass.ENVIRONMENT: 0.50,
}


@dataclass(frozen=True)
class RcsModel:
    """Mixture of target classes with per-class uniform dBsm ranges."""

    mixture: dict = field(default_factory=lambda: dict(_DEFAULT_RCS_MIXTURE))
    ranges: dict = field(default_factory=lambda: dict(_DEFAULT_RCS_RANGES))

    def __post_init__(self):
        total = sum(self.mixture.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, expected 1")
        for cls, (lo, hi) in self.ranges.items():
            if lo >= hi:
                raise ValueError(f"empty RCS range for {cls}")


DEFAULT_RCS_MODEL = RcsModel()


def sample_rcs(
    rng: np.random.Generator,
    model: Optional[RcsModel] = None,
    rcs_class: Optional[RcsClass] = None,
    size: int = RAYS_PER_CLUSTER,
) -> tuple[RcsClass, np.ndarray]:
    """Draw a target class and per-ray RCS values.

    The class comes from the mixture unless pinned; values are independent
    uniforms over the class's dBsm range.
    """
    m = model if model is not None else DEFAULT_RCS_MODEL
    if rcs_class is None:
        classes = list(m.mixture.keys())
        weights = np.array([m.mixture[c] for c in classes])
        rcs_class = classes[int(rng.choice(len(classes), p=weights))]
    lo, hi = m.ranges[rcs_class]
    return rcs_class, rng.uniform(lo, hi, size=size)


@dataclass
class CommTap:
    tap_id: int
    cluster_index: int
    ray_index: Optional[int]
    delay_s: float
    amplitude: complex
    pathloss_db: float
    aod_rad: float
    zod_rad: float
    aoa_rad: float
    zoa_rad: float
    doppler_hz: float


@dataclass
class SensingTap:
    tap_id: int
    cluster_index: int
    ray_index: Optional[int]
    kind: str
    condition: Propagation
    position: Vec3
    rcs_dbsm: float
    delay_s: float
    amplitude: complex
    pathloss_db: float
    doppler_hz: float


@dataclass
class ChannelRealization:
    """All taps of one link in one drop.

    Tap amplitudes carry the complex coefficient and the square-rooted
    power split but not the pathloss, which sits in each tap's
    ``pathloss_db`` so received power composes as
    tx_power_dbm + 20*log10|amplitude| - pathloss_db.
    """

    link_id: str
    drop: int
    bs_id: int
    ut_id: int
    condition: Propagation
    k_db: float
    sf_db: float
    tx_power_dbm: float
    comm_taps: list[CommTap] = field(default_factory=list)
    sensing_taps: list[SensingTap] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


DEFAULT_TX_POWER_DBM = 28.0


def assemble_link(
    link_id: str,
    bs_id: int,
    ut_id: int,
    scenario: Scenario,
    condition: Propagation,
    lsps: LspSet,
    tx: Vec3,
    rx: Vec3,
    sx: Vec3,
    clusters: list[CommCluster],
    sensing: list["SensingCluster"],
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
    comm_pathloss: Optional[Callable[[float], float]] = None,
    sensing_leg_pathloss: Optional[Callable[[float], float]] = None,
    tx_element: AntennaElement = AntennaElement(),
    rx_element: AntennaElement = AntennaElement(),
    sx_element: AntennaElement = AntennaElement(),
    ut_velocity: Vec3 = ZERO,
    t: float = 0.0,
    drop: int = 0,
    metadata: Optional[dict] = None,
) -> ChannelRealization:
    """Render one link's communication and sensing taps.

    Communication taps: one per ray, plus a direct tap under LOS carrying
    the Ricean power split.  Sensing taps: one direct echo per LOS sensing
    cluster, a full ray fan per NLOS one, each with its own radar-equation
    pathloss.  Delays are absolute time of flight so both families share a
    time axis.
    """
    wavelength = scenario.wavelength_m
    separation = (tx - rx).norm()
    if separation == 0.0:
        raise ValueError("terminals coincide")

    if comm_pathloss is None:
        comm_pl_db = freespace_comm_pathloss(separation, wavelength)
    else:
        comm_pl_db = comm_pathloss(separation)
    link_pl_db = comm_pl_db + lsps.sf_db

    los_link = condition is Propagation.LOS
    if los_link:
        k_lin = 10.0 ** (lsps.k_db / 10.0)
        direct_scale = math.sqrt(k_lin / (k_lin + 1.0))
        cluster_scale = math.sqrt(1.0 / (k_lin + 1.0))
    else:
        direct_scale, cluster_scale = 0.0, 1.0

    base_delay = separation / LIGHT_SPEED
    comm_taps: list[CommTap] = []
    if los_link:
        direct = comm_channel_coefficient(
            rx_element, tx_element, wavelength, tx=tx, rx=rx,
            velocity=ut_velocity, t=t,
        )
        dep = angles_from_vector(rx - tx)
        arr = angles_from_vector(tx - rx)
        comm_taps.append(CommTap(
            tap_id=0, cluster_index=-1, ray_index=None,
            delay_s=direct.delay_s,
            amplitude=direct.value * direct_scale,
            pathloss_db=link_pl_db,
            aod_rad=dep.azimuth, zod_rad=dep.zenith,
            aoa_rad=arr.azimuth, zoa_rad=arr.zenith,
            doppler_hz=direct.doppler_hz,
        ))
    for cluster in clusters:
        ray_scale = cluster_scale * math.sqrt(cluster.power / len(cluster.rays))
        for m, ray in enumerate(cluster.rays):
            coeff = comm_channel_coefficient(
                rx_element, tx_element, wavelength, ray=ray,
                delay_s=base_delay + cluster.delay_s,
                velocity=ut_velocity, t=t,
            )
            comm_taps.append(CommTap(
                tap_id=0, cluster_index=cluster.index, ray_index=m,
                delay_s=coeff.delay_s,
                amplitude=coeff.value * ray_scale,
                pathloss_db=link_pl_db,
                aod_rad=ray.aod_rad, zod_rad=ray.zod_rad,
                aoa_rad=ray.aoa_rad, zoa_rad=ray.zoa_rad,
                doppler_hz=coeff.doppler_hz,
            ))
    comm_taps.sort(key=lambda tap: tap.delay_s)
    for i, tap in enumerate(comm_taps):
        tap.tap_id = i

    sensing_taps: list[SensingTap] = []
    for ci, cluster in enumerate(sensing):
        d1 = (cluster.position - tx).norm()
        d2 = (cluster.position - sx).norm()
        amp_scale = math.sqrt(cluster.power)
        if cluster.condition is Propagation.LOS:
            coeff = los_sensing_coefficient(
                sx_element, tx_element, cluster.position, tx, sx,
                wavelength, velocity=cluster.velocity, t=t,
            )
            rcs = float(cluster.rcs_dbsm[0])
            sensing_taps.append(SensingTap(
                tap_id=0, cluster_index=ci, ray_index=None,
                kind=cluster.kind.value, condition=cluster.condition,
                position=cluster.position, rcs_dbsm=rcs,
                delay_s=coeff.delay_s,
                amplitude=coeff.value * amp_scale,
                pathloss_db=sensing_pathloss(
                    d1, d2, rcs, wavelength, sensing_leg_pathloss
                ),
                doppler_hz=coeff.doppler_hz,
            ))
        else:
            if not cluster.echo_rays:
                raise ValueError(
                    f"sensing cluster {ci} is NLOS but carries no echo rays"
                )
            n_rays = len(cluster.echo_rays)
            ray_scale = amp_scale / math.sqrt(n_rays)
            dep0, arr0 = cluster.departure, cluster.arrival
            for m, eray in enumerate(cluster.echo_rays):
                departure = SphericalAngles(
                    dep0.azimuth + eray.d_aod_rad, dep0.zenith + eray.d_zod_rad
                )
                arrival = SphericalAngles(
                    arr0.azimuth + eray.d_aoa_rad, arr0.zenith + eray.d_zoa_rad
                )
                coeff = nlos_sensing_coefficient(
                    sx_element, tx_element, departure, arrival,
                    xpr_linear=eray.xpr_linear, phases=eray.phases,
                    delay_s=cluster.delay_s, wavelength=wavelength,
                    velocity=cluster.velocity, t=t,
                )
                rcs = float(cluster.rcs_dbsm[m])
                sensing_taps.append(SensingTap(
                    tap_id=0, cluster_index=ci, ray_index=m,
                    kind=cluster.kind.value, condition=cluster.condition,
                    position=cluster.position, rcs_dbsm=rcs,
                    delay_s=coeff.delay_s,
                    amplitude=coeff.value * ray_scale,
                    pathloss_db=sensing_pathloss(
                        d1, d2, rcs, wavelength, sensing_leg_pathloss
                    ),
                    doppler_hz=coeff.doppler_hz,
                ))
    sensing_taps.sort(key=lambda tap: tap.delay_s)
    for i, tap in enumerate(sensing_taps):
        tap.tap_id = i

    return ChannelRealization(
        link_id=link_id, drop=drop, bs_id=bs_id, ut_id=ut_id,
        condition=condition, k_db=lsps.k_db if los_link else 0.0,
        sf_db=lsps.sf_db, tx_power_dbm=tx_power_dbm,
        comm_taps=comm_taps, sensing_taps=sensing_taps,
        metadata=metadata or {},
    )

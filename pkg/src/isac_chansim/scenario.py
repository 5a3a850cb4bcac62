"""Deployment scenarios, propagation conditions and large-scale parameters.

The numeric profile table below carries representative 28 GHz values for the
three supported scenario families.  The table is a calibration input, not a
derived quantity: edit it (or override single entries through the run config)
to retune the model without touching any generation code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .geometry import Vec3, ZERO


class ScenarioKind(str, Enum):
    UMI = "umi"
    UMA = "uma"
    RMA = "rma"


class Propagation(str, Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    carrier_frequency_hz: float = 28e9
    bandwidth_hz: float = 1e9

    @property
    def wavelength_m(self) -> float:
        return LIGHT_SPEED / self.carrier_frequency_hz


LIGHT_SPEED = 299_792_458.0


@dataclass
class BaseStation:
    bs_id: int
    position: Vec3


@dataclass
class UserTerminal:
    ut_id: int
    position: Vec3
    velocity: Vec3 = ZERO


@dataclass
class NetworkLayout:
    """Site positions for one simulation.

    Sensing is monostatic by default (the serving base station doubles as
    the sensing receiver); set ``sensing_receiver`` for a bistatic split.
    """

    base_stations: list[BaseStation] = field(default_factory=list)
    terminals: list[UserTerminal] = field(default_factory=list)
    sensing_receiver: Optional[Vec3] = None

    def links(self):
        """Yield every (base station, terminal) pair in a stable order."""
        for bs in self.base_stations:
            for ut in self.terminals:
                yield bs, ut


@dataclass(frozen=True)
class ClusterSpreads:
    """Intra-cluster ray spreads, degrees."""

    c_asd_deg: float
    c_asa_deg: float
    c_zsa_deg: float


@dataclass(frozen=True)
class LspProfile:
    """Log-domain moments of the large-scale parameters for one condition.

    Delay spread is log10(seconds); angular spreads are log10(degrees).
    Shadowing, Ricean K and cross-polarization moments are plain dB.
    """

    lg_ds_mean: float
    lg_ds_std: float
    lg_asa_mean: float
    lg_asa_std: float
    lg_asd_mean: float
    lg_asd_std: float
    lg_zsa_mean: float
    lg_zsa_std: float
    lg_zsd_mean: float
    lg_zsd_std: float
    sf_std_db: float
    delay_scaling: float
    xpr_mean_db: float
    xpr_std_db: float
    cluster_shadowing_std_db: float
    spreads: ClusterSpreads
    k_mean_db: float = 0.0
    k_std_db: float = 0.0


# Representative 28 GHz profiles (editable calibration values).
SCENARIO_TABLE: dict[tuple[ScenarioKind, Propagation], LspProfile] = {
    (ScenarioKind.UMI, Propagation.LOS): LspProfile(
        lg_ds_mean=-7.49, lg_ds_std=0.38,
        lg_asa_mean=1.61, lg_asa_std=0.30,
        lg_asd_mean=1.14, lg_asd_std=0.41,
        lg_zsa_mean=0.58, lg_zsa_std=0.28,
        lg_zsd_mean=0.40, lg_zsd_std=0.35,
        sf_std_db=4.0, delay_scaling=3.0,
        xpr_mean_db=9.0, xpr_std_db=3.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(3.0, 17.0, 7.0),
        k_mean_db=9.0, k_std_db=5.0,
    ),
    (ScenarioKind.UMI, Propagation.NLOS): LspProfile(
        lg_ds_mean=-7.18, lg_ds_std=0.51,
        lg_asa_mean=1.69, lg_asa_std=0.37,
        lg_asd_mean=1.19, lg_asd_std=0.49,
        lg_zsa_mean=0.86, lg_zsa_std=0.31,
        lg_zsd_mean=0.30, lg_zsd_std=0.35,
        sf_std_db=7.82, delay_scaling=2.1,
        xpr_mean_db=8.0, xpr_std_db=3.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(10.0, 22.0, 7.0),
    ),
    (ScenarioKind.UMA, Propagation.LOS): LspProfile(
        lg_ds_mean=-7.09, lg_ds_std=0.66,
        lg_asa_mean=1.81, lg_asa_std=0.20,
        lg_asd_mean=1.22, lg_asd_std=0.28,
        lg_zsa_mean=0.95, lg_zsa_std=0.16,
        lg_zsd_mean=0.40, lg_zsd_std=0.30,
        sf_std_db=4.0, delay_scaling=2.5,
        xpr_mean_db=8.0, xpr_std_db=4.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(5.0, 11.0, 7.0),
        k_mean_db=9.0, k_std_db=3.5,
    ),
    (ScenarioKind.UMA, Propagation.NLOS): LspProfile(
        lg_ds_mean=-6.58, lg_ds_std=0.39,
        lg_asa_mean=1.69, lg_asa_std=0.11,
        lg_asd_mean=1.33, lg_asd_std=0.28,
        lg_zsa_mean=1.04, lg_zsa_std=0.16,
        lg_zsd_mean=0.30, lg_zsd_std=0.30,
        sf_std_db=6.0, delay_scaling=2.3,
        xpr_mean_db=7.0, xpr_std_db=3.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(2.0, 15.0, 7.0),
    ),
    (ScenarioKind.RMA, Propagation.LOS): LspProfile(
        lg_ds_mean=-7.49, lg_ds_std=0.55,
        lg_asa_mean=1.52, lg_asa_std=0.24,
        lg_asd_mean=0.90, lg_asd_std=0.38,
        lg_zsa_mean=0.47, lg_zsa_std=0.40,
        lg_zsd_mean=0.30, lg_zsd_std=0.30,
        sf_std_db=4.0, delay_scaling=3.8,
        xpr_mean_db=12.0, xpr_std_db=4.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(2.0, 3.0, 3.0),
        k_mean_db=7.0, k_std_db=4.0,
    ),
    (ScenarioKind.RMA, Propagation.NLOS): LspProfile(
        lg_ds_mean=-7.43, lg_ds_std=0.48,
        lg_asa_mean=1.52, lg_asa_std=0.13,
        lg_asd_mean=0.95, lg_asd_std=0.45,
        lg_zsa_mean=0.58, lg_zsa_std=0.37,
        lg_zsd_mean=0.30, lg_zsd_std=0.30,
        sf_std_db=8.0, delay_scaling=1.7,
        xpr_mean_db=7.0, xpr_std_db=3.0,
        cluster_shadowing_std_db=3.0,
        spreads=ClusterSpreads(2.0, 3.0, 3.0),
    ),
}

# Communication cluster counts per scenario: (LOS, NLOS).
COMM_CLUSTER_COUNTS: dict[ScenarioKind, tuple[int, int]] = {
    ScenarioKind.UMI: (12, 19),
    ScenarioKind.UMA: (12, 20),
    ScenarioKind.RMA: (11, 10),
}

# Sensing sets are denser than communication sets by this default factor.
DEFAULT_SENSING_RATIO = 1.32

# Soft caps applied to drawn angular spreads, degrees.
_ASA_CAP_DEG = 104.0
_ZSA_CAP_DEG = 52.0


def lsp_profile(scenario: Scenario, condition: Propagation) -> LspProfile:
    return SCENARIO_TABLE[(scenario.kind, condition)]


def los_probability(kind: ScenarioKind, d2d_m: float) -> float:
    """Line-of-sight probability as a function of 2D separation.

    The urban-macro form is the base expression valid for terminal heights
    up to 13 m (no elevated-terminal correction).
    """
    if d2d_m < 0.0:
        raise ValueError("negative distance")
    if kind is ScenarioKind.UMI:
        if d2d_m <= 18.0:
            return 1.0
        return 18.0 / d2d_m + math.exp(-d2d_m / 36.0) * (1.0 - 18.0 / d2d_m)
    if kind is ScenarioKind.UMA:
        if d2d_m <= 18.0:
            return 1.0
        return 18.0 / d2d_m + math.exp(-d2d_m / 63.0) * (1.0 - 18.0 / d2d_m)
    if d2d_m <= 10.0:
        return 1.0
    return math.exp(-(d2d_m - 10.0) / 1000.0)


def assign_propagation_condition(
    scenario: Scenario, d2d_m: float, rng: np.random.Generator
) -> Propagation:
    """Draw LOS/NLOS for one leg from the scenario's LOS probability."""
    p = los_probability(scenario.kind, d2d_m)
    return Propagation.LOS if rng.uniform() < p else Propagation.NLOS


def sensing_condition(tx_leg: Propagation, rx_leg: Propagation) -> Propagation:
    """A sensing path is LOS only when both of its legs are LOS."""
    if tx_leg is Propagation.LOS and rx_leg is Propagation.LOS:
        return Propagation.LOS
    return Propagation.NLOS


def cluster_count(
    kind: ScenarioKind,
    condition: Propagation,
    sensing: bool = False,
    ratio: float = DEFAULT_SENSING_RATIO,
) -> int:
    """Cluster budget for one link.

    Communication budgets come from the scenario table; the sensing budget
    scales the communication one by ``ratio`` and rounds up.
    """
    los_n, nlos_n = COMM_CLUSTER_COUNTS[kind]
    n = los_n if condition is Propagation.LOS else nlos_n
    if not sensing:
        return n
    if ratio <= 0.0:
        raise ValueError("sensing ratio must be positive")
    return math.ceil(ratio * n)


@dataclass
class LspSet:
    """One correlated draw of the link-scale parameters, linear units."""

    ds_s: float
    asa_deg: float
    asd_deg: float
    zsa_deg: float
    zsd_deg: float
    sf_db: float
    k_db: float = 0.0


def default_lsps(
    scenario: Scenario,
    condition: Propagation,
    rng: np.random.Generator,
    profile: LspProfile | None = None,
) -> LspSet:
    """Draw a log-normal parameter set from the scenario profile.

    Draws are independent across parameters; site-to-site correlation is out
    of scope for single-drop statistics.  ``profile`` substitutes a custom
    parameter table for the built-in one.
    """
    prof = profile if profile is not None else lsp_profile(scenario, condition)

    def lognorm(mean_lg, std_lg):
        return 10.0 ** (mean_lg + std_lg * rng.standard_normal())

    lsps = LspSet(
        ds_s=lognorm(prof.lg_ds_mean, prof.lg_ds_std),
        asa_deg=min(lognorm(prof.lg_asa_mean, prof.lg_asa_std), _ASA_CAP_DEG),
        asd_deg=min(lognorm(prof.lg_asd_mean, prof.lg_asd_std), _ASA_CAP_DEG),
        zsa_deg=min(lognorm(prof.lg_zsa_mean, prof.lg_zsa_std), _ZSA_CAP_DEG),
        zsd_deg=min(lognorm(prof.lg_zsd_mean, prof.lg_zsd_std), _ZSA_CAP_DEG),
        sf_db=prof.sf_std_db * rng.standard_normal(),
    )
    if condition is Propagation.LOS:
        lsps.k_db = prof.k_mean_db + prof.k_std_db * rng.standard_normal()
    return lsps

"""Stochastic generation of communication clusters and their rays.

The generation chain is the classic cluster pipeline: exponential delays
scaled by the delay-spread, powers tied to delay with per-cluster shadowing,
cluster angles recovered from powers through the inverse-Gaussian (azimuth)
and inverse-Laplacian (zenith) shapes, and a fixed 20-ray offset fan inside
every cluster.  All angles are radians here; the angular spreads coming from
the large-scale parameters are degrees and get converted at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import (
    ClusterSpreads,
    LspProfile,
    LspSet,
    Propagation,
    lsp_profile,
    Scenario,
)

RAYS_PER_CLUSTER = 20

# Fixed intra-cluster offset fan, unit spread.  Symmetric, zero mean.
RAY_OFFSETS = np.array([
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715,
    0.5129, -0.5129, 0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481,
    1.5195, -1.5195, 2.1551, -2.1551,
])

# Azimuth scaling constants keyed by cluster count.
_C_PHI = {
    4: 0.779, 5: 0.860, 8: 1.018, 10: 1.090, 11: 1.123, 12: 1.146,
    14: 1.190, 15: 1.211, 16: 1.226, 19: 1.273, 20: 1.289, 25: 1.358,
}

# Zenith scaling constants keyed by cluster count.
_C_THETA = {
    8: 0.889, 10: 0.957, 11: 1.031, 12: 1.104, 15: 1.1088,
    19: 1.184, 20: 1.178, 25: 1.282,
}


def _interp_table(table: dict[int, float], n: int) -> float:
    keys = np.array(sorted(table))
    vals = np.array([table[k] for k in keys])
    return float(np.interp(n, keys, vals))


def azimuth_scaling_constant(n_clusters: int, k_db: float | None = None) -> float:
    """Scaling constant of the inverse-Gaussian azimuth map.

    Tabulated per cluster count, linearly interpolated between table entries
    and clamped outside them.  ``k_db`` applies the direct-path correction.
    """
    c = _interp_table(_C_PHI, n_clusters)
    if k_db is not None:
        k = k_db
        c *= 1.1035 - 0.028 * k - 0.002 * k**2 + 0.0001 * k**3
    return c


def zenith_scaling_constant(n_clusters: int, k_db: float | None = None) -> float:
    """Scaling constant of the inverse-Laplacian zenith map."""
    c = _interp_table(_C_THETA, n_clusters)
    if k_db is not None:
        k = k_db
        c *= 1.3086 + 0.0339 * k - 0.0077 * k**2 + 0.0002 * k**3
    return c


def generate_cluster_delays(
    ds_s: float, delay_scaling: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n sorted excess delays in seconds, smallest normalized to zero."""
    if ds_s <= 0.0:
        raise ValueError("delay spread must be positive")
    if delay_scaling <= 1.0:
        raise ValueError("delay scaling must exceed 1")
    if n < 1:
        raise ValueError("need at least one cluster")
    raw = -delay_scaling * ds_s * np.log(rng.uniform(size=n))
    raw.sort()
    return raw - raw[0]


def generate_cluster_powers(
    delays_s: np.ndarray,
    ds_s: float,
    delay_scaling: float,
    shadow_std_db: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-cluster powers tied to delay, normalized to sum to one.

    Each cluster also gets an independent log-normal shadowing term with
    ``shadow_std_db`` standard deviation before normalization.
    """
    delays_s = np.asarray(delays_s, dtype=float)
    shadow_db = shadow_std_db * rng.standard_normal(delays_s.shape)
    p = np.exp(-delays_s * (delay_scaling - 1.0) / (delay_scaling * ds_s))
    p = p * 10.0 ** (-shadow_db / 10.0)
    return p / p.sum()


def _spread_angles(
    powers: np.ndarray,
    primary_deg: np.ndarray,
    mean_rad: float,
    spread_deg: float,
    condition: Propagation,
    rng: np.random.Generator,
) -> np.ndarray:
    """Common sign/jitter/re-centering tail of both angle maps."""
    n = len(powers)
    signs = rng.choice([-1.0, 1.0], size=n)
    jitter_deg = (spread_deg / 7.0) * rng.standard_normal(n)
    angles = signs * primary_deg + jitter_deg
    if condition is Propagation.LOS:
        # pin the first cluster exactly onto the direct path
        angles = angles - angles[0]
    angles_rad = np.radians(angles) + mean_rad
    return angles_rad


def generate_cluster_azimuths(
    powers: np.ndarray,
    spread_deg: float,
    mean_rad: float,
    condition: Propagation,
    rng: np.random.Generator,
    k_db: float | None = None,
) -> np.ndarray:
    """Cluster azimuths (radians) from powers via the inverse-Gaussian map."""
    powers = np.asarray(powers, dtype=float)
    c = azimuth_scaling_constant(
        len(powers), k_db if condition is Propagation.LOS else None
    )
    primary = 2.0 * (spread_deg / 1.4) * np.sqrt(-np.log(powers / powers.max())) / c
    return _spread_angles(powers, primary, mean_rad, spread_deg, condition, rng)


def generate_cluster_zeniths(
    powers: np.ndarray,
    spread_deg: float,
    mean_rad: float,
    condition: Propagation,
    rng: np.random.Generator,
    k_db: float | None = None,
) -> np.ndarray:
    """Cluster zeniths (radians) from powers via the inverse-Laplacian map."""
    powers = np.asarray(powers, dtype=float)
    c = zenith_scaling_constant(
        len(powers), k_db if condition is Propagation.LOS else None
    )
    primary = -spread_deg * np.log(powers / powers.max()) / c
    return _spread_angles(powers, primary, mean_rad, spread_deg, condition, rng)


@dataclass
class Ray:
    """One plane wave inside a cluster.

    ``phases`` holds the four polarization phases in the order
    (theta-theta, theta-phi, phi-theta, phi-phi).
    """

    aod_rad: float
    zod_rad: float
    aoa_rad: float
    zoa_rad: float
    xpr_linear: float
    phases: np.ndarray


@dataclass
class CommCluster:
    index: int
    delay_s: float
    power: float
    aod_rad: float
    zod_rad: float
    aoa_rad: float
    zoa_rad: float
    rays: list[Ray]


def build_rays(
    aod_rad: float,
    zod_rad: float,
    aoa_rad: float,
    zoa_rad: float,
    spreads: ClusterSpreads,
    xpr_mean_db: float,
    xpr_std_db: float,
    rng: np.random.Generator,
) -> list[Ray]:
    """Fan one cluster into its fixed-offset rays.

    Departure offsets keep the table order; arrival azimuth and zenith
    offsets are randomly re-coupled to the departure ones.  Every ray gets
    an independent log-normal cross-polarization ratio and four uniform
    phases.
    """
    aod = aod_rad + np.radians(spreads.c_asd_deg * RAY_OFFSETS)
    zod = zod_rad + np.radians(spreads.c_zsa_deg * RAY_OFFSETS)
    aoa = aoa_rad + np.radians(spreads.c_asa_deg * RAY_OFFSETS[rng.permutation(RAYS_PER_CLUSTER)])
    zoa = zoa_rad + np.radians(spreads.c_zsa_deg * RAY_OFFSETS[rng.permutation(RAYS_PER_CLUSTER)])
    xpr_db = xpr_mean_db + xpr_std_db * rng.standard_normal(RAYS_PER_CLUSTER)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(RAYS_PER_CLUSTER, 4))
    return [
        Ray(
            aod_rad=float(aod[m]),
            zod_rad=float(zod[m]),
            aoa_rad=float(aoa[m]),
            zoa_rad=float(zoa[m]),
            xpr_linear=10.0 ** (xpr_db[m] / 10.0),
            phases=phases[m],
        )
        for m in range(RAYS_PER_CLUSTER)
    ]


def generate_link_clusters(
    scenario: Scenario,
    condition: Propagation,
    lsps: LspSet,
    n_clusters: int,
    departure_mean_az_rad: float,
    departure_mean_zen_rad: float,
    arrival_mean_az_rad: float,
    arrival_mean_zen_rad: float,
    rng: np.random.Generator,
    profile: LspProfile | None = None,
) -> list[CommCluster]:
    """Generate the full cluster set of one link.

    Cluster powers sum to one.  The mean angles are the direct-path angles
    of the link; under LOS the first cluster is pinned onto them.
    """
    prof = profile if profile is not None else lsp_profile(scenario, condition)
    k_db = lsps.k_db if condition is Propagation.LOS else None

    delays = generate_cluster_delays(lsps.ds_s, prof.delay_scaling, n_clusters, rng)
    powers = generate_cluster_powers(
        delays, lsps.ds_s, prof.delay_scaling, prof.cluster_shadowing_std_db, rng
    )
    aod = generate_cluster_azimuths(
        powers, lsps.asd_deg, departure_mean_az_rad, condition, rng, k_db
    )
    zod = generate_cluster_zeniths(
        powers, lsps.zsd_deg, departure_mean_zen_rad, condition, rng, k_db
    )
    aoa = generate_cluster_azimuths(
        powers, lsps.asa_deg, arrival_mean_az_rad, condition, rng, k_db
    )
    zoa = generate_cluster_zeniths(
        powers, lsps.zsa_deg, arrival_mean_zen_rad, condition, rng, k_db
    )

    clusters = []
    for i in range(n_clusters):
        rays = build_rays(
            float(aod[i]), float(zod[i]), float(aoa[i]), float(zoa[i]),
            prof.spreads, prof.xpr_mean_db, prof.xpr_std_db, rng,
        )
        clusters.append(
            CommCluster(
                index=i,
                delay_s=float(delays[i]),
                power=float(powers[i]),
                aod_rad=float(aod[i]),
                zod_rad=float(zod[i]),
                aoa_rad=float(aoa[i]),
                zoa_rad=float(zoa[i]),
                rays=rays,
            )
        )
    return clusters

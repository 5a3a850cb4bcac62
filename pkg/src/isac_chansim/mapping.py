"""Spatial mapping of stochastic clusters onto scatterer positions.

Each cluster carries a total path length (direct distance plus excess delay
times the speed of light) and a pair of departure/arrival directions.  The
mapper places a first-bounce scatterer on the departure ray and solves for a
last-bounce scatterer on the arrival ray so that the three legs add up to
the path length exactly.  When the drawn first-bounce distance makes that
triangle impossible, the first leg is redrawn a bounded number of times and
the cluster finally degrades to a single bounce located on the departure
ray alone.

Positions are expressed in the TX-origin frame: the TX sits at the origin
and the RX at ``rx - tx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import SphericalAngles, Vec3, angles_from_vector, direction_vector
from .scenario import LIGHT_SPEED


@dataclass(frozen=True)
class MappingContext:
    """Link endpoints and mapping knobs.

    ``d_min`` is the closest allowed scatterer distance from either
    terminal; it must leave room on the departure ray, i.e. stay below half
    the terminal separation.
    """

    tx: Vec3
    rx: Vec3
    d_min: float = 1.0
    retry_limit: int = 8

    def __post_init__(self):
        if self.d_min <= 0.0:
            raise ValueError("d_min must be positive")
        sep = (self.tx - self.rx).norm()
        if sep <= 2.0 * self.d_min:
            raise ValueError(
                f"terminal separation {sep:.3f} m leaves no room for "
                f"scatterers at d_min={self.d_min:.3f} m"
            )

    @property
    def separation(self) -> float:
        return (self.tx - self.rx).norm()


@dataclass
class MappedCluster:
    """Scatterer positions of one cluster, TX-origin frame.

    ``fbs`` is the first bounce, ``lbs`` the last; they coincide when
    ``single_bounce`` is set.  Leg lengths satisfy
    len_b + len_c + len_a = total path length.
    """

    cluster_index: int
    fbs: Vec3
    lbs: Vec3
    len_b: float
    len_c: float
    len_a: float
    single_bounce: bool
    ray_index: Optional[int] = None


def total_path_length(excess_delay_s: float, tx: Vec3, rx: Vec3) -> float:
    """Geometric length of a path with the given excess delay."""
    if excess_delay_s < 0.0:
        raise ValueError("negative excess delay")
    return LIGHT_SPEED * excess_delay_s + (tx - rx).norm()


def _single_bounce(
    ctx: MappingContext, d_l: float, r: Vec3, b_hat: Vec3, index: int,
    ray_index: Optional[int],
) -> MappedCluster:
    # intersection of the departure ray with the delay ellipsoid
    t = (d_l**2 - r.dot(r)) / (2.0 * (d_l + b_hat.dot(r)))
    scatterer = t * b_hat
    rx_frame = -1.0 * r
    return MappedCluster(
        cluster_index=index,
        fbs=scatterer,
        lbs=scatterer,
        len_b=t,
        len_c=0.0,
        len_a=(scatterer - rx_frame).norm(),
        single_bounce=True,
        ray_index=ray_index,
    )


def map_cluster(
    ctx: MappingContext,
    excess_delay_s: float,
    departure: SphericalAngles,
    arrival: SphericalAngles,
    rng: np.random.Generator,
    index: int = 0,
    ray_index: Optional[int] = None,
) -> MappedCluster:
    """Place first/last-bounce scatterers for one cluster.

    The departure angles fix the ray that carries the first bounce; the
    first-bounce distance is drawn uniformly between ``d_min`` and half the
    path length.  The last bounce then sits on the arrival ray at the unique
    distance that preserves the total path length.
    """
    r = ctx.tx - ctx.rx
    sep = r.norm()
    d_l = total_path_length(excess_delay_s, ctx.tx, ctx.rx)
    if d_l <= sep:
        raise ValueError(
            "path length does not exceed the direct distance; "
            "the direct ray has no scatterer to place"
        )

    b_hat = direction_vector(departure)
    a_hat = direction_vector(arrival)
    rx_frame = -1.0 * r

    for _ in range(ctx.retry_limit + 1):
        len_b = rng.uniform(ctx.d_min, d_l / 2.0)
        d_prime = d_l - len_b
        fbs = len_b * b_hat
        d_vec = fbs - rx_frame  # RX -> FBS
        denom = d_prime - d_vec.dot(a_hat)
        if denom <= 0.0:
            continue
        len_a = (d_prime**2 - d_vec.dot(d_vec)) / (2.0 * denom)
        if len_a < ctx.d_min:
            # short remaining path: collapse to a single bounce
            return _single_bounce(ctx, d_l, r, b_hat, index, ray_index)
        lbs = rx_frame + len_a * a_hat
        return MappedCluster(
            cluster_index=index,
            fbs=fbs,
            lbs=lbs,
            len_b=len_b,
            len_c=(lbs - fbs).norm(),
            len_a=len_a,
            single_bounce=False,
            ray_index=ray_index,
        )
    return _single_bounce(ctx, d_l, r, b_hat, index, ray_index)


# Excess delays below this floor are geometrically degenerate (the path
# ellipsoid collapses onto the direct segment), so mapping nudges them up.
DEFAULT_DELAY_FLOOR_S = 0.5e-9


def map_clusters(
    ctx: MappingContext,
    clusters,
    rng: np.random.Generator,
    per_ray: bool = False,
    delay_floor_s: float = DEFAULT_DELAY_FLOOR_S,
) -> list[MappedCluster]:
    """Map a generated cluster list onto scatterer positions.

    With ``per_ray`` each of a cluster's rays gets its own scatterer pair
    (same excess delay, the ray's own angles); otherwise one pair per
    cluster at the cluster-center angles.
    """
    out = []
    for cluster in clusters:
        excess = max(cluster.delay_s, delay_floor_s)
        if per_ray:
            for m, ray in enumerate(cluster.rays):
                out.append(
                    map_cluster(
                        ctx, excess,
                        SphericalAngles(ray.aod_rad, ray.zod_rad),
                        SphericalAngles(ray.aoa_rad, ray.zoa_rad),
                        rng, index=cluster.index, ray_index=m,
                    )
                )
        else:
            out.append(
                map_cluster(
                    ctx, excess,
                    SphericalAngles(cluster.aod_rad, cluster.zod_rad),
                    SphericalAngles(cluster.aoa_rad, cluster.zoa_rad),
                    rng, index=cluster.index,
                )
            )
    return out

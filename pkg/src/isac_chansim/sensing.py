"""Sensing-cluster assignment: evolution, newborns, the UT target, mergence.

A communication cluster turns into a shared sensing cluster with a
probability that decays with its normalized perception distance.  Newborn
clusters fill the sensing budget with scatterers the communication channel
never saw; they are generated with the same cluster chain and kept as
positions.  The terminal itself echoes as a deterministic target whenever
the communication link is line of sight.  After every link is assigned, the
global scatterer population is reduced by agglomerative merging so the
number of physical scatterers stays finite and stationary across links.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coeffs import RcsClass, RcsModel, sample_rcs
from .commgen import (
    RAY_OFFSETS,
    RAYS_PER_CLUSTER,
    CommCluster,
    generate_link_clusters,
)
from .geometry import SphericalAngles, Vec3, ZERO, angles_from_vector
from .mapping import (
    DEFAULT_DELAY_FLOOR_S,
    MappedCluster,
    MappingContext,
    map_clusters,
)
from .scenario import (
    DEFAULT_SENSING_RATIO,
    LIGHT_SPEED,
    LspProfile,
    LspSet,
    Propagation,
    Scenario,
    assign_propagation_condition,
    cluster_count,
    lsp_profile,
    sensing_condition,
)


@dataclass(frozen=True)
class EvolutionModel:
    """Fitted survival probability of a communication cluster under sensing.

    ``amplitude * exp(-decay * knee)`` sits within 0.65% of one, so the
    piecewise form is continuous up to a clamp at the knee.
    """

    amplitude: float = 2.664
    decay: float = 2.208
    knee: float = 0.441

    def __post_init__(self):
        if self.amplitude <= 0.0 or self.decay <= 0.0:
            raise ValueError("evolution parameters must be positive")
        if self.knee < 0.0:
            raise ValueError("evolution knee must be nonnegative")

    def probability(self, r_bar: float) -> float:
        """Share probability at normalized perception distance ``r_bar``."""
        if r_bar < 0.0:
            raise ValueError("normalized distance must be nonnegative")
        if r_bar <= self.knee:
            return 1.0
        return min(1.0, self.amplitude * math.exp(-self.decay * r_bar))


def evolution_probability(
    r_m: float, path_length_m: float, separation_m: float,
    model: EvolutionModel = EvolutionModel(),
) -> float:
    """Probability that a cluster at perception distance ``r_m`` is shared.

    ``path_length_m`` is the cluster's total propagation length and
    ``separation_m`` the TX-RX distance; both normalize the perception
    distance: r_bar = (r/d) * (L/d).
    """
    if separation_m <= 0.0:
        raise ValueError("terminal separation must be positive")
    if path_length_m < separation_m:
        raise ValueError("path length cannot undercut the direct distance")
    if r_m < 0.0:
        raise ValueError("perception distance must be nonnegative")
    r_bar = (r_m / separation_m) * (path_length_m / separation_m)
    return model.probability(r_bar)


@dataclass(frozen=True)
class NewbornDistribution:
    """Truncated-Gaussian share of newborn clusters in a sensing set."""

    mean: float = 0.578
    variance: float = 0.021
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not (self.low <= self.mean <= self.high):
            raise ValueError("mean must sit inside the support")
        if self.variance <= 0.0:
            raise ValueError("variance must be positive")


def draw_newborn_proportion(
    dist: NewbornDistribution, rng: np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """Proportion draw(s) from the truncated Gaussian.

    Returns a scalar by default, or an array of ``size`` draws.
    """
    from scipy.stats import truncnorm

    sigma = math.sqrt(dist.variance)
    a = (dist.low - dist.mean) / sigma
    b = (dist.high - dist.mean) / sigma
    out = truncnorm.rvs(a, b, loc=dist.mean, scale=sigma, size=size,
                        random_state=rng)
    if size is None:
        return float(out)
    return np.asarray(out, dtype=float)


class ClusterKind(str, Enum):
    SHARED = "shared"
    NEWBORN = "newborn"
    UT_TARGET = "ut_target"


@dataclass
class EchoRay:
    """Ray-level echo parameters relative to the cluster center.

    Offsets are radians; they stay valid when the center direction is
    recomputed for another link, so the random draws happen once.
    """

    d_aod_rad: float
    d_zod_rad: float
    d_aoa_rad: float
    d_zoa_rad: float
    xpr_linear: float
    phases: np.ndarray


def _make_echo_rays(profile: LspProfile, rng: np.random.Generator) -> list[EchoRay]:
    s = profile.spreads
    aod = np.radians(s.c_asd_deg * RAY_OFFSETS)
    zod = np.radians(s.c_zsa_deg * RAY_OFFSETS)
    aoa = np.radians(s.c_asa_deg * RAY_OFFSETS[rng.permutation(RAYS_PER_CLUSTER)])
    zoa = np.radians(s.c_zsa_deg * RAY_OFFSETS[rng.permutation(RAYS_PER_CLUSTER)])
    xpr_db = profile.xpr_mean_db + profile.xpr_std_db * rng.standard_normal(RAYS_PER_CLUSTER)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(RAYS_PER_CLUSTER, 4))
    return [
        EchoRay(
            d_aod_rad=float(aod[m]),
            d_zod_rad=float(zod[m]),
            d_aoa_rad=float(aoa[m]),
            d_zoa_rad=float(zoa[m]),
            xpr_linear=10.0 ** (xpr_db[m] / 10.0),
            phases=phases[m],
        )
        for m in range(RAYS_PER_CLUSTER)
    ]


@dataclass
class SensingCluster:
    """One perception target and its echo-path parameters.

    ``position`` is global (not TX-relative) because mergence pools
    scatterers across links with different transmitters.  The echo delay
    and angles describe the source link's geometry; after mergence the
    pipeline recomputes them per link from the position.
    """

    kind: ClusterKind
    position: Vec3
    source_link: str
    power: float
    condition: Propagation
    rcs_class: RcsClass
    rcs_dbsm: np.ndarray
    delay_s: float
    departure: SphericalAngles
    arrival: SphericalAngles
    echo_rays: list[EchoRay] = field(default_factory=list)
    velocity: Vec3 = ZERO
    merged_from: int = 1


def echo_geometry(
    position: Vec3, tx: Vec3, sx: Vec3
) -> tuple[float, SphericalAngles, SphericalAngles]:
    """Delay and angles of the echo TX -> target -> SX.

    Raises on a zero-length leg: a target sitting on a terminal has no
    defined direction.
    """
    leg_out = position - tx
    leg_back = position - sx
    d1, d2 = leg_out.norm(), leg_back.norm()
    if d1 == 0.0 or d2 == 0.0:
        raise ValueError("sensing target coincides with a terminal")
    delay = (d1 + d2) / LIGHT_SPEED
    return delay, angles_from_vector(leg_out), angles_from_vector(leg_back)


def _leg_condition(
    scenario: Scenario, a: Vec3, b: Vec3, rng: np.random.Generator
) -> Propagation:
    d2d = (a - b).horizontal_norm()
    return assign_propagation_condition(scenario, d2d, rng)


def _sensing_condition_for(
    scenario: Scenario, position: Vec3, tx: Vec3, sx: Vec3, rng
) -> Propagation:
    tx_leg = _leg_condition(scenario, tx, position, rng)
    sx_leg = _leg_condition(scenario, position, sx, rng)
    return sensing_condition(tx_leg, sx_leg)


def assign_shared_clusters(
    clusters: list[CommCluster],
    mapped: list[MappedCluster],
    tx: Vec3,
    rx: Vec3,
    sx: Vec3,
    link_id: str,
    scenario: Scenario,
    link_condition: Propagation,
    rng: np.random.Generator,
    model: EvolutionModel = EvolutionModel(),
    rcs_model: RcsModel | None = None,
    reference: str = "fbs",
) -> list[SensingCluster]:
    """Evolve communication clusters into shared sensing clusters.

    Each cluster survives independently with the evolution probability of
    its perception distance; ``reference`` picks which bounce (fbs or lbs)
    anchors that distance.
    """
    if reference not in ("fbs", "lbs"):
        raise ValueError(f"unknown perception reference {reference!r}")
    profile = lsp_profile(scenario, link_condition)
    separation = (tx - rx).norm()
    shared = []
    for cluster, m in zip(clusters, mapped):
        anchor = m.fbs if reference == "fbs" else m.lbs
        pos = tx + anchor  # mapped positions are TX-relative
        path_length = m.len_b + m.len_c + m.len_a
        p = evolution_probability((pos - sx).norm(), path_length, separation, model)
        if rng.uniform() >= p:
            continue
        delay, dep, arr = echo_geometry(pos, tx, sx)
        rcs_class, rcs = sample_rcs(rng, model=rcs_model)
        shared.append(
            SensingCluster(
                kind=ClusterKind.SHARED,
                position=pos,
                source_link=link_id,
                power=cluster.power,
                condition=_sensing_condition_for(scenario, pos, tx, sx, rng),
                rcs_class=rcs_class,
                rcs_dbsm=rcs,
                delay_s=delay,
                departure=dep,
                arrival=arr,
                echo_rays=_make_echo_rays(profile, rng),
            )
        )
    return shared


def _spawn_newborns(
    count: int,
    scenario: Scenario,
    condition: Propagation,
    lsps: LspSet,
    tx: Vec3,
    rx: Vec3,
    sx: Vec3,
    link_id: str,
    rng: np.random.Generator,
    rcs_model: RcsModel | None,
    d_min: float,
    retry_limit: int,
    delay_floor_s: float,
) -> list[SensingCluster]:
    """Generate newborn scatterers with the communication cluster chain."""
    if count <= 0:
        return []
    dep_mean = angles_from_vector(rx - tx)
    arr_mean = angles_from_vector(tx - rx)
    newborn_clusters = generate_link_clusters(
        scenario, condition, lsps, count,
        dep_mean.azimuth, dep_mean.zenith,
        arr_mean.azimuth, arr_mean.zenith,
        rng,
    )
    ctx = MappingContext(tx, rx, d_min=d_min, retry_limit=retry_limit)
    mapped = map_clusters(ctx, newborn_clusters, rng, delay_floor_s=delay_floor_s)
    profile = lsp_profile(scenario, condition)
    out = []
    for cluster, m in zip(newborn_clusters, mapped):
        pos = tx + m.fbs
        delay, dep, arr = echo_geometry(pos, tx, sx)
        rcs_class, rcs = sample_rcs(rng, model=rcs_model)
        out.append(
            SensingCluster(
                kind=ClusterKind.NEWBORN,
                position=pos,
                source_link=link_id,
                power=cluster.power,
                condition=_sensing_condition_for(scenario, pos, tx, sx, rng),
                rcs_class=rcs_class,
                rcs_dbsm=rcs,
                delay_s=delay,
                departure=dep,
                arrival=arr,
                echo_rays=_make_echo_rays(profile, rng),
            )
        )
    return out


def build_sensing_set(
    link_id: str,
    scenario: Scenario,
    condition: Propagation,
    lsps: LspSet,
    tx: Vec3,
    rx: Vec3,
    sx: Vec3,
    clusters: list[CommCluster],
    mapped: list[MappedCluster],
    rng: np.random.Generator,
    evolution: EvolutionModel = EvolutionModel(),
    newborn: NewbornDistribution = NewbornDistribution(),
    sensing_ratio: float = DEFAULT_SENSING_RATIO,
    rcs_model: RcsModel | None = None,
    ut_velocity: Vec3 = ZERO,
    d_min: float = 1.0,
    retry_limit: int = 8,
    delay_floor_s: float = DEFAULT_DELAY_FLOOR_S,
    reference: str = "fbs",
) -> list[SensingCluster]:
    """Assemble one link's sensing-cluster set.

    Shared survivors come first, newborns fill toward the sensing budget,
    and the terminal is appended as a deterministic target when the
    communication link is LOS.  The newborn count targets the drawn
    proportion of the budget; when that proportion rounds to zero the set
    is left at the shared survivors alone, otherwise weakest shared
    clusters are dropped (budget exceeded) or extra newborns spawned
    (budget unfilled) so the budget is met exactly.
    """
    budget = cluster_count(scenario.kind, condition, sensing=True, ratio=sensing_ratio)
    shared = assign_shared_clusters(
        clusters, mapped, tx, rx, sx, link_id, scenario, condition, rng,
        model=evolution, rcs_model=rcs_model, reference=reference,
    )
    proportion = draw_newborn_proportion(newborn, rng)
    n_newborn = round(proportion * budget)
    if n_newborn > 0:
        if len(shared) + n_newborn > budget:
            keep = max(budget - n_newborn, 0)
            shared = sorted(shared, key=lambda c: c.power, reverse=True)[:keep]
        elif len(shared) + n_newborn < budget:
            n_newborn = budget - len(shared)
    out = shared + _spawn_newborns(
        n_newborn, scenario, condition, lsps, tx, rx, sx, link_id, rng,
        rcs_model, d_min, retry_limit, delay_floor_s,
    )
    if condition is Propagation.LOS:
        delay, dep, arr = echo_geometry(rx, tx, sx)
        rcs_class, rcs = sample_rcs(rng, model=rcs_model)
        out.append(
            SensingCluster(
                kind=ClusterKind.UT_TARGET,
                position=rx,
                source_link=link_id,
                power=1.0,
                condition=Propagation.LOS,
                rcs_class=rcs_class,
                rcs_dbsm=rcs,
                delay_s=delay,
                departure=dep,
                arrival=arr,
                echo_rays=_make_echo_rays(lsp_profile(scenario, condition), rng),
                velocity=ut_velocity,
            )
        )
    return out


def localize_for_link(
    cluster: SensingCluster,
    tx: Vec3,
    sx: Vec3,
    scenario: Scenario,
    rng: np.random.Generator,
    own_link: bool = False,
) -> SensingCluster:
    """Per-link view of a global cluster: echo geometry recomputed for this
    link's terminals, propagation condition redrawn unless the cluster was
    assigned on this very link."""
    delay, dep, arr = echo_geometry(cluster.position, tx, sx)
    if own_link and cluster.merged_from == 1:
        cond = cluster.condition
    else:
        cond = _sensing_condition_for(scenario, cluster.position, tx, sx, rng)
    return dataclasses.replace(
        cluster, delay_s=delay, departure=dep, arrival=arr, condition=cond
    )


def pair_similarity(cluster_r, cluster_s) -> float:
    """Mean squared distance over all cross pairs of two point sets."""
    r = np.atleast_2d(np.asarray(cluster_r, dtype=float))
    s = np.atleast_2d(np.asarray(cluster_s, dtype=float))
    if r.size == 0 or s.size == 0:
        raise ValueError("point sets must be nonempty")
    diff = r[:, None, :] - s[None, :, :]
    return float(np.mean(np.sum(diff**2, axis=-1)))


def merge_global_scatterers(
    all_clusters: list[SensingCluster],
    cap: int,
    return_trace: bool = False,
):
    """Reduce the global scatterer population to at most ``cap`` clusters.

    Greedy agglomerative merging: the pair with the smallest mean squared
    cross-distance (over original member positions) merges first, ties
    broken toward the lowest index pair.  A merged cluster sits at the
    power-weighted centroid of its members and inherits the labels of its
    strongest member and the RCS class of the member whose class range
    reaches highest.

    With ``return_trace`` the merged linkage values come back alongside the
    survivors (useful to audit monotonicity).
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if len(all_clusters) <= cap:
        return (list(all_clusters), []) if return_trace else list(all_clusters)

    n = len(all_clusters)
    pos = np.array([c.position.as_array() for c in all_clusters])
    counts = np.ones(n)
    sums = pos.copy()           # per-node sum of member positions
    sq = np.sum(pos**2, axis=1)  # per-node sum of squared norms
    members: list[list[int]] = [[i] for i in range(n)]
    alive = np.ones(n, dtype=bool)

    # pairwise mean squared distance via moments:
    # L(r, s) = m2_r + m2_s - 2 * mean_r . mean_s
    m2 = sq / counts
    means = sums / counts[:, None]
    link = m2[:, None] + m2[None, :] - 2.0 * means @ means.T
    np.fill_diagonal(link, np.inf)

    trace = []
    survivors = n
    while survivors > cap:
        masked = np.where(alive[:, None] & alive[None, :], link, np.inf)
        i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
        if i > j:
            i, j = j, i
        trace.append(float(masked[i, j]))
        # fold j into i
        counts[i] += counts[j]
        sums[i] += sums[j]
        sq[i] += sq[j]
        members[i].extend(members[j])
        alive[j] = False
        mean_i = sums[i] / counts[i]
        m2_i = sq[i] / counts[i]
        other_means = sums[alive] / counts[alive, None]
        other_m2 = sq[alive] / counts[alive]
        row = m2_i + other_m2 - 2.0 * other_means @ mean_i
        link[i, alive] = row
        link[alive, i] = row
        link[i, i] = np.inf
        survivors -= 1

    merged = []
    for idx in np.flatnonzero(alive):
        group = [all_clusters[k] for k in members[idx]]
        if len(group) == 1:
            merged.append(group[0])
            continue
        weights = np.array([c.power for c in group])
        if weights.sum() <= 0.0:
            weights = np.ones(len(group))
        centroid = Vec3.from_array(
            np.average([c.position.as_array() for c in group], axis=0,
                       weights=weights)
        )
        lead = group[int(np.argmax(weights))]
        by_range = max(group, key=lambda c: c.rcs_class.range_dbsm[1])
        merged.append(
            SensingCluster(
                kind=lead.kind,
                position=centroid,
                source_link=lead.source_link,
                power=float(sum(c.power for c in group)),
                condition=lead.condition,
                rcs_class=by_range.rcs_class,
                rcs_dbsm=lead.rcs_dbsm,
                delay_s=lead.delay_s,
                departure=lead.departure,
                arrival=lead.arrival,
                echo_rays=lead.echo_rays,
                velocity=lead.velocity,
                merged_from=sum(c.merged_from for c in group),
            )
        )
    return (merged, trace) if return_trace else merged

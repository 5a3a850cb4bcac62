"""End-to-end simulation pipeline.

Per drop: draw each link's propagation condition and link-scale
parameters, generate and spatially map its communication clusters, build
its sensing-cluster set, then merge all links' sensing clusters globally
and assemble per-link tap tables against the merged set.  Every random
draw comes from a counter-keyed substream of (seed, drop, link, stage) so
results are independent of execution order and worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analytics import MpcSample, SpreadKind, rms_spread
from .coeffs import ChannelRealization, assemble_link, scenario_pathloss_model
from .commgen import generate_link_clusters
from .config import RunConfig, parse_config
from .geometry import angles_from_vector
from .mapping import MappingContext, map_clusters
from .scenario import (
    Propagation,
    assign_propagation_condition,
    cluster_count,
    default_lsps,
    lsp_profile,
)
from .sensing import build_sensing_set, localize_for_link, merge_global_scatterers

__all__ = [
    "PipelineError",
    "simulate_drop",
    "run_simulation",
    "mpc_samples",
    "link_spreads",
]

STAGE_CONDITION = 0
STAGE_LSP = 1
STAGE_SSP = 2
STAGE_MAP = 3
STAGE_SENSING = 4
STAGE_LOCAL = 5


class PipelineError(RuntimeError):
    """A stage failed; the message names the drop and link."""


def _substream(seed: int, drop: int, link: int, stage: int) -> np.random.Generator:
    return np.random.default_rng([seed, drop, link, stage])


def simulate_drop(config: RunConfig, drop: int) -> list[ChannelRealization]:
    """Run every link of one drop and return its realizations."""
    scenario = config.scenario
    model = config.model
    seed = config.run.seed
    cfg_hash = config.config_hash

    links = list(config.layout.links())
    trace: list[tuple[str, str, int]] = []
    seq = 0
    states = []
    for li, (bs, ut) in enumerate(links):
        link_id = f"bs{bs.bs_id}-ut{ut.ut_id}"
        tx, rx = bs.position, ut.position
        sx = config.layout.sensing_receiver or tx
        try:
            d2d = (rx - tx).horizontal_norm()
            condition = assign_propagation_condition(
                scenario, d2d, _substream(seed, drop, li, STAGE_CONDITION)
            )
            profile = model.apply_overrides(lsp_profile(scenario, condition))
            lsps = default_lsps(
                scenario, condition, _substream(seed, drop, li, STAGE_LSP),
                profile=profile,
            )
            departure = angles_from_vector(rx - tx)
            arrival = angles_from_vector(tx - rx)
            clusters = generate_link_clusters(
                scenario, condition, lsps,
                cluster_count(scenario.kind, condition),
                departure.azimuth, departure.zenith,
                arrival.azimuth, arrival.zenith,
                _substream(seed, drop, li, STAGE_SSP),
                profile=profile,
            )
            context = MappingContext(tx, rx, d_min=model.d_min,
                                     retry_limit=model.map_retry_limit)
            mapped = map_clusters(
                context, clusters, _substream(seed, drop, li, STAGE_MAP),
                delay_floor_s=model.map_delay_floor_s,
            )
            trace.append((link_id, "mapping", seq))
            seq += 1
            sensing = build_sensing_set(
                link_id, scenario, condition, lsps, tx, rx, sx,
                clusters, mapped, _substream(seed, drop, li, STAGE_SENSING),
                evolution=model.evolution, newborn=model.newborn,
                sensing_ratio=model.sensing_ratio, rcs_model=model.rcs,
                ut_velocity=ut.velocity, d_min=model.d_min,
                retry_limit=model.map_retry_limit,
                delay_floor_s=model.map_delay_floor_s,
                reference=model.evolution_reference,
            )
            trace.append((link_id, "sensing", seq))
            seq += 1
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(f"drop {drop}, link {link_id}: {exc}") from exc
        states.append({
            "index": li, "link_id": link_id, "bs": bs, "ut": ut,
            "tx": tx, "rx": rx, "sx": sx, "condition": condition,
            "profile": profile, "lsps": lsps, "clusters": clusters,
            "sensing": sensing,
        })

    pooled = [cluster for state in states for cluster in state["sensing"]]
    if model.merge_cap is not None:
        cap = model.merge_cap
    else:
        cap = max(
            (cluster_count(scenario.kind, state["condition"], sensing=True,
                           ratio=model.sensing_ratio)
             for state in states),
            default=0,
        )
    if pooled and cap >= 1:
        merged = merge_global_scatterers(pooled, cap)
    else:
        merged = []
    trace.append(("<global>", "merge", seq))
    seq += 1

    realizations = []
    for state in states:
        li = state["index"]
        link_id = state["link_id"]
        try:
            local_rng = _substream(seed, drop, li, STAGE_LOCAL)
            localized = [
                localize_for_link(
                    cluster, state["tx"], state["sx"], scenario, local_rng,
                    own_link=(cluster.source_link == link_id),
                )
                for cluster in merged
            ]
            trace.append((link_id, "assembly", seq))
            seq += 1
            realization = assemble_link(
                link_id, state["bs"].bs_id, state["ut"].ut_id,
                scenario, state["condition"], state["lsps"],
                state["tx"], state["rx"], state["sx"],
                state["clusters"], localized,
                tx_power_dbm=model.tx_power_dbm,
                comm_pathloss=scenario_pathloss_model(
                    scenario, state["condition"], h_ut_m=state["rx"].z),
                sensing_leg_pathloss=scenario_pathloss_model(
                    scenario, Propagation.LOS, h_ut_m=state["rx"].z),
                ut_velocity=state["ut"].velocity,
                drop=drop,
                metadata={
                    "seed": seed,
                    "drop": drop,
                    "config_hash": cfg_hash,
                    "merge_cap": cap,
                    "merged_count": len(merged),
                    "sensing_clusters": localized,
                    "stage_trace": trace,
                    "tx_position": state["tx"],
                    "rx_position": state["rx"],
                    "sx_position": state["sx"],
                },
            )
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(f"drop {drop}, link {link_id}: {exc}") from exc
        realizations.append(realization)
    return realizations


def _drop_worker(args):
    normalized, drop = args
    return simulate_drop(parse_config(normalized), drop)


def run_simulation(config: RunConfig) -> list[ChannelRealization]:
    """Run all configured drops; results are ordered by (drop, link)."""
    drops = config.run.drops
    if drops == 0 or not config.layout.terminals:
        return []
    workers = min(config.run.parallel, drops)
    if workers > 1:
        jobs = [(config.normalized, drop) for drop in range(drops)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_drop = list(pool.map(_drop_worker, jobs))
    else:
        per_drop = [simulate_drop(config, drop) for drop in range(drops)]
    return [real for batch in per_drop for real in batch]


def mpc_samples(realization: ChannelRealization) -> list[MpcSample]:
    """Communication taps as multipath samples for the analytics stack."""
    return [
        MpcSample(delay_s=tap.delay_s, power=abs(tap.amplitude) ** 2,
                  aoa_rad=tap.aoa_rad, zoa_rad=tap.zoa_rad)
        for tap in realization.comm_taps
        if abs(tap.amplitude) > 0.0
    ]


def link_spreads(realization: ChannelRealization) -> tuple[float, float, float]:
    """RMS delay, azimuth, and zenith spreads of one link's taps."""
    samples = mpc_samples(realization)
    if not samples:
        raise ValueError("realization has no powered taps")
    delays = [s.delay_s for s in samples]
    powers = [s.power for s in samples]
    aoa = [s.aoa_rad for s in samples]
    zoa = [s.zoa_rad for s in samples]
    return (
        rms_spread(delays, powers, SpreadKind.DELAY),
        rms_spread(aoa, powers, SpreadKind.AZIMUTH),
        rms_spread(zoa, powers, SpreadKind.ZENITH),
    )

import dataclasses
import math

import numpy as np
import pytest

from isac_chansim.config import (
    multi_link_preset,
    parse_config,
    validation_preset,
)
from isac_chansim.pipeline import (
    PipelineError,
    link_spreads,
    mpc_samples,
    run_simulation,
    simulate_drop,
)
from isac_chansim.geometry import Vec3
from isac_chansim.scenario import Propagation


def _cfg(data=None, **run):
    data = data or validation_preset()
    data.setdefault("run", {}).update(run)
    return parse_config(data)


def _amplitude_table(realizations):
    rows = []
    for real in realizations:
        for tap in real.comm_taps + real.sensing_taps:
            rows.append((real.drop, real.link_id, tap.tap_id,
                         tap.amplitude, tap.delay_s, tap.pathloss_db))
    return rows


def test_link_count_per_drop():
    reals = run_simulation(_cfg(drops=2))
    assert len(reals) == 2
    assert {r.link_id for r in reals} == {"bs0-ut0"}
    multi = run_simulation(_cfg(multi_link_preset(), drops=2))
    assert len(multi) == 12
    assert {r.link_id for r in multi} == {
        f"bs{b}-ut{u}" for b in range(2) for u in range(3)
    }


def test_results_ordered_by_drop_then_link():
    reals = run_simulation(_cfg(multi_link_preset(), drops=3))
    order = [(r.drop, r.link_id) for r in reals]
    assert order == sorted(order)


def test_same_seed_reproduces_exactly():
    a = run_simulation(_cfg(drops=3, seed=11))
    b = run_simulation(_cfg(drops=3, seed=11))
    assert _amplitude_table(a) == _amplitude_table(b)


def test_different_seed_differs():
    a = run_simulation(_cfg(drops=1, seed=1))
    b = run_simulation(_cfg(drops=1, seed=2))
    assert _amplitude_table(a) != _amplitude_table(b)


def test_worker_count_does_not_change_results():
    serial = run_simulation(_cfg(multi_link_preset(), drops=4, seed=7))
    pooled = run_simulation(_cfg(multi_link_preset(), drops=4, seed=7,
                                 parallel=3))
    assert _amplitude_table(serial) == _amplitude_table(pooled)


def test_stage_trace_orders_stages_per_link():
    reals = run_simulation(_cfg(multi_link_preset(), seed=4))
    trace = reals[0].metadata["stage_trace"]
    seq = {(link, stage): pos for link, stage, pos in trace}
    merge_pos = seq[("<global>", "merge")]
    for real in reals:
        mapping = seq[(real.link_id, "mapping")]
        sensing = seq[(real.link_id, "sensing")]
        assembly = seq[(real.link_id, "assembly")]
        assert mapping < sensing < merge_pos < assembly


def test_merged_count_respects_cap():
    data = multi_link_preset()
    data["model"] = {"merge_cap": 9}
    reals = run_simulation(_cfg(data, drops=2, seed=3))
    for real in reals:
        assert real.metadata["merge_cap"] == 9
        assert real.metadata["merged_count"] <= 9
        assert len(real.metadata["sensing_clusters"]) \
            == real.metadata["merged_count"]


def test_comm_tap_structure():
    for real in run_simulation(_cfg(multi_link_preset(), drops=2, seed=6)):
        rays_per_cluster = 20
        n = len(real.comm_taps)
        direct = [t for t in real.comm_taps if t.tap_id == 0
                  and n % rays_per_cluster == 1]
        assert n % rays_per_cluster in (0, 1)
        total = sum(abs(t.amplitude) ** 2 for t in real.comm_taps)
        assert math.isclose(total, 1.0, rel_tol=1e-9)
        delays = [t.delay_s for t in real.comm_taps]
        assert delays == sorted(delays)


def test_sensing_taps_match_cluster_makeup():
    for real in run_simulation(_cfg(multi_link_preset(), drops=2, seed=8)):
        expected = sum(
            1 if c.condition is Propagation.LOS else len(c.echo_rays)
            for c in real.metadata["sensing_clusters"]
        )
        assert len(real.sensing_taps) == expected


def test_quiet_environment_leaves_only_target_return():
    data = validation_preset()
    data["model"] = {
        "evolution": {"amplitude": 1e-12, "knee": 0.0},
        "newborn": {"mean": 0.001, "variance": 1e-4},
    }
    real = run_simulation(_cfg(data, seed=0))[0]
    kinds = [c.kind.value for c in real.metadata["sensing_clusters"]]
    assert kinds == ["ut_target"]
    assert len(real.sensing_taps) == 1
    assert abs(real.sensing_taps[0].amplitude) == pytest.approx(1.0)


def test_pipeline_error_names_drop_and_link():
    cfg = _cfg()
    bad_terminal = dataclasses.replace(
        cfg.layout.terminals[0], position=Vec3(0.0, 0.0, 5.0))
    layout = dataclasses.replace(cfg.layout, terminals=(bad_terminal,))
    broken = dataclasses.replace(cfg, layout=layout)
    with pytest.raises(PipelineError, match=r"drop 0, link bs0-ut0"):
        simulate_drop(broken, 0)


def test_empty_runs_return_nothing():
    assert run_simulation(_cfg(drops=0)) == []
    data = validation_preset()
    data["layout"]["terminals"] = []
    assert run_simulation(_cfg(data, drops=2)) == []


def test_mpc_samples_and_spreads():
    real = run_simulation(_cfg(seed=9))[0]
    samples = mpc_samples(real)
    assert len(samples) == len(real.comm_taps)
    assert all(s.power > 0 for s in samples)
    ds, asa, zsa = link_spreads(real)
    assert 0 < ds < 1e-5
    assert 0 < asa < math.pi
    assert 0 < zsa < math.pi


def test_metadata_carries_provenance():
    cfg = _cfg(seed=21, drops=1)
    real = run_simulation(cfg)[0]
    assert real.metadata["seed"] == 21
    assert real.metadata["drop"] == 0
    assert real.metadata["config_hash"] == cfg.config_hash
    assert real.metadata["tx_position"] == Vec3(0.0, 0.0, 5.0)
    assert real.metadata["rx_position"] == Vec3(8.0, 8.0, 1.5)

"""Stochastic channel simulator for joint communication and sensing links.

A cluster-based channel generator in the 3GPP TR 38.901 style, extended
with a sensing channel: communication clusters are placed in space, shared
into the sensing channel with a distance-dependent probability, topped up
with newborn clusters, merged globally across links, and rendered into
communication and echo tap tables with radar-equation pathloss.
"""

from .analytics import (
    ClusteringResult,
    IndexScores,
    MpcSample,
    SpreadKind,
    calinski_harabasz,
    cdf_quantile,
    combined_indicator,
    davies_bouldin,
    empirical_cdf,
    k_power_means,
    rms_spread,
)
from .coeffs import (
    AntennaElement,
    ChannelRealization,
    CommTap,
    RcsClass,
    RcsModel,
    SensingTap,
    assemble_link,
    comm_channel_coefficient,
    freespace_comm_pathloss,
    los_sensing_coefficient,
    nlos_sensing_coefficient,
    sample_rcs,
    scenario_pathloss_model,
    sensing_pathloss,
)
from .commgen import CommCluster, Ray, generate_link_clusters
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    load_config,
    multi_link_preset,
    parse_config,
    validation_preset,
)
from .geometry import SphericalAngles, Vec3
from .mapping import MappedCluster, MappingContext, map_cluster, map_clusters
from .pipeline import (
    PipelineError,
    link_spreads,
    mpc_samples,
    run_simulation,
    simulate_drop,
)
from .scenario import (
    BaseStation,
    LspSet,
    NetworkLayout,
    Propagation,
    Scenario,
    ScenarioKind,
    UserTerminal,
    cluster_count,
    los_probability,
    sensing_condition,
)
from .sensing import (
    ClusterKind,
    EvolutionModel,
    NewbornDistribution,
    SensingCluster,
    build_sensing_set,
    draw_newborn_proportion,
    evolution_probability,
    merge_global_scatterers,
)

__version__ = "0.1.0"

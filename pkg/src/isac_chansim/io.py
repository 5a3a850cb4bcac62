"""CSV persistence and ingestion for simulation outputs.

Every file starts with a ``# config_hash=<hex>`` comment tying it to the
settings that produced it, followed by a mandatory header row.  Numeric
fields are written with shortest round-trip precision and '.' decimals.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .analytics import MpcSample, empirical_cdf
from .pipeline import link_spreads

__all__ = [
    "CLUSTER_COLUMNS",
    "CIR_COLUMNS",
    "STATS_COLUMNS",
    "CDF_COLUMNS",
    "export",
    "stats_rows",
    "write_clusters_csv",
    "write_cir_csv",
    "write_stats_csv",
    "write_cdf_csv",
    "write_indices_csv",
    "write_sample_cdf_csv",
    "write_validation_csv",
    "read_mpc_table",
    "read_config_hash",
    "file_digest",
    "mpc_table_samples",
]

CLUSTER_COLUMNS = ["link_id", "cluster_id", "kind", "x", "y", "z", "delay_s",
                   "power_lin", "rcs_dBsm", "aoa_rad", "zoa_rad", "aod_rad",
                   "zod_rad"]
CIR_COLUMNS = ["link_id", "tap_id", "channel", "delay_s", "re", "im",
               "pathloss_dB"]
STATS_COLUMNS = ["link_id", "rms_ds_s", "rms_asa_rad", "rms_zsa_rad"]
CDF_COLUMNS = ["metric", "value", "probability"]


def _fmt(value) -> str:
    return repr(float(value))


def _qualified_id(realization) -> str:
    return f"d{realization.drop}:{realization.link_id}"


def _open_writer(path: Path, config_hash: str, header: list[str]):
    handle = open(path, "w", newline="", encoding="utf-8")
    handle.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(handle)
    writer.writerow(header)
    return handle, writer


def write_clusters_csv(realizations, path, config_hash: str) -> Path:
    """One row per localized sensing cluster of each realization."""
    path = Path(path)
    handle, writer = _open_writer(path, config_hash, CLUSTER_COLUMNS)
    with handle:
        for real in realizations:
            link = _qualified_id(real)
            for ci, cluster in enumerate(real.metadata.get("sensing_clusters", [])):
                writer.writerow([
                    link, ci, cluster.kind.value,
                    _fmt(cluster.position.x), _fmt(cluster.position.y),
                    _fmt(cluster.position.z), _fmt(cluster.delay_s),
                    _fmt(cluster.power),
                    _fmt(float(np.mean(cluster.rcs_dbsm))),
                    _fmt(cluster.arrival.azimuth), _fmt(cluster.arrival.zenith),
                    _fmt(cluster.departure.azimuth), _fmt(cluster.departure.zenith),
                ])
    return path


def write_cir_csv(realizations, path, config_hash: str) -> Path:
    """One row per communication and sensing tap."""
    path = Path(path)
    handle, writer = _open_writer(path, config_hash, CIR_COLUMNS)
    with handle:
        for real in realizations:
            link = _qualified_id(real)
            for tap in real.comm_taps:
                writer.writerow([
                    link, tap.tap_id, "comm", _fmt(tap.delay_s),
                    _fmt(tap.amplitude.real), _fmt(tap.amplitude.imag),
                    _fmt(tap.pathloss_db),
                ])
            for tap in real.sensing_taps:
                writer.writerow([
                    link, tap.tap_id, "sens", _fmt(tap.delay_s),
                    _fmt(tap.amplitude.real), _fmt(tap.amplitude.imag),
                    _fmt(tap.pathloss_db),
                ])
    return path


def stats_rows(realizations) -> list[tuple[str, float, float, float]]:
    rows = []
    for real in realizations:
        ds, asa, zsa = link_spreads(real)
        rows.append((_qualified_id(real), ds, asa, zsa))
    return rows


def write_stats_csv(realizations, path, config_hash: str) -> Path:
    """Per-link RMS delay and angular spreads."""
    if not realizations:
        raise ValueError("stats export needs at least one realization")
    path = Path(path)
    handle, writer = _open_writer(path, config_hash, STATS_COLUMNS)
    with handle:
        for link, ds, asa, zsa in stats_rows(realizations):
            writer.writerow([link, _fmt(ds), _fmt(asa), _fmt(zsa)])
    return path


def write_cdf_csv(realizations, path, config_hash: str) -> Path:
    """Empirical CDFs of the per-link spread statistics."""
    if not realizations:
        raise ValueError("cdf export needs at least one realization")
    rows = stats_rows(realizations)
    path = Path(path)
    handle, writer = _open_writer(path, config_hash, CDF_COLUMNS)
    with handle:
        for col, metric in ((1, "rms_ds_s"), (2, "rms_asa_rad"),
                            (3, "rms_zsa_rad")):
            table = empirical_cdf([row[col] for row in rows])
            for value, prob in table:
                writer.writerow([metric, _fmt(value), _fmt(prob)])
    return path


def export(realizations, what, out_dir, config_hash: str) -> dict[str, Path]:
    """Write the requested CSV outputs into ``out_dir``.

    ``what`` is an iterable of tokens from {clusters, cir, stats, cdf};
    unknown tokens raise.  With zero realizations the tap/cluster tables
    are written empty (hash and header only) and stats/cdf are skipped.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writers = {
        "clusters": write_clusters_csv,
        "cir": write_cir_csv,
        "stats": write_stats_csv,
        "cdf": write_cdf_csv,
    }
    written: dict[str, Path] = {}
    for token in what:
        if token == "figures":
            continue
        if token not in writers:
            raise ValueError(f"unknown export token '{token}'")
        if token in ("stats", "cdf") and not realizations:
            continue
        written[token] = writers[token](
            realizations, out_dir / f"{token}.csv", config_hash)
    return written


def write_indices_csv(scores, best_k, path, config_hash: str) -> Path:
    """Validity-index table from a cluster-count sweep."""
    path = Path(path)
    handle, writer = _open_writer(path, config_hash,
                                  ["k", "ch", "db", "ci", "selected"])
    with handle:
        for k in sorted(scores):
            row = scores[k]
            writer.writerow([k, _fmt(row.ch), _fmt(row.db), _fmt(row.ci),
                             int(k == best_k)])
    return path


def write_sample_cdf_csv(samples, path, config_hash: str) -> Path:
    """Empirical CDFs of a multipath table's delay and angle columns."""
    if not samples:
        raise ValueError("cdf export needs at least one sample")
    path = Path(path)
    handle, writer = _open_writer(path, config_hash, CDF_COLUMNS)
    with handle:
        for metric, values in (
            ("delay_s", [s.delay_s for s in samples]),
            ("aoa_rad", [s.aoa_rad for s in samples]),
            ("zoa_rad", [s.zoa_rad for s in samples]),
        ):
            for value, prob in empirical_cdf(values):
                writer.writerow([metric, _fmt(value), _fmt(prob)])
    return path


def write_validation_csv(checks, path, config_hash: str) -> Path:
    """Pass/fail table for the validation battery."""
    path = Path(path)
    handle, writer = _open_writer(path, config_hash,
                                  ["check", "passed", "detail"])
    with handle:
        for name, passed, detail in checks:
            writer.writerow([name, int(bool(passed)), detail])
    return path


def read_config_hash(path) -> str | None:
    """Return the config hash embedded in an output file, if any."""
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline().strip()
    if first.startswith("# config_hash="):
        return first.split("=", 1)[1]
    return None


def file_digest(path) -> str:
    """Content digest used to tag analyze outputs when no hash is embedded."""
    with open(path, "rb") as handle:
        return hashlib.sha256(handle.read()).hexdigest()


def read_mpc_table(path) -> list[dict]:
    """Read a multipath table in the clusters.csv schema.

    Returns one dict per row with link_id plus float fields; the columns
    needed downstream (delay_s, power_lin, aoa_rad, zoa_rad) must all be
    present.
    """
    required = {"link_id", "delay_s", "power_lin", "aoa_rad", "zoa_rad"}
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    reader = csv.DictReader(lines)
    header = set(reader.fieldnames or [])
    missing = sorted(required - header)
    if missing:
        raise ValueError(f"{path} is missing required columns: "
                         f"{', '.join(missing)}")
    for record in reader:
        row = {"link_id": record["link_id"]}
        for key in header - {"link_id", "kind"}:
            try:
                row[key] = float(record[key])
            except (TypeError, ValueError):
                raise ValueError(
                    f"{path}: non-numeric value in column '{key}'") from None
        if "kind" in header:
            row["kind"] = record["kind"]
        rows.append(row)
    return rows


def mpc_table_samples(rows) -> list[MpcSample]:
    """Convert table rows into analytics samples."""
    return [
        MpcSample(delay_s=row["delay_s"], power=row["power_lin"],
                  aoa_rad=row["aoa_rad"], zoa_rad=row["zoa_rad"])
        for row in rows
    ]

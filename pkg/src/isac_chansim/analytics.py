"""Multipath clustering and validation statistics.

Power-weighted clustering of multipath components, cluster-count selection
via validity indices, RMS spread estimators, and empirical CDF helpers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MpcSample",
    "ClusteringResult",
    "IndexScores",
    "SpreadKind",
    "k_power_means",
    "calinski_harabasz",
    "davies_bouldin",
    "combined_indicator",
    "rms_spread",
    "empirical_cdf",
    "cdf_quantile",
]


@dataclass(frozen=True)
class MpcSample:
    """One resolved multipath component at the receiver."""

    delay_s: float
    power: float
    aoa_rad: float
    zoa_rad: float

    def __post_init__(self):
        if self.power <= 0.0:
            raise ValueError("multipath power must be positive")


@dataclass
class ClusteringResult:
    """Converged power-weighted clustering.

    ``centers`` live in the clustering feature space: column 0 is the
    normalized delay, columns 1..3 the unit direction of arrival.  Labels
    are 0-based.
    """

    labels: np.ndarray
    centers: np.ndarray
    k: int
    objective: float
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class IndexScores:
    """Cluster-validity scores for one candidate cluster count."""

    ch: float
    db: float
    ci: float


class SpreadKind(str, enum.Enum):
    DELAY = "delay"
    AZIMUTH = "azimuth"
    ZENITH = "zenith"


def _wrap_pi(angles):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(angles, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    wrapped[wrapped == -math.pi] = math.pi
    return wrapped


def _feature_matrix(samples, delay_weight, angle_weight):
    """Embed samples as [w_d * normalized delay, w_a * arrival direction].

    The direction columns hold the unit vector of (aoa, zoa), so Euclidean
    distance on them is the chord of the great-circle separation: nearest
    assignments agree with great-circle assignments while keeping the
    weighted update step an exact descent.
    """
    delays = np.array([s.delay_s for s in samples], dtype=float)
    powers = np.array([s.power for s in samples], dtype=float)
    aoa = np.array([s.aoa_rad for s in samples], dtype=float)
    zoa = np.array([s.zoa_rad for s in samples], dtype=float)
    scale = rms_spread(delays, powers, SpreadKind.DELAY)
    if scale <= 0.0:
        scale = 1.0
    features = np.empty((len(samples), 4), dtype=float)
    features[:, 0] = delay_weight * delays / scale
    features[:, 1] = angle_weight * np.cos(aoa) * np.sin(zoa)
    features[:, 2] = angle_weight * np.sin(aoa) * np.sin(zoa)
    features[:, 3] = angle_weight * np.cos(zoa)
    return features, powers, scale


def _squared_distances(features, centers):
    diff = features[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _weighted_centers(features, powers, labels, k, previous, angle_weight):
    centers = previous.copy()
    for idx in range(k):
        mask = labels == idx
        if not np.any(mask):
            continue
        w = powers[mask]
        mean = (w[:, None] * features[mask]).sum(axis=0) / w.sum()
        direction = mean[1:]
        norm = float(np.linalg.norm(direction))
        if norm > 0.0:
            mean[1:] = direction * (angle_weight / norm)
        else:
            mean[1:] = previous[idx, 1:]
        centers[idx] = mean
    return centers


def _seed_centers(features, powers, k, rng):
    """Power-weighted farthest-point seeding in the feature space."""
    n = len(features)
    total = powers.sum()
    first = int(rng.choice(n, p=powers / total))
    chosen = [first]
    d2 = _squared_distances(features, features[[first]])[:, 0]
    while len(chosen) < k:
        weights = powers * d2
        mass = weights.sum()
        if mass <= 0.0:
            remaining = [i for i in range(n) if i not in chosen]
            nxt = int(rng.choice(remaining))
        else:
            nxt = int(rng.choice(n, p=weights / mass))
        chosen.append(nxt)
        d2 = np.minimum(d2, _squared_distances(features, features[[nxt]])[:, 0])
    return features[chosen].copy()


def _lloyd(features, powers, k, rng, max_iter, angle_weight):
    centers = _seed_centers(features, powers, k, rng)
    labels = np.full(len(features), -1, dtype=int)
    history = []
    for _ in range(max_iter):
        d2 = _squared_distances(features, centers)
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(len(features)), new_labels]
        for idx in range(k):
            if np.any(new_labels == idx):
                continue
            farthest = int(point_d2.argmax())
            centers[idx] = features[farthest]
            new_labels[farthest] = idx
            point_d2[farthest] = 0.0
        history.append(float(np.dot(powers, point_d2)))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _weighted_centers(features, powers, labels, k, centers,
                                    angle_weight)
    return labels, centers, history


def k_power_means(samples, k, rng, *, delay_weight=1.0, angle_weight=1.0,
                  n_init=4, max_iter=100):
    """Cluster multipath components with power-weighted Lloyd iterations.

    Minimizes sum_i P_i * D(x_i, c_{label(i)})^2 where D combines the
    delay-spread-normalized delay gap and the angular separation of the
    arrival directions.  Empty clusters are reseeded with the sample
    farthest from its assigned center.
    """
    n = len(samples)
    if k < 1:
        raise ValueError("cluster count must be at least 1")
    if k > n:
        raise ValueError(f"cluster count {k} exceeds sample count {n}")
    if delay_weight <= 0.0 or angle_weight <= 0.0:
        raise ValueError("feature weights must be positive")
    features, powers, _ = _feature_matrix(samples, delay_weight, angle_weight)
    best = None
    for _ in range(max(1, n_init)):
        labels, centers, history = _lloyd(features, powers, k, rng, max_iter,
                                          angle_weight)
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centers, history)
    labels, centers, history = best
    unscaled = centers.copy()
    unscaled[:, 0] /= delay_weight
    unscaled[:, 1:] /= angle_weight
    return ClusteringResult(
        labels=labels, centers=unscaled, k=k,
        objective=history[-1], history=history,
    )


def _groups(data, labels):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    labels = np.asarray(labels)
    classes = np.unique(labels)
    members = [data[labels == c] for c in classes]
    return data, members


def calinski_harabasz(data, labels):
    """Between/within scatter ratio for a labeled feature matrix."""
    data, members = _groups(data, labels)
    n, k = len(data), len(members)
    if k < 2:
        raise ValueError("need at least two clusters")
    if n <= k:
        raise ValueError("need more samples than clusters")
    overall = data.mean(axis=0)
    between = sum(len(m) * float(((m.mean(axis=0) - overall) ** 2).sum())
                  for m in members)
    within = sum(float(((m - m.mean(axis=0)) ** 2).sum()) for m in members)
    if within == 0.0:
        return math.inf
    return between * (n - k) / (within * (k - 1))


def davies_bouldin(data, labels):
    """Mean worst-pair similarity of clusters, with L1 (q=1) distances."""
    data, members = _groups(data, labels)
    k = len(members)
    if k < 2:
        raise ValueError("need at least two clusters")
    centers = np.array([m.mean(axis=0) for m in members])
    scatter = np.array([
        float(np.abs(m - centers[i]).sum(axis=1).mean())
        for i, m in enumerate(members)
    ])
    worst = np.zeros(k)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            gap = float(np.abs(centers[i] - centers[j]).sum())
            if gap == 0.0:
                return math.inf
            worst[i] = max(worst[i], (scatter[i] + scatter[j]) / gap)
    return float(worst.mean())


def _select_k(ci_by_k):
    """Argmax of the combined indicator; ties break toward fewer clusters."""
    best_k, best_ci = None, -math.inf
    for k in sorted(ci_by_k):
        if ci_by_k[k] > best_ci:
            best_k, best_ci = k, ci_by_k[k]
    return best_k


def combined_indicator(samples, k_range, rng, *, delay_weight=1.0,
                       angle_weight=1.0, n_init=4):
    """Pick a cluster count by blending both validity indices.

    For each candidate K the samples are clustered and scored; the combined
    indicator rewards a low Davies-Bouldin score and a high
    Calinski-Harabasz score relative to their means over the sweep.
    Returns the winning K and the per-K scores.
    """
    n = len(samples)
    k_values = sorted(set(int(k) for k in k_range))
    if not k_values:
        raise ValueError("empty cluster-count range")
    if k_values[0] < 2 or k_values[-1] > n - 1:
        raise ValueError("cluster-count range must lie within [2, N-1]")
    features, _, _ = _feature_matrix(samples, delay_weight, angle_weight)
    ch_by_k, db_by_k = {}, {}
    for k in k_values:
        result = k_power_means(
            samples, k, rng, delay_weight=delay_weight,
            angle_weight=angle_weight, n_init=n_init,
        )
        ch_by_k[k] = calinski_harabasz(features, result.labels)
        db_by_k[k] = davies_bouldin(features, result.labels)
    ch_mean = float(np.mean(list(ch_by_k.values())))
    db_mean = float(np.mean(list(db_by_k.values())))
    scores = {}
    for k in k_values:
        ci = db_mean / db_by_k[k] + ch_by_k[k] / ch_mean
        scores[k] = IndexScores(ch=ch_by_k[k], db=db_by_k[k], ci=ci)
    best = _select_k({k: s.ci for k, s in scores.items()})
    return best, scores


def rms_spread(values, powers, kind):
    """Power-weighted RMS spread of delays or angles.

    Angles are wrapped to (-pi, pi] about their power-weighted circular
    mean before the second moment is taken, so the result is invariant
    under a global rotation.
    """
    values = np.asarray(values, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one sample")
    if values.shape != powers.shape:
        raise ValueError("values and powers must have matching shapes")
    if np.any(powers <= 0.0):
        raise ValueError("powers must be positive")
    kind = SpreadKind(kind)
    total = powers.sum()
    if kind is SpreadKind.DELAY:
        mean = float(np.dot(powers, values)) / total
        second = float(np.dot(powers, values ** 2)) / total
        return math.sqrt(max(second - mean ** 2, 0.0))
    mean = math.atan2(float(np.dot(powers, np.sin(values))),
                      float(np.dot(powers, np.cos(values))))
    wrapped = _wrap_pi(values - mean)
    return math.sqrt(float(np.dot(powers, wrapped ** 2)) / total)


def empirical_cdf(values):
    """Step CDF as an (N, 2) array of (sorted value, rank / N)."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("need at least one sample")
    probs = np.arange(1, values.size + 1, dtype=float) / values.size
    return np.column_stack([values, probs])


def cdf_quantile(values, p):
    """Smallest value whose empirical CDF reaches probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    table = empirical_cdf(values)
    idx = int(np.searchsorted(table[:, 1], p, side="left"))
    return float(table[min(idx, len(table) - 1), 0])

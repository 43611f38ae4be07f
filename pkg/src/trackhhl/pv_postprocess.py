"""Primary-vertex finding from active segments.

Each active segment (or fitted track) is extrapolated to its point of
closest approach to the beamline, the resulting z positions are clustered
with a one-dimensional DBSCAN, and cluster means become vertex estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from trackhhl.classical_solver import ActiveSet, TrackCollection
from trackhhl.hamiltonian import DegenerateGeometryError, Segment, SegmentSet
from trackhhl.toy_model import Event

__all__ = [
    "BeamlineProjection",
    "VertexEstimate",
    "PVComparison",
    "MADCurve",
    "extrapolate_to_beamline",
    "line_to_beamline",
    "segment_projections",
    "track_projections",
    "dbscan_1d",
    "cluster_z",
    "pv_difference",
    "discard_sweep",
]

DEFAULT_EPS = 1.0
DEFAULT_MIN_SAMPLES = 3


@dataclass(frozen=True)
class BeamlineProjection:
    segment_index: int
    z0: float
    doca: float
    degenerate: bool = False


@dataclass
class VertexEstimate:
    z: float
    n_members: int
    source: str = "segments"
    members: list[int] = field(default_factory=list)


@dataclass
class PVComparison:
    differences: list[float]
    mad: float
    pairs: list[tuple[float, float]]
    unmatched_segment_pvs: list[float]
    unmatched_track_pvs: list[float]


@dataclass
class MADCurve:
    discard_fractions: list[float]
    mad_values: list[float]
    missing_vertex_rates: list[float]
    seeds_per_point: int

    def to_csv(self) -> str:
        lines = ["discard_fraction,mad,missing_vertex_rate"]
        for f, m, r in zip(self.discard_fractions, self.mad_values, self.missing_vertex_rates):
            mad = "" if math.isnan(m) else repr(float(m))
            lines.append(f"{f!r},{mad},{float(r)!r}")
        return "\n".join(lines) + "\n"


def line_to_beamline(point: np.ndarray, direction: np.ndarray) -> tuple[float, float, bool]:
    """z and distance of closest approach of a line to the z axis.

    Returns ``(z0, doca, degenerate)``; a line parallel to the axis gives
    ``z0`` of ``point`` and ``degenerate=True``.
    """
    x0, y0, z0 = point
    dx, dy, dz = direction
    transverse = dx * dx + dy * dy
    if transverse == 0.0:
        return float(z0), float(math.hypot(x0, y0)), True
    s = -(x0 * dx + y0 * dy) / transverse
    x, y = x0 + s * dx, y0 + s * dy
    return float(z0 + s * dz), float(math.hypot(x, y)), False


def extrapolate_to_beamline(segment: Segment, event: Event) -> BeamlineProjection:
    a = event.hit(segment.from_hit).position
    b = event.hit(segment.to_hit).position
    d = b - a
    if not d.any():
        raise DegenerateGeometryError(f"segment {segment.index} has coincident hits")
    if d[0] == 0.0 and d[1] == 0.0:
        return BeamlineProjection(segment.index, float((a[2] + b[2]) / 2), float(math.hypot(a[0], a[1])), True)
    z0, doca, _ = line_to_beamline(a, d)
    return BeamlineProjection(segment.index, z0, doca)


def segment_projections(active: ActiveSet | Iterable[int], segs: SegmentSet, event: Event) -> list[BeamlineProjection]:
    idx = active.active if isinstance(active, ActiveSet) else active
    return [extrapolate_to_beamline(segs[i], event) for i in sorted(idx)]


def track_projections(tracks: TrackCollection, event: Event) -> list[BeamlineProjection]:
    """Least-squares straight-line fit per track, extrapolated to the beamline."""
    out = []
    for k, hit_ids in enumerate(tracks.tracks):
        pts = np.array([event.hit(h).position for h in hit_ids])
        z = pts[:, 2]
        design = np.vstack([np.ones_like(z), z]).T
        (ax, bx), *_ = np.linalg.lstsq(design, pts[:, 0], rcond=None)
        (ay, by), *_ = np.linalg.lstsq(design, pts[:, 1], rcond=None)
        z0, doca, degenerate = line_to_beamline(np.array([ax, ay, 0.0]), np.array([bx, by, 1.0]))
        out.append(BeamlineProjection(k, z0, doca, degenerate))
    return out


def dbscan_1d(values: Sequence[float], eps: float, min_samples: int) -> np.ndarray:
    """Cluster labels for 1-D points (``-1`` marks noise).

    Neighbourhoods are closed intervals ``|z - z'| <= eps`` including the
    point itself. A border point reachable from two clusters joins the one
    with the nearer core point. Labels are numbered in increasing z.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    z = np.asarray(values, dtype=float)
    labels = np.full(len(z), -1, dtype=int)
    if len(z) == 0:
        return labels
    order = np.argsort(z, kind="stable")
    zs = z[order]
    lo = np.searchsorted(zs, zs - eps, side="left")
    hi = np.searchsorted(zs, zs + eps, side="right")
    core = (hi - lo) >= min_samples

    core_pos = np.flatnonzero(core)
    if len(core_pos) == 0:
        return labels
    sorted_labels = np.full(len(zs), -1, dtype=int)
    cluster = 0
    sorted_labels[core_pos[0]] = 0
    for prev, cur in zip(core_pos, core_pos[1:]):
        if zs[cur] - zs[prev] > eps:
            cluster += 1
        sorted_labels[cur] = cluster

    core_z = zs[core_pos]
    for i in np.flatnonzero(~core):
        j = np.searchsorted(core_z, zs[i])
        best, best_d = -1, np.inf
        for k in (j - 1, j):
            if 0 <= k < len(core_z):
                d = abs(core_z[k] - zs[i])
                if d <= eps and d < best_d:
                    best, best_d = k, d
        if best >= 0:
            sorted_labels[i] = sorted_labels[core_pos[best]]
    labels[order] = sorted_labels
    return labels


def cluster_z(
    projections: Sequence[BeamlineProjection] | Sequence[float],
    eps: float = DEFAULT_EPS,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    source: str = "segments",
) -> list[VertexEstimate]:
    z = np.array(
        [p.z0 if isinstance(p, BeamlineProjection) else float(p) for p in projections], dtype=float
    )
    labels = dbscan_1d(z, eps, min_samples)
    out = []
    for lab in range(labels.max() + 1 if len(labels) else 0):
        members = np.flatnonzero(labels == lab)
        out.append(VertexEstimate(float(np.mean(z[members])), len(members), source, members.tolist()))
    return out


def _z(v) -> float:
    return float(v.z) if isinstance(v, VertexEstimate) else float(v)


def pv_difference(seg_pvs: Sequence, track_pvs: Sequence) -> PVComparison:
    """Greedy nearest-in-z matching of segment and track vertices.

    Pairs are taken in order of increasing ``|z_seg - z_track|`` (ties by
    smaller z); differences are ``z_seg - z_track``.
    """
    seg = [_z(v) for v in seg_pvs]
    trk = [_z(v) for v in track_pvs]
    candidates = sorted(
        (abs(s - t), t, s, i, j) for i, s in enumerate(seg) for j, t in enumerate(trk)
    )
    used_s, used_t, pairs = set(), set(), []
    for _, t, s, i, j in candidates:
        if i in used_s or j in used_t:
            continue
        used_s.add(i)
        used_t.add(j)
        pairs.append((s, t))
    pairs.sort(key=lambda p: p[1])
    diffs = [s - t for s, t in pairs]
    mad = float(np.mean(np.abs(diffs))) if diffs else math.nan
    return PVComparison(
        differences=diffs,
        mad=mad,
        pairs=pairs,
        unmatched_segment_pvs=[s for i, s in enumerate(seg) if i not in used_s],
        unmatched_track_pvs=[t for j, t in enumerate(trk) if j not in used_t],
    )


def discard_sweep(
    projections: Sequence[BeamlineProjection],
    fractions: Sequence[float],
    seeds: int | Sequence[int],
    eps: float = DEFAULT_EPS,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    reference_pvs: Optional[Sequence] = None,
) -> MADCurve:
    """MAD to the reference vertices after randomly discarding projections.

    For every fraction and seed a uniform subset of ``round((1 - f) n)``
    projections is kept (original order preserved) and reclustered. The
    missing-vertex rate is the share of reference vertices left unmatched;
    seeds where nothing can be matched contribute no MAD.
    """
    if reference_pvs is None:
        reference_pvs = cluster_z(projections, eps, min_samples)
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    n = len(projections)
    n_ref = len(reference_pvs)
    mads, missing = [], []
    for f in fractions:
        if not 0.0 <= f <= 0.95 + 1e-12:
            raise ValueError(f"discard fraction {f} outside [0, 0.95]")
        point_mads, point_missing = [], []
        for seed in seed_list:
            keep_n = int(round((1.0 - f) * n))
            rng = np.random.default_rng(seed)
            keep = np.sort(rng.choice(n, size=keep_n, replace=False)) if keep_n < n else np.arange(n)
            if keep_n < min_samples:
                point_missing.append(1.0)
                continue
            found = cluster_z([projections[k] for k in keep], eps, min_samples)
            cmp = pv_difference(found, reference_pvs)
            point_missing.append(len(cmp.unmatched_track_pvs) / n_ref if n_ref else 0.0)
            if cmp.differences:
                point_mads.append(cmp.mad)
        mads.append(float(np.mean(point_mads)) if point_mads else math.nan)
        missing.append(float(np.mean(point_missing)))
    return MADCurve(list(map(float, fractions)), mads, missing, len(seed_list))

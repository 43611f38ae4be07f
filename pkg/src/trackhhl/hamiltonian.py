"""Doublet enumeration and the quadratic track-finding energy.

The energy over segment activations ``S`` is

    H(S) = -1/2 * sum_{i != j aligned} S_i S_j + alpha * sum S_i^2
           + beta * sum (1 - S_i)^2

with the angular sum over ordered pairs, so each aligned pair contributes
``-S_i S_j`` once. Its gradient is
``2 (A S - b)`` with ``A = (alpha + beta) I - G / 2`` (``G`` the 0/1
alignment adjacency) and ``b = beta * 1``, so the relaxed minimum solves
``A S = b``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from trackhhl.toy_model import Event

__all__ = [
    "DegenerateGeometryError",
    "Segment",
    "SegmentSet",
    "HamiltonianParams",
    "LinearSystem",
    "enumerate_segments",
    "alignment",
    "cos_angle",
    "build_system",
    "hamiltonian_value",
    "truth_segments",
]


class DegenerateGeometryError(ValueError):
    """Two hits of a segment coincide, so it has no direction."""


@dataclass(frozen=True)
class Segment:
    index: int
    from_hit: int
    to_hit: int
    layer_gap: tuple[int, int]
    direction: tuple[float, float, float]


@dataclass
class SegmentSet:
    segments: list[Segment]
    # hit id -> (incoming segment indices, outgoing segment indices)
    by_shared_hit: dict[int, tuple[list[int], list[int]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i: int) -> Segment:
        return self.segments[i]

    def aligned_candidates(self) -> Iterable[tuple[int, int]]:
        """Yield (incoming, outgoing) index pairs sharing their middle hit."""
        for hit_id in sorted(self.by_shared_hit):
            incoming, outgoing = self.by_shared_hit[hit_id]
            for i in incoming:
                for j in outgoing:
                    yield i, j


@dataclass(frozen=True)
class HamiltonianParams:
    epsilon: float = 1e-6
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 2.0:
            raise ValueError(f"epsilon must lie in [0, 2], got {self.epsilon}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass
class LinearSystem:
    n: int
    matrix_a: sp.csr_matrix
    vector_b: np.ndarray
    params: HamiltonianParams
    aligned_pairs: list[tuple[int, int]] = field(default_factory=list)

    def dense(self) -> np.ndarray:
        return self.matrix_a.toarray()

    def to_coo_text(self) -> str:
        """``n`` header followed by ``row col value`` lines (row-major)."""
        coo = self.matrix_a.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{self.n}"]
        for k in order:
            lines.append(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_coo_text(cls, text: str, params: Optional[HamiltonianParams] = None) -> "LinearSystem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n = int(lines[0])
        rows, cols, vals = [], [], []
        for ln in lines[1:]:
            r, c, v = ln.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
        a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        params = params or HamiltonianParams()
        return cls(n=n, matrix_a=a, vector_b=np.full(n, params.beta), params=params)

    def heatmap_csv(self) -> str:
        dense = self.dense()
        return "\n".join(",".join(repr(float(v)) for v in row) for row in dense) + "\n"


def _unit_direction(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    d = p1 - p0
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise DegenerateGeometryError(f"zero-length segment at {tuple(p0)}")
    return d / norm


def enumerate_segments(event: Event, max_slope: Optional[float] = None) -> SegmentSet:
    """All doublets between hits on adjacent layers.

    ``max_slope`` optionally drops doublets whose |dx/dz| or |dy/dz| exceeds
    the cut. Indexing follows (layer gap, from hit id, to hit id).
    """
    by_layer: dict[int, list] = defaultdict(list)
    for h in event.hits:
        by_layer[h.layer].append(h)
    for hits in by_layer.values():
        hits.sort(key=lambda h: h.id)

    segments: list[Segment] = []
    for layer in sorted(by_layer):
        if layer + 1 not in by_layer:
            continue
        for a in by_layer[layer]:
            for b in by_layer[layer + 1]:
                dz = b.z - a.z
                if max_slope is not None and dz != 0:
                    if abs(b.x - a.x) / dz > max_slope or abs(b.y - a.y) / dz > max_slope:
                        continue
                direction = _unit_direction(a.position, b.position)
                segments.append(
                    Segment(
                        index=len(segments),
                        from_hit=a.id,
                        to_hit=b.id,
                        layer_gap=(layer, layer + 1),
                        direction=tuple(float(v) for v in direction),
                    )
                )

    adjacency: dict[int, tuple[list[int], list[int]]] = {}
    for s in segments:
        adjacency.setdefault(s.from_hit, ([], []))[1].append(s.index)
        adjacency.setdefault(s.to_hit, ([], []))[0].append(s.index)
    return SegmentSet(segments=segments, by_shared_hit=adjacency)


def cos_angle(s1: Segment, s2: Segment) -> float:
    d1 = np.asarray(s1.direction)
    d2 = np.asarray(s2.direction)
    if not (np.isfinite(d1).all() and np.isfinite(d2).all()) or not d1.any() or not d2.any():
        raise DegenerateGeometryError("segment has no direction")
    return float(np.dot(d1, d2))


def alignment(s1: Segment, s2: Segment, epsilon: float) -> int:
    """1 if ``s2`` continues ``s1`` within angular tolerance, else 0.

    Segments that do not meet head-to-tail at a shared hit score 0.
    """
    if s1.to_hit != s2.from_hit:
        return 0
    return int(cos_angle(s1, s2) >= 1.0 - epsilon)


def build_system(segs: SegmentSet, params: HamiltonianParams) -> LinearSystem:
    n = len(segs)
    if n < 1:
        raise ValueError("cannot build a system without segments")
    diag = params.alpha + params.beta
    cand = np.array(list(segs.aligned_candidates()), dtype=int).reshape(-1, 2)
    dirs = np.array([seg.direction for seg in segs], dtype=float)
    cos = np.einsum("ij,ij->i", dirs[cand[:, 0]], dirs[cand[:, 1]])
    # same inclusive test as alignment(); candidates already share their middle hit
    hit = cand[cos >= 1.0 - params.epsilon]
    pairs = [(int(min(i, j)), int(max(i, j))) for i, j in hit]
    rows = np.concatenate([np.arange(n), hit[:, 0], hit[:, 1]])
    cols = np.concatenate([np.arange(n), hit[:, 1], hit[:, 0]])
    vals = np.concatenate([np.full(n, diag), np.full(2 * len(hit), -0.5)])
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return LinearSystem(
        n=n,
        matrix_a=a,
        vector_b=np.full(n, float(params.beta)),
        params=params,
        aligned_pairs=sorted(pairs),
    )


def hamiltonian_value(
    s: np.ndarray,
    segs: SegmentSet,
    params: HamiltonianParams,
    aligned_pairs: Optional[list[tuple[int, int]]] = None,
) -> float:
    s = np.asarray(s, dtype=float)
    if s.shape != (len(segs),):
        raise ValueError(f"S has shape {s.shape}, expected ({len(segs)},)")
    if aligned_pairs is None:
        aligned_pairs = [
            (i, j)
            for i, j in segs.aligned_candidates()
            if alignment(segs[i], segs[j], params.epsilon)
        ]
    # -1/2 over ordered pairs (i, j) and (j, i), i.e. once per unordered pair
    h_ang = -sum(s[i] * s[j] for i, j in aligned_pairs)
    h_spec = params.alpha * float(np.sum(s**2))
    h_gap = params.beta * float(np.sum((1.0 - s) ** 2))
    return float(h_ang + h_spec + h_gap)


def truth_segments(segs: SegmentSet, event: Event) -> set[int]:
    """Indices of segments joining two hits of the same truth particle."""
    out = set()
    for s in segs:
        a = event.hit(s.from_hit).truth_particle
        b = event.hit(s.to_hit).truth_particle
        if a is not None and a == b:
            out.add(s.index)
    return out

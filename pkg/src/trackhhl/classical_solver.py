"""Classical solution of A S = b, thresholding, track assembly and scoring."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from trackhhl.hamiltonian import LinearSystem, SegmentSet, cos_angle, truth_segments
from trackhhl.toy_model import Event

__all__ = [
    "SolverError",
    "ConvergenceError",
    "SolutionVector",
    "ActiveSet",
    "TrackCollection",
    "EfficiencyReport",
    "DEFAULT_THRESHOLD",
    "solve",
    "conjugate_gradient",
    "discretize",
    "build_tracks",
    "score",
    "condition_number",
]

DEFAULT_THRESHOLD = 0.58
DENSE_LIMIT = 4096
DENSE_EIG_LIMIT = 1024


class SolverError(RuntimeError):
    """The system matrix is not positive definite."""


class ConvergenceError(SolverError):
    """Conjugate gradient did not reach tolerance within ``max_iters``."""


@dataclass
class SolutionVector:
    values: np.ndarray
    iterations: int = 0
    residual_norm: float = 0.0
    method: str = "direct"

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class ActiveSet:
    active: frozenset[int]
    threshold_used: Optional[float] = None

    def __contains__(self, i: int) -> bool:
        return i in self.active

    def __len__(self) -> int:
        return len(self.active)


@dataclass
class TrackCollection:
    tracks: list[list[int]]
    isolated_segments: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tracks)


@dataclass
class EfficiencyReport:
    segment_efficiency: float
    segment_purity: float
    track_efficiency: float
    clone_rate: float
    ghost_rate: float


def _min_eigenvalue_estimate(a: sp.spmatrix) -> float:
    n = a.shape[0]
    if n <= DENSE_LIMIT:
        return float(np.linalg.eigvalsh(a.toarray())[0])
    return float(spla.eigsh(a, k=1, which="SA", return_eigenvectors=False)[0])


def conjugate_gradient(
    a: sp.spmatrix, b: np.ndarray, tol: float = 1e-10, max_iters: Optional[int] = None
) -> SolutionVector:
    """Plain CG for an SPD matrix; stops on ``||r|| <= tol * ||b||``."""
    n = len(b)
    max_iters = max_iters or 10 * n
    x = np.zeros(n)
    r = b - a @ x
    p = r.copy()
    rs = float(r @ r)
    target = tol * float(np.linalg.norm(b))
    it = 0
    while np.sqrt(rs) > target:
        if it >= max_iters:
            raise ConvergenceError(
                f"CG did not converge in {max_iters} iterations "
                f"(residual {np.sqrt(rs):.3e}, target {target:.3e})"
            )
        ap = a @ p
        curvature = float(p @ ap)
        if curvature <= 0:
            lam = _min_eigenvalue_estimate(a)
            raise SolverError(f"matrix is not positive definite (smallest eigenvalue ~ {lam:.6g})")
        step = rs / curvature
        x += step * p
        r -= step * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    return SolutionVector(x, iterations=it, residual_norm=float(np.sqrt(rs)), method="cg")


def solve(system: LinearSystem, method: str = "direct", tol: float = 1e-10,
          max_iters: Optional[int] = None) -> SolutionVector:
    a = system.matrix_a
    b = system.vector_b
    if method == "direct":
        try:
            if system.n <= DENSE_LIMIT:
                factor = scipy.linalg.cho_factor(a.toarray(), lower=True)
                x = scipy.linalg.cho_solve(factor, b)
            else:
                x = spla.spsolve(a.tocsc(), b)
                if _min_eigenvalue_estimate(a) <= 0:
                    raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            lam = _min_eigenvalue_estimate(a)
            raise SolverError(
                f"matrix is not positive definite (smallest eigenvalue ~ {lam:.6g})"
            ) from None
        res = float(np.linalg.norm(a @ x - b))
        return SolutionVector(np.asarray(x), iterations=1, residual_norm=res, method="direct")
    if method in ("cg", "conjugate-gradient"):
        return conjugate_gradient(a, b, tol=tol, max_iters=max_iters)
    raise ValueError(f"unknown solver method {method!r}")


def discretize(solution, threshold: float = DEFAULT_THRESHOLD) -> ActiveSet:
    values = solution.values if isinstance(solution, SolutionVector) else np.asarray(solution)
    active = frozenset(int(i) for i in np.flatnonzero(values >= threshold))
    return ActiveSet(active=active, threshold_used=threshold)


def build_tracks(active: ActiveSet, segs: SegmentSet) -> TrackCollection:
    """Chain active segments into tracks.

    At a hit with several incoming/outgoing active segments the links are
    chosen greedily by largest cos(angle); ties go to the lower segment
    indices. Chains of two or more segments are tracks, single segments are
    returned as ``isolated_segments``.
    """
    act = sorted(active.active)
    act_set = set(act)
    candidates = []
    for hit_id, (incoming, outgoing) in segs.by_shared_hit.items():
        ins = [i for i in incoming if i in act_set]
        outs = [j for j in outgoing if j in act_set]
        for i in ins:
            for j in outs:
                candidates.append((-cos_angle(segs[i], segs[j]), i, j))
    candidates.sort()

    succ: dict[int, int] = {}
    pred: dict[int, int] = {}
    for _, i, j in candidates:
        if i in succ or j in pred:
            continue
        succ[i] = j
        pred[j] = i

    tracks, isolated = [], []
    for start in act:
        if start in pred:
            continue
        chain = [start]
        while chain[-1] in succ:
            chain.append(succ[chain[-1]])
        if len(chain) == 1:
            isolated.append(start)
            continue
        hits = [segs[chain[0]].from_hit] + [segs[k].to_hit for k in chain]
        tracks.append(hits)
    return TrackCollection(tracks=tracks, isolated_segments=isolated)


def score(
    tracks: TrackCollection,
    event: Event,
    active: Optional[ActiveSet] = None,
    segs: Optional[SegmentSet] = None,
    match_fraction: float = 0.7,
) -> EfficiencyReport:
    """Track and segment-level figures of merit against truth.

    A track matches a particle when at least ``match_fraction`` of its hits
    belong to it. Clone rate counts extra matches of an already matched
    particle, as a fraction of all tracks.
    """
    n_truth = len(event.particles)
    matched_per_particle: Counter = Counter()
    ghosts = 0
    for hits in tracks.tracks:
        owners = Counter(event.hit(h).truth_particle for h in hits)
        owner, count = owners.most_common(1)[0]
        if owner is not None and count >= match_fraction * len(hits):
            matched_per_particle[owner] += 1
        else:
            ghosts += 1
    n_tracks = len(tracks.tracks)
    found = len(matched_per_particle)
    clones = sum(c - 1 for c in matched_per_particle.values())

    seg_eff = seg_pur = 0.0
    if active is not None and segs is not None:
        truth = truth_segments(segs, event)
        hit = len(truth & set(active.active))
        seg_eff = hit / len(truth) if truth else 1.0
        seg_pur = hit / len(active.active) if active.active else (1.0 if not truth else 0.0)

    return EfficiencyReport(
        segment_efficiency=seg_eff,
        segment_purity=seg_pur,
        track_efficiency=found / n_truth if n_truth else 0.0,
        clone_rate=clones / n_tracks if n_tracks else 0.0,
        ghost_rate=ghosts / n_tracks if n_tracks else 0.0,
    )


def condition_number(system: LinearSystem) -> float:
    a = system.matrix_a
    if system.n <= DENSE_EIG_LIMIT:
        eig = np.linalg.eigvalsh(a.toarray())
        lo, hi = float(eig[0]), float(eig[-1])
    else:
        hi = float(spla.eigsh(a, k=1, which="LA", return_eigenvectors=False)[0])
        lo = float(spla.eigsh(a, k=1, which="SA", return_eigenvectors=False)[0])
    if lo <= 0:
        raise SolverError(f"matrix is not positive definite (smallest eigenvalue ~ {lo:.6g})")
    return hi / lo

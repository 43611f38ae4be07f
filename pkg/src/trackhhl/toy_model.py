"""Synthetic events for a planar-layer, VELO-like detector.

Particles are straight lines emitted from primary vertices sitting on the
beamline (x = y = 0). Each line is intersected with every layer; optional
degradations (Gaussian smearing, per-layer scattering kinks, hit
inefficiency) are applied in that order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ConfigError",
    "DetectorConfig",
    "Hit",
    "TruthParticle",
    "Event",
    "generate_event",
    "minimal_event",
]

Position = tuple[float, float, float]


class ConfigError(ValueError):
    """Raised for an invalid detector configuration."""


@dataclass(frozen=True)
class DetectorConfig:
    """Detector geometry, generator settings and imperfections.

    Lengths are in millimetres. ``layer_z`` defaults to 20, 40, ... mm.
    ``pv_z`` optionally pins the primary-vertex positions instead of
    drawing them from ``pv_spread_z``.
    """

    n_layers: int = 3
    layer_z: Optional[tuple[float, ...]] = None
    n_particles: int = 2
    n_primary_vertices: int = 1
    pv_spread_z: float = 0.0
    slope_range: float = 0.3
    hit_resolution_xy: float = 0.0
    hit_efficiency: float = 1.0
    scattering_angle_sigma: float = 0.0
    seed: int = 0
    pv_z: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.layer_z is None:
            object.__setattr__(
                self, "layer_z", tuple(20.0 * (i + 1) for i in range(self.n_layers))
            )
        else:
            object.__setattr__(self, "layer_z", tuple(float(z) for z in self.layer_z))
        if self.pv_z is not None:
            object.__setattr__(self, "pv_z", tuple(float(z) for z in self.pv_z))
        self.validate()

    def validate(self) -> None:
        if self.n_layers < 2:
            raise ConfigError(f"need at least 2 layers, got {self.n_layers}")
        if len(self.layer_z) != self.n_layers:
            raise ConfigError(
                f"layer_z has {len(self.layer_z)} entries for {self.n_layers} layers"
            )
        if any(b <= a for a, b in zip(self.layer_z, self.layer_z[1:])):
            raise ConfigError(f"layer_z must be strictly increasing: {self.layer_z}")
        if self.n_particles < 0:
            raise ConfigError("n_particles must be non-negative")
        if self.n_primary_vertices < 1:
            raise ConfigError("need at least one primary vertex")
        if self.pv_z is not None and len(self.pv_z) != self.n_primary_vertices:
            raise ConfigError("pv_z length must equal n_primary_vertices")
        if not 0.0 <= self.hit_efficiency <= 1.0:
            raise ConfigError(f"hit_efficiency must lie in [0, 1], got {self.hit_efficiency}")
        for name in ("pv_spread_z", "slope_range", "hit_resolution_xy", "scattering_angle_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @property
    def is_ideal(self) -> bool:
        return (
            self.hit_resolution_xy == 0
            and self.scattering_angle_sigma == 0
            and self.hit_efficiency == 1.0
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layer_z"] = list(self.layer_z)
        d["pv_z"] = None if self.pv_z is None else list(self.pv_z)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        for key in ("layer_z", "pv_z"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class Hit:
    id: int
    layer: int
    x: float
    y: float
    z: float
    truth_particle: Optional[int] = None

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class TruthParticle:
    id: int
    origin_pv: int
    slope_x: float
    slope_y: float
    origin: Position


@dataclass
class Event:
    config: DetectorConfig
    hits: list[Hit]
    particles: list[TruthParticle]
    pvs: list[Position]
    _by_id: dict[int, Hit] = field(default=None, init=False, repr=False, compare=False)

    def hit(self, hit_id: int) -> Hit:
        if self._by_id is None or len(self._by_id) != len(self.hits):
            self._by_id = {h.id: h for h in self.hits}
        return self._by_id[hit_id]

    def hits_on_layer(self, layer: int) -> list[Hit]:
        return [h for h in self.hits if h.layer == layer]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "hits": [
                [h.id, h.layer, h.x, h.y, h.z, h.truth_particle] for h in self.hits
            ],
            "particles": [
                {
                    "id": p.id,
                    "origin_pv": p.origin_pv,
                    "slope_x": p.slope_x,
                    "slope_y": p.slope_y,
                    "origin": list(p.origin),
                }
                for p in self.particles
            ],
            "pvs": [list(pv) for pv in self.pvs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        hits = [
            Hit(int(i), int(layer), float(x), float(y), float(z),
                None if t is None else int(t))
            for i, layer, x, y, z, t in d["hits"]
        ]
        particles = [
            TruthParticle(
                id=int(p["id"]),
                origin_pv=int(p["origin_pv"]),
                slope_x=float(p["slope_x"]),
                slope_y=float(p["slope_y"]),
                origin=tuple(float(v) for v in p["origin"]),
            )
            for p in d["particles"]
        ]
        pvs = [tuple(float(v) for v in pv) for pv in d["pvs"]]
        return cls(DetectorConfig.from_dict(d["config"]), hits, particles, pvs)


def generate_event(config: DetectorConfig) -> Event:
    """Generate one event.

    Random numbers are drawn in a fixed order (PV positions, slopes, then
    per particle and layer: smearing, kink, efficiency) so a given config
    always yields bit-identical output.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    if config.pv_z is not None:
        pv_z = np.asarray(config.pv_z, dtype=float)
    else:
        pv_z = rng.normal(0.0, 1.0, size=config.n_primary_vertices) * config.pv_spread_z
    pvs = [(0.0, 0.0, float(z)) for z in pv_z]

    slopes = rng.uniform(-config.slope_range, config.slope_range, size=(config.n_particles, 2))
    particles = [
        TruthParticle(
            id=i,
            origin_pv=i % config.n_primary_vertices,
            slope_x=float(slopes[i, 0]),
            slope_y=float(slopes[i, 1]),
            origin=pvs[i % config.n_primary_vertices],
        )
        for i in range(config.n_particles)
    ]

    layer_z = np.asarray(config.layer_z)
    recorded: list[tuple[int, int, float, float, float]] = []
    for p in particles:
        x0, y0, z0 = p.origin
        tx, ty = p.slope_x, p.slope_y
        x, y, z = x0, y0, z0
        for layer, zl in enumerate(layer_z):
            x = x + tx * (zl - z)
            y = y + ty * (zl - z)
            z = zl
            if config.is_ideal:
                # closed form keeps ideal hits exactly on the generating line
                x = x0 + tx * (zl - z0)
                y = y0 + ty * (zl - z0)
            dx, dy = rng.normal(0.0, 1.0, size=2) * config.hit_resolution_xy
            kx, ky = rng.normal(0.0, 1.0, size=2) * config.scattering_angle_sigma
            keep = rng.uniform() < config.hit_efficiency
            if keep:
                recorded.append((layer, p.id, float(x + dx), float(y + dy), float(zl)))
            tx, ty = tx + kx, ty + ky

    recorded.sort(key=lambda r: (r[0], r[1]))
    hits = [
        Hit(id=i, layer=layer, x=x, y=y, z=z, truth_particle=pid)
        for i, (layer, pid, x, y, z) in enumerate(recorded)
    ]
    return Event(config=config, hits=hits, particles=particles, pvs=pvs)


def minimal_event() -> Event:
    """Canonical two-particle, three-layer ideal event.

    Both particles come from a single vertex at the origin; the fixed slopes
    keep every wrong-hit doublet far from alignment.
    """
    config = DetectorConfig(n_layers=3, n_particles=2, n_primary_vertices=1, pv_z=(0.0,))
    slopes = [(0.1, 0.05), (-0.08, 0.12)]
    pv = (0.0, 0.0, 0.0)
    particles = [
        TruthParticle(id=i, origin_pv=0, slope_x=sx, slope_y=sy, origin=pv)
        for i, (sx, sy) in enumerate(slopes)
    ]
    hits = []
    for layer, z in enumerate(config.layer_z):
        for p in particles:
            hits.append(
                Hit(len(hits), layer, p.slope_x * z, p.slope_y * z, z, p.id)
            )
    return Event(config=config, hits=hits, particles=particles, pvs=[pv])

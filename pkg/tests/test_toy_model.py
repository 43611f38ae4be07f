import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trackhhl.toy_model import ConfigError, DetectorConfig, Event, generate_event, minimal_event


def test_ideal_three_layers_two_particles_has_six_hits():
    ev = generate_event(DetectorConfig(n_layers=3, n_particles=2, seed=1))
    assert len(ev.hits) == 6
    assert [len(ev.hits_on_layer(k)) for k in range(3)] == [2, 2, 2]


def test_same_seed_gives_identical_events():
    cfg = DetectorConfig(n_layers=4, n_particles=5, hit_resolution_xy=0.01,
                         scattering_angle_sigma=0.001, hit_efficiency=0.9, seed=3)
    assert generate_event(cfg).to_dict() == generate_event(cfg).to_dict()


def test_zero_efficiency_gives_no_hits():
    assert generate_event(DetectorConfig(hit_efficiency=0.0)).hits == []


@pytest.mark.parametrize(
    "kw",
    [
        dict(n_layers=1),
        dict(n_layers=3, layer_z=(20.0, 20.0, 40.0)),
        dict(n_layers=3, layer_z=(40.0, 20.0, 60.0)),
        dict(hit_efficiency=1.5),
        dict(hit_resolution_xy=-1.0),
        dict(scattering_angle_sigma=-0.1),
    ],
)
def test_invalid_config_rejected(kw):
    with pytest.raises(ConfigError):
        generate_event(DetectorConfig(**kw))


def test_minimal_event_shape():
    ev = minimal_event()
    assert len(ev.hits) == 6
    assert len(ev.particles) == 2
    assert ev.pvs == [(0.0, 0.0, 0.0)]


def test_event_json_round_trip():
    ev = generate_event(DetectorConfig(n_layers=4, n_particles=3, hit_resolution_xy=0.02, seed=9))
    text = json.dumps(ev.to_dict())
    assert Event.from_dict(json.loads(text)).to_dict() == ev.to_dict()


@settings(max_examples=40, deadline=None)
@given(
    n_layers=st.integers(2, 6),
    n_particles=st.integers(1, 10),
    n_pvs=st.integers(1, 3),
    spread=st.floats(0.0, 30.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_ideal_hits_lie_exactly_on_lines(n_layers, n_particles, n_pvs, spread, seed):
    cfg = DetectorConfig(n_layers=n_layers, n_particles=n_particles, n_primary_vertices=n_pvs,
                         pv_spread_z=spread, seed=seed)
    ev = generate_event(cfg)
    assert len(ev.hits) == n_particles * n_layers
    assert len({h.id for h in ev.hits}) == len(ev.hits)
    for h in ev.hits:
        p = ev.particles[h.truth_particle]
        x0, y0, z0 = p.origin
        assert h.z == cfg.layer_z[h.layer]
        assert h.x == pytest.approx(x0 + p.slope_x * (h.z - z0), rel=1e-12, abs=1e-12)
        assert h.y == pytest.approx(y0 + p.slope_y * (h.z - z0), rel=1e-12, abs=1e-12)
    for p in ev.particles:
        assert abs(p.slope_x) <= cfg.slope_range and abs(p.slope_y) <= cfg.slope_range
        assert p.origin == ev.pvs[p.origin_pv]
        assert p.origin[0] == 0.0 and p.origin[1] == 0.0


def test_hit_count_scales_with_efficiency():
    n_layers, n_particles, seeds = 4, 10, 150
    for eff in (0.3, 0.7):
        counts = [
            len(generate_event(DetectorConfig(n_layers=n_layers, n_particles=n_particles,
                                              hit_efficiency=eff, seed=s)).hits)
            for s in range(seeds)
        ]
        trials = n_layers * n_particles
        mean, sd = trials * eff, np.sqrt(trials * eff * (1 - eff) / seeds)
        assert abs(np.mean(counts) - mean) <= 3 * sd


def test_pinned_pv_positions():
    ev = generate_event(DetectorConfig(n_particles=6, n_primary_vertices=3, pv_z=(-5.0, 0.0, 5.0)))
    assert [pv[2] for pv in ev.pvs] == [-5.0, 0.0, 5.0]
    assert [p.origin_pv for p in ev.particles] == [0, 1, 2, 0, 1, 2]

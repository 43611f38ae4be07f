import math

import numpy as np
import pytest
import scipy.sparse as sp

from trackhhl import quantum_sim as qs
from trackhhl.classical_solver import ActiveSet, discretize, solve
from trackhhl.hamiltonian import HamiltonianParams, LinearSystem, build_system, enumerate_segments
from trackhhl.hhl import (
    HHLConfig,
    QuantumBudgetError,
    auto_evolution_time,
    classify,
    gershgorin_upper,
    required_shots,
    run_hhl,
    run_hhl_1bit,
)
from trackhhl.toy_model import DetectorConfig, generate_event

from conftest import ideal_event, pipeline


def system_from(a, b):
    a = np.asarray(a, dtype=float)
    return LinearSystem(len(a), sp.csr_matrix(a), np.asarray(b, dtype=float), HamiltonianParams())


# -- full HHL ---------------------------------------------------------------------


def test_identity_system_uniform_output():
    c = 4
    res = run_hhl(system_from(np.eye(4), np.ones(4)), HHLConfig(n_clock=c))
    assert np.allclose(res.probabilities, 0.25)
    constant = 2 * np.pi / (2**c * res.evolution_time)
    assert res.postselect_rate == pytest.approx(constant**2)


def test_diag_one_two_with_automatic_time():
    res = run_hhl(system_from(np.diag([1.0, 2.0]), np.ones(2)), HHLConfig(n_clock=4))
    p = res.probabilities
    assert p[1] / p[0] == pytest.approx(0.25, rel=0.02)


def test_diag_one_two_with_representable_phases():
    # t = pi / 4 puts lambda = 1, 2 on clock values 2 and 4 exactly
    res = run_hhl(system_from(np.diag([1.0, 2.0]), np.ones(2)),
                  HHLConfig(n_clock=4, evolution_time=np.pi / 4))
    assert res.probabilities[1] / res.probabilities[0] == pytest.approx(0.25, rel=1e-9)
    assert res.fidelity_vs_classical == pytest.approx(1.0)


def test_minimal_fidelity(minimal_system):
    res = run_hhl(minimal_system, HHLConfig(n_clock=5))
    assert res.fidelity_vs_classical >= 0.99
    assert res.padded_mass <= 1e-10


def test_fidelity_monotone_in_clock(minimal_system):
    fid = [run_hhl(minimal_system, HHLConfig(n_clock=c)).fidelity_vs_classical for c in (2, 3, 4, 5)]
    assert all(b >= a - 1e-3 for a, b in zip(fid, fid[1:]))


def test_full_output_tracks_classical_solution():
    _, system, _, _ = pipeline(ideal_event(3, 3, seed=2))
    x = solve(system).values
    for c in (5, 6, 7, 8):
        res = run_hhl(system, HHLConfig(n_clock=c))
        assert res.fidelity_vs_classical >= 0.99
        assert np.allclose(res.exact_probabilities, x**2 / np.sum(x**2), atol=1e-2)


def test_qubit_budget():
    _, system, _, _ = pipeline(ideal_event(8, 5, seed=0))
    with pytest.raises(QuantumBudgetError):
        run_hhl(system, HHLConfig(n_clock=5, max_qubits=12))


def test_automatic_times(minimal_system):
    a = minimal_system.dense()
    assert gershgorin_upper(a) == pytest.approx(2.5)
    assert auto_evolution_time(a, "full", 3) == pytest.approx(2 * np.pi * (7 / 8) / 2.5)
    assert auto_evolution_time(a, "one-bit", 1) == pytest.approx(np.pi)


def test_shots_are_reproducible(minimal_system):
    cfg = HHLConfig(n_clock=4, shots=1000, seed=5)
    r1, r2 = run_hhl(minimal_system, cfg), run_hhl(minimal_system, cfg)
    assert r1.samples == r2.samples
    assert sum(r1.samples.values()) == 1000


# -- one-bit HHL ------------------------------------------------------------------


def test_one_bit_minimal_suppression(minimal, minimal_system):
    res = run_hhl_1bit(minimal_system)
    truth = discretize(solve(minimal_system)).active
    p = res.exact_probabilities
    inactive = [p[i] for i in range(8) if i not in truth]
    assert min(p[i] for i in truth) >= 5 * max(inactive)
    assert classify(res).active == truth
    assert res.n_qubits == 5


def test_one_bit_surviving_amplitudes_closed_form(minimal_system):
    res = run_hhl_1bit(minimal_system)
    a = minimal_system.dense()
    w, v = np.linalg.eigh(a)
    t = res.evolution_time
    amp = v @ (np.sin(w * t / 2) ** 2 * (v.T @ minimal_system.vector_b))
    assert np.allclose(res.exact_probabilities, amp**2 / np.sum(amp**2), atol=1e-12)


def test_one_bit_without_alignment_is_degenerate():
    ev = generate_event(DetectorConfig(n_layers=3, n_particles=3, hit_resolution_xy=0.05, seed=0))
    system = build_system(enumerate_segments(ev), HamiltonianParams(epsilon=0.0))
    res = run_hhl_1bit(system)
    assert res.degenerate
    assert classify(res).active == frozenset()


def test_one_bit_eight_particles_five_layers():
    _, system, active, truth = pipeline(ideal_event(8, 5, seed=3))
    res = run_hhl_1bit(system)
    assert system.n == 256 and res.n_qubits == 10
    assert set(classify(res).active) == set(active.active) == truth


def test_one_bit_literal_unit_time_is_available(minimal_system):
    res = run_hhl_1bit(minimal_system, HHLConfig.one_bit(evolution_time=1.0))
    assert res.evolution_time == 1.0
    assert res.exact_probabilities.sum() == pytest.approx(1.0)


def test_one_bit_shots_repeated(minimal_system):
    truth = discretize(solve(minimal_system)).active
    hits = sum(
        classify(run_hhl_1bit(minimal_system, HHLConfig.one_bit(shots=4096, seed=s))).active == truth
        for s in range(100)
    )
    assert hits >= 99


def test_config_validation():
    assert HHLConfig.one_bit().n_clock == 1
    assert HHLConfig.one_bit().evolution == "trotter"
    assert HHLConfig().evolution == "exact"
    for kw in (dict(variant="half"), dict(trotter_steps=0), dict(shots=0), dict(evolution="magic")):
        with pytest.raises(ValueError):
            HHLConfig(**kw)


# -- classification and shots ---------------------------------------------------


def test_classify_obvious_gap():
    p = [0.24, 0.24, 0.24, 0.24, 0.01, 0.01, 0.01, 0.01]
    assert classify(np.array(p)).active == {0, 1, 2, 3}


def test_classify_flat_is_empty():
    assert classify(np.full(8, 0.125)).active == frozenset()


def test_classify_fixed_threshold():
    assert classify(np.array([0.3, 0.1, 0.6]), "fixed-threshold", 0.3).active == {0, 2}
    with pytest.raises(ValueError):
        classify(np.array([0.3]), "fixed-threshold")


def test_required_shots_single_certain_segment():
    for conf in (0.5, 0.99, 0.999999):
        assert required_shots(np.array([1.0]), conf, ActiveSet(frozenset({0}))) == 1


@pytest.mark.parametrize("k", [5, 10, 50, 200])
def test_required_shots_equiprobable_vs_harmonic(k):
    m = required_shots(np.full(k, 1 / k), 1 - 1 / k, ActiveSet(frozenset(range(k))))
    k_hk = k * sum(1 / j for j in range(1, k + 1))
    assert k_hk / 2 <= m <= 2 * k_hk


def _collection_times(p, trials, rng):
    cdf = np.cumsum(p / p.sum())
    out = np.empty(trials, dtype=int)
    for t in range(trials):
        seen, n = set(), 0
        while len(seen) < len(p):
            seen.add(int(np.searchsorted(cdf, rng.uniform())))
            n += 1
        out[t] = n
    return out


def test_required_shots_matches_monte_carlo(minimal_system, rng):
    res = run_hhl_1bit(minimal_system)
    active = classify(res)
    m = required_shots(res, 0.99, active)
    p = np.array([res.exact_probabilities[i] for i in sorted(active.active)])
    times = _collection_times(p, 20_000, rng)
    mc = float(np.quantile(times, 0.99))
    assert abs(m - mc) <= 0.25 * mc
    # union bound guarantees >= 0.99; allow 3 sigma of Monte-Carlo noise
    assert np.mean(times <= m) >= 0.99 - 3 * math.sqrt(0.99 * 0.01 / len(times))

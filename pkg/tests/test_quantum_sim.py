import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.linalg import expm

from trackhhl import quantum_sim as qs


def random_symmetric(rng, n):
    m = rng.normal(size=(n, n))
    return (m + m.T) / 2


def random_state(rng, layout):
    v = rng.normal(size=2**layout.total_qubits) + 1j * rng.normal(size=2**layout.total_qubits)
    return qs.StateVector(v / np.linalg.norm(v), layout)


def eigenstate_clock_distribution(u, vec, n_clock):
    layout = qs.RegisterLayout(n_system=int(np.log2(len(vec))), n_clock=n_clock)
    state = qs.qpe(qs.prepare_b_state(vec, layout), u)
    return np.sum(np.abs(state.tensor()[0]) ** 2, axis=1)


# -- registers and state preparation --------------------------------------------


def test_layout_counts():
    lay = qs.layout_for(8, n_clock=3)
    assert (lay.n_system, lay.n_pad, lay.total_qubits, lay.shape) == (3, 8, 7, (2, 8, 8))
    assert qs.layout_for(5).n_system == 3
    assert qs.layout_for(1).n_system == 1


def test_prepare_uniform_four():
    state = qs.prepare_b_state(np.ones(4), qs.RegisterLayout(2))
    assert np.allclose(state.tensor()[0, 0], 0.5)
    assert state.norm() == pytest.approx(1.0)


def test_prepare_basis_state():
    state = qs.prepare_b_state(np.array([1.0, 0.0]), qs.RegisterLayout(1))
    assert np.allclose(state.tensor()[0, 0], [1, 0])


def test_prepare_eight_segments_into_padded_register():
    state = qs.prepare_b_state(np.full(8, 2.0), qs.RegisterLayout(4))
    sys_amp = state.tensor()[0, 0]
    assert np.allclose(sys_amp[:8], 1 / np.sqrt(8))
    assert np.all(sys_amp[8:] == 0)


def test_prepare_zero_vector_rejected():
    with pytest.raises(qs.ContractError):
        qs.prepare_b_state(np.zeros(4), qs.RegisterLayout(2))


def test_padding_is_decoupled():
    a, b = qs.pad_system(np.array([[2.0, -0.5, 0], [-0.5, 2, 0], [0, 0, 2]]), np.ones(3), 4)
    assert a[3, 3] == 2.0 and np.all(a[3, :3] == 0) and b[3] == 0


# -- evolution --------------------------------------------------------------------


def test_zero_matrix_evolves_to_identity():
    assert np.allclose(qs.exact_evolution(np.zeros((4, 4)), 1.3).matrix, np.eye(4))


def test_diagonal_evolution():
    lam = np.array([0.5, 1.0, 2.0])
    assert np.allclose(qs.exact_evolution(np.diag(lam), 0.7).matrix, np.diag(np.exp(1j * lam * 0.7)))


def test_exact_evolution_matches_scipy(rng):
    a = random_symmetric(rng, 8)
    u = qs.exact_evolution(a, 0.9).matrix
    assert np.allclose(u, expm(1j * a * 0.9), atol=1e-12)
    assert np.allclose(u @ u.conj().T, np.eye(8), atol=1e-9)


def test_non_hermitian_rejected():
    with pytest.raises(qs.ContractError):
        qs.exact_evolution(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)
    with pytest.raises(qs.ContractError):
        qs.trotter_evolution(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)


def test_trotter_exact_when_offdiagonal_vanishes(rng):
    a = np.diag(rng.normal(size=8))
    for n in (1, 3, 7):
        assert np.allclose(qs.trotter_evolution(a, 2.0, n).matrix, qs.exact_evolution(a, 2.0).matrix)


def test_trotter_first_order_convergence(rng):
    a = random_symmetric(rng, 8)
    exact = qs.exact_evolution(a, 1.0).matrix
    errs = [np.max(np.abs(qs.trotter_evolution(a, 1.0, n).matrix - exact)) for n in (16, 32, 64, 128)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 1.5 <= e1 / e2 <= 2.5


def test_single_step_on_track_systems_is_exact(minimal_system):
    # the diagonal of a track system is (alpha + beta) I, which commutes with the rest
    a = minimal_system.dense()
    u = qs.trotter_evolution(a, 1.0, 1)
    err = np.max(np.abs(u.matrix - qs.exact_evolution(a, 1.0).matrix))
    assert err <= 1e-12
    assert "n=1" in u.provenance


# -- phase estimation -------------------------------------------------------------


def test_identity_gives_clock_zero():
    p = eigenstate_clock_distribution(np.eye(2), np.array([1.0, 0.0]), 3)
    assert p[0] == pytest.approx(1.0)


def test_half_phase_one_clock_bit():
    u = np.diag(np.exp(2j * np.pi * np.array([0.5, 0.0])))
    p = eigenstate_clock_distribution(u, np.array([1.0, 0.0]), 1)
    assert p[1] == pytest.approx(1.0)


def test_quarter_phase_two_clock_bits():
    u = np.diag(np.exp(2j * np.pi * np.array([0.25, 0.0])))
    p = eigenstate_clock_distribution(u, np.array([1.0, 0.0]), 2)
    assert p[0b01] == pytest.approx(1.0)


@pytest.mark.parametrize("c", [1, 2, 3, 4])
def test_representable_phases_are_deterministic(c):
    for k in range(2**c):
        u = np.diag(np.exp(2j * np.pi * np.array([k / 2**c, 0.0])))
        assert eigenstate_clock_distribution(u, np.array([1.0, 0.0]), c)[k] == pytest.approx(1.0)


def test_qpe_requires_cleared_clock(rng):
    layout = qs.RegisterLayout(2, 2)
    with pytest.raises(qs.ContractError):
        qs.qpe(random_state(rng, layout), np.eye(4))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.integers(1, 4), n_sys=st.integers(1, 3))
def test_qpe_adjointness_and_norm(seed, c, n_sys):
    rng = np.random.default_rng(seed)
    layout = qs.RegisterLayout(n_sys, c)
    u = qs.exact_evolution(random_symmetric(rng, 2**n_sys), rng.uniform(0.1, 3))
    b = rng.normal(size=2**n_sys)
    psi = qs.prepare_b_state(b, layout)
    fwd = qs.qpe(psi, u)
    assert fwd.norm() == pytest.approx(1.0, abs=1e-10)
    back = qs.inverse_qpe(fwd, u)
    assert np.allclose(back.amplitudes, psi.amplitudes, atol=1e-9)
    generic = random_state(rng, layout)
    assert qs.inverse_qpe(generic, u).norm() == pytest.approx(1.0, abs=1e-10)


# -- inversion rotation -----------------------------------------------------------


def test_clock_zero_leaves_ancilla():
    layout = qs.RegisterLayout(1, 2)
    state = qs.prepare_b_state(np.array([1.0, 1.0]), layout)
    out = qs.controlled_inversion_rotation(state, "multi-bit", t=1.0)
    assert np.allclose(out.amplitudes, state.amplitudes)


def test_single_eigenvalue_full_rotation():
    layout = qs.RegisterLayout(1, 2)
    t = 2 * np.pi / 4  # clock value 1 <-> lambda = 1
    psi = np.zeros(layout.shape, dtype=complex)
    psi[0, 1, 0] = 1.0
    out = qs.controlled_inversion_rotation(qs.StateVector(psi.reshape(-1), layout), "multi-bit", 1.0, t=t)
    assert abs(out.tensor()[1, 1, 0]) == pytest.approx(1.0)


def test_constant_above_smallest_eigenvalue_rejected():
    layout = qs.RegisterLayout(1, 2)
    state = qs.prepare_b_state(np.array([1.0, 0.0]), layout)
    with pytest.raises(qs.ContractError):
        qs.controlled_inversion_rotation(state, "multi-bit", constant=2.0, t=2 * np.pi / 4)


def test_two_eigenvalue_amplitude_ratio():
    # lambda = (2, 1) at t = pi/4 land on clock values 4 and 2 for c = 4
    lam = np.array([2.0, 1.0])
    t, c = np.pi / 4, 4
    u = qs.exact_evolution(np.diag(lam), t)
    layout = qs.RegisterLayout(1, c)
    state = qs.qpe(qs.prepare_b_state(np.ones(2), layout), u)
    state = qs.controlled_inversion_rotation(state, "multi-bit", t=t)
    state = qs.inverse_qpe(state, u)
    amp = state.tensor()[1, 0]
    assert abs(amp[1]) / abs(amp[0]) == pytest.approx(2.0, rel=1e-9)


def test_one_bit_rotation_flips_on_odd_clock():
    layout = qs.RegisterLayout(1, 1)
    psi = np.zeros(layout.shape, dtype=complex)
    psi[0, 0, 0] = psi[0, 1, 1] = 1 / np.sqrt(2)
    out = qs.controlled_inversion_rotation(qs.StateVector(psi.reshape(-1), layout), "one-bit").tensor()
    assert out[1, 1, 1] == pytest.approx(1 / np.sqrt(2))
    assert out[0, 0, 0] == pytest.approx(1 / np.sqrt(2))
    assert np.linalg.norm(out[1, 0]) == 0 and np.linalg.norm(out[0, 1]) == 0


# -- readout ----------------------------------------------------------------------


def _flagged(amps, n_sys=1):
    layout = qs.RegisterLayout(n_sys, 1)
    psi = np.zeros(layout.shape, dtype=complex)
    psi[1, 0, : len(amps)] = amps
    return qs.StateVector(psi.reshape(-1), layout)


def test_sample_basis_state():
    assert qs.sample(_flagged([1.0, 0.0]), 100, rng=0) == {0: 100}


def test_uniform_exact_probabilities():
    probs, rate = qs.postselected_probabilities(_flagged([1 / np.sqrt(2), 1 / np.sqrt(2)]))
    assert np.allclose(probs, [0.5, 0.5]) and rate == pytest.approx(1.0)


def test_postselection_failure():
    layout = qs.RegisterLayout(1, 1)
    with pytest.raises(qs.PostSelectionError):
        qs.postselected_probabilities(qs.prepare_b_state(np.ones(2), layout))


def test_sampling_chi_square():
    amps = np.sqrt(np.array([0.1, 0.2, 0.3, 0.4]))
    state = _flagged(amps, n_sys=2)
    shots = 100_000
    counts = qs.sample(state, shots, rng=7)
    observed = np.array([counts.get(i, 0) for i in range(4)])
    assert stats.chisquare(observed, shots * amps**2).pvalue > 1e-3

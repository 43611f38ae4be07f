"""Dense statevector simulation over a system, clock and ancilla register.

Amplitudes are stored as a flat complex array whose reshaped view has axes
``(ancilla, clock, system)``; integer register values index each axis
directly, so no qubit-ordering conventions leak into the algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "ContractError",
    "PostSelectionError",
    "RegisterLayout",
    "StateVector",
    "EvolutionOperator",
    "layout_for",
    "pad_system",
    "prepare_b_state",
    "exact_evolution",
    "trotter_evolution",
    "qpe",
    "inverse_qpe",
    "clock_eigenvalue",
    "controlled_inversion_rotation",
    "postselected_probabilities",
    "sample",
]

NORM_TOL = 1e-10
UNITARY_TOL = 1e-9


class ContractError(ValueError):
    """An operation was called outside its preconditions."""


class PostSelectionError(RuntimeError):
    """The ancilla = 1 branch has (numerically) zero probability."""


@dataclass(frozen=True)
class RegisterLayout:
    n_system: int
    n_clock: int = 1
    n_ancilla: int = 1

    def __post_init__(self) -> None:
        if self.n_clock < 1:
            raise ContractError("need at least one clock qubit")
        if self.n_ancilla != 1:
            raise ContractError("exactly one ancilla qubit is supported")

    @property
    def n_pad(self) -> int:
        return 2**self.n_system

    @property
    def n_clock_states(self) -> int:
        return 2**self.n_clock

    @property
    def total_qubits(self) -> int:
        return self.n_system + self.n_clock + self.n_ancilla

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2, self.n_clock_states, self.n_pad)


def layout_for(n: int, n_clock: int = 1) -> RegisterLayout:
    """Smallest layout whose system register holds ``n`` components."""
    return RegisterLayout(n_system=max(1, math.ceil(math.log2(max(n, 1)))), n_clock=n_clock)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def dump(self, path) -> None:
        """Write raw complex128 amplitudes for debugging."""
        np.asarray(self.amplitudes, dtype=np.complex128).tofile(path)


@dataclass
class EvolutionOperator:
    matrix: np.ndarray
    provenance: str = "exact-exponential"
    time: float = 1.0


def pad_system(a: np.ndarray, b: np.ndarray, n_pad: int) -> tuple[np.ndarray, np.ndarray]:
    """Embed (A, b) into dimension ``n_pad``.

    Padding rows are decoupled with diagonal entry ``A[0, 0]`` and a zero
    right-hand side, so they never acquire amplitude.
    """
    n = a.shape[0]
    if n > n_pad:
        raise ContractError(f"system of size {n} does not fit in {n_pad}")
    if n == n_pad:
        return np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    ap = np.zeros((n_pad, n_pad))
    ap[:n, :n] = a
    fill = a[0, 0] if n else 1.0
    ap[np.arange(n, n_pad), np.arange(n, n_pad)] = fill
    bp = np.zeros(n_pad)
    bp[:n] = b
    return ap, bp


def prepare_b_state(b: np.ndarray, layout: RegisterLayout) -> StateVector:
    b = np.asarray(b, dtype=complex)
    if len(b) > layout.n_pad:
        raise ContractError(f"b has {len(b)} entries, system register holds {layout.n_pad}")
    norm = np.linalg.norm(b)
    if norm == 0:
        raise ContractError("cannot prepare the zero vector")
    psi = np.zeros(layout.shape, dtype=complex)
    psi[0, 0, : len(b)] = b / norm
    return StateVector(psi.reshape(-1), layout)


def _check_hermitian(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.conj().T, atol=1e-12, rtol=0):
        raise ContractError("matrix is not Hermitian")
    return a


def _expi_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w * t)) @ v.conj().T


def exact_evolution(a: np.ndarray, t: float) -> EvolutionOperator:
    """``exp(i A t)`` by eigendecomposition."""
    a = _check_hermitian(a)
    return EvolutionOperator(_expi_hermitian(a, t), "exact-exponential", t)


def trotter_evolution(a: np.ndarray, t: float, n: int = 1, split: str = "diag-offdiag") -> EvolutionOperator:
    """First-order product formula ``(exp(i D t/n) exp(i M t/n))^n``.

    ``D`` is the diagonal of ``A`` and ``M`` the remainder.
    """
    a = _check_hermitian(a)
    if n < 1:
        raise ContractError("need at least one Trotter step")
    if split != "diag-offdiag":
        raise ContractError(f"unsupported split {split!r}")
    d = np.diag(a).real
    m = a - np.diag(np.diag(a))
    step = np.exp(1j * d * t / n)[:, None] * _expi_hermitian(m, t / n)
    return EvolutionOperator(
        np.linalg.matrix_power(step, n), f"trotterized(n={n}, split={split})", t
    )


def _walsh_hadamard(n_qubits: int) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    out = np.ones((1, 1))
    for _ in range(n_qubits):
        out = np.kron(out, h)
    return out


def _qft(n_states: int) -> np.ndarray:
    j = np.arange(n_states)
    return np.exp(2j * np.pi * np.outer(j, j) / n_states) / np.sqrt(n_states)


def _apply_clock(psi: np.ndarray, op: np.ndarray) -> np.ndarray:
    return np.einsum("kl,alj->akj", op, psi)


def _controlled_powers(psi: np.ndarray, u: np.ndarray, n_clock: int, adjoint: bool) -> np.ndarray:
    # clock bit k controls U^(2^k); powers built by repeated squaring
    out = psi.copy()
    clock_values = np.arange(2**n_clock)
    power = u
    for k in range(n_clock):
        sel = (clock_values >> k) & 1 == 1
        mat = power.conj().T if adjoint else power
        out[:, sel, :] = out[:, sel, :] @ mat.T
        power = power @ power
    return out


def qpe(state: StateVector, u: EvolutionOperator | np.ndarray) -> StateVector:
    """Phase estimation of ``u`` into the clock register.

    An eigenphase ``phi`` (``U|v> = exp(2 pi i phi)|v>``) is written as the
    clock value ``round(phi * 2^c)``.
    """
    layout = state.layout
    psi = state.tensor()
    if np.linalg.norm(psi[:, 1:, :]) > NORM_TOL:
        raise ContractError("clock register must start in |0...0>")
    u = u.matrix if isinstance(u, EvolutionOperator) else np.asarray(u)
    psi = _apply_clock(psi, _walsh_hadamard(layout.n_clock))
    psi = _controlled_powers(psi, u, layout.n_clock, adjoint=False)
    psi = _apply_clock(psi, _qft(layout.n_clock_states).conj().T)
    return StateVector(psi.reshape(-1), layout)


def inverse_qpe(state: StateVector, u: EvolutionOperator | np.ndarray) -> StateVector:
    """Exact adjoint of :func:`qpe`."""
    layout = state.layout
    u = u.matrix if isinstance(u, EvolutionOperator) else np.asarray(u)
    psi = state.tensor()
    psi = _apply_clock(psi, _qft(layout.n_clock_states))
    psi = _controlled_powers(psi, u, layout.n_clock, adjoint=True)
    psi = _apply_clock(psi, _walsh_hadamard(layout.n_clock))
    return StateVector(psi.reshape(-1), layout)


def clock_eigenvalue(value: int, n_clock: int, t: float) -> float:
    """Eigenvalue of A encoded by clock value ``value`` for ``U = exp(i A t)``."""
    return 2.0 * np.pi * value / (2**n_clock * t)


def controlled_inversion_rotation(
    state: StateVector,
    mode: str = "multi-bit",
    constant: Optional[float] = None,
    t: Optional[float] = None,
) -> StateVector:
    """Rotate the ancilla conditioned on the clock register.

    ``multi-bit``: clock value l != 0 sets the ancilla=1 amplitude to
    ``C / lambda(l)``; needs the evolution time ``t`` to decode lambda.
    ``one-bit``: a full flip of the ancilla when the clock reads 1.
    The ancilla must be |0> beforehand.
    """
    layout = state.layout
    psi = state.tensor()
    if np.linalg.norm(psi[1]) > NORM_TOL:
        raise ContractError("ancilla must be |0> before the inversion rotation")
    m = layout.n_clock_states
    if mode == "multi-bit":
        if t is None:
            raise ContractError("multi-bit rotation needs the evolution time")
        lam = np.array([clock_eigenvalue(v, layout.n_clock, t) for v in range(1, m)])
        lam_min = float(lam.min())
        if constant is None:
            constant = lam_min
        if constant > lam_min * (1 + 1e-12):
            raise ContractError(f"C = {constant} exceeds smallest encoded eigenvalue {lam_min}")
        amp1 = np.zeros(m)
        amp1[1:] = np.minimum(constant / lam, 1.0)
    elif mode == "one-bit":
        # flip controlled by the least significant clock bit
        amp1 = (np.arange(m) & 1).astype(float)
    else:
        raise ContractError(f"unknown rotation mode {mode!r}")
    amp0 = np.sqrt(1.0 - amp1**2)
    out = np.empty_like(psi)
    out[0] = amp0[:, None] * psi[0]
    out[1] = amp1[:, None] * psi[0]
    return StateVector(out.reshape(-1), layout)


def postselected_probabilities(state: StateVector, clock_zero: bool = True) -> tuple[np.ndarray, float]:
    """System-register distribution given a successful run, and its rate.

    Success means ancilla = 1 and, with ``clock_zero``, the uncomputed clock
    register reading |0...0>.
    """
    psi = state.tensor()
    branch = np.abs(psi[1, :1] if clock_zero else psi[1]) ** 2
    rate = float(branch.sum())
    if rate < 1e-12:
        raise PostSelectionError(f"post-selection probability {rate:.3e} is below 1e-12")
    return branch.sum(axis=0) / rate, rate


def sample(
    state: StateVector,
    shots: int,
    rng: Optional[np.random.Generator | int] = None,
    clock_zero: bool = True,
) -> dict[int, int]:
    """Draw ``shots`` post-selected measurements of the system register."""
    if shots < 1:
        raise ContractError("shots must be >= 1")
    probs, _ = postselected_probabilities(state, clock_zero)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    counts = rng.multinomial(shots, probs / probs.sum())
    return {int(i): int(c) for i, c in enumerate(counts) if c}

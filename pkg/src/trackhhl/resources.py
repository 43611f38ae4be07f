"""Resource accounting for full and one-bit HHL.

Qubit and sample counts follow closed-form scaling laws; gate counts use an
abstract model built on the Pauli decomposition of ``A``:

* a controlled product-formula step costs, per Pauli string of weight
  ``w`` (``w >= 1``), a parity ladder of ``2(w - 1)`` two-qubit gates for
  the string itself plus ``2w`` for its control-augmented partner, and
  ``2 * (#X/Y factors) + 1`` single-qubit gates for each of the two;
  the identity string is a single phase gate on the control;
* full HHL applies the controlled evolution ``2^c - 1`` times in QPE and
  again when uncomputing; the one-bit variant once each way.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from trackhhl import quantum_sim as qs
from trackhhl.hamiltonian import LinearSystem
from trackhhl.hhl import HHLConfig, auto_evolution_time

__all__ = [
    "SizeError",
    "ProblemSize",
    "QubitCount",
    "GateReport",
    "qubit_count",
    "expected_samples",
    "samples_curve",
    "pauli_decomposition",
    "trotter_steps_for_accuracy",
    "gate_report",
    "scaling_table",
    "HL_LHC_PARTICLES",
    "HL_LHC_HITS",
]

HL_LHC_PARTICLES = 1500
HL_LHC_HITS = 26
MAX_PAULI_QUBITS = 10


class SizeError(ValueError):
    """Problem exceeds what the enumeration-based accounting supports."""


@dataclass(frozen=True)
class ProblemSize:
    n_particles: int
    hits_per_particle: int

    @property
    def n_segments(self) -> int:
        """Full segment space, ``N_p^2 * N_hits``."""
        return self.n_particles**2 * self.hits_per_particle

    @property
    def n_active(self) -> int:
        return self.n_particles * self.hits_per_particle

    def segments_for(self, variant: str) -> int:
        return self.n_active if variant == "one-bit" else self.n_segments


@dataclass(frozen=True)
class QubitCount:
    variant: str
    formula: float
    qubits: int
    layout: int


@dataclass(frozen=True)
class GateReport:
    variant: str
    n_qubits: int
    pauli_terms: int
    trotter_steps: int
    controlled_evolution_applications: int
    total_abstract_gates: int
    two_qubit_abstract_gates: int

    def to_dict(self) -> dict:
        return asdict(self)


def qubit_count(n: float, variant: str, n_clock: Optional[int] = None) -> QubitCount:
    """Qubits for a matrix of size ``n``.

    ``formula`` is ``2 log2 N + 2`` (full) or ``log2 N + 3`` (one-bit),
    ``qubits`` its ceiling. ``layout`` is what the simulator allocates:
    system + clock + ancilla, with one clock qubit for the one-bit variant
    and ``ceil(log2 N) + 1`` (or ``n_clock``) for full HHL.
    """
    if n < 1:
        raise ValueError("problem size must be >= 1")
    log_n = math.log2(n)
    n_sys = max(1, math.ceil(log_n - 1e-12))
    if variant == "full":
        formula = 2 * log_n + 2
        clock = n_sys + 1 if n_clock is None else n_clock
    elif variant == "one-bit":
        formula = log_n + 3
        clock = 1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return QubitCount(variant, formula, math.ceil(formula - 1e-9), n_sys + clock + 1)


def expected_samples(size: ProblemSize, variant: str, confidence: float = 0.99) -> float:
    """Coupon-collector shots ``m ln m + m ln(1 / (1 - confidence))``.

    ``m`` is the number of segments carrying probability: every segment
    for full HHL, only the active ones for the one-bit variant.
    """
    if size.n_particles < 1 or size.hits_per_particle < 1:
        raise ValueError("need at least one particle and one hit per particle")
    m = size.segments_for(variant)
    return m * math.log(m) + m * math.log(1.0 / (1.0 - confidence))


def samples_curve(
    n_particles: Sequence[int], hits_per_particle: int, confidence: float = 0.99
) -> dict[str, np.ndarray]:
    n_p = np.asarray(n_particles, dtype=int)
    return {
        "n_particles": n_p,
        "full": np.array([expected_samples(ProblemSize(int(k), hits_per_particle), "full", confidence) for k in n_p]),
        "one-bit": np.array([expected_samples(ProblemSize(int(k), hits_per_particle), "one-bit", confidence) for k in n_p]),
    }


def _fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    v = v.copy()
    n = v.shape[-1]
    h = 1
    while h < n:
        v = v.reshape(*v.shape[:-1], n // (2 * h), 2, h)
        a = v[..., 0, :].copy()
        b = v[..., 1, :].copy()
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
        v = v.reshape(*v.shape[:-3], n)
        h *= 2
    return v


def pauli_decomposition(a: np.ndarray, tol: float = 1e-12) -> dict[tuple[int, int], complex]:
    """Coefficients ``c`` with ``A = sum c_{x,z} P_{x,z}``.

    ``P_{x,z} = i^{|x & z|} X^x Z^z`` (bit masks over qubits), a Hermitian
    Pauli string; ``c = Tr(P A) / 2^n``. Computed with one Walsh-Hadamard
    transform per X-mask instead of 4^n explicit traces.
    """
    a = np.asarray(a)
    dim = a.shape[0]
    n = int(round(math.log2(dim)))
    if 2**n != dim or a.shape != (dim, dim):
        raise ValueError("matrix dimension must be a power of two")
    if n > MAX_PAULI_QUBITS:
        raise SizeError(f"{n} qubits exceeds the Pauli-enumeration budget of {MAX_PAULI_QUBITS}")
    k = np.arange(dim)
    out = {}
    for x in range(dim):
        diag = a[k, k ^ x]
        if not np.any(np.abs(diag) > tol):
            continue
        traces = _fwht(diag.astype(complex))
        for z in np.flatnonzero(np.abs(traces) > tol * dim):
            phase = 1j ** bin(x & int(z)).count("1")
            out[(x, int(z))] = complex(phase * traces[z] / dim)
    return out


def trotter_steps_for_accuracy(
    coeffs: dict[tuple[int, int], complex], t: float, applications: int, tolerance: float
) -> int:
    """Steps keeping the first-order commutator bound over all applications below ``tolerance``.

    Per application the error is at most
    ``t^2 / (2 n) * sum_{j<k} ||[P_j, P_k]|| |c_j c_k|`` with
    ``||[P_j, P_k]|| = 2`` for anticommuting strings and 0 otherwise.
    """
    keys = [k for k in coeffs if k != (0, 0)]
    if not keys:
        return 1
    xs = np.array([k[0] for k in keys], dtype=np.uint64)
    zs = np.array([k[1] for k in keys], dtype=np.uint64)
    mags = np.array([abs(coeffs[k]) for k in keys])
    sym = np.bitwise_count(xs[:, None] & zs[None, :]) + np.bitwise_count(zs[:, None] & xs[None, :])
    anti = (sym % 2) == 1
    # full matrix counts each unordered pair twice
    gamma = float(mags @ anti.astype(float) @ mags)
    if gamma == 0.0:
        return 1
    return max(1, math.ceil(applications * t**2 * gamma / (2.0 * tolerance)))


def _step_cost(coeffs: dict[tuple[int, int], complex]) -> tuple[int, int]:
    two = one = 0
    for x, z in coeffs:
        w = bin(x | z).count("1")
        if w == 0:
            one += 1
            continue
        n_xy = bin(x).count("1")
        two += 2 * (w - 1) + 2 * w
        one += 2 * (2 * n_xy + 1)
    return two, one


def gate_report(
    system: LinearSystem,
    cfg: HHLConfig,
    trotter_tolerance: float = 1e-2,
) -> GateReport:
    """Abstract gate totals for one HHL configuration.

    Trotterized runs use ``cfg.trotter_steps`` per application. Runs with
    exact evolution are costed with the step count that keeps the
    product-formula error below ``trotter_tolerance`` over all applications.
    """
    layout = qs.layout_for(system.n, n_clock=cfg.n_clock)
    if layout.n_system > MAX_PAULI_QUBITS:
        raise SizeError(f"{layout.n_system} system qubits exceeds budget {MAX_PAULI_QUBITS}")
    a, b = qs.pad_system(system.dense(), system.vector_b, layout.n_pad)
    coeffs = pauli_decomposition(a)
    c = layout.n_clock

    per_direction = 2**c - 1 if cfg.variant == "full" else 1
    applications = 2 * per_direction
    t = cfg.evolution_time or auto_evolution_time(a, cfg.variant, c)
    if cfg.evolution == "trotter":
        steps = cfg.trotter_steps
    else:
        steps = trotter_steps_for_accuracy(coeffs, t, per_direction, trotter_tolerance)

    step_two, step_one = _step_cost(coeffs)
    two = applications * steps * step_two
    one = applications * steps * step_one

    # state preparation
    if system.n == layout.n_pad and np.allclose(b, b[0]):
        one += layout.n_system
    else:
        two += 2**layout.n_system
        one += 2**layout.n_system
    # QPE Hadamards and (inverse) QFT, twice
    qft_two = c * (c - 1) + 3 * (c // 2)
    two += 2 * qft_two
    one += 2 * (2 * c)
    # eigenvalue inversion
    if cfg.variant == "full":
        two += 2**c
        one += 2**c
    else:
        two += 1

    return GateReport(
        variant=cfg.variant,
        n_qubits=layout.total_qubits,
        pauli_terms=len(coeffs),
        trotter_steps=steps,
        controlled_evolution_applications=applications,
        total_abstract_gates=int(one + two),
        two_qubit_abstract_gates=int(two),
    )


def scaling_table(
    np_max: int = HL_LHC_PARTICLES,
    n_hits: int = HL_LHC_HITS,
    confidence: float = 0.99,
    points: int = 40,
    np_min: int = 1,
    marker: int = HL_LHC_PARTICLES,
) -> list[dict]:
    """Rows of samples and qubits versus particle count, for plotting."""
    grid = np.unique(np.round(np.geomspace(np_min, np_max, points)).astype(int))
    if marker <= np_max:
        grid = np.unique(np.append(grid, marker))
    rows = []
    for k in grid:
        size = ProblemSize(int(k), n_hits)
        n = size.n_segments
        rows.append(
            {
                "n_particles": int(k),
                "n_hits": n_hits,
                "problem_size": n,
                "samples_full": expected_samples(size, "full", confidence),
                "samples_one_bit": expected_samples(size, "one-bit", confidence),
                "qubits_full": qubit_count(n, "full").qubits,
                "qubits_one_bit": qubit_count(n, "one-bit").qubits,
                "hl_lhc": int(k) == marker,
            }
        )
    return rows

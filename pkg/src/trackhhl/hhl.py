"""Full HHL and the one-bit variant on a track-finding linear system.

A run succeeds when the ancilla reads 1 and the uncomputed clock register
reads 0 (``postselect_clock``; switch it off to keep every clock value).

The one-bit variant uses a single clock qubit, a product-formula
evolution and a fixed ancilla flip on clock = 1. With the default
evolution time ``t = 2 pi / (alpha + beta)`` every segment without an
aligned partner has eigenphase exactly 0, so its amplitude never reaches
the ancilla = 1 branch and post-selection removes it. The surviving
system amplitudes are ``sin^2(A t / 2) b``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from trackhhl import quantum_sim as qs
from trackhhl.classical_solver import ActiveSet
from trackhhl.hamiltonian import LinearSystem

__all__ = [
    "QuantumBudgetError",
    "HHLConfig",
    "QuantumResult",
    "run_hhl",
    "run_hhl_1bit",
    "classify",
    "required_shots",
    "gershgorin_upper",
    "auto_evolution_time",
]

log = logging.getLogger(__name__)

DEFAULT_MAX_QUBITS = 16


class QuantumBudgetError(RuntimeError):
    """The requested circuit does not fit the simulator's qubit budget."""


@dataclass(frozen=True)
class HHLConfig:
    """Settings for one HHL run.

    ``evolution_time`` and ``rotation_constant`` are chosen automatically
    when left as ``None``. ``shots=None`` selects exact probabilities.
    """

    variant: str = "full"
    n_clock: int = 5
    trotter_steps: int = 1
    evolution: Optional[str] = None  # "exact" | "trotter"; per-variant default
    evolution_time: Optional[float] = None
    rotation_constant: Optional[float] = None
    shots: Optional[int] = None
    seed: Optional[int] = None
    max_qubits: int = DEFAULT_MAX_QUBITS
    postselect_clock: bool = True

    def __post_init__(self) -> None:
        if self.variant not in ("full", "one-bit"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "one-bit" and self.n_clock != 1:
            object.__setattr__(self, "n_clock", 1)
        if self.evolution is None:
            object.__setattr__(self, "evolution", "exact" if self.variant == "full" else "trotter")
        if self.evolution not in ("exact", "trotter"):
            raise ValueError(f"unknown evolution {self.evolution!r}")
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")
        if self.n_clock < 1:
            raise ValueError("n_clock must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")

    @classmethod
    def one_bit(cls, **kw) -> "HHLConfig":
        return cls(variant="one-bit", n_clock=1, **kw)


@dataclass
class QuantumResult:
    probabilities: np.ndarray
    postselect_rate: float
    exact_probabilities: np.ndarray
    samples: Optional[dict[int, int]] = None
    fidelity_vs_classical: Optional[float] = None
    padded_mass: float = 0.0
    evolution_time: float = 0.0
    n_qubits: int = 0
    config: HHLConfig = field(default_factory=HHLConfig)
    evolution_error: float = 0.0

    @property
    def degenerate(self) -> bool:
        return self.postselect_rate == 0.0

    def to_dict(self) -> dict:
        return {
            "variant": self.config.variant,
            "n_clock": self.config.n_clock,
            "probabilities": [float(p) for p in self.probabilities],
            "exact_probabilities": [float(p) for p in self.exact_probabilities],
            "samples": None if self.samples is None else {str(k): v for k, v in sorted(self.samples.items())},
            "shots": self.config.shots,
            "postselect_rate": self.postselect_rate,
            "fidelity": self.fidelity_vs_classical,
            "padded_mass": self.padded_mass,
            "evolution_time": self.evolution_time,
            "evolution_error": self.evolution_error,
            "n_qubits": self.n_qubits,
        }

    def spectrum_csv(self) -> str:
        lines = ["segment,probability,exact_probability"]
        for i, (p, q) in enumerate(zip(self.probabilities, self.exact_probabilities)):
            lines.append(f"{i},{p!r},{q!r}")
        return "\n".join(lines) + "\n"


def gershgorin_upper(a: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(a), axis=1)))


def auto_evolution_time(a: np.ndarray, variant: str, n_clock: int) -> float:
    """Default evolution time.

    Full HHL maps the Gershgorin interval [0, lambda_up] onto phases
    [0, 1 - 2^-c). The one-bit variant uses ``2 pi / A[0, 0]`` so the
    baseline eigenvalue ``alpha + beta`` wraps to phase 0.
    """
    if variant == "one-bit":
        return 2.0 * np.pi / float(a[0, 0])
    return 2.0 * np.pi * (1.0 - 2.0**-n_clock) / gershgorin_upper(a)


def _classical_direction(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.linalg.solve(a, b)
    return x / np.linalg.norm(x)


def _run(system: LinearSystem, cfg: HHLConfig) -> QuantumResult:
    n = system.n
    layout = qs.layout_for(n, n_clock=cfg.n_clock)
    if layout.total_qubits > cfg.max_qubits:
        raise QuantumBudgetError(
            f"{layout.total_qubits} qubits needed ({layout.n_system} system + "
            f"{layout.n_clock} clock + 1 ancilla), budget is {cfg.max_qubits}"
        )
    a, b = qs.pad_system(system.dense(), system.vector_b, layout.n_pad)
    t = cfg.evolution_time or auto_evolution_time(a, cfg.variant, cfg.n_clock)

    exact = qs.exact_evolution(a, t)
    if cfg.evolution == "exact":
        u = exact
    else:
        u = qs.trotter_evolution(a, t, cfg.trotter_steps)
    evolution_error = float(np.max(np.abs(u.matrix - exact.matrix)))

    state = qs.prepare_b_state(b, layout)
    state = qs.qpe(state, u)
    if cfg.variant == "full":
        state = qs.controlled_inversion_rotation(state, "multi-bit", cfg.rotation_constant, t=t)
    else:
        state = qs.controlled_inversion_rotation(state, "one-bit")
    state = qs.inverse_qpe(state, u)

    psi = state.tensor()
    kept = psi[1, :1] if cfg.postselect_clock else psi[1]
    rate = float(np.sum(np.abs(kept) ** 2))
    common = dict(evolution_time=t, n_qubits=layout.total_qubits, config=cfg,
                  evolution_error=evolution_error)
    if rate < 1e-12:
        if cfg.variant == "full":
            raise qs.PostSelectionError(f"post-selection probability {rate:.3e} is below 1e-12")
        log.warning("one-bit run: no amplitude survives post-selection (flat spectrum)")
        zeros = np.zeros(n)
        return QuantumResult(zeros, 0.0, zeros.copy(), samples={} if cfg.shots else None,
                             fidelity_vs_classical=0.0, **common)

    probs_pad, rate = qs.postselected_probabilities(state, cfg.postselect_clock)
    x_hat = _classical_direction(a, b)
    fidelity = float(np.sum(np.abs(kept @ x_hat.conj()) ** 2) / rate)

    exact_probs = probs_pad[:n].copy()
    padded_mass = float(probs_pad[n:].sum())
    samples = None
    probs = exact_probs
    if cfg.shots is not None:
        samples = qs.sample(state, cfg.shots, np.random.default_rng(cfg.seed), cfg.postselect_clock)
        probs = np.zeros(n)
        for idx, count in samples.items():
            if idx < n:
                probs[idx] = count / cfg.shots
    return QuantumResult(
        probabilities=probs,
        postselect_rate=rate,
        exact_probabilities=exact_probs,
        samples=samples,
        fidelity_vs_classical=fidelity,
        padded_mass=padded_mass,
        **common,
    )


def run_hhl(system: LinearSystem, cfg: Optional[HHLConfig] = None) -> QuantumResult:
    """Full HHL: state prep, QPE, eigenvalue inversion, uncompute, post-select."""
    cfg = cfg or HHLConfig()
    if cfg.variant != "full":
        cfg = replace(cfg, variant="full")
    return _run(system, cfg)


def run_hhl_1bit(system: LinearSystem, cfg: Optional[HHLConfig] = None) -> QuantumResult:
    """One clock qubit, product-formula evolution, fixed ancilla flip."""
    cfg = cfg or HHLConfig.one_bit()
    if cfg.variant != "one-bit":
        cfg = replace(cfg, variant="one-bit", n_clock=1)
    return _run(system, cfg)


def classify(
    result: QuantumResult | np.ndarray,
    rule: str = "largest-gap",
    threshold: Optional[float] = None,
    degeneracy_factor: float = 10.0,
) -> ActiveSet:
    """Split segments into active and inactive from their probabilities.

    ``largest-gap`` sorts probabilities in descending order and cuts at the
    largest relative drop ``(p_k - p_{k+1}) / p_k``. If that drop is not
    more than ``degeneracy_factor`` times the median drop, the spectrum is
    treated as flat and nothing is active.
    """
    p = np.asarray(result.probabilities if isinstance(result, QuantumResult) else result, dtype=float)
    if rule == "fixed-threshold":
        if threshold is None:
            raise ValueError("fixed-threshold rule needs a threshold")
        return ActiveSet(frozenset(int(i) for i in np.flatnonzero(p >= threshold)), threshold)
    if rule != "largest-gap":
        raise ValueError(f"unknown rule {rule!r}")
    if len(p) < 2 or p.max() <= 0:
        return ActiveSet(frozenset(), None)
    order = np.argsort(-p, kind="stable")
    ps = p[order]
    with np.errstate(divide="ignore", invalid="ignore"):
        gaps = np.where(ps[:-1] > 0, (ps[:-1] - ps[1:]) / ps[:-1], 0.0)
    k = int(np.argmax(gaps))
    if gaps[k] <= degeneracy_factor * float(np.median(gaps)):
        return ActiveSet(frozenset(), None)
    cut = float(ps[k + 1] + ps[k]) / 2
    return ActiveSet(frozenset(int(i) for i in order[: k + 1]), cut)


def required_shots(
    result: QuantumResult | np.ndarray,
    confidence: float = 0.99,
    active: Optional[ActiveSet] = None,
) -> int:
    """Shots needed to see every active segment at least once.

    Uses the union bound ``sum_i (1 - p_i)^m <= 1 - confidence`` over the
    exact post-selected probabilities of the active segments.
    """
    if isinstance(result, QuantumResult):
        p_all = result.exact_probabilities
    else:
        p_all = np.asarray(result, dtype=float)
    if active is None:
        active = classify(p_all)
    p = np.array([p_all[i] for i in sorted(active.active)])
    if len(p) == 0:
        return 0
    if np.any(p <= 0):
        return math.inf
    delta = 1.0 - confidence

    def fail(m: int) -> float:
        return float(np.sum((1.0 - p) ** m))

    if fail(1) <= delta:
        return 1
    hi = 2
    while fail(hi) > delta:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fail(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi

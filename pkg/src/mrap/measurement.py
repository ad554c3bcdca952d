"""Two-qubit XX / ZZ operator measurements mediated by the two-Bob bus, and GHZ construction.

The composite state is stored as an array ``amps[p, r]``: bus position ``p``
(position basis of the topology) times register basis state ``r``, with
register qubit 1 the most significant bit.  Register qubits are numbered
from 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .dynamics import propagator
from .model import ALICE, ChainTopology, PulseSchedule, SiteId

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class RegisterState:
    topo: ChainTopology
    amps: np.ndarray

    @property
    def m(self) -> int:
        return int(round(math.log2(self.amps.shape[1])))

    @classmethod
    def on_bus(cls, topo: ChainTopology, register: np.ndarray | str, site: SiteId = ALICE) -> "RegisterState":
        """Bus particle at ``site`` tensored with a register state (vector or bit string like '00')."""
        reg = bitstring_state(register) if isinstance(register, str) else np.asarray(register, dtype=complex)
        if abs(np.linalg.norm(reg) - 1) > 1e-9:
            raise ValueError("register state is not normalized")
        amps = np.zeros((topo.site_count, reg.size), dtype=complex)
        amps[topo.index(site)] = reg
        return cls(topo, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def bus_marginal(self) -> np.ndarray:
        return np.sum(np.abs(self.amps) ** 2, axis=1)

    def register_density(self) -> np.ndarray:
        """Register density matrix with the bus traced out."""
        return self.amps.T @ self.amps.conj()

    def register_vector(self, site: SiteId = ALICE) -> np.ndarray:
        return self.amps[self.topo.index(site)].copy()

    def replace(self, amps: np.ndarray) -> "RegisterState":
        return RegisterState(self.topo, amps)


def bitstring_state(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def apply_pauli(reg: np.ndarray, u: str, qubit: int, m: int) -> np.ndarray:
    """Apply a single-qubit Pauli to the last axis of ``reg`` (register vectors or amps rows)."""
    if not 1 <= qubit <= m:
        raise IndexError(f"qubit {qubit} outside 1..{m}")
    lead = reg.shape[:-1]
    t = reg.reshape(lead + (2,) * m)
    axis = len(lead) + qubit - 1
    t = np.moveaxis(np.tensordot(PAULI[u], t, axes=([1], [axis])), 0, axis)
    return t.reshape(reg.shape)


def pauli_string(ops: dict[int, str], m: int) -> np.ndarray:
    """Dense 2^m matrix of a Pauli product, e.g. {1: 'X', 2: 'X'}."""
    mats = [PAULI[ops.get(q, "I")] for q in range(1, m + 1)]
    out = mats[0]
    for mat in mats[1:]:
        out = np.kron(out, mat)
    return out


class Backend:
    """Bus maps for the forward and reverse passes on the position space."""

    name = "abstract"

    def __init__(self, topo: ChainTopology):
        if topo.n_bobs != 2:
            raise ValueError("operator measurement uses the two-Bob bus")
        self.topo = topo

    forward: np.ndarray
    reverse: np.ndarray


class IdealBackend(Backend):
    """Adiabatic-limit maps: |A> <-> (|B1> - |B2>)/sqrt2, (|B1> + |B2>)/sqrt2 fixed, bus sites fixed."""

    name = "ideal"

    @cached_property
    def forward(self) -> np.ndarray:
        topo = self.topo
        a, b1, b2 = topo.index(ALICE), topo.index(SiteId.bob(1)), topo.index(SiteId.bob(2))
        u = np.zeros(topo.site_count)
        u[[b1, b2]] = [1 / math.sqrt(2), -1 / math.sqrt(2)]
        e_a = np.zeros(topo.site_count)
        e_a[a] = 1.0
        # reflection exchanging |A> and u; fixes (B1 + B2)/sqrt2 and the bus
        d = (e_a - u) / math.sqrt(2)
        return (np.eye(topo.site_count) - 2 * np.outer(d, d)).astype(complex)

    @property
    def reverse(self) -> np.ndarray:
        return self.forward


class PhysicalBackend(Backend):
    """Time-integrated maps of the counter-intuitive schedule and its time reverse."""

    name = "physical"

    def __init__(self, topo: ChainTopology, sched: PulseSchedule | None = None, n_steps: int = 2000):
        super().__init__(topo)
        if sched is None:
            sched = PulseSchedule(omega_s=10.0, t_max=400.0, width_s=50.0, receivers=frozenset({1, 2}))
        if set(sched.receivers) != {1, 2}:
            raise ValueError("both Bobs must receive")
        self.sched = sched
        self.n_steps = n_steps

    @cached_property
    def forward(self) -> np.ndarray:
        return propagator(self.topo, self.sched.with_(reverse=False), n_steps=self.n_steps)

    @cached_property
    def reverse(self) -> np.ndarray:
        return propagator(self.topo, self.sched.with_(reverse=True), n_steps=self.n_steps)


def make_backend(name: str, topo: ChainTopology | None = None, sched: PulseSchedule | None = None,
                 n_steps: int = 2000) -> Backend:
    topo = topo if topo is not None else ChainTopology(2)
    if name == "ideal":
        return IdealBackend(topo)
    if name == "physical":
        return PhysicalBackend(topo, sched, n_steps)
    raise ValueError(f"unknown backend {name!r}")


def mrap_on_register(state: RegisterState, backend: Backend, direction: str = "forward") -> RegisterState:
    """Move the bus particle; the register rides along untouched."""
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    U = backend.forward if direction == "forward" else backend.reverse
    return state.replace(U @ state.amps)


def apply_controlled_u(state: RegisterState, bob_index: int, target: int, u: str) -> RegisterState:
    """Apply ``u`` to register qubit ``target`` on the part of the state where the bus occupies Bob ``bob_index``."""
    if u not in ("X", "Z"):
        raise ValueError(f"controlled operation must be X or Z, got {u!r}")
    row = state.topo.index(SiteId.bob(bob_index))
    amps = state.amps.copy()
    amps[row] = apply_pauli(amps[row], u, target, state.m)
    return state.replace(amps)


def phase_flip(state: RegisterState, site: SiteId) -> RegisterState:
    amps = state.amps.copy()
    amps[state.topo.index(site)] *= -1
    return state.replace(amps)


@dataclass
class MeasurementRecord:
    operator: str | None
    targets: tuple[int, int] | None
    detected_at_alice: bool
    probability: float
    probability_plus: float
    post_state: RegisterState | None = field(repr=False)
    return_probability: float | None = None
    corrections: list[str] = field(default_factory=list)

    @property
    def eigenvalue(self) -> int:
        return 1 if self.detected_at_alice else -1

    def to_dict(self) -> dict:
        d = {
            "operator": self.operator,
            "targets": list(self.targets) if self.targets else None,
            "probability_plus": self.probability_plus,
            "outcome": self.eigenvalue,
            "corrections_applied": list(self.corrections),
        }
        if self.return_probability is not None:
            d["return_probability"] = self.return_probability
        return d


def alice_branches(state: RegisterState) -> tuple[MeasurementRecord, MeasurementRecord]:
    """Exact detected / undetected branches of a bus measurement at Alice's site."""
    a = state.topo.index(ALICE)
    hit = np.zeros_like(state.amps)
    hit[a] = state.amps[a]
    miss = state.amps.copy()
    miss[a] = 0.0
    p_hit = float(np.sum(np.abs(hit) ** 2))
    p_miss = float(np.sum(np.abs(miss) ** 2))
    total = p_hit + p_miss
    p_hit, p_miss = p_hit / total, p_miss / total

    def branch(amps, p, detected):
        post = state.replace(amps / math.sqrt(p * total)) if p > 1e-14 else None
        return MeasurementRecord(None, None, detected, p, p_hit, post)

    return branch(hit, p_hit, True), branch(miss, p_miss, False)


def measure_bus_at_alice(
    state: RegisterState,
    detected: bool | None = None,
    rng: np.random.Generator | None = None,
) -> MeasurementRecord:
    """One branch of the Alice measurement.

    ``detected`` picks the branch; otherwise ``rng`` samples it; otherwise
    the more probable branch is returned (ties go to the detected branch).
    """
    hit, miss = alice_branches(state)
    if detected is None:
        detected = rng.random() < hit.probability if rng is not None else hit.probability >= miss.probability
    rec = hit if detected else miss
    if rec.post_state is None:
        raise ValueError(f"branch detected={detected} has zero probability")
    return rec


def complete_measurement(
    state: RegisterState,
    u: str,
    backend: Backend,
    targets: tuple[int, int] = (1, 2),
    deterministic_return: bool = True,
    outcome: int | None = None,
    rng: np.random.Generator | None = None,
) -> MeasurementRecord:
    """Measure U_a U_b on register qubits ``targets`` with the bus starting at Alice.

    Forward pass, controlled-U from Bob 1 onto ``targets[0]`` and from Bob 2
    onto ``targets[1]``, reverse pass, then detection at Alice: detected means
    eigenvalue +1 with register (U_a + U_b)|Phi>, undetected means -1 with
    (U_a - U_b)|Phi>.  For -1 and ``deterministic_return`` the Bob 2
    amplitude is phase flipped and the reverse pass brings the particle home.
    """
    a, b = targets
    s = mrap_on_register(state, backend, "forward")
    s = apply_controlled_u(s, 1, a, u)
    s = apply_controlled_u(s, 2, b, u)
    s = mrap_on_register(s, backend, "reverse")
    detected = None if outcome is None else outcome == 1
    rec = measure_bus_at_alice(s, detected=detected, rng=rng)
    rec.operator, rec.targets = u + u, (a, b)
    if not rec.detected_at_alice and deterministic_return:
        back = mrap_on_register(phase_flip(rec.post_state, SiteId.bob(2)), backend, "reverse")
        rec.return_probability = float(back.bus_marginal()[back.topo.index(ALICE)])
        rec.post_state = back
    elif rec.detected_at_alice:
        rec.return_probability = 1.0
    return rec


def ghz_state(n: int) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return v


@dataclass
class GHZResult:
    state: RegisterState
    records: list[MeasurementRecord]

    @property
    def n_qubits(self) -> int:
        return self.state.m

    def fidelity(self) -> float:
        g = ghz_state(self.n_qubits)
        return float(np.vdot(g, self.state.register_density() @ g).real)

    def stabilizers(self) -> dict[str, float]:
        rho = self.state.register_density()
        n = self.n_qubits
        out = {f"Z{i}Z{i + 1}": float(np.trace(rho @ pauli_string({i: "Z", i + 1: "Z"}, n)).real)
               for i in range(1, n)}
        out["X" * n] = float(np.trace(rho @ pauli_string({q: "X" for q in range(1, n + 1)}, n)).real)
        return out


def _correct(state: RegisterState, ops: Sequence[tuple[str, int]]) -> RegisterState:
    amps = state.amps
    for u, q in ops:
        amps = apply_pauli(amps, u, q, state.m)
    return state.replace(amps)


def build_ghz(
    n_qubits: int,
    backend: Backend,
    outcomes: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
) -> GHZResult:
    """GHZ state on ``n_qubits`` (even) register qubits from |0...0>.

    X_{2i-1}X_{2i} on every pair, then Z_{2i}Z_{2i+1} across neighbouring pairs.
    Each measurement leaves U on its first target on top of the projection,
    so the correction undoes that U first, then repairs a -1 outcome:
    Z on the first qubit after XX, X on the whole right-hand pair after ZZ.
    ``outcomes`` forces the branch of each measurement in order.
    """
    if n_qubits < 2 or n_qubits % 2:
        raise ValueError(f"n_qubits must be even and >= 2, got {n_qubits}")
    state = RegisterState.on_bus(backend.topo, "0" * n_qubits)
    plan = [("X", (2 * i - 1, 2 * i)) for i in range(1, n_qubits // 2 + 1)]
    plan += [("Z", (2 * i, 2 * i + 1)) for i in range(1, n_qubits // 2)]
    if outcomes is not None and len(outcomes) != len(plan):
        raise ValueError(f"expected {len(plan)} outcomes, got {len(outcomes)}")

    records = []
    for k, (u, (a, b)) in enumerate(plan):
        forced = outcomes[k] if outcomes is not None else None
        rec = complete_measurement(state, u, backend, (a, b), True, forced, rng)
        ops = [(u, a)]
        if rec.eigenvalue == -1:
            ops += [("Z", a)] if u == "X" else [("X", b), ("X", b + 1)]
        state = _correct(rec.post_state, ops)
        rec.corrections = [f"{op}{q}" for op, q in ops]
        records.append(rec)
    return GHZResult(state, records)

"""Site topology, Gaussian pulse schedule and the chain Hamiltonian.

Basis ordering is fixed: positions are ordered Alice, Chain 1..L, Bob 1..n,
and when the spin is included each position is split into (site, 0),
(site, 1).  So the spin-resolved Hamiltonian is ``kron(H_pos, I_2)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

RECOMMENDED_BUS_RATIO = 10.0
WINDOW_WIDTHS = 6.0


@dataclass(frozen=True, order=True)
class SiteId:
    kind: str  # "A", "chain" or "bob"
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("A", "chain", "bob"):
            raise ValueError(f"unknown site kind {self.kind!r}")
        if self.kind == "A" and self.index != 0:
            raise ValueError("Alice's site carries no index")
        if self.kind != "A" and self.index < 1:
            raise ValueError(f"{self.kind} index must be >= 1, got {self.index}")

    @classmethod
    def alice(cls) -> "SiteId":
        return cls("A")

    @classmethod
    def chain(cls, k: int) -> "SiteId":
        return cls("chain", k)

    @classmethod
    def bob(cls, j: int) -> "SiteId":
        return cls("bob", j)

    @property
    def label(self) -> str:
        if self.kind == "A":
            return "A"
        return f"{'Chain' if self.kind == 'chain' else 'Bob'} {self.index}"

    def __str__(self):
        return self.label


ALICE = SiteId.alice()


@dataclass(frozen=True)
class Edge:
    a: SiteId
    b: SiteId
    kind: str  # "static", "alice" or "bob"
    bob: int | None = None


@dataclass(frozen=True)
class ChainTopology:
    """Alice, a bus of tunnel-coupled chain sites and ``n_bobs`` receivers.

    Bob j attaches to chain site 2j-1, so every Bob sits an odd number of
    sites away from Alice.  The linear bus has 2n-1 sites.  The cyclic bus
    adds one more site, Chain(2n), closing the ring so that site 1 touches
    both site 2 and site 2n.  A ring of 2n sites has a zero mode only when
    n is even; for odd n the dark state no longer connects Alice to the
    Bobs and transfer fails, so those rings are built with a warning.
    """

    n_bobs: int
    cyclic: bool = False

    def __post_init__(self):
        if isinstance(self.n_bobs, bool) or not isinstance(self.n_bobs, (int, np.integer)):
            raise TypeError("n_bobs must be an integer")
        if self.n_bobs < 1:
            raise ValueError(f"n_bobs must be >= 1, got {self.n_bobs}")
        if self.cyclic and self.n_bobs < 2:
            raise ValueError("a cyclic bus needs at least two Bobs")
        if self.cyclic and self.n_bobs % 2:
            warnings.warn(f"cyclic bus with odd n_bobs={self.n_bobs} does not support transfer", stacklevel=3)

    @property
    def chain_length(self) -> int:
        return 2 * self.n_bobs - 1 + (1 if self.cyclic else 0)

    @property
    def site_count(self) -> int:
        return 1 + self.chain_length + self.n_bobs

    @property
    def sites(self) -> tuple[SiteId, ...]:
        return (
            (ALICE,)
            + tuple(SiteId.chain(k) for k in range(1, self.chain_length + 1))
            + tuple(SiteId.bob(j) for j in range(1, self.n_bobs + 1))
        )

    def index(self, site: SiteId) -> int:
        if site.kind == "A":
            return 0
        if site.kind == "chain":
            if site.index > self.chain_length:
                raise IndexError(f"{site} not on a bus of length {self.chain_length}")
            return site.index
        if site.index > self.n_bobs:
            raise IndexError(f"{site} not present with {self.n_bobs} Bobs")
        return self.chain_length + site.index

    @property
    def edges(self) -> tuple[Edge, ...]:
        L = self.chain_length
        out = [Edge(SiteId.chain(k), SiteId.chain(k + 1), "static") for k in range(1, L)]
        if self.cyclic:
            out.append(Edge(SiteId.chain(L), SiteId.chain(1), "static"))
        out.append(Edge(ALICE, SiteId.chain(1), "alice"))
        for j in range(1, self.n_bobs + 1):
            out.append(Edge(SiteId.bob(j), SiteId.chain(2 * j - 1), "bob", j))
        return tuple(out)

    def attachment(self, j: int) -> SiteId:
        """Chain site that Bob ``j`` tunnels to."""
        if not 1 <= j <= self.n_bobs:
            raise IndexError(f"Bob {j} not present with {self.n_bobs} Bobs")
        return SiteId.chain(2 * j - 1)

    def basis(self, include_spin: bool = True) -> list[tuple[SiteId, int]] | list[SiteId]:
        if not include_spin:
            return list(self.sites)
        return [(s, sigma) for s in self.sites for sigma in (0, 1)]


def build_topology(n_bobs: int, cyclic: bool = False) -> ChainTopology:
    return ChainTopology(n_bobs, cyclic)


def pulse_value(t, center: float, width: float, amplitude: float):
    """Gaussian ``amplitude * exp(-(t - center)^2 / (2 width^2))``."""
    if width <= 0:
        raise ValueError(f"pulse width must be positive, got {width}")
    t = np.asarray(t, dtype=float)
    out = amplitude * np.exp(-((t - center) ** 2) / (2.0 * width**2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Couplings:
    """Instantaneous tunnelling elements: Alice, each Bob, and the bus."""

    omega_a: float
    omega_b: tuple[float, ...]
    omega_s: float

    @property
    def n_bobs(self) -> int:
        return len(self.omega_b)


@dataclass(frozen=True)
class PulseSchedule:
    """Counter-intuitive Gaussian schedule.

    Receiving Bobs share one pulse centred at ``t_max/2 - width_s``; Alice's
    pulse is centred at ``t_max/2 + width_s``.  ``reverse=True`` evaluates the
    schedule at ``t_max - t``, which puts Alice's pulse first.
    ``freeze_at`` pins every evaluation to a single instant (a static
    Hamiltonian over the whole window).
    """

    omega_s: float = 10.0
    width_s: float = 25.0
    t_max: float = 200.0
    receivers: frozenset[int] = frozenset()
    alice_active: bool = True
    omega_max: float = 1.0
    reverse: bool = False
    freeze_at: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "receivers", frozenset(int(r) for r in self.receivers))
        if self.width_s <= 0:
            raise ValueError(f"width_s must be positive, got {self.width_s}")
        if self.t_max <= 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.t_max < WINDOW_WIDTHS * self.width_s * (1 - 1e-12):
            raise ValueError(
                f"t_max={self.t_max} must be >= {WINDOW_WIDTHS:g} * width_s={self.width_s}"
            )
        if self.omega_max <= 0 or self.omega_s < 0:
            raise ValueError("omega_max must be positive and omega_s non-negative")
        if any(r < 1 for r in self.receivers):
            raise ValueError("receiver indices start at 1")
        if self.freeze_at is not None and not 0 <= self.freeze_at <= self.t_max:
            raise ValueError("freeze_at must lie inside [0, t_max]")
        for w in self.warnings():
            warnings.warn(w, stacklevel=3)

    @classmethod
    def default(cls, receivers: Sequence[int], t_max: float = 200.0, **kw) -> "PulseSchedule":
        return cls(t_max=t_max, width_s=kw.pop("width_s", t_max / 8), receivers=frozenset(receivers), **kw)

    def warnings(self) -> list[str]:
        out = []
        if self.omega_s < RECOMMENDED_BUS_RATIO * self.omega_max:
            out.append(
                f"omega_s/omega_max = {self.omega_s / self.omega_max:g} is below recommended ratio "
                f"{RECOMMENDED_BUS_RATIO:g}"
            )
        if self.t_max < 10.0 / self.omega_max:
            out.append(f"t_max = {self.t_max:g} is below the minimum 10/omega_max")
        return out

    @property
    def alice_center(self) -> float:
        return self.t_max / 2 + self.width_s

    @property
    def bob_center(self) -> float:
        return self.t_max / 2 - self.width_s

    def alice_pulse(self, t):
        amp = self.omega_max if self.alice_active else 0.0
        return pulse_value(t, self.alice_center, self.width_s, amp)

    def bob_pulse(self, t):
        return pulse_value(t, self.bob_center, self.width_s, self.omega_max)

    def with_(self, **changes) -> "PulseSchedule":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        doc = {
            "omega_s": self.omega_s,
            "width_s": self.width_s,
            "t_max": self.t_max,
            "receivers": sorted(self.receivers),
            "alice_active": self.alice_active,
        }
        if self.omega_max != 1.0:
            doc["omega_max"] = self.omega_max
        return doc


def schedule_at(sched: PulseSchedule, topo: ChainTopology, t: float) -> Couplings:
    if not -1e-12 <= t <= sched.t_max * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {sched.t_max}]")
    bad = [r for r in sched.receivers if r > topo.n_bobs]
    if bad:
        raise ValueError(f"receivers {bad} not present with {topo.n_bobs} Bobs")
    if sched.freeze_at is not None:
        t = sched.freeze_at
    if sched.reverse:
        t = sched.t_max - t
    ob = sched.bob_pulse(t)
    return Couplings(
        omega_a=sched.alice_pulse(t),
        omega_b=tuple(ob if j in sched.receivers else 0.0 for j in range(1, topo.n_bobs + 1)),
        omega_s=sched.omega_s,
    )


@dataclass(frozen=True)
class SiteEnergies:
    """Site energies, keyed by SiteId.  A value is either one energy or a (E_0, E_1) spin pair."""

    e: Mapping[SiteId, float | tuple[float, float]] = field(default_factory=dict)

    def spin_independent(self) -> bool:
        return all(not isinstance(v, tuple) or v[0] == v[1] for v in self.e.values())

    def is_zero(self) -> bool:
        return all(np.all(np.asarray(v) == 0) for v in self.e.values())


ZERO_ENERGIES = SiteEnergies()


@dataclass(frozen=True)
class HamiltonianMatrix:
    entries: np.ndarray
    basis_order: tuple

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _position_matrix(topo: ChainTopology, c: Couplings) -> np.ndarray:
    H = np.zeros((topo.site_count, topo.site_count))
    for edge in topo.edges:
        if edge.kind == "static":
            val = c.omega_s
        elif edge.kind == "alice":
            val = c.omega_a
        else:
            val = c.omega_b[edge.bob - 1]
        i, j = topo.index(edge.a), topo.index(edge.b)
        # the n=1 ring would double an edge; ChainTopology rejects it
        H[i, j] += val
        H[j, i] += val
    return H


def position_hamiltonian(topo: ChainTopology, couplings: Couplings, energies: SiteEnergies = ZERO_ENERGIES) -> np.ndarray:
    """Real symmetric position-space matrix (no spin)."""
    if couplings.n_bobs != topo.n_bobs:
        raise ValueError(f"coupling vector has {couplings.n_bobs} Bob entries, topology has {topo.n_bobs}")
    if not energies.spin_independent():
        raise ValueError("spin-dependent site energies need the spin-resolved basis")
    H = _position_matrix(topo, couplings)
    for site, val in energies.e.items():
        v = val[0] if isinstance(val, tuple) else val
        H[topo.index(site), topo.index(site)] = v
    return H


def build_hamiltonian(
    topo: ChainTopology,
    couplings: Couplings,
    energies: SiteEnergies = ZERO_ENERGIES,
    include_spin: bool = True,
) -> HamiltonianMatrix:
    """Tight-binding matrix with tunnelling ``Omega`` on each edge and ``E`` on the diagonal.

    The site energy appears once on the diagonal (the conjugate of a real
    number operator term is the same term).
    """
    if couplings.n_bobs != topo.n_bobs:
        raise ValueError(f"coupling vector has {couplings.n_bobs} Bob entries, topology has {topo.n_bobs}")
    if not include_spin:
        return HamiltonianMatrix(position_hamiltonian(topo, couplings, energies), tuple(topo.sites))
    H = np.kron(_position_matrix(topo, couplings), np.eye(2))
    for site, val in energies.e.items():
        e0, e1 = val if isinstance(val, tuple) else (val, val)
        p = topo.index(site)
        H[2 * p, 2 * p] = e0
        H[2 * p + 1, 2 * p + 1] = e1
    return HamiltonianMatrix(H.astype(complex), tuple(topo.basis(True)))


def hamiltonian_at(sched: PulseSchedule, topo: ChainTopology, t: float,
                   energies: SiteEnergies = ZERO_ENERGIES, include_spin: bool = False) -> np.ndarray:
    return build_hamiltonian(topo, schedule_at(sched, topo, t), energies, include_spin).entries


def to_json(topo: ChainTopology, sched: PulseSchedule) -> str:
    doc = {"n_bobs": topo.n_bobs, "cyclic": topo.cyclic, **sched.to_dict()}
    return json.dumps(doc, sort_keys=True)


def from_json(text: str | Mapping) -> tuple[ChainTopology, PulseSchedule]:
    doc = json.loads(text) if isinstance(text, str) else dict(text)
    allowed = {"n_bobs", "cyclic", "omega_s", "width_s", "t_max", "receivers", "alice_active", "omega_max"}
    extra = set(doc) - allowed
    if extra:
        raise ValueError(f"unknown fields: {sorted(extra)}")
    topo = ChainTopology(doc["n_bobs"], bool(doc.get("cyclic", False)))
    t_max = float(doc.get("t_max", 200.0))
    sched = PulseSchedule(
        omega_s=float(doc.get("omega_s", 10.0)),
        width_s=float(doc.get("width_s", t_max / 8)),
        t_max=t_max,
        receivers=frozenset(doc.get("receivers", [])),
        alice_active=bool(doc.get("alice_active", True)),
        omega_max=float(doc.get("omega_max", 1.0)),
    )
    return topo, sched

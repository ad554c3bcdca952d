"""End-to-end runs: single-receiver transfer, fanout, reverse transport and sweeps."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .dynamics import (
    adiabaticity_metric,
    density_fidelity,
    evolve_density,
    evolve_state,
    fidelity,
    qubit_vector,
    site_populations,
    spectrum_scan,
)
from .model import ALICE, ChainTopology, PulseSchedule, SiteId, ZERO_ENERGIES

DEFAULT_T_MAX = 200.0
DEFAULT_OMEGA_S = 10.0
DEFAULT_STEPS = 2000
ADIABATIC_LIMIT = 0.1
SWEEP_AXES = ("t_max", "omega_s", "width_s", "gamma2", "n_bobs")
SWEEP_HEADER = ["axis", "fidelity", "min_gap", "adiabaticity", "t_max", "omega_s", "gamma2"]


@dataclass(frozen=True)
class ProtocolSpec:
    """Everything needed to run one MRAP pass.

    ``receivers=None`` means every Bob takes part; ``width_s=None`` means
    ``t_max / 8``.  For ``direction="reverse"`` the initial state lives on the
    Bob sites: ``source`` is a Bob index or a mapping Bob index -> amplitude.
    """

    n_bobs: int = 2
    cyclic: bool = False
    omega_s: float = DEFAULT_OMEGA_S
    t_max: float = DEFAULT_T_MAX
    width_s: float | None = None
    receivers: tuple[int, ...] | None = None
    alice_active: bool = True
    qubit: tuple[complex, complex] = (1.0, 0.0)
    direction: str = "forward"
    source: int | Mapping[int, complex] | None = None
    gamma2: float = 0.0
    n_steps: int = DEFAULT_STEPS
    n_samples: int = 201

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise ValueError(f"direction must be 'forward' or 'reverse', got {self.direction!r}")
        if self.receivers is not None:
            object.__setattr__(self, "receivers", tuple(sorted(int(r) for r in self.receivers)))
            if not self.receivers:
                raise ValueError("receiver set is empty")
            if max(self.receivers) > self.n_bobs or min(self.receivers) < 1:
                raise ValueError(f"receivers {self.receivers} outside 1..{self.n_bobs}")
        object.__setattr__(self, "qubit", tuple(complex(q) for q in self.qubit))
        qubit_vector(self.qubit)
        if self.direction == "reverse":
            if self.source is None:
                raise ValueError("reverse runs need a source Bob")
            for j in self._source_amplitudes():
                if not 1 <= j <= self.n_bobs:
                    raise ValueError(f"source Bob {j} outside 1..{self.n_bobs}")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be non-negative")

    def _source_amplitudes(self) -> dict[int, complex]:
        if isinstance(self.source, Mapping):
            return {int(k): complex(v) for k, v in self.source.items()}
        return {int(self.source): 1.0}

    @property
    def active(self) -> tuple[int, ...]:
        return self.receivers if self.receivers is not None else tuple(range(1, self.n_bobs + 1))

    def topology(self) -> ChainTopology:
        return ChainTopology(self.n_bobs, self.cyclic)

    def schedule(self) -> PulseSchedule:
        width = self.width_s if self.width_s is not None else self.t_max / 8
        return PulseSchedule(
            omega_s=self.omega_s,
            width_s=width,
            t_max=self.t_max,
            receivers=frozenset(self.active),
            alice_active=self.alice_active,
            reverse=self.direction == "reverse",
        )

    def initial_position(self) -> np.ndarray:
        topo = self.topology()
        v = np.zeros(topo.site_count, dtype=complex)
        if self.direction == "forward":
            v[topo.index(ALICE)] = 1.0
        else:
            for j, amp in self._source_amplitudes().items():
                v[topo.index(SiteId.bob(j))] = amp
            v /= np.linalg.norm(v)
        return v

    def with_(self, **changes) -> "ProtocolSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["receivers"] = list(self.receivers) if self.receivers is not None else None
        d["qubit"] = [[q.real, q.imag] for q in self.qubit]
        if isinstance(self.source, Mapping):
            d["source"] = {str(k): [complex(v).real, complex(v).imag] for k, v in self.source.items()}
        return d

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ProtocolSpec":
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown fields: {sorted(unknown)}")
        if "qubit" in doc:
            doc["qubit"] = tuple(_complex(q) for q in doc["qubit"])
        if isinstance(doc.get("source"), Mapping):
            doc["source"] = {int(k): _complex(v) for k, v in doc["source"].items()}
        if doc.get("receivers") is not None:
            doc["receivers"] = tuple(doc["receivers"])
        return cls(**doc)


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(re, im)
    return complex(v)


def alice_sign(receivers: Sequence[int]) -> int:
    """Sign with which adiabatic passage carries |A> onto the receiver superposition.

    With positive tunnelling elements the forward map sends |A> to
    ``(-1)^{r0} * ideal_target`` where r0 is the lowest receiver index; the
    reverse map sends ``ideal_target`` back to the same sign times |A>.
    """
    return -1 if min(receivers) % 2 else 1


def ideal_target(topo: ChainTopology, receivers: Sequence[int], qubit: Sequence[complex] | None = None) -> np.ndarray:
    """Equal superposition over receiver Bobs with alternating signs, sum_k (-1)^(k - r0) |phi>_Bk / sqrt(m)."""
    receivers = sorted(set(receivers))
    if not receivers:
        raise ValueError("receiver set is empty")
    r0 = receivers[0]
    v = np.zeros(topo.site_count, dtype=complex)
    for k in receivers:
        v[topo.index(SiteId.bob(k))] = (-1) ** (k - r0)
    v /= math.sqrt(len(receivers))
    return v if qubit is None else np.kron(v, qubit_vector(qubit))


def reverse_target(
    topo: ChainTopology,
    receivers: Sequence[int],
    initial: np.ndarray,
    qubit: Sequence[complex] | None = None,
    sign: int | None = None,
) -> np.ndarray:
    """Adiabatic-limit outcome of the reverse pass for a Bob-site initial state.

    The component of ``initial`` along the receiver superposition u goes to
    ``sign * |A>``; everything orthogonal to u on the Bob sites stays put.
    ``sign`` defaults to the Hamiltonian convention (:func:`alice_sign`);
    ``sign=+1`` is the convention in which forward transfer lands on +u.
    """
    u = ideal_target(topo, receivers)
    sign = alice_sign(receivers) if sign is None else sign
    x = np.asarray(initial, dtype=complex)
    c = np.vdot(u, x)
    out = x - c * u
    out[topo.index(ALICE)] += sign * c
    return out if qubit is None else np.kron(out, qubit_vector(qubit))


@dataclass
class TransferReport:
    final_state: np.ndarray
    fidelity_vs_target: float
    populations: dict[str, float]
    min_gap: float
    adiabaticity: float
    norm_drift: float
    params: dict[str, Any]
    warnings: list[str] = field(default_factory=list)
    target: np.ndarray | None = field(default=None, repr=False)
    evolution: Any = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "fidelity": self.fidelity_vs_target,
            "populations": self.populations,
            "min_gap": self.min_gap,
            "adiabaticity": self.adiabaticity,
            "norm_drift": self.norm_drift,
            "warnings": self.warnings,
            "params": self.params,
        }


def _run(spec: ProtocolSpec, with_diagnostics: bool = True) -> TransferReport:
    topo = spec.topology()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sched = spec.schedule()
    notes = sched.warnings()

    pos0 = spec.initial_position()
    if spec.direction == "forward":
        target_pos = ideal_target(topo, spec.active)
    else:
        target_pos = reverse_target(topo, spec.active, pos0)
    q = qubit_vector(spec.qubit)
    psi0 = np.kron(pos0, q)
    target = np.kron(target_pos, q)

    evolution = None
    if spec.gamma2 > 0:
        rho = evolve_density(topo, sched, ZERO_ENERGIES, spec.gamma2, np.outer(psi0, psi0.conj()), spec.n_steps)
        final = rho
        fid = density_fidelity(rho, target)
        pops = np.real(np.diag(rho)).reshape(topo.site_count, 2).sum(axis=1)
        drift = abs(np.trace(rho).real - 1)
    else:
        evolution = evolve_state(topo, sched, ZERO_ENERGIES, psi0, spec.n_steps)
        final = evolution.final
        fid = fidelity(final, target)
        pops = site_populations(topo, final)
        drift = evolution.norm_drift

    min_gap = adiab = math.nan
    if with_diagnostics:
        trace = spectrum_scan(topo, sched, ZERO_ENERGIES, spec.n_samples, start=pos0)
        min_gap = trace.min_gap
        adiab = adiabaticity_metric(topo, sched, ZERO_ENERGIES, trace=trace)
        if adiab > ADIABATIC_LIMIT:
            # leakage out of the dark state is bounded by roughly metric^2
            notes.append(f"adiabaticity metric {adiab:.3g} > {ADIABATIC_LIMIT:g}: evolution is not adiabatic")

    return TransferReport(
        final_state=final,
        fidelity_vs_target=fid,
        populations={s.label: float(p) for s, p in zip(topo.sites, pops)},
        min_gap=min_gap,
        adiabaticity=adiab,
        norm_drift=drift,
        params=spec.to_dict(),
        warnings=notes,
        target=target,
        evolution=evolution,
    )


def run_transfer(spec: ProtocolSpec, with_diagnostics: bool = True) -> TransferReport:
    """Forward pass from |phi>_A, scored against :func:`ideal_target`."""
    if spec.direction != "forward":
        raise ValueError("run_transfer needs direction='forward'; use run_reverse")
    return _run(spec, with_diagnostics)


def run_reverse(spec: ProtocolSpec, with_diagnostics: bool = True) -> TransferReport:
    """Time-reversed pass from Bob sites, scored against :func:`reverse_target`."""
    if spec.direction != "reverse":
        raise ValueError("run_reverse needs direction='reverse'")
    return _run(spec, with_diagnostics)


def run_protocol(spec: ProtocolSpec, with_diagnostics: bool = True) -> TransferReport:
    return _run(spec, with_diagnostics)


@dataclass(frozen=True)
class SweepRow:
    value: float
    fidelity: float
    min_gap: float
    adiabaticity: float
    t_max: float
    omega_s: float
    gamma2: float

    def as_list(self) -> list:
        return [self.value, self.fidelity, self.min_gap, self.adiabaticity, self.t_max, self.omega_s, self.gamma2]


def _sweep_point(args) -> SweepRow:
    spec, axis, value = args
    value = int(value) if axis == "n_bobs" else float(value)
    point = spec.with_(**{axis: value})
    rep = run_protocol(point)
    return SweepRow(value, rep.fidelity_vs_target, rep.min_gap, rep.adiabaticity,
                    point.t_max, point.omega_s, point.gamma2)


def sweep(template: ProtocolSpec, axis: str, values: Sequence[float], workers: int = 1) -> list[SweepRow]:
    """One independent run per value, rows in input order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    jobs = [(template, axis, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow([repr(x) for x in row.as_list()])

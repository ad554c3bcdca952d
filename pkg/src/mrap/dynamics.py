"""Closed and open-system evolution, dark states, gaps and adiabaticity.

States are plain complex numpy vectors in the basis of :mod:`mrap.model`:
either position-only (length ``site_count``) or spin-resolved
(length ``2 * site_count``).  The functions infer which from the length.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    ALICE,
    ChainTopology,
    Couplings,
    PulseSchedule,
    SiteEnergies,
    SiteId,
    ZERO_ENERGIES,
    build_hamiltonian,
    schedule_at,
)

NORM_TOL = 1e-9
DRIFT_LIMIT = 1e-6
MIN_STEPS = 100
TRACKING_THRESHOLD = 0.5


class ConvergenceError(RuntimeError):
    """Integration drifted further from unitarity than allowed."""


class TrackingError(RuntimeError):
    """The adiabatically connected eigenstate could not be followed unambiguously."""


def _spin_resolved(topo: ChainTopology, dim: int) -> bool:
    if dim == topo.site_count:
        return False
    if dim == 2 * topo.site_count:
        return True
    raise ValueError(f"state of length {dim} does not fit a topology with {topo.site_count} sites")


def site_state(topo: ChainTopology, site: SiteId, qubit: Sequence[complex] | None = None) -> np.ndarray:
    """|phi>_site, or the bare position state |site> when ``qubit`` is None."""
    pos = np.zeros(topo.site_count, dtype=complex)
    pos[topo.index(site)] = 1.0
    if qubit is None:
        return pos
    return np.kron(pos, qubit_vector(qubit))


def superposition(topo: ChainTopology, amplitudes: dict[SiteId, complex],
                  qubit: Sequence[complex] | None = None) -> np.ndarray:
    pos = np.zeros(topo.site_count, dtype=complex)
    for site, amp in amplitudes.items():
        pos[topo.index(site)] += amp
    pos /= np.linalg.norm(pos)
    return pos if qubit is None else np.kron(pos, qubit_vector(qubit))


def qubit_vector(qubit: Sequence[complex]) -> np.ndarray:
    q = np.asarray(qubit, dtype=complex)
    if q.shape != (2,) or abs(np.vdot(q, q).real - 1) > NORM_TOL:
        raise ValueError("qubit must be a normalized pair (alpha, beta)")
    return q


def site_populations(topo: ChainTopology, psi: np.ndarray) -> np.ndarray:
    p = np.abs(psi) ** 2
    if _spin_resolved(topo, psi.size):
        p = p.reshape(topo.site_count, 2).sum(axis=1)
    return p


def reduced_spin(topo: ChainTopology, psi: np.ndarray) -> np.ndarray:
    """2x2 qubit density matrix with the position traced out."""
    if not _spin_resolved(topo, psi.size):
        raise ValueError("state carries no spin")
    m = psi.reshape(topo.site_count, 2)
    return m.T @ m.conj()


def bloch_vector(rho2: np.ndarray) -> np.ndarray:
    return np.array([
        2 * rho2[0, 1].real,
        -2 * rho2[0, 1].imag,
        (rho2[0, 0] - rho2[1, 1]).real,
    ])


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for normalized states."""
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1) > 1e-6:
            raise ValueError("fidelity needs normalized states")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def density_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    return float(np.vdot(target, rho @ target).real)


def _step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _midpoint_hamiltonians(topo, sched, energies, n_steps, spin):
    dt = sched.t_max / n_steps
    for k in range(n_steps):
        c = schedule_at(sched, topo, (k + 0.5) * dt)
        yield build_hamiltonian(topo, c, energies, include_spin=spin).entries


@dataclass
class EvolutionResult:
    final: np.ndarray
    times: np.ndarray
    populations: np.ndarray  # (n_steps + 1, site_count)
    norms: np.ndarray

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - 1.0)))

    def write_csv(self, topo: ChainTopology, path) -> None:
        header = ["t"] + [f"P({s.label})" for s in topo.sites] + ["norm"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, pops, nrm in zip(self.times, self.populations, self.norms):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in pops] + [repr(float(nrm))])


def evolve_state(
    topo: ChainTopology,
    sched: PulseSchedule,
    energies: SiteEnergies,
    initial: np.ndarray,
    n_steps: int = 2000,
) -> EvolutionResult:
    """Integrate the Schroedinger equation with the exact propagator of the midpoint Hamiltonian per step.

    Rows of ``populations`` are recorded at t = 0 and after every step.
    """
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}")
    psi = np.array(initial, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > NORM_TOL:
        raise ValueError("initial state is not normalized")
    spin = _spin_resolved(topo, psi.size)
    dt = sched.t_max / n_steps

    pops = np.empty((n_steps + 1, topo.site_count))
    norms = np.empty(n_steps + 1)
    pops[0] = site_populations(topo, psi)
    norms[0] = np.linalg.norm(psi)
    for k, H in enumerate(_midpoint_hamiltonians(topo, sched, energies, n_steps, spin), start=1):
        w, v = np.linalg.eigh(H)
        psi = v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi))
        pops[k] = site_populations(topo, psi)
        norms[k] = np.linalg.norm(psi)

    times = np.linspace(0.0, sched.t_max, n_steps + 1)
    result = EvolutionResult(psi, times, pops, norms)
    if result.norm_drift > DRIFT_LIMIT:
        raise ConvergenceError(f"norm drift {result.norm_drift:.3e} exceeds {DRIFT_LIMIT:g}")
    return result


def propagator(
    topo: ChainTopology,
    sched: PulseSchedule,
    energies: SiteEnergies = ZERO_ENERGIES,
    n_steps: int = 2000,
    include_spin: bool = False,
) -> np.ndarray:
    """Full time-ordered unitary over [0, t_max], same stepping as :func:`evolve_state`."""
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}")
    dt = sched.t_max / n_steps
    U = None
    for H in _midpoint_hamiltonians(topo, sched, energies, n_steps, include_spin):
        step = _step_unitary(H, dt)
        U = step if U is None else step @ U
    drift = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if drift > DRIFT_LIMIT:
        raise ConvergenceError(f"propagator unitarity drift {drift:.3e}")
    return U


def _site_labels(topo: ChainTopology, dim: int) -> np.ndarray:
    sites = np.arange(topo.site_count)
    return np.repeat(sites, 2) if _spin_resolved(topo, dim) else sites


def evolve_density(
    topo: ChainTopology,
    sched: PulseSchedule,
    energies: SiteEnergies,
    gamma2: float,
    initial: np.ndarray,
    n_steps: int = 2000,
) -> np.ndarray:
    """Lindblad evolution with positional dephasing L_i = |i><i| at uniform rate ``gamma2``.

    Symmetric splitting per step: half unitary, exact dephasing channel
    (coherences between different sites scale by exp(-gamma2 dt)), half unitary.
    """
    if gamma2 < 0:
        raise ValueError("gamma2 must be non-negative")
    if n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be >= {MIN_STEPS}")
    rho = np.array(initial, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("initial density matrix must be square")
    if abs(np.trace(rho).real - 1) > NORM_TOL:
        raise ValueError("initial density matrix must have unit trace")
    spin = _spin_resolved(topo, rho.shape[0])
    labels = _site_labels(topo, rho.shape[0])
    dt = sched.t_max / n_steps
    damp = np.where(labels[:, None] == labels[None, :], 1.0, math.exp(-gamma2 * dt))

    for H in _midpoint_hamiltonians(topo, sched, energies, n_steps, spin):
        Uh = _step_unitary(H, dt / 2)
        rho = Uh @ rho @ Uh.conj().T
        rho = rho * damp
        rho = Uh @ rho @ Uh.conj().T

    drift = abs(np.trace(rho).real - 1)
    if drift > 1e-8:
        raise ConvergenceError(f"trace drift {drift:.3e}")
    return 0.5 * (rho + rho.conj().T)


@dataclass
class NullStates:
    states: np.ndarray  # one row per receiver
    receivers: tuple[int, ...]
    validity_scale: float


def null_space_analytic(
    topo: ChainTopology,
    couplings: Couplings,
    receivers: Sequence[int] | None = None,
    qubit: Sequence[complex] | None = None,
) -> NullStates:
    """Closed-form zero-energy states, one per receiver j.

    psi_j ~ Omega_Bj |A> + sum_{k<j} (-1)^k Omega_A Omega_Bj / Omega_S |2k> + (-1)^j Omega_A |B_j>,
    normalized exactly (the bus amplitude is kept in the norm).  With zero
    site energies each psi_j is an exact zero mode of the full Hamiltonian,
    whatever the other Bobs do.
    """
    if receivers is None:
        receivers = [j for j, b in enumerate(couplings.omega_b, start=1) if b != 0]
    oa, os_ = couplings.omega_a, couplings.omega_s
    rows = []
    for j in receivers:
        ob = couplings.omega_b[j - 1]
        if oa == 0 and ob == 0:
            raise ValueError(f"Omega_A and Omega_B{j} both vanish; psi_{j} is undefined")
        if j > 1 and os_ <= 0:
            raise ValueError("Omega_S must be positive")
        v = np.zeros(topo.site_count, dtype=complex)
        v[0] = ob
        for k in range(1, j):
            v[topo.index(SiteId.chain(2 * k))] = oa * ob / ((-1) ** k * os_)
        v[topo.index(SiteId.bob(j))] = (-1) ** j * oa
        v /= np.linalg.norm(v)
        rows.append(v if qubit is None else np.kron(v, qubit_vector(qubit)))
    scale = max([couplings.omega_a, *couplings.omega_b]) / os_ if os_ > 0 else math.inf
    states = np.array(rows) if rows else np.zeros((0, topo.site_count), dtype=complex)
    return NullStates(states, tuple(receivers), scale)


def exact_null_basis(H: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal columns spanning the numerically zero eigenspace of ``H``."""
    w, v = np.linalg.eigh(H)
    if tol is None:
        tol = 1e-9 * max(1.0, np.max(np.abs(w)))
    return v[:, np.abs(w) <= tol]


def energy_gap_analytic(omega_a: float, omega_b: Sequence[float], j: int | None = None) -> float:
    """Large-bus gap sqrt((Omega_A^2 + sum_k Omega_Bk^2) / j) between the dark state and its neighbors.

    ``omega_b`` lists every Bob on the bus (zero for non-receivers) and ``j``
    defaults to its length: the divisor counts the Bobs on the bus, which
    equals the receiver count when everyone receives.
    """
    omega_b = np.asarray(omega_b, dtype=float)
    j = omega_b.size if j is None else j
    if j < 1:
        raise ValueError("j must be >= 1")
    return math.sqrt((omega_a**2 + float(np.sum(omega_b**2))) / j)


@dataclass
class GapTrace:
    times: np.ndarray
    gap: np.ndarray
    energy: np.ndarray
    overlaps: np.ndarray
    analytic: np.ndarray
    states: np.ndarray = field(repr=False)
    spectra: list = field(default_factory=list, repr=False)

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gap))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "gap", "analytic_gap", "energy", "overlap"])
            for row in zip(self.times, self.gap, self.analytic, self.energy, self.overlaps):
                w.writerow([repr(float(x)) for x in row])


def _clusters(w: np.ndarray, tol: float) -> list[np.ndarray]:
    groups, start = [], 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def spectrum_scan(
    topo: ChainTopology,
    sched: PulseSchedule,
    energies: SiteEnergies = ZERO_ENERGIES,
    n_samples: int = 201,
    start: np.ndarray | None = None,
) -> GapTrace:
    """Follow the eigenstate connected to |A> through the protocol and record its gap.

    At each sample the previous tracked vector is projected onto every
    degenerate eigenspace; the largest projection wins and becomes the new
    tracked vector (discrete parallel transport inside a degenerate dark
    space).  The gap is the distance to the nearest eigenvalue outside the
    winning eigenspace, zero when there is none.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    if not energies.spin_independent():
        raise ValueError("spectrum_scan works in position space; energies must be spin-independent")
    times = np.linspace(0.0, sched.t_max, n_samples)
    prev = site_state(topo, ALICE) if start is None else np.asarray(start, dtype=complex)

    gap = np.empty(n_samples)
    energy = np.empty(n_samples)
    overlaps = np.empty(n_samples)
    analytic = np.empty(n_samples)
    states = np.empty((n_samples, topo.site_count), dtype=complex)
    spectra = []
    for i, t in enumerate(times):
        c = schedule_at(sched, topo, t)
        H = build_hamiltonian(topo, c, energies, include_spin=False).entries
        w, v = np.linalg.eigh(H)
        tol = 1e-9 * max(1.0, np.max(np.abs(w)))
        groups = _clusters(w, tol)
        weights = [float(np.sum(np.abs(v[:, g].conj().T @ prev) ** 2)) for g in groups]
        best = int(np.argmax(weights))
        if weights[best] < TRACKING_THRESHOLD:
            raise TrackingError(
                f"tracked state overlap {weights[best]:.3f} < {TRACKING_THRESHOLD} at t={t:.4g}"
            )
        g = groups[best]
        cur = v[:, g] @ (v[:, g].conj().T @ prev)
        cur /= np.linalg.norm(cur)
        e0 = float(np.mean(w[g]))
        others = np.delete(w, g)
        gap[i] = float(np.min(np.abs(others - e0))) if others.size else 0.0
        energy[i] = e0
        overlaps[i] = weights[best]
        analytic[i] = energy_gap_analytic(c.omega_a, c.omega_b) if energies.is_zero() else math.nan
        states[i] = cur
        spectra.append((w, v, g))
        prev = cur
    return GapTrace(times, gap, energy, overlaps, analytic, states, spectra)


def adiabaticity_metric(
    topo: ChainTopology,
    sched: PulseSchedule,
    energies: SiteEnergies = ZERO_ENERGIES,
    n_samples: int = 401,
    trace: GapTrace | None = None,
) -> float:
    """max_t max_k |<e_k| d/dt psi_0>| / |E_k - E_0| over eigenstates k outside the tracked eigenspace.

    The time derivative is a centered finite difference of the tracked
    state on the sample grid (one-sided at the ends).  Dimensionless; an
    adiabatic run has values well below 1.
    """
    trace = trace if trace is not None else spectrum_scan(topo, sched, energies, n_samples)
    dpsi = np.gradient(trace.states, trace.times, axis=0)
    worst = 0.0
    for i, (w, v, g) in enumerate(trace.spectra):
        mask = np.ones(w.size, dtype=bool)
        mask[g] = False
        if not mask.any():
            continue
        amps = np.abs(v[:, mask].conj().T @ dpsi[i])
        denom = np.abs(w[mask] - trace.energy[i])
        ok = denom > 0
        if np.any(amps[~ok] > 0):
            return math.inf
        if ok.any():
            worst = max(worst, float(np.max(amps[ok] / denom[ok])))
    return worst

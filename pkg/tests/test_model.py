import json
import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrap.model import (
    ALICE,
    ChainTopology,
    Couplings,
    PulseSchedule,
    SiteEnergies,
    SiteId,
    build_hamiltonian,
    build_topology,
    from_json,
    position_hamiltonian,
    pulse_value,
    schedule_at,
    to_json,
)


def edge_set(topo):
    return {(frozenset((e.a, e.b)), e.kind, e.bob) for e in topo.edges}


def test_single_bob_topology():
    topo = build_topology(1)
    assert topo.site_count == 3
    assert set(topo.sites) == {ALICE, SiteId.chain(1), SiteId.bob(1)}
    assert edge_set(topo) == {
        (frozenset((ALICE, SiteId.chain(1))), "alice", None),
        (frozenset((SiteId.bob(1), SiteId.chain(1))), "bob", 1),
    }


def test_two_bob_topology():
    topo = build_topology(2)
    assert topo.site_count == 6
    static = {k for k, kind, _ in edge_set(topo) if kind == "static"}
    assert static == {frozenset((SiteId.chain(1), SiteId.chain(2))), frozenset((SiteId.chain(2), SiteId.chain(3)))}
    assert topo.attachment(2) == SiteId.chain(3)


def test_cyclic_ring_enumeration():
    with pytest.warns(UserWarning, match="odd n_bobs"):
        topo = build_topology(3, cyclic=True)
    L = topo.chain_length
    assert L == 6 and topo.site_count == 10
    static = [e for e in topo.edges if e.kind == "static"]
    assert len(static) == L
    degree = {k: 0 for k in range(1, L + 1)}
    for e in static:
        degree[e.a.index] += 1
        degree[e.b.index] += 1
    assert set(degree.values()) == {2}
    # site 1 touches 2 and the closing site
    nbrs = {e.b.index if e.a.index == 1 else e.a.index for e in static if 1 in (e.a.index, e.b.index)}
    assert nbrs == {2, L}
    assert sum(e.kind == "alice" for e in topo.edges) == 1
    assert sorted(e.bob for e in topo.edges if e.kind == "bob") == [1, 2, 3]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_odd_number_of_sites_between_alice_and_each_bob(n):
    topo = build_topology(n)
    adj = {s: set() for s in topo.sites}
    for e in topo.edges:
        adj[e.a].add(e.b)
        adj[e.b].add(e.a)
    dist = {ALICE: 0}
    queue = deque([ALICE])
    while queue:
        s = queue.popleft()
        for t in adj[s]:
            if t not in dist:
                dist[t] = dist[s] + 1
                queue.append(t)
    for j in range(1, n + 1):
        intermediate = dist[SiteId.bob(j)] - 1
        assert intermediate % 2 == 1


def test_rejects_bad_topologies():
    with pytest.raises(ValueError):
        build_topology(0)
    with pytest.raises(ValueError):
        build_topology(1, cyclic=True)
    with pytest.raises(ValueError):
        SiteId.chain(0)


def test_pulse_value_examples():
    assert pulse_value(3.0, 3.0, 2.0, 0.7) == 0.7
    assert math.isclose(pulse_value(5.0, 3.0, 2.0, 0.7), 0.7 * math.exp(-0.5))
    assert math.isclose(pulse_value(1.0, 3.0, 2.0, 0.7), 0.7 * math.exp(-0.5))
    with pytest.raises(ValueError):
        pulse_value(0.0, 0.0, 0.0, 1.0)


@given(st.floats(10, 1000), st.floats(0.5, 1.5))
def test_pulse_centres_offset_by_two_widths(t_max, frac):
    s = PulseSchedule(t_max=t_max, width_s=frac * t_max / 12)
    assert math.isclose(s.alice_center - s.bob_center, 2 * s.width_s)


@given(st.floats(-50, 50), st.floats(0, 30), st.floats(0.1, 10), st.floats(0.01, 5))
def test_pulse_symmetric_and_positive(c, dt, w, amp):
    a, b = pulse_value(c + dt, c, w, amp), pulse_value(c - dt, c, w, amp)
    assert a == pytest.approx(b, rel=1e-12)
    if dt < 5 * w:
        assert a > 0


def test_schedule_no_receivers(two_bob):
    s = PulseSchedule(receivers=frozenset())
    for t in np.linspace(0, s.t_max, 7):
        assert schedule_at(s, two_bob, t).omega_b == (0.0, 0.0)


def test_schedule_receivers_share_profile(two_bob):
    s = PulseSchedule(receivers=frozenset({1, 2}))
    c = schedule_at(s, two_bob, s.t_max / 2)
    assert c.omega_b[0] == c.omega_b[1] > 0


def test_schedule_at_bob_peak(two_bob):
    s = PulseSchedule(receivers=frozenset({2}), t_max=200, width_s=25)
    c = schedule_at(s, two_bob, s.t_max / 2 - s.width_s)
    assert c.omega_b == (0.0, 1.0)
    # Alice centre lies 2s later: exp(-(2s)^2 / 2s^2) = e^-2
    assert c.omega_a == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert c.omega_s == 10.0


def test_schedule_rejects_out_of_window(two_bob):
    s = PulseSchedule()
    with pytest.raises(ValueError):
        schedule_at(s, two_bob, -1.0)
    with pytest.raises(ValueError):
        schedule_at(s, two_bob, s.t_max + 1)
    with pytest.raises(ValueError):
        schedule_at(PulseSchedule(receivers=frozenset({3})), two_bob, 0.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PulseSchedule(t_max=100, width_s=20)
    with pytest.warns(UserWarning, match="below recommended ratio"):
        PulseSchedule(omega_s=2.0)


def test_reverse_schedule_mirrors_time(two_bob):
    fwd = PulseSchedule(receivers=frozenset({1, 2}))
    rev = fwd.with_(reverse=True)
    for t in (0.0, 40.0, 100.0, 170.0):
        assert schedule_at(rev, two_bob, t) == schedule_at(fwd, two_bob, fwd.t_max - t)


def test_zero_couplings_give_zero_matrix(two_bob):
    H = build_hamiltonian(two_bob, Couplings(0.0, (0.0, 0.0), 0.0))
    assert not np.any(H.entries)


def test_static_edges_only(two_bob):
    H = build_hamiltonian(two_bob, Couplings(0.0, (0.0, 0.0), 1.0), include_spin=False).entries
    nz = {tuple(sorted(ij)) for ij in zip(*np.nonzero(H))}
    c1, c2, c3 = (two_bob.index(SiteId.chain(k)) for k in (1, 2, 3))
    assert nz == {(c1, c2), (c2, c3)}


def test_two_bob_null_space_is_two_dimensional(two_bob):
    H = build_hamiltonian(two_bob, Couplings(0.4, (0.7, 0.7), 10.0), include_spin=False).entries
    w = np.linalg.eigvalsh(H)
    assert np.sum(np.abs(w) < 1e-10) >= 2


def test_basis_order_and_diagonal(two_bob):
    H = build_hamiltonian(two_bob, Couplings(0.0, (0.0, 0.0), 0.0),
                          SiteEnergies({SiteId.chain(2): 0.3, SiteId.bob(1): (0.1, -0.1)}))
    assert H.basis_order[:4] == ((ALICE, 0), (ALICE, 1), (SiteId.chain(1), 0), (SiteId.chain(1), 1))
    p = two_bob.index(SiteId.chain(2))
    assert H.entries[2 * p, 2 * p] == 0.3 and H.entries[2 * p + 1, 2 * p + 1] == 0.3
    b = two_bob.index(SiteId.bob(1))
    assert H.entries[2 * b, 2 * b] == 0.1 and H.entries[2 * b + 1, 2 * b + 1] == -0.1


def test_coupling_length_mismatch(two_bob):
    with pytest.raises(ValueError):
        build_hamiltonian(two_bob, Couplings(1.0, (1.0,), 10.0))


couplings_st = st.tuples(
    st.integers(1, 5), st.booleans(), st.floats(0, 2), st.lists(st.floats(0, 2), min_size=5, max_size=5),
    st.floats(0, 100), st.lists(st.floats(-1, 1), min_size=5, max_size=5),
)


@pytest.mark.filterwarnings("ignore:cyclic bus")
@settings(max_examples=60, deadline=None)
@given(couplings_st)
def test_hamiltonian_hermitian_and_spin_blocked(args):
    n, cyclic, oa, ob, os_, es = args
    cyclic = cyclic and n >= 2
    topo = ChainTopology(n, cyclic)
    c = Couplings(oa, tuple(ob[:n]), os_)
    energies = SiteEnergies({SiteId.chain(k): es[k - 1] for k in range(1, min(n, 5) + 1)})
    H = build_hamiltonian(topo, c, energies).entries
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12 * max(1.0, np.max(np.abs(H)))
    Hp = position_hamiltonian(topo, c, energies)
    np.testing.assert_array_equal(H, np.kron(Hp, np.eye(2)))
    w_full = np.sort(np.linalg.eigvalsh(H))
    w_pos = np.sort(np.repeat(np.linalg.eigvalsh(Hp), 2))
    np.testing.assert_allclose(w_full, w_pos, atol=1e-10)


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
def test_null_space_dimension_at_least_receivers(j, rng):
    topo = ChainTopology(j)
    c = Couplings(float(rng.uniform(0.1, 1)), tuple(rng.uniform(0.1, 1, size=j)), 10.0)
    w = np.linalg.eigvalsh(position_hamiltonian(topo, c))
    assert np.sum(np.abs(w) < 1e-9) >= j


def test_json_roundtrip():
    topo = ChainTopology(4, cyclic=True)
    sched = PulseSchedule(omega_s=20.0, width_s=30.0, t_max=240.0, receivers=frozenset({1, 3}))
    text = to_json(topo, sched)
    assert set(json.loads(text)) == {"n_bobs", "cyclic", "omega_s", "width_s", "t_max", "receivers", "alice_active"}
    topo2, sched2 = from_json(text)
    assert topo2 == topo and sched2 == sched
    assert to_json(topo2, sched2) == text
    with pytest.raises(ValueError):
        from_json('{"n_bobs": 2, "colour": "red"}')

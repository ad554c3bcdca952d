import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrap import measurement as ms
from mrap.model import ALICE, ChainTopology, SiteId


@pytest.fixture(scope="module")
def ideal():
    return ms.make_backend("ideal")


@pytest.fixture(scope="module")
def physical():
    return ms.make_backend("physical")


def random_state(rng, m):
    v = rng.normal(size=2**m) + 1j * rng.normal(size=2**m)
    return v / np.linalg.norm(v)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.sampled_from(["X", "Z"]), st.data())
def test_apply_pauli_matches_dense_kron(m, u, data):
    q = data.draw(st.integers(1, m))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    v = random_state(rng, m)
    np.testing.assert_allclose(ms.apply_pauli(v, u, q, m), ms.pauli_string({q: u}, m) @ v, atol=1e-14)


def test_pauli_qubit_one_is_most_significant():
    out = ms.apply_pauli(ms.bitstring_state("00"), "X", 1, 2)
    np.testing.assert_array_equal(out, ms.bitstring_state("10"))
    with pytest.raises(IndexError):
        ms.apply_pauli(out, "X", 3, 2)


def test_ideal_backend_maps(ideal):
    topo = ideal.topo
    U = ideal.forward
    e = np.eye(topo.site_count)
    a, b1, b2 = (topo.index(s) for s in (ALICE, SiteId.bob(1), SiteId.bob(2)))
    minus = (e[b1] - e[b2]) / math.sqrt(2)
    plus = (e[b1] + e[b2]) / math.sqrt(2)
    np.testing.assert_allclose(U @ e[a], minus, atol=1e-15)
    np.testing.assert_allclose(U @ minus, e[a], atol=1e-15)
    np.testing.assert_allclose(U @ plus, plus, atol=1e-15)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(topo.site_count), atol=1e-15)


def test_physical_backend_close_to_ideal(ideal, physical):
    a = physical.topo.index(ALICE)
    e_a = np.eye(physical.topo.site_count)[a]
    target = ideal.forward @ e_a
    assert abs(np.vdot(target, physical.forward @ e_a)) ** 2 > 0.9999
    assert abs(np.vdot(e_a, physical.reverse @ target)) ** 2 > 0.9999


def test_backend_needs_two_bobs():
    with pytest.raises(ValueError):
        ms.make_backend("ideal", ChainTopology(3))
    with pytest.raises(ValueError):
        ms.make_backend("quantum")


def test_controlled_u_acts_only_on_bob_rows(ideal):
    s = ms.RegisterState.on_bus(ideal.topo, "00", SiteId.bob(1))
    out = ms.apply_controlled_u(s, 2, 1, "X")
    np.testing.assert_array_equal(out.amps, s.amps)
    out = ms.apply_controlled_u(s, 1, 2, "X")
    np.testing.assert_array_equal(out.register_vector(SiteId.bob(1)), ms.bitstring_state("01"))
    with pytest.raises(ValueError):
        ms.apply_controlled_u(s, 1, 1, "Y")


def test_xx_on_zero_state(ideal):
    # XX|00> = |11>, so both outcomes are equally likely
    s = ms.RegisterState.on_bus(ideal.topo, "00")
    plus = ms.complete_measurement(s, "X", ideal, outcome=1)
    minus = ms.complete_measurement(s, "X", ideal, outcome=-1)
    assert plus.probability == pytest.approx(0.5) and minus.probability == pytest.approx(0.5)
    expect = (ms.bitstring_state("10") + ms.bitstring_state("01")) / math.sqrt(2)
    np.testing.assert_allclose(plus.post_state.register_vector(), expect, atol=1e-15)
    expect = (ms.bitstring_state("10") - ms.bitstring_state("01")) / math.sqrt(2)
    assert abs(np.vdot(expect, minus.post_state.register_vector())) == pytest.approx(1.0)
    assert minus.return_probability == pytest.approx(1.0, abs=1e-14)


def test_zz_eigenstate_is_deterministic(ideal):
    s = ms.RegisterState.on_bus(ideal.topo, "01")
    rec = ms.complete_measurement(s, "Z", ideal)
    assert rec.eigenvalue == -1 and rec.probability == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ms.complete_measurement(s, "Z", ideal, outcome=1)


def test_measurement_on_larger_register(ideal, rng):
    phi = random_state(rng, 3)
    s = ms.RegisterState.on_bus(ideal.topo, phi)
    rec = ms.complete_measurement(s, "X", ideal, targets=(1, 3), outcome=1)
    expect = float(np.vdot(phi, ms.pauli_string({1: "X", 3: "X"}, 3) @ phi).real)
    assert rec.probability == pytest.approx((1 + expect) / 2, abs=1e-12)


def test_bus_branches_sum_to_one(ideal, rng):
    s = ms.RegisterState(ideal.topo, (rng.normal(size=(6, 4)) + 0j) / math.sqrt(24))
    hit, miss = ms.alice_branches(s.replace(s.amps / s.norm))
    assert hit.probability + miss.probability == pytest.approx(1.0)


def test_sampled_outcomes_reproducible(ideal):
    s = ms.RegisterState.on_bus(ideal.topo, "00")
    a = [ms.complete_measurement(s, "X", ideal, rng=np.random.default_rng(7)).eigenvalue for _ in range(3)]
    b = [ms.complete_measurement(s, "X", ideal, rng=np.random.default_rng(7)).eigenvalue for _ in range(3)]
    assert a == b
    r = np.random.default_rng(3)
    seen = {ms.complete_measurement(s, "X", ideal, rng=r).eigenvalue for _ in range(40)}
    assert seen == {1, -1}


def test_transcript_record(ideal):
    rec = ms.complete_measurement(ms.RegisterState.on_bus(ideal.topo, "00"), "Z", ideal)
    assert rec.to_dict() == {
        "operator": "ZZ", "targets": [1, 2], "probability_plus": pytest.approx(1.0),
        "outcome": 1, "corrections_applied": [], "return_probability": 1.0,
    }


def test_ghz_corrections_recorded(ideal):
    res = ms.build_ghz(4, ideal, [-1, 1, -1])
    assert [r.corrections for r in res.records] == [["X1", "Z1"], ["X3"], ["Z2", "X3", "X4"]]
    assert res.fidelity() == pytest.approx(1.0)


def test_ghz_six_qubits(ideal):
    res = ms.build_ghz(6, ideal, rng=np.random.default_rng(11))
    assert res.fidelity() == pytest.approx(1.0)
    assert all(v == pytest.approx(1.0) for v in res.stabilizers().values())
    assert len(res.stabilizers()) == 6


def test_ghz_validation(ideal):
    with pytest.raises(ValueError):
        ms.build_ghz(3, ideal)
    with pytest.raises(ValueError):
        ms.build_ghz(4, ideal, [1, 1])

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oran_offload import cloud
from oran_offload.errors import EmptyCohort, NoPlacement, ZeroAllocation, ZeroCapacity
from oracles import cohort_ok, placement_oracle


def test_proportional_share_examples():
    assert cloud.proportional_share(10e9, 737, [737, 737]) == pytest.approx(5e9)
    assert cloud.proportional_share(10e9, 737, [737]) == pytest.approx(10e9)
    shares = cloud.proportional_share(30e9, np.array([737, 1474]), [737, 1474])
    np.testing.assert_allclose(shares, [10e9, 20e9])
    with pytest.raises(EmptyCohort):
        cloud.proportional_share(10e9, 1, [])


def test_admission_examples():
    assert cloud.admit(10e9, 4e9, 2e9) == 1
    assert cloud.admit(10e9, 10e9, 0.0) == 1
    assert cloud.admit(10e9, 10e9, 0.0, mode="literal") == 1
    assert cloud.admit(10e9, 4e9, 2e9, mode="literal") == 0
    assert cloud.admit(10e9, 9e9, 2e9) == 0
    with pytest.raises(ValueError):
        cloud.admit(1, 1, 0, mode="bogus")


def test_exec_and_propagation_examples():
    assert cloud.ec_exec_delay(2e6, 737, 5e9) == pytest.approx(0.2948)
    assert cloud.ec_exec_delay(2e6, 737, 10e9) == pytest.approx(0.2948 / 2)
    assert cloud.ec_exec_delay(8e6, 737, 20e9) == pytest.approx(0.2948)
    with pytest.raises(ZeroAllocation):
        cloud.ec_exec_delay(1, 1, 0.0)
    assert cloud.propagation_delay(2e5) == pytest.approx(1e-3)
    assert cloud.propagation_delay(0.0) == 0.0
    assert cloud.propagation_delay(2e6) == pytest.approx(10e-3)


def test_redirect_examples():
    assert cloud.redirect_decision(1e-3, 10e-3, True) == (1, 0)
    assert cloud.redirect_decision(1e-3, 10e-3, False) == (0, 1)
    assert cloud.redirect_decision(5e-3, 5e-3, True) == (1, 0)
    assert cloud.redirect_decision(11e-3, 10e-3, True) == (0, 1)


def test_transfer_examples():
    assert cloud.transfer_delay([7000e6], 7000e6) == pytest.approx(1.0)
    assert cloud.transfer_delay([], 7000e6) == 0.0
    assert cloud.transfer_delay([3e6, 4e6], 7000e6) == pytest.approx(1e-3)
    with pytest.raises(ZeroCapacity):
        cloud.transfer_delay([1.0], 0.0)


def test_total_offload_examples():
    assert cloud.total_offload_delay(1, 0, 0, 0.08, 0.01, ec_compute=0.2948) == pytest.approx(0.3848)
    peer = cloud.total_offload_delay(0, 1, 0, 0.08, 0.01, ec_compute=99.0, peer_transfer=0.001,
                                     peer_propagation=0.001, peer_compute=0.2948, rc_compute=99.0)
    assert peer == pytest.approx(0.08 + 0.01 + 0.001 + 0.001 + 0.2948)
    rc = cloud.total_offload_delay(0, 0, 1, 0.08, 0.01, rc_transfer=0.001, rc_propagation=0.01,
                                   rc_compute=0.2948)
    assert rc == pytest.approx(0.3958)
    with pytest.raises(NoPlacement):
        cloud.total_offload_delay(0, 0, 0, 0.08, 0.01)


@pytest.mark.parametrize("args, ok", [
    ((0, 0, 0, 0), True),
    ((1, 1, 0, 0), True),
    ((1, 0, 1, 1), False),
    ((1, 0, 0, 0), False),
    ((1, 1, 1, 0), False),
    ((0, 1, 0, 0), False),
    ((1, 0, 0, 1), True),
])
def test_exclusivity(args, ok):
    assert cloud.exclusivity_check(*args) is ok


def test_placement_decision_rejects_double_location():
    with pytest.raises(ValueError):
        cloud.PlacementDecision(0, 1, 1)


@given(st.lists(st.floats(0, 1), min_size=9, max_size=9), st.integers(0, 8))
def test_total_offload_monotone_in_components(vals, k):
    for flags in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        base = cloud.total_offload_delay(*flags, *vals)
        bumped = list(vals)
        bumped[k] += 0.5
        assert cloud.total_offload_delay(*flags, *bumped) >= base


def test_rc_chain_slower_than_peer_chain_in_default_geometry():
    # RC farther and slower-linked than the peer, same compute share
    up, fh, comp = 0.08, 0.01, 0.2948
    tr = cloud.transfer_delay([2e6], 7000e6)
    peer = cloud.total_offload_delay(0, 1, 0, up, fh, peer_transfer=tr,
                                     peer_propagation=cloud.propagation_delay(2e5), peer_compute=comp)
    rc = cloud.total_offload_delay(0, 0, 1, up, fh, rc_transfer=tr,
                                   rc_propagation=cloud.propagation_delay(2e6), rc_compute=comp)
    assert rc > peer


# -- shed-and-redirect placement against the explicit loop --------------------

def random_instance(rng, k, n_ec=3):
    home = rng.integers(0, n_ec, size=k)
    bits = rng.uniform(1e6, 8e6, size=k)
    workload = rng.choice([737.0, 1474.0, 500.0], size=k)
    deadline = rng.uniform(0.2, 1.2, size=k)
    ec_cpu = rng.uniform(10e9, 30e9, size=n_ec)
    reserve = rng.uniform(0, 3e9, size=n_ec) * rng.integers(0, 2)
    dist = rng.uniform(1e4, 3e5, size=(n_ec, n_ec))
    prop_peer = (dist + dist.T) / 2 / cloud.FIBER_SPEED
    np.fill_diagonal(prop_peer, 0.0)
    prop_rc = rng.uniform(2e5, 2e6, size=n_ec) / cloud.FIBER_SPEED
    return home, bits, workload, deadline, ec_cpu, reserve, prop_peer, prop_rc


@settings(max_examples=100)
@given(st.integers(0, 100_000), st.integers(1, 30), st.sampled_from(["semantic", "literal"]))
def test_auto_locations_match_oracle(seed, k, mode):
    inst = random_instance(np.random.default_rng(seed), k)
    ours = cloud.auto_locations(*inst, admission=mode)
    ref = placement_oracle(*inst, mode=mode)
    np.testing.assert_array_equal(ours, ref)


@settings(max_examples=60)
@given(st.integers(0, 100_000), st.integers(1, 30))
def test_placed_cohorts_fit_capacity_and_deadlines(seed, k):
    home, bits, workload, deadline, ec_cpu, reserve, pp, pr = random_instance(np.random.default_rng(seed), k)
    plc = cloud.resolve_placement(home, bits, workload, deadline, ec_cpu, 25e9, reserve, pp, pr,
                                  np.full((3, 3), 7000e6), np.full(3, 7000e6))
    assert np.all(plc.allocated <= ec_cpu * (1 + 1e-12))
    for n in range(3):
        members = np.flatnonzero(plc.location == n)
        if members.size:
            assert cohort_ok(members, ec_cpu[n], reserve[n], workload, bits * workload, deadline, "semantic")
    for v in range(k):
        assert cloud.exclusivity_check(1, plc.y[v], plc.to_peer[v], plc.to_rc[v])
    redirected = plc.location != home
    assert np.all(plc.transfer[redirected] > 0) and np.all(plc.transfer[~redirected] == 0)


def test_forced_rc_placement_uses_rc_links():
    home = np.array([0, 0, 1])
    bits = np.array([3e6, 4e6, 2e6])
    plc = cloud.resolve_placement(home, bits, np.full(3, 737.0), np.ones(3), np.full(3, 10e9), 20e9,
                                  np.zeros(3), np.full((3, 3), 1e-3), np.full(3, 1e-2),
                                  np.full((3, 3), 7000e6), np.full(3, 7000e6), forced=3)
    # both tasks from EC 0 share the EC0->RC link
    np.testing.assert_allclose(plc.transfer, [1e-3, 1e-3, 2e6 / 7000e6])
    np.testing.assert_allclose(plc.propagation, 1e-2)
    np.testing.assert_allclose(plc.share, 20e9 / 3)
    assert plc.to_rc.all() and not plc.allocated.any()

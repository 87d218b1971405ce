import numpy as np
import pytest

from wanify.errors import ValidationError
from wanify.planner import ConnectionPlan
from wanify.topology import (
    Dc,
    Topology,
    VmAssociation,
    associate_bandwidth,
    chunk_plan,
    haversine_miles,
    load_topology,
    preset_topology,
    read_matrix_csv,
    save_topology,
    write_matrix_csv,
)


def test_haversine_known_distance():
    # Washington DC to San Francisco, cross-checked against the
    # spherical law of cosines (agrees to 13 significant digits)
    d = haversine_miles((38.9072, -77.0369), (37.7749, -122.4194))
    assert d == pytest.approx(2434.898346, abs=1e-5)


def test_haversine_antipodal_is_half_circumference():
    import math

    d = haversine_miles((0.0, 0.0), (0.0, 180.0))
    assert d == pytest.approx(math.pi * 3958.8, rel=1e-12)


def test_haversine_zero_and_symmetry():
    assert haversine_miles((51.5, -0.1), (51.5, -0.1)) == 0.0
    a, b = (40.0, -75.0), (1.35, 103.8)
    assert haversine_miles(a, b) == haversine_miles(b, a)


def test_haversine_rejects_bad_coordinates():
    with pytest.raises(ValidationError):
        haversine_miles((91.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValidationError):
        haversine_miles((0.0, 0.0), (0.0, 181.0))


def test_dc_validation():
    with pytest.raises(ValidationError):
        Dc("", 0.0, 0.0)
    with pytest.raises(ValidationError):
        Dc("x", -95.0, 0.0)
    with pytest.raises(ValidationError):
        Dc("x", 0.0, 0.0, vm_count=0)


def test_topology_rejects_duplicates_and_bad_budget():
    dcs = (Dc("a", 0, 0), Dc("a", 1, 1))
    with pytest.raises(ValidationError):
        Topology(dcs)
    with pytest.raises(ValidationError):
        Topology((Dc("a", 0, 0),), max_parallel=0)
    with pytest.raises(ValidationError):
        Topology(())


def test_distance_matrix_symmetric_zero_diagonal():
    topo = preset_topology("global8")
    d = topo.distance_matrix()
    assert d.shape == (8, 8)
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0.0)
    assert np.all(d[~np.eye(8, dtype=bool)] > 0)


def test_presets():
    assert preset_topology("fig3dc").n == 3
    assert preset_topology("global8").n == 8
    with pytest.raises(ValidationError):
        preset_topology("nope")


def test_vm_association_contiguity():
    a = VmAssociation((0, 0, 1, 2, 2))
    assert a.n_vms == 5
    assert a.n_dcs == 3
    assert a.vms_of(0) == [0, 1]
    assert a.vms_of(2) == [3, 4]
    with pytest.raises(ValidationError):
        VmAssociation((0, 1, 0))  # DC 0 split in two runs
    with pytest.raises(ValidationError):
        VmAssociation((0, 2))  # gap in DC ids
    with pytest.raises(ValidationError):
        VmAssociation(())


def test_topology_vm_association():
    topo = Topology((Dc("a", 0, 0, vm_count=2), Dc("b", 1, 1, vm_count=1)))
    assert topo.vm_association().vm_to_dc == (0, 0, 1)


def test_associate_bandwidth_sums_blocks():
    # 3 VMs, DC0 owns the first two
    assoc = VmAssociation((0, 0, 1))
    m = np.array(
        [
            [0.0, 1.0, 10.0],
            [2.0, 0.0, 20.0],
            [5.0, 6.0, 0.0],
        ]
    )
    out = associate_bandwidth(m, assoc)
    assert out.shape == (2, 2)
    assert out[0, 1] == 30.0
    assert out[1, 0] == 11.0
    assert out[0, 0] == 3.0  # intra-DC block sums too


def test_associate_bandwidth_identity_for_single_vms():
    assoc = VmAssociation((0, 1, 2))
    m = np.arange(9, dtype=float).reshape(3, 3)
    assert np.array_equal(associate_bandwidth(m, assoc), m)


def test_associate_bandwidth_validation():
    assoc = VmAssociation((0, 1))
    with pytest.raises(ValidationError):
        associate_bandwidth(np.ones((3, 3)), assoc)
    with pytest.raises(ValidationError):
        associate_bandwidth(np.full((2, 2), -1.0), assoc)


def test_chunk_plan_splits_connections_evenly():
    plan = ConnectionPlan(
        [[1, 2], [2, 1]],
        [[1, 5], [5, 1]],
        [[0.0, 200.0], [200.0, 0.0]],
        [[0.0, 500.0], [500.0, 0.0]],
    )
    assoc = VmAssociation((0, 0, 1))  # DC0 has 2 VMs -> 2 VM pairs towards DC1
    vp = chunk_plan(plan, assoc)
    assert vp.n == 3
    # 5 connections across 2 VM pairs -> 3 + 2, remainder to the lowest index
    assert vp.max_cons[0, 2] == 3 and vp.max_cons[1, 2] == 2
    # bandwidth splits proportionally so per-connection rate is kept
    assert vp.max_bw[0, 2] == pytest.approx(500.0 * 3 / 5)
    assert vp.max_bw[1, 2] == pytest.approx(500.0 * 2 / 5)
    assert vp.min_bw[0, 2] + vp.min_bw[1, 2] == pytest.approx(200.0)


def test_chunk_plan_even_split():
    plan = ConnectionPlan([[1, 1], [1, 1]], [[1, 8], [8, 1]],
                          np.zeros((2, 2)), [[0.0, 800.0], [800.0, 0.0]])
    vp = chunk_plan(plan, VmAssociation((0, 0, 1)))
    assert vp.max_cons[0, 2] == 4 and vp.max_cons[1, 2] == 4


def test_chunk_plan_conserves_counts_and_allows_zero():
    # 1 connection over 4 intra-DC VM pairs: one pair carries it, the
    # rest open nothing; sums always match the DC-level plan exactly
    plan = ConnectionPlan([[1, 2], [2, 1]], [[1, 5], [5, 1]],
                          np.zeros((2, 2)), [[0.0, 500.0], [500.0, 0.0]])
    assoc = VmAssociation((0, 0, 1))
    vp = chunk_plan(plan, assoc)
    block = vp.max_cons[np.ix_([0, 1], [0, 1])]
    assert block.sum() == 1 and block.max() == 1
    for i, vms_i in enumerate(([0, 1], [2])):
        for j, vms_j in enumerate(([0, 1], [2])):
            assert vp.max_cons[np.ix_(vms_i, vms_j)].sum() == plan.max_cons[i, j]
            assert vp.min_cons[np.ix_(vms_i, vms_j)].sum() == plan.min_cons[i, j]


def test_chunk_plan_identity_for_single_vms():
    plan = ConnectionPlan([[1, 2], [2, 1]], [[1, 5], [5, 1]],
                          np.zeros((2, 2)), [[0.0, 500.0], [500.0, 0.0]])
    vp = chunk_plan(plan, VmAssociation((0, 1)))
    assert np.array_equal(vp.max_cons, plan.max_cons)
    assert np.array_equal(vp.min_cons, plan.min_cons)
    assert np.allclose(vp.max_bw, plan.max_bw)


def test_chunk_plan_size_mismatch():
    plan = ConnectionPlan([[1]], [[1]], [[0.0]], [[0.0]])
    with pytest.raises(ValidationError):
        chunk_plan(plan, VmAssociation((0, 1)))


def test_topology_json_roundtrip(tmp_path):
    topo = preset_topology("fig3dc")
    p = tmp_path / "topo.json"
    save_topology(topo, p)
    back = load_topology(p)
    assert back == topo


def test_load_topology_rejects_garbage(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("not json")
    with pytest.raises(ValidationError):
        load_topology(p)
    p.write_text('{"no_dcs": []}')
    with pytest.raises(ValidationError):
        load_topology(p)


def test_matrix_csv_roundtrip(tmp_path):
    m = np.array([[1.5, 2.25], [3.0, 4.125]])
    p = tmp_path / "m.csv"
    write_matrix_csv(p, m, ["a", "b"], seed=17)
    seed, names, back = read_matrix_csv(p)
    assert seed == 17
    assert names == ["a", "b"]
    assert np.allclose(back, m)


def test_matrix_csv_without_seed(tmp_path):
    p = tmp_path / "m.csv"
    write_matrix_csv(p, np.eye(2), ["a", "b"])
    seed, names, back = read_matrix_csv(p)
    assert seed is None
    assert np.allclose(back, np.eye(2))


def test_matrix_csv_errors(tmp_path):
    p = tmp_path / "m.csv"
    with pytest.raises(ValidationError):
        write_matrix_csv(p, np.ones((2, 3)), ["a", "b"])
    p.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(ValidationError):
        read_matrix_csv(p)  # not square
    p.write_text("a,b\n1.0\n2.0,3.0\n")
    with pytest.raises(ValidationError):
        read_matrix_csv(p)
    p.write_text("")
    with pytest.raises(ValidationError):
        read_matrix_csv(p)
    with pytest.raises(ValidationError):
        read_matrix_csv(tmp_path / "missing.csv")

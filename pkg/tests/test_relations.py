import numpy as np
import pytest

from wanify.errors import ValidationError
from wanify.relations import closeness_for, infer_dc_relations, unique_filtered_levels

# worked 3-DC matrix used throughout: two US-ish regions and one far one
BW = [[1000, 400, 120], [380, 1000, 130], [110, 120, 1000]]


def test_level_filtering_golden():
    # 120 and 130 fall inside the 30 Mbps window of 110; 400 inside 380's
    assert unique_filtered_levels(BW, gap=30) == [110.0, 380.0, 1000.0]


def test_closeness_matrix_golden():
    rel = infer_dc_relations(BW, gap=30)
    assert rel.tolist() == [[1, 2, 3], [2, 1, 3], [3, 3, 1]]


def test_filter_walks_top_down():
    # chained near-duplicates collapse onto the lowest member: 180 falls
    # within 50 of 140, then 140 within 50 of 100
    assert unique_filtered_levels([[100, 140], [180, 1000]], gap=50) == [100.0, 1000.0]


def test_single_level_everything_rank_one():
    rel = infer_dc_relations([[500.0, 500.0], [500.0, 500.0]])
    assert rel.tolist() == [[1, 1], [1, 1]]


def test_closeness_for_exact_and_nearest():
    levels = [100.0, 400.0, 1000.0]
    assert closeness_for(1000.0, levels) == 1
    assert closeness_for(400.0, levels) == 2
    assert closeness_for(100.0, levels) == 3
    # nearest level wins on a miss
    assert closeness_for(900.0, levels) == 1
    assert closeness_for(420.0, levels) == 2
    # midpoint ties resolve to the lower (slower) level
    assert closeness_for(250.0, levels) == 3
    # out of range clamps
    assert closeness_for(5.0, levels) == 3
    assert closeness_for(5000.0, levels) == 1


def test_closeness_for_empty_levels():
    with pytest.raises(ValidationError):
        closeness_for(1.0, [])


def test_validation():
    with pytest.raises(ValidationError):
        unique_filtered_levels(BW, gap=0)
    with pytest.raises(ValidationError):
        infer_dc_relations([[1.0, 2.0]])
    with pytest.raises(ValidationError):
        infer_dc_relations([[1.0, -2.0], [1.0, 1.0]])
    with pytest.raises(ValidationError):
        infer_dc_relations([[np.inf, 1.0], [1.0, 1.0]])


def test_value_monotonicity_random():
    """More bandwidth never makes a pair look farther away."""
    rng = np.random.default_rng(11)
    for _ in range(300):
        k = int(rng.integers(1, 6))
        levels = sorted(float(x) for x in rng.uniform(10, 2000, size=k))
        v1, v2 = sorted(rng.uniform(0, 2500, size=2))
        assert closeness_for(v1, levels) >= closeness_for(v2, levels)


def test_scale_invariance_random():
    # ranking only depends on relative structure, so scaling the matrix
    # and the gap together changes nothing
    rng = np.random.default_rng(12)
    for _ in range(300):
        n = int(rng.integers(2, 6))
        m = rng.uniform(50, 1500, size=(n, n))
        gap = float(rng.uniform(20, 200))
        alpha = float(rng.uniform(0.1, 10.0))
        base = infer_dc_relations(m, gap=gap)
        scaled = infer_dc_relations(alpha * m, gap=alpha * gap)
        assert np.array_equal(base, scaled)

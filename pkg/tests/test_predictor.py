import numpy as np
import pytest

from wanify.errors import ValidationError
from wanify.predictor import (
    FeatureVector,
    RegressionTree,
    StalenessTracker,
    TrainingSample,
    load_model,
    predict,
    read_dataset_csv,
    save_model,
    track_staleness,
    train,
    warm_retrain,
    write_dataset_csv,
)


def fv(bw, n=4, dist=1000.0, mem=0.3, cpu_s=0.2, cpu_d=0.2, retrans=2.0):
    return FeatureVector(n, bw, mem, cpu_s, cpu_d, retrans, dist)


def make_samples(n, seed=0, noise=0.0):
    """Synthetic corpus where the target is a simple function of the
    snapshot value and distance, optionally noisy."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        bw = float(rng.uniform(50, 1500))
        dist = float(rng.uniform(100, 9000))
        target = 0.6 * bw + 20000.0 / (dist + 100.0) + float(rng.normal(0, noise))
        out.append(TrainingSample(fv(bw, dist=dist), target, sample_id=k))
    return out


def test_tree_fits_constant_leaf():
    t = RegressionTree()
    X = np.zeros((5, 2))
    t.fit(X, np.full(5, 7.0))
    assert np.all(t.predict(np.zeros((3, 2))) == 7.0)


def test_tree_learns_a_step():
    X = np.array([[x] for x in range(20)], dtype=float)
    y = np.where(X[:, 0] < 10, 1.0, 5.0)
    t = RegressionTree(min_leaf=1)
    t.fit(X, y)
    assert t.predict([[3.0]])[0] == pytest.approx(1.0)
    assert t.predict([[15.0]])[0] == pytest.approx(5.0)


def test_tree_shape_validation():
    t = RegressionTree()
    with pytest.raises(ValidationError):
        t.fit(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValidationError):
        t.fit(np.zeros((0, 2)), np.zeros(0))


def test_forest_beats_mean_baseline():
    samples = make_samples(400, seed=3, noise=5.0)
    model = train(samples, n_trees=30, seed=1)
    test = make_samples(150, seed=4, noise=5.0)
    X = np.array([s.features.as_array() for s in test])
    y = np.array([s.target for s in test])
    mae = np.abs(model.predict_rows(X) - y).mean()
    base = np.abs(y.mean() - y).mean()
    assert mae < 0.5 * base


def test_training_is_deterministic():
    samples = make_samples(120, seed=7, noise=3.0)
    m1 = train(samples, n_trees=8, seed=42)
    m2 = train(samples, n_trees=8, seed=42)
    X = np.array([s.features.as_array() for s in make_samples(40, seed=8)])
    assert np.array_equal(m1.predict_rows(X), m2.predict_rows(X))
    assert m1.training_mae == m2.training_mae


def test_different_seed_different_forest():
    samples = make_samples(120, seed=7, noise=3.0)
    m1 = train(samples, n_trees=8, seed=1)
    m2 = train(samples, n_trees=8, seed=2)
    X = np.array([s.features.as_array() for s in make_samples(40, seed=8)])
    assert not np.array_equal(m1.predict_rows(X), m2.predict_rows(X))


def test_train_input_validation():
    with pytest.raises(ValidationError):
        train(make_samples(5))
    with pytest.raises(ValidationError):
        train(make_samples(50), n_trees=0)


def test_predict_matrix_diagonal_passthrough():
    samples = make_samples(60, seed=2)
    model = train(samples, n_trees=5, seed=0)
    grid = [[fv(2000.0), fv(300.0)], [fv(250.0), fv(2000.0)]]
    out = predict(model, grid)
    assert out.shape == (2, 2)
    assert out[0, 0] == 2000.0 and out[1, 1] == 2000.0
    assert out[0, 1] != 300.0  # off-diagonal actually predicted
    with pytest.raises(ValidationError):
        predict(model, [[fv(1.0)], [fv(1.0)]])


def test_model_json_roundtrip(tmp_path):
    samples = make_samples(80, seed=5)
    model = train(samples, n_trees=6, seed=9)
    p = tmp_path / "model.json"
    save_model(model, p)
    back = load_model(p)
    X = np.array([s.features.as_array() for s in make_samples(30, seed=6)])
    assert np.array_equal(back.predict_rows(X), model.predict_rows(X))
    assert back.seed == 9 and back.n_trees == 6
    assert back.next_tree_id == model.next_tree_id


def test_load_model_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{broken")
    with pytest.raises(ValidationError):
        load_model(p)
    p.write_text('{"n_trees": 1}')
    with pytest.raises(ValidationError):
        load_model(p)


def test_warm_retrain_keeps_size_and_rolls_ids():
    samples = make_samples(100, seed=1, noise=2.0)
    model = train(samples, n_trees=8, seed=0)
    old_ids = model.next_tree_id
    warm_retrain(model, make_samples(30, seed=2, noise=2.0))
    assert len(model.trees) == 8
    assert model.next_tree_id == old_ids + 2  # ceil(8 * 0.25)
    assert len(model.samples) == 130
    with pytest.raises(ValidationError):
        warm_retrain(model, [])


def test_warm_retrain_adapts_to_shifted_data():
    rng = np.random.default_rng(0)
    old = [TrainingSample(fv(float(b)), 100.0) for b in rng.uniform(50, 500, 60)]
    model = train(old, n_trees=8, seed=0)
    assert model.predict_rows([fv(200.0).as_array()])[0] == pytest.approx(100.0)
    # four quarter-refreshes replace every original tree, and the corpus
    # becomes mostly shifted, so predictions must move well off 100
    for _ in range(4):
        shifted = [TrainingSample(fv(float(b)), 900.0) for b in rng.uniform(50, 500, 60)]
        warm_retrain(model, shifted)
    assert model.predict_rows([fv(200.0).as_array()])[0] > 400.0


def test_staleness_tracker_window():
    tr = StalenessTracker(error_threshold=50.0, window_size=3)
    track_staleness(tr, 100.0, 120.0)
    assert not tr.retrain_flag
    track_staleness(tr, 100.0, 300.0)
    assert tr.retrain_flag  # mean(20, 200) = 110 > 50
    track_staleness(tr, 100.0, 100.0)
    track_staleness(tr, 100.0, 100.0)
    track_staleness(tr, 100.0, 100.0)
    assert not tr.retrain_flag  # old spike rolled out of the window
    with pytest.raises(ValidationError):
        StalenessTracker(error_threshold=0.0)
    with pytest.raises(ValidationError):
        StalenessTracker(window_size=0)


def test_dataset_csv_roundtrip(tmp_path):
    samples = make_samples(25, seed=9)
    p = tmp_path / "d.csv"
    write_dataset_csv(samples, p, seed=13)
    back = read_dataset_csv(p)
    assert len(back) == 25
    assert back[0].features.n_dcs == samples[0].features.n_dcs
    assert back[3].target == pytest.approx(samples[3].target, abs=1e-6)
    assert back[0].static_bw is None  # auxiliary field is not serialized
    assert "# seed=13" in p.read_text().splitlines()[0]


def test_read_dataset_rejects_wrong_schema(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValidationError):
        read_dataset_csv(p)
    p.write_text("")
    with pytest.raises(ValidationError):
        read_dataset_csv(p)

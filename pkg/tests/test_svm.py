import numpy as np
import pytest

from gesturelab.errors import DimensionMismatch, InsufficientData, SingleClassData
from gesturelab.fusion import FusionConfig, fit_pca
from gesturelab.svm import (
    BinarySvmModel,
    KernelCache,
    KernelParams,
    MulticlassSvm,
    Preprocessing,
    classify,
    decision_values,
    grid_search,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    rbf_kernel,
    rbf_kernel_matrix,
    save_model,
    smo_solve,
    train_binary,
    train_multiclass,
    vote_table,
)
from gesturelab.tracking import FeatureMask
from oracles import dual_objective, jacobi_eigh, svm_dual_solve_pg


def make_blobs(rng, centers, per_class=20, spread=0.4):
    X = np.vstack([rng.normal(c, spread, size=(per_class, len(c))) for c in centers])
    y = np.repeat(np.arange(len(centers)), per_class)
    return X, y


# ---------------------------------------------------------------------------
# Kernel


def test_rbf_kernel_identical_points():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.5) == 1.0


def test_rbf_kernel_unit_exponent():
    gamma = 0.25
    x = np.zeros(3)
    y = np.array([2.0, 0.0, 0.0])  # ||x-y||^2 = 4 = 1/gamma
    assert rbf_kernel(x, y, gamma) == pytest.approx(np.exp(-1.0), abs=1e-15)


def test_rbf_kernel_small_gamma_limit():
    x, y = np.zeros(2), np.ones(2)
    values = [rbf_kernel(x, y, g) for g in (1.0, 0.1, 0.01, 0.001)]
    assert np.all(np.diff(values) > 0)
    assert values[-1] > 0.99


def test_rbf_kernel_symmetry_and_range(rng):
    for _ in range(20):
        x, y = rng.normal(size=(2, 5))
        g = rng.uniform(0.01, 2.0)
        k = rbf_kernel(x, y, g)
        assert 0.0 < k <= 1.0
        assert k == rbf_kernel(y, x, g)


def test_rbf_kernel_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        rbf_kernel(np.zeros(3), np.zeros(4), 1.0)


def test_kernel_matrix_is_psd(rng):
    for _ in range(5):
        X = rng.normal(size=(int(rng.integers(5, 20)), 4))
        K = rbf_kernel_matrix(X, X, rng.uniform(0.05, 1.0))
        vals, _ = jacobi_eigh(K)
        assert vals.min() >= -1e-8
        assert np.abs(K - K.T).max() == 0.0


def test_kernel_cache_modes_bit_identical(rng):
    X = rng.normal(size=(30, 4))
    full = KernelCache(X, 0.3)
    lru = KernelCache(X, 0.3, full_limit=0, lru_rows=4)
    for i in [0, 7, 7, 29, 3, 0, 11, 7]:
        assert np.array_equal(full.row(i), lru.row(i))


# ---------------------------------------------------------------------------
# Binary training


def test_two_point_instance():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    y = np.array([1, -1])
    model = train_binary(X, y, KernelParams(c=10.0, gamma=1.0))
    assert len(model.support_vectors) == 2
    vals = decision_values(model, X)
    assert np.all(np.sign(vals) == y)


def test_xor_with_rbf():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1, 1, -1, -1])
    model = train_binary(X, y, KernelParams(c=1000.0, gamma=1.0))
    vals = decision_values(model, X)
    assert np.all(np.sign(vals) == y)


def test_single_class_rejected():
    with pytest.raises(SingleClassData):
        train_binary(np.zeros((3, 2)), np.array([1, 1, 1]), KernelParams(1.0, 1.0))


def test_smo_matches_projected_gradient_oracle(rng):
    for _ in range(10):
        n = int(rng.integers(4, 13))
        d = int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = np.concatenate([[1, -1], rng.choice([1.0, -1.0], size=n - 2)])
        c = float(rng.uniform(0.5, 10.0))
        gamma = float(rng.uniform(0.1, 2.0))
        K = rbf_kernel_matrix(X, X, gamma)
        result = smo_solve(KernelCache(X, gamma), y, c, tol=1e-6)
        alpha_pg = svm_dual_solve_pg(K, y, c)
        assert result.alpha.min() >= 0.0
        assert result.alpha.max() <= c + 1e-8
        assert abs(np.dot(result.alpha, y)) <= 1e-8
        smo_obj = dual_objective(K, y, result.alpha)
        pg_obj = dual_objective(K, y, alpha_pg)
        assert abs(smo_obj - pg_obj) < 1e-4


def test_free_support_vectors_sit_on_margin(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (4.0, 0.0)], per_class=20, spread=0.8)
    y = np.where(y01 == 0, 1, -1)
    model = train_binary(X, y, KernelParams(c=5.0, gamma=0.3), tol=1e-8)
    coefs = np.abs(model.dual_coefs)
    free = (coefs > 1e-6) & (coefs < 5.0 - 1e-6)
    assert free.any()
    vals = decision_values(model, model.support_vectors[free])
    assert np.abs(np.abs(vals) - 1.0).max() < 1e-6


def test_zero_slack_implies_perfect_training_accuracy(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (6.0, 0.0)], per_class=15)
    y = np.where(y01 == 0, 1, -1)
    model = train_binary(X, y, KernelParams(c=100.0, gamma=0.5), tol=1e-5)
    vals = decision_values(model, X)
    assert np.all(np.abs(vals) >= 1.0 - 1e-3)  # separated with zero slack
    assert np.all(np.sign(vals) == y)


# ---------------------------------------------------------------------------
# Decision values


def test_decision_matches_bruteforce_resummation(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (3.0, 1.0)], per_class=10)
    y = np.where(y01 == 0, 1, -1)
    model = train_binary(X, y, KernelParams(c=2.0, gamma=0.4))
    probes = rng.normal(size=(20, 2))
    vals = decision_values(model, probes)
    for row, expected in zip(probes, vals):
        brute = sum(
            coef * rbf_kernel(sv, row, model.params.gamma)
            for coef, sv in zip(model.dual_coefs, model.support_vectors)
        )
        assert abs(brute + model.bias - expected) < 1e-12


def test_decision_invariant_to_sv_permutation(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (3.0, 1.0)], per_class=10)
    y = np.where(y01 == 0, 1, -1)
    model = train_binary(X, y, KernelParams(c=2.0, gamma=0.4))
    perm = rng.permutation(len(model.support_vectors))
    shuffled = BinarySvmModel(
        support_vectors=model.support_vectors[perm],
        dual_coefs=model.dual_coefs[perm],
        bias=model.bias,
        params=model.params,
    )
    probes = rng.normal(size=(10, 2))
    assert np.abs(decision_values(model, probes) - decision_values(shuffled, probes)).max() < 1e-12


def test_decision_dimension_mismatch(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (3.0, 1.0)], per_class=5)
    model = train_binary(X, np.where(y01 == 0, 1, -1), KernelParams(1.0, 1.0))
    with pytest.raises(DimensionMismatch):
        decision_values(model, np.zeros(3))


def test_dual_coefs_bounded_by_c(rng):
    X, y01 = make_blobs(rng, [(0.0, 0.0), (1.0, 0.5)], per_class=12, spread=0.8)
    params = KernelParams(c=3.0, gamma=0.5)
    model = train_binary(X, np.where(y01 == 0, 1, -1), params)
    assert np.abs(model.dual_coefs).max() <= params.c + 1e-8
    assert len(model.support_vectors) >= 1


# ---------------------------------------------------------------------------
# Multi-class


def test_ten_classes_yield_45_pairs(rng):
    X, y = make_blobs(rng, [(3 * k, 3 * (k % 3)) for k in range(10)], per_class=4)
    model = train_multiclass(X, y, KernelParams(c=10.0, gamma=0.5))
    assert model.n_pairs == 45


def test_two_class_multiclass_equals_binary(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (4.0, 0.0)], per_class=10)
    model = train_multiclass(X, y, KernelParams(c=10.0, gamma=0.5))
    assert model.n_pairs == 1
    binary = model.models[(0, 1)]
    probes = rng.normal(size=(20, 2)) * 2
    multi_pred = predict(model, probes)
    binary_pred = np.where(decision_values(binary, probes) >= 0, 0, 1)
    assert np.array_equal(multi_pred, binary_pred)


def test_three_blobs_perfect_training(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)], per_class=20)
    model = train_multiclass(X, y, KernelParams(c=10.0, gamma=0.5))
    assert model.n_pairs == 3
    assert np.mean(predict(model, X) == y) == 1.0


def test_deep_blob_point_gets_two_votes(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)], per_class=20)
    model = train_multiclass(X, y, KernelParams(c=10.0, gamma=0.5))
    labels, votes_won = classify(model, np.array([[0.0, 5.0]]))
    assert labels[0] == 2
    assert votes_won[0] == 2


def test_vote_totals_sum_to_pair_count(rng):
    X, y = make_blobs(rng, [(2 * k, 0.0) for k in range(5)], per_class=8)
    model = train_multiclass(X, y, KernelParams(c=10.0, gamma=0.5))
    votes, _ = vote_table(model, rng.normal(size=(30, 2)) * 4)
    assert np.all(votes.sum(axis=1) == 10)  # 5*4/2


def _stub_binary(bias):
    # decision ~= bias everywhere near the origin: the one support vector
    # is far away, so its kernel contribution vanishes
    return BinarySvmModel(
        support_vectors=np.array([[1000.0]]),
        dual_coefs=np.array([1e-12]),
        bias=bias,
        params=KernelParams(c=1.0, gamma=1.0),
    )


def test_cyclic_tie_broken_by_margin_sum():
    model = MulticlassSvm(
        classes=[0, 1, 2],
        models={
            (0, 1): _stub_binary(0.5),  # votes 0
            (1, 2): _stub_binary(0.9),  # votes 1
            (0, 2): _stub_binary(-0.7),  # votes 2
        },
    )
    x = np.array([0.0])
    votes, margins = vote_table(model, x)
    assert np.array_equal(votes[0], [1, 1, 1])
    # margin sums: class0 = 1.2, class1 = 1.4, class2 = 1.6
    assert predict(model, x) == 2
    assert predict(model, x) == 2  # deterministic on repeat


def test_multiclass_single_class_pair_reports_identity():
    X = np.zeros((4, 2))
    y = np.array([0, 0, 1, 1])
    # make one pair degenerate by duplicating labels
    with pytest.raises(SingleClassData):
        train_binary(X[:2], np.array([1, 1]), KernelParams(1.0, 1.0))


def test_multiclass_workers_match_sequential(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)], per_class=10)
    params = KernelParams(c=10.0, gamma=0.5)
    seq = train_multiclass(X, y, params, workers=1)
    par = train_multiclass(X, y, params, workers=3)
    probes = rng.normal(size=(20, 2)) * 3
    assert np.array_equal(predict(seq, probes), predict(par, probes))
    for pair in seq.models:
        assert np.array_equal(seq.models[pair].dual_coefs, par.models[pair].dual_coefs)


# ---------------------------------------------------------------------------
# Grid search


def test_grid_search_cell_count(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (6.0, 0.0)], per_class=10)
    params, table = grid_search(
        X, y, [1.0, 10.0, 100.0, 1000.0], [1e-4, 1e-3, 1e-2, 1e-1, 1.0], folds=2, seed=3
    )
    assert len(table) == 20
    assert all(0.0 <= row["accuracy"] <= 1.0 for row in table)


def test_grid_search_single_cell(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (6.0, 0.0)], per_class=10)
    params, table = grid_search(X, y, [7.0], [0.3], folds=2, seed=3)
    assert params == KernelParams(c=7.0, gamma=0.3)
    assert len(table) == 1


def test_grid_search_tie_prefers_smaller_c_then_gamma(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (10.0, 0.0)], per_class=10, spread=0.2)
    params, table = grid_search(X, y, [10.0, 1.0], [1.0, 0.1], folds=2, seed=3)
    assert all(row["accuracy"] == 1.0 for row in table)  # everything separates
    assert params == KernelParams(c=1.0, gamma=0.1)


def test_grid_search_insufficient_data(rng):
    X = rng.normal(size=(5, 2))
    y = np.array([0, 1, 1, 1, 1])
    with pytest.raises(InsufficientData):
        grid_search(X, y, [1.0], [0.1], folds=2, seed=0)


def test_grid_search_degrades_folds_with_warning(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (6.0, 0.0)], per_class=3, spread=0.2)
    with pytest.warns(UserWarning, match="reducing folds"):
        params, table = grid_search(X, y, [1.0], [0.5], folds=10, seed=0)
    assert len(table) == 1


def test_stratified_folds_cover_classes(rng):
    from gesturelab.svm import stratified_folds

    labels = np.repeat(np.arange(4), 12)
    fold_of = stratified_folds(labels, 3, seed=5)
    for f in range(3):
        held = labels[fold_of == f]
        assert set(held.tolist()) == {0, 1, 2, 3}
        assert len(held) == 16


# ---------------------------------------------------------------------------
# Serialization


def test_model_roundtrip_with_preprocessing(tmp_path, rng):
    mask = FeatureMask.parse("ang+dist")
    hog_dim = 6
    raw = np.hstack([rng.normal(size=(40, mask.dims())), rng.normal(size=(40, hog_dim))])
    labels = np.repeat([0, 1], 20)
    fusion = FusionConfig(mask=mask, hog_weight=3.0, hog_dim=hog_dim)
    pre = Preprocessing(fusion=fusion, pca=fit_pca(raw, retained_fraction=0.9))
    model = train_multiclass(pre.apply(raw), labels, KernelParams(5.0, 0.2), preprocessing=pre)

    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)

    probes = np.hstack(
        [rng.normal(size=(15, mask.dims())), rng.normal(size=(15, hog_dim))]
    )
    assert np.array_equal(predict(model, probes), predict(loaded, probes))
    for pair in model.models:
        a, b = model.models[pair], loaded.models[pair]
        assert np.array_equal(a.support_vectors, b.support_vectors)
        assert np.array_equal(a.dual_coefs, b.dual_coefs)
        assert a.bias == b.bias


def test_model_version_check(rng):
    X, y = make_blobs(rng, [(0.0, 0.0), (4.0, 0.0)], per_class=5)
    model = train_multiclass(X, y, KernelParams(1.0, 0.5))
    data = model_to_dict(model)
    data["version"] = 99
    from gesturelab.errors import SchemaVersionMismatch

    with pytest.raises(SchemaVersionMismatch):
        model_from_dict(data)

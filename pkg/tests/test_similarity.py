import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairtransfer.distance import DistanceMetric
from pairtransfer.errors import DegenerateSimilarityError, InsufficientDataError, PairingError
from pairtransfer.similarity import (
    EPS_BW,
    DifferenceSet,
    DomainWeights,
    KdeModel,
    compute_ipd_report,
    domain_weights,
    empirical_difference,
    fit_kde,
    ipd_estimate,
    ipd_from_samples,
    noise_floor,
    rank_influential,
    sample_kde,
    silverman_bandwidth,
    weights_from_report_dict,
)
from pairtransfer.distance import distance
from pairtransfer.timeseries import DomainDataset, PairedMultiSourceDataset

from conftest import make_dataset

EUC = DistanceMetric("euclidean")
DTW = DistanceMetric("dtw")


def mixture_density(x, centers, h):
    """Independent evaluation of (1/N) sum_n N(x; D_n, diag(h)) in plain loops."""
    centers = np.atleast_2d(centers)
    total = 0.0
    for c in centers:
        q = 1.0
        for xk, ck, hk in zip(x, c, h):
            q *= np.exp(-((xk - ck) ** 2) / (2 * hk)) / np.sqrt(2 * np.pi * hk)
        total += q
    return total / len(centers)


# --- empirical differences --------------------------------------------------------


def test_identical_domains_give_zero_vectors(small_dataset):
    d = small_dataset.domains[1]
    diffs = empirical_difference(d, d, DTW)
    assert diffs.vectors.shape == (small_dataset.N, small_dataset.K)
    assert not diffs.vectors.any()


def test_hand_built_euclidean_difference():
    src = DomainDataset("s", np.array([[[0.0, 0.0], [1.0, 1.0]]]), ["p"])
    tgt = DomainDataset("t", np.array([[[3.0, 4.0], [1.0, 1.0]]]), ["p"])
    np.testing.assert_array_equal(empirical_difference(src, tgt, EUC).vectors, [[5.0, 0.0]])


def test_difference_entries_match_single_calls():
    ds = make_dataset(V=2, N=10, K=3, T=9, seed=5)
    src, tgt = ds.domains[1], ds.domains[0]
    diffs = empirical_difference(src, tgt, DTW)
    for n in range(10):
        for k in range(3):
            assert diffs.vectors[n, k] == distance(DTW, src.values[n, k], tgt.values[n, k])


def test_unpaired_difference_rejected():
    a = DomainDataset("a", np.zeros((3, 1, 4)), ["p"] * 3)
    b = DomainDataset("b", np.zeros((2, 1, 4)), ["p"] * 2)
    with pytest.raises(PairingError):
        empirical_difference(a, b, EUC)


def test_negative_difference_rejected():
    with pytest.raises(ValueError):
        DifferenceSet("x", np.array([[-1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.integers(0, 10_000))
def test_euclidean_difference_scale_covariance(c, seed):
    ds = make_dataset(V=2, N=5, K=2, T=4, seed=seed)
    src, tgt = ds.domains[1], ds.domains[0]
    base = empirical_difference(src, tgt, EUC).vectors
    scaled = empirical_difference(
        DomainDataset("s", src.values * c, src.subject_ids),
        DomainDataset("t", tgt.values * c, tgt.subject_ids),
        EUC,
    ).vectors
    np.testing.assert_allclose(scaled, c * base, rtol=1e-12, atol=0)


# --- kernel density ------------------------------------------------------------------


def test_silverman_hand_value():
    # K=1, centers {0, 2}: sample std sqrt(2), factor (4/3)^(1/5) * 2^(-1/5)
    expected = ((4 / 3) ** 0.2 * 2 ** -0.2 * np.sqrt(2)) ** 2
    assert silverman_bandwidth([[0.0], [2.0]])[0] == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(2 * (2 / 3) ** 0.4, rel=1e-14)


def test_degenerate_dispersion_uses_eps():
    model = fit_kde(DifferenceSet("s", np.ones((5, 3))))
    np.testing.assert_array_equal(model.H, EPS_BW * np.eye(3))


def test_kde_needs_two_vectors():
    with pytest.raises(InsufficientDataError):
        fit_kde(DifferenceSet("s", np.ones((1, 2))))


def test_density_matches_mixture_sum():
    rng = np.random.default_rng(0)
    centers = np.abs(rng.normal(size=(7, 3)))
    model = fit_kde(DifferenceSet("s", centers))
    pts = rng.normal(size=(25, 3))
    got = model.pdf(pts)
    want = [mixture_density(x, centers, model.bandwidth) for x in pts]
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_density_integrates_to_one():
    model = fit_kde(DifferenceSet("s", np.array([[0.0], [0.5], [3.0]])))
    grid = np.linspace(-30, 40, 200_001)
    assert np.trapezoid(model.pdf(grid), grid) == pytest.approx(1.0, abs=1e-3)


# --- sampling ----------------------------------------------------------------------


def test_sampler_near_degenerate_kernel():
    model = KdeModel(np.array([[2.0, -1.0]]), np.full(2, EPS_BW))
    s = sample_kde(model, 500, seed=1)
    assert np.all(np.abs(s - [2.0, -1.0]) <= 5 * np.sqrt(EPS_BW))


def test_sampler_mixture_moments():
    h = 0.3
    model = KdeModel(np.array([[-1.0], [1.0]]), np.array([h]))
    s = sample_kde(model, 10_000, seed=7)[:, 0]
    assert abs(s.mean()) < 0.05
    assert s.var() == pytest.approx(1 + h, rel=0.10)


def test_sampler_deterministic():
    model = fit_kde(DifferenceSet("s", np.abs(np.random.default_rng(2).normal(size=(9, 2)))))
    assert np.array_equal(sample_kde(model, 100, 5), sample_kde(model, 100, 5))
    assert not np.array_equal(sample_kde(model, 100, 5), sample_kde(model, 100, 6))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sampler_second_moment(seed):
    centers = np.array([[0.5], [1.0], [4.0]])
    model = fit_kde(DifferenceSet("s", centers))
    h = model.bandwidth[0]
    expected = np.mean(centers[:, 0] ** 2 + h)
    sq = sample_kde(model, 40_000, seed)[:, 0] ** 2
    se = sq.std(ddof=1) / np.sqrt(sq.size)
    assert abs(sq.mean() - expected) < 3 * se


# --- IPD estimates and weights --------------------------------------------------------------


def test_ipd_of_zero_samples():
    assert ipd_from_samples(np.zeros((4, 3))).g == 0.0


def test_ipd_identity_samples():
    est = ipd_from_samples(np.eye(2))
    assert est.g == pytest.approx(np.sqrt(2) / 2, abs=1e-15)
    assert est.m == 2


def test_ipd_recomputable_from_samples():
    model = fit_kde(DifferenceSet("s", np.abs(np.random.default_rng(4).normal(size=(6, 4)))))
    est = ipd_estimate(model, m=300, seed=3)
    assert est.g == pytest.approx(np.linalg.norm(est.samples) / est.m, abs=1e-12)


def test_identical_domains_stay_under_noise_floor():
    ds = make_dataset(V=1, N=40, K=3, T=8, seed=1)
    t = ds.domains[0]
    twin = PairedMultiSourceDataset((t, DomainDataset("twin", t.values, t.subject_ids)), ds.labels)
    report = compute_ipd_report(twin, DTW, m=1000, seed=0, allow_uniform=True)
    assert report.estimates[0].g <= noise_floor(3)
    with pytest.raises(DegenerateSimilarityError):
        compute_ipd_report(twin, DTW, m=1000, seed=0)


@pytest.mark.parametrize(
    "g, alphas, order",
    [
        ((3, 1), (0.75, 0.25), (0, 1)),
        ((1, 1, 2), (0.25, 0.25, 0.5), (2, 0, 1)),
        ((7,), (1.0,), (0,)),
    ],
)
def test_domain_weight_examples(g, alphas, order):
    w = domain_weights(g)
    assert w.alphas == pytest.approx(alphas, abs=1e-15)
    assert w.order == order


def test_all_zero_weights_degenerate():
    with pytest.raises(DegenerateSimilarityError):
        domain_weights([0.0, 0.0])
    w = domain_weights([0.0, 0.0], allow_uniform=True)
    assert w.uniform_fallback and w.alphas == (0.5, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=8).filter(lambda g: sum(g) > 0))
def test_weights_on_simplex(g):
    w = domain_weights(g)
    a = np.array(w.alphas)
    assert (a >= 0).all()
    assert a.sum() == pytest.approx(1.0, abs=1e-12)
    ordered = [g[i] for i in w.order]
    assert ordered == sorted(g, reverse=True)


def test_subset_renormalizes():
    w = domain_weights([1.0, 2.0, 5.0], names=["a", "b", "c"]).subset(["a", "c"])
    assert w.names == ("a", "c")
    assert w.alphas == pytest.approx((1 / 6, 5 / 6))
    assert isinstance(w, DomainWeights)


def test_rank_influential_examples():
    assert rank_influential([3, 1, 2]) == ["source1", "source2", "source0"]
    assert rank_influential([2, 1, 1], names=["a", "b", "c"]) == ["b", "c", "a"]


# --- full report ------------------------------------------------------------------------------


def test_report_round_trip_and_determinism():
    ds = make_dataset(V=4, N=15, K=2, T=7, seed=9)
    r1 = compute_ipd_report(ds, DTW, m=200, seed=3)
    r2 = compute_ipd_report(ds, DTW, m=200, seed=3)
    assert r1.to_json() == r2.to_json()
    w = weights_from_report_dict(r1.to_dict())
    assert w.alphas == pytest.approx(r1.weights.alphas, abs=1e-15)
    assert w.order == r1.weights.order


@settings(max_examples=10, deadline=None)
@given(st.permutations([1, 2, 3, 4]))
def test_permutation_equivariance(perm):
    ds = make_dataset(V=5, N=12, K=2, T=6, seed=11)
    shuffled = PairedMultiSourceDataset(
        (ds.domains[0],) + tuple(ds.domains[i] for i in perm), ds.labels
    )
    a = compute_ipd_report(ds, EUC, m=150, seed=2)
    b = compute_ipd_report(shuffled, EUC, m=150, seed=2)
    ga, gb = a.g, b.g
    assert ga == gb
    alpha_a = dict(zip(a.weights.names, a.weights.alphas))
    alpha_b = dict(zip(b.weights.names, b.weights.alphas))
    assert alpha_a == pytest.approx(alpha_b, abs=1e-15)
    assert a.weights.ordered_names() == b.weights.ordered_names()
    assert a.ranking == b.ranking

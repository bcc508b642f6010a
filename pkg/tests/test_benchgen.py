import numpy as np
import pytest

from timepred.benchgen import (
    FAMILIES,
    LabeledDataset,
    ProblemSpec,
    gen_ar_shift,
    gen_cov_shift,
    gen_mean_shift,
    gen_pw_linear,
    gen_variance_shift,
    generate,
)
from timepred.errors import ConfigError


def spec(family, **kwargs):
    defaults = dict(T=2000, d=10, seed=3)
    defaults.update(kwargs)
    return ProblemSpec(family, **defaults)


# ------------------------------------------------------------ generic checks

@pytest.mark.parametrize("family", FAMILIES)
def test_identical_specs_give_bitwise_identical_datasets(family):
    a = generate(spec(family))
    b = generate(spec(family))
    assert np.array_equal(a.series, b.series)
    assert a.true_cp == b.true_cp
    assert a.affected_dims == b.affected_dims
    c = generate(spec(family, seed=4))
    assert not np.array_equal(a.series, c.series)


@pytest.mark.parametrize("family", FAMILIES)
def test_change_index_respects_window_and_outputs_are_sane(family):
    for seed in range(5):
        ds = generate(spec(family, T=400, seed=seed))
        assert 100 <= ds.true_cp <= 300
        assert np.isfinite(ds.series).all()
        assert ds.series.shape == (400, 10)
        assert len(ds.affected_dims) >= 1
        # no dimension is constant over the whole series
        assert (ds.series.std(axis=0) > 0).all()


def test_spec_validation():
    with pytest.raises(ConfigError):
        ProblemSpec("no_such_family")
    with pytest.raises(ConfigError):
        ProblemSpec("mean_shift", T=50)
    with pytest.raises(ConfigError):
        ProblemSpec("mean_shift", d=1)
    with pytest.raises(ConfigError):
        ProblemSpec("mean_shift", cp_window=(0.5, 0.4))
    with pytest.raises(ConfigError):
        ProblemSpec("pw_linear", d=4, pw_n_sources=5)
    ProblemSpec("mean_shift", d=4, pw_n_sources=5)  # knob unused by this family


# ---------------------------------------------------------------- mean shift

def test_mean_shift_gap_matches_construction():
    ds = gen_mean_shift(spec("mean_shift"))
    t, (j,) = ds.true_cp, ds.affected_dims
    T = ds.series.shape[0]
    bound = 5.0 * np.sqrt(1.0 / t + 1.0 / (T - t))
    gap = ds.series[t:, j].mean() - ds.series[:t, j].mean()
    assert abs(gap - 2.0) < bound
    for other in range(ds.series.shape[1]):
        if other == j:
            continue
        gap_null = ds.series[t:, other].mean() - ds.series[:t, other].mean()
        assert abs(gap_null) < bound


def test_mean_shift_zero_delta_is_degenerate_noise():
    ds = gen_mean_shift(spec("mean_shift", mean_shift_delta=0.0))
    assert ds.degenerate
    t, (j,) = ds.true_cp, ds.affected_dims
    gap = ds.series[t:, j].mean() - ds.series[:t, j].mean()
    assert abs(gap) < 5.0 * np.sqrt(1.0 / t + 1.0 / (ds.series.shape[0] - t))


def test_mean_shift_zero_delta_detection_collapses_to_chance():
    # chance level for tol 10 in T=500 is about 2*10/500 = 4%
    from timepred.cpd_core import L2Cost, SegmentationConfig, segment_dynp
    from timepred.harness import precision_at_tolerance

    hits = []
    for seed in range(100):
        ds = gen_mean_shift(ProblemSpec("mean_shift", T=500, d=8, seed=seed,
                                        mean_shift_delta=0.0))
        seg = segment_dynp(ds.series, L2Cost(), SegmentationConfig(1))
        hits.append(precision_at_tolerance(seg, [ds.true_cp], 10))
    assert np.mean(hits) < 0.2


# ----------------------------------------------------------------- pw linear

def test_pw_linear_regression_recovers_pre_change_mixing():
    ds = gen_pw_linear(spec("pw_linear", seed=9))
    (target,) = ds.affected_dims
    t = ds.true_cp
    sources = list(ds.details["sources"])
    S = ds.series[:t][:, sources]
    y = ds.series[:t, target]
    coef, *_ = np.linalg.lstsq(np.column_stack([np.ones(t), S]), y, rcond=None)
    assert np.abs(coef[1:] - ds.details["mix_before"]).max() < 0.05
    resid = y - coef[0] - S @ coef[1:]
    assert resid.std() == pytest.approx(0.1, abs=0.05)
    # post-change side follows the second mixing vector
    S2 = ds.series[t:][:, sources]
    y2 = ds.series[t:, target]
    coef2, *_ = np.linalg.lstsq(np.column_stack([np.ones(len(y2)), S2]), y2, rcond=None)
    assert np.abs(coef2[1:] - ds.details["mix_after"]).max() < 0.05
    assert float(ds.details["mix_before"] @ ds.details["mix_after"]) <= 0.5


def test_pw_linear_marginal_stats_stable_across_change():
    ds = gen_pw_linear(spec("pw_linear", seed=5))
    (target,) = ds.affected_dims
    t = ds.true_cp
    pre, post = ds.series[:t, target], ds.series[t:, target]
    assert abs(pre.mean() - post.mean()) < 0.2
    assert 0.7 < post.var() / pre.var() < 1.4


def test_pw_linear_equal_mixing_control_is_degenerate():
    ds = gen_pw_linear(spec("pw_linear", pw_equal_mixing=True, seed=2))
    assert ds.degenerate


# ------------------------------------------------------------ variance shift

def test_variance_shift_ratios_and_means():
    ds = gen_variance_shift(spec("variance_shift", T=4000, seed=13))
    t = ds.true_cp
    T, d = ds.series.shape
    assert len(ds.affected_dims) == d // 2
    for j in range(d):
        pre, post = ds.series[:t, j], ds.series[t:, j]
        # means stay zero through the change
        assert abs(pre.mean()) < 5 * pre.std() / np.sqrt(t)
        assert abs(post.mean()) < 5 * post.std() / np.sqrt(T - t)
        if j not in ds.affected_dims:
            assert abs(np.log(post.var() / pre.var())) < 0.3


# ----------------------------------------------------------------- AR shift

def test_ar_shift_autocorrelation_recovery():
    generating = ProblemSpec("ar_shift", T=10_000, d=4, seed=17)
    ds = gen_ar_shift(generating)
    t = ds.true_cp

    def lag1(x):
        x = x - x.mean()
        return float(x[1:] @ x[:-1] / (x @ x))

    # re-derive the drawn coefficients from the data on both sides
    for j in range(4):
        rho_pre, rho_post = lag1(ds.series[:t, j]), lag1(ds.series[t:, j])
        if j in ds.affected_dims:
            assert abs(rho_post - rho_pre) > 0.2
        else:
            assert abs(rho_post - rho_pre) < 0.1


def test_ar_shift_stationary_variance_identity():
    # var = 1 / (1 - phi^2) for a unit-innovation AR(1)
    generating = ProblemSpec("ar_shift", T=10_000, d=4, seed=23)
    ds = gen_ar_shift(generating)
    t = ds.true_cp
    for j in range(4):
        x = ds.series[:t, j]
        phi = float(x[1:] @ x[:-1] / (x[:-1] @ x[:-1]))
        expected = 1.0 / (1.0 - phi**2)
        assert x.var() == pytest.approx(expected, rel=0.15)


# ----------------------------------------------------------------- cov shift

def test_cov_shift_statistic_beats_permutation_null():
    ds = gen_cov_shift(spec("cov_shift", T=1200, d=8, seed=29))
    t = ds.true_cp
    X = ds.series

    def frob(a, b):
        return float(np.linalg.norm(np.cov(a, rowvar=False) - np.cov(b, rowvar=False)))

    observed = frob(X[:t], X[t:])
    rng = np.random.default_rng(0)
    null = []
    for _ in range(19):
        perm = X[rng.permutation(X.shape[0])]
        null.append(frob(perm[:t], perm[t:]))
    assert observed > max(null)


def test_cov_shift_marginal_variances_bounded_by_shared_spectrum():
    ds = gen_cov_shift(spec("cov_shift", T=4000, d=8, seed=31))
    t = ds.true_cp
    ratios = ds.series[t:].var(axis=0) / ds.series[:t].var(axis=0)
    # spectrum shared on [0.5, 2]: per-dimension variances stay within a
    # factor-4 envelope of each other (loose sanity; typically much closer)
    assert (ratios > 0.25).all() and (ratios < 4.0).all()


def test_cov_shift_equal_control_is_degenerate():
    ds = gen_cov_shift(spec("cov_shift", cov_equal=True))
    assert ds.degenerate
    t = ds.true_cp
    pre = np.cov(ds.series[:t], rowvar=False)
    post = np.cov(ds.series[t:], rowvar=False)
    assert np.linalg.norm(pre - post) < 1.5  # estimation noise only


def test_labeled_dataset_fields():
    ds = generate(spec("mean_shift"))
    assert isinstance(ds, LabeledDataset)
    assert ds.family == "mean_shift"
    assert ds.seed == 3

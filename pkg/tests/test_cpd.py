import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize, special, stats

from adafleet.cpd import (DirichletParams, StreamingDetector, default_min_segment, detect_change,
                          dirichlet_mle, estimate_2window, log_likelihood, mle_gradient,
                          to_composition)
from adafleet.errors import DegenerateInput, DomainError, NonConvergence, WindowTooSmall


def scipy_mle(x):
    """Independent MLE: L-BFGS on log-alpha with scipy's gammaln/digamma."""
    mean_log = np.log(x).mean(axis=0)

    def nll(log_a):
        a = np.exp(log_a)
        return -(special.gammaln(a.sum()) - special.gammaln(a).sum() + (a - 1) @ mean_log)

    def grad(log_a):
        a = np.exp(log_a)
        g = special.digamma(a.sum()) - special.digamma(a) + mean_log
        return -g * a

    res = optimize.minimize(nll, np.zeros(x.shape[1]), jac=grad, method="L-BFGS-B",
                            options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10_000})
    return np.exp(res.x)


def scipy_ll(x, a):
    return float(sum(stats.dirichlet.logpdf(row / row.sum(), a) for row in x))


# --- composition -------------------------------------------------------------

def test_composition_on_simplex_input_unchanged():
    raw = np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]])
    comp = to_composition(raw, epsilon=1e-12, bounds=(0.0, 1.0))
    np.testing.assert_allclose(comp, raw, atol=1e-9)


def test_composition_worked_example():
    eps = 1e-6
    out = to_composition(np.array([0.0, 10.0]), eps, bounds=(0.0, 10.0))
    np.testing.assert_allclose(out, [eps / (1 + 2 * eps), (1 + eps) / (1 + 2 * eps)], rtol=1e-15)
    assert np.all(out > 0)


@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(2, 6)),
              elements=st.floats(0, 1e6)))
def test_composition_postcondition(raw):
    if np.all(raw.max(axis=0) == raw.min(axis=0)):
        with pytest.raises(DegenerateInput):
            to_composition(raw)
        return
    comp = to_composition(raw)
    assert np.all(comp > 0)
    np.testing.assert_allclose(comp.sum(axis=1), 1.0, atol=1e-9)


def test_composition_rejects_nonfinite():
    with pytest.raises(DomainError):
        to_composition(np.array([[1.0, np.nan], [0.0, 1.0]]))


# --- likelihood --------------------------------------------------------------

def test_log_likelihood_examples():
    x = np.array([[0.5, 0.5]])
    assert log_likelihood(x, DirichletParams(np.array([2.0, 2.0]))) == pytest.approx(np.log(1.5), abs=1e-12)
    rng = np.random.default_rng(0)
    y = rng.dirichlet([1, 1, 1, 1], 25)
    # uniform density on the 3-simplex is Gamma(4) = 6
    assert log_likelihood(y, DirichletParams(np.ones(4))) == pytest.approx(25 * np.log(6.0), rel=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 20))
def test_log_likelihood_matches_scipy(seed, d, n):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.3, 20.0, d)
    x = rng.dirichlet(rng.uniform(0.5, 5, d), n)
    x = np.clip(x, 1e-12, None)
    x /= x.sum(axis=1, keepdims=True)
    assert log_likelihood(x, DirichletParams(a)) == pytest.approx(scipy_ll(x, a), rel=1e-9, abs=1e-9)


def test_log_likelihood_additive():
    rng = np.random.default_rng(3)
    x = rng.dirichlet([2, 3, 4], 30)
    p = DirichletParams(np.array([1.5, 2.5, 3.5]))
    assert log_likelihood(x, p) == pytest.approx(log_likelihood(x[:11], p) + log_likelihood(x[11:], p), rel=1e-13)


def test_log_likelihood_rejects_nonpositive():
    with pytest.raises(DomainError):
        log_likelihood(np.array([[0.0, 1.0], [0.5, 0.5]]), DirichletParams(np.ones(2)))


def test_params_validation():
    with pytest.raises(DomainError):
        DirichletParams(np.array([1.0, -1.0]))
    with pytest.raises(DomainError):
        DirichletParams(np.array([1.0, np.inf]))


# --- MLE -----------------------------------------------------------------------

def test_mle_recovers_known_parameters():
    rng = np.random.default_rng(20240601)
    true = np.array([2.0, 5.0, 3.0])
    x = rng.dirichlet(true, 5000)
    t0 = time.perf_counter()
    fit = dirichlet_mle(x)
    assert time.perf_counter() - t0 < 5
    assert np.all(np.abs(fit.alpha - true) / true <= 0.10)
    assert log_likelihood(x, fit) >= log_likelihood(x, DirichletParams(true))
    assert np.max(np.abs(mle_gradient(x, fit))) < 1e-5


@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(0, 1))
def test_mle_agrees_with_independent_optimiser(seed, d, which):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 15.0, d)
    x = rng.dirichlet(a, 200)
    x = np.clip(x, 1e-300, None)
    solver = ("newton", "fixed-point")[which]
    ours = dirichlet_mle(x, solver=solver).alpha
    ref = scipy_mle(x)
    np.testing.assert_allclose(ours, ref, rtol=1e-5)


def test_mle_symmetric_data_gives_equal_components():
    rng = np.random.default_rng(11)
    x = rng.dirichlet([4.0, 4.0, 4.0], 3000)
    a = dirichlet_mle(x).alpha
    assert (a.max() - a.min()) / a.mean() <= 0.05


def test_mle_needs_enough_samples():
    with pytest.raises(ValueError):
        dirichlet_mle(np.full((4, 3), 1 / 3))


# --- split search --------------------------------------------------------------

def brute_force_split(x, m):
    """Every admissible split fitted separately with the scipy optimiser."""
    n = x.shape[0]
    best_t, best = None, -np.inf
    for t in range(m, n - m + 1):
        total = 0.0
        for seg in (x[:t], x[t:]):
            total += scipy_ll(seg, scipy_mle(seg))
        if total > best + 1e-9:
            best_t, best = t, total
    return best_t, best


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_estimate_2window_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.dirichlet([6, 2, 3], 15), rng.dirichlet([2, 6, 3], 15)])
    t, ll = estimate_2window(x)
    bt, bll = brute_force_split(x, default_min_segment(3))
    assert t == bt
    assert ll == pytest.approx(bll, abs=1e-6)


def test_estimate_2window_finds_block_boundary():
    rng = np.random.default_rng(7)
    x = np.vstack([rng.dirichlet([8, 2], 40), rng.dirichlet([2, 8], 40)])
    t, _ = estimate_2window(x)
    assert abs(t - 40) <= 3


def test_window_too_small():
    with pytest.raises(WindowTooSmall):
        estimate_2window(np.full((7, 2), 0.5))


def test_detect_change_examples():
    rng = np.random.default_rng(5)
    x = np.vstack([rng.dirichlet([8, 2], 40), rng.dirichlet([2, 8], 40)])
    rep = detect_change(x, 10.0)
    assert rep.detected and abs(rep.change_index - 40) <= 3
    assert 1 <= rep.change_index <= len(x) - 1
    flat = np.full((40, 3), 1 / 3) + rng.uniform(0, 1e-2, (40, 3))
    flat /= flat.sum(axis=1, keepdims=True)
    assert not detect_change(flat, 10.0).detected


def test_identical_samples_pin_the_fit():
    with pytest.raises(NonConvergence):
        detect_change(np.full((40, 3), 1 / 3), 10.0)


@given(st.integers(0, 10_000), st.integers(16, 60))
def test_split_gain_nonnegative(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(rng.uniform(0.5, 10, 3), n)
    x = np.clip(x, 1e-300, None)
    rep = detect_change(x, 10.0)
    assert rep.score >= -1e-6
    assert rep.detected == (rep.score > 10.0)


@given(st.integers(0, 10_000))
def test_reversal_mirrors_split(seed):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.dirichlet([8, 2], 25), rng.dirichlet([2, 8], 25)])
    t, ll = estimate_2window(x)
    tr, llr = estimate_2window(x[::-1])
    assert ll == pytest.approx(llr, rel=1e-9)
    assert tr == len(x) - t


# --- streaming -------------------------------------------------------------------

def test_streaming_detector_restarts_after_change():
    rng = np.random.default_rng(2)
    stream = np.vstack([rng.dirichlet([8, 2, 4], 60), rng.dirichlet([2, 8, 4], 60),
                        rng.dirichlet([8, 2, 4], 60)])
    det = StreamingDetector(threshold=10.0, check_every=10, epsilon=1e-6, bounds=(0.0, 1.0))
    hits = []
    for t, row in enumerate(stream):
        out = det.push(t, row)
        if out:
            hits.append(out[0])
    assert len(hits) == 2
    assert abs(hits[0] - 60) <= 3 and abs(hits[1] - 120) <= 3
    assert det.start_tick == hits[-1]


def test_streaming_detector_skips_constant_windows():
    det = StreamingDetector(threshold=10.0, check_every=5)
    for t in range(50):
        assert det.push(t, (1.0, 1.0, 1.0)) is None

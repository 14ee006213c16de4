import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semest import (
    DataError,
    EvaluationError,
    QVector,
    ToyInstance,
    Weights,
    check_normalization,
    compute_weights,
    fixed_point_q,
    fstar_empirical,
    g_hat,
    log_likelihood,
)
from semest.logistic import casecontrol_weight_spec
from semest.reparam import WeightFunctionSpec, log_density_star, score_q
from semest.validate import (
    FDConfig,
    casecontrol_reparam_model,
    check_stationarity,
    fd_gradient,
    fd_hessian,
)

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)


def test_qvector_validation():
    with pytest.raises(DataError):
        QVector([0.5, 2.0])  # last must be 1
    with pytest.raises(DataError):
        QVector([-0.5, 1.0])
    q = QVector.from_free([0.7])
    np.testing.assert_array_equal(q.q, [0.7, 1.0])
    np.testing.assert_array_equal(q.free, [0.7])


def test_fstar_is_pooled_frequency(leprosy, leprosy_weights):
    # with the exact plug-in weights the weighted mixture of within-sample
    # marginals collapses to the pooled relative frequency
    fstar = fstar_empirical(leprosy, leprosy_weights)
    np.testing.assert_allclose(fstar.values, leprosy.pooled_freq, atol=1e-15)
    assert fstar.values.sum() == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(
    alpha=finite,
    b1=finite,
    b2=finite,
    logq=st.floats(min_value=-1.5, max_value=1.5, allow_nan=False),
)
def test_normalization_identity(leprosy, leprosy_weights, alpha, b1, b2, logq):
    model = casecontrol_reparam_model(leprosy, leprosy_weights)
    theta = np.array([alpha, b1, b2])
    q = QVector.from_free([np.exp(logq)])
    total = check_normalization(model.wspec, theta, q, model.fstar, leprosy_weights)
    assert abs(total - 1.0) < 1e-12


def test_reparam_derivatives_match_fd(leprosy, leprosy_weights, rng):
    model = casecontrol_reparam_model(leprosy, leprosy_weights)
    from semest.likelihood import aggregate_hessian, aggregate_score

    for _ in range(5):
        params = rng.uniform(-0.8, 0.8, size=model.n_params)
        f = lambda p: log_likelihood(model, p, leprosy)
        g = aggregate_score(model, params, leprosy)
        g_fd = fd_gradient(f, params, FDConfig())
        scale = max(1.0, np.max(np.abs(g_fd)))
        assert np.max(np.abs(g - g_fd)) / scale < 1e-6
        h = aggregate_hessian(model, params, leprosy)
        h_fd = fd_hessian(f, params, FDConfig())
        scale = max(1.0, np.max(np.abs(h_fd)))
        assert np.max(np.abs(h - h_fd)) / scale < 1e-5


def test_fixed_point_matches_enumeration():
    # at theta_0 with the population covariate distribution, the profiled q
    # must equal the enumerated stratum probabilities (normalized to q_S=1)
    toy = ToyInstance(
        support=[[0.0], [1.0]],
        g=[0.4, 0.6],
        alpha=0.3,
        beta=[np.log(2.0)],
        weights=Weights([0.5, 0.5]),
    )
    wspec = casecontrol_weight_spec(1)
    fstar = toy.population_fstar()
    qhat = fixed_point_q(wspec, toy.theta, fstar, toy.weights)
    expected = np.array([toy.stratum_prob(1), toy.stratum_prob(2)])
    expected = expected / expected[-1]
    np.testing.assert_allclose(qhat.q, expected, atol=1e-10)


def test_stationarity_after_inner_profile(leprosy, leprosy_weights):
    model = casecontrol_reparam_model(leprosy, leprosy_weights)
    resid = check_stationarity(model, np.array([1.0, -0.3, -4.0]), leprosy)
    assert resid < 1e-8


def test_score_q_aggregate_identity(leprosy, leprosy_weights):
    # the per-observation indicator form and the weight form agree in the
    # sample aggregate because w_j = n_j / n exactly
    wspec = casecontrol_weight_spec(2)
    theta = np.array([0.8, -0.4, -2.0])
    q = QVector.from_free([0.6])
    total_exact = np.zeros(1)
    total_wform = np.zeros(1)
    w = leprosy_weights.w
    for obs in leprosy.observations:
        total_exact += obs.multiplicity * score_q(wspec, obs.sample, obs.x, theta, q, leprosy_weights)
        Q = wspec.q_weight(obs.x, theta)
        denom = float(np.sum(w * Q / q.q))
        wform = (w[0] * Q[0] / q.q[0] ** 2) / denom - w[0] / q.q[0]
        total_wform += obs.multiplicity * wform
    np.testing.assert_allclose(total_exact, total_wform, atol=1e-10)


def test_zero_mass_errors(leprosy_weights):
    wspec = WeightFunctionSpec(
        n_strata=2,
        q_weight=lambda x, t: np.zeros(2),
        q_weight_grad=lambda x, t: np.zeros((2, 1)),
        q_weight_hess=lambda x, t: np.zeros((2, 1, 1)),
    )
    from semest.reparam import FStarEstimate

    fstar = FStarEstimate(np.array([[0.0]]), np.array([1.0]))
    q = QVector.from_free([1.0])
    with pytest.raises(EvaluationError, match="zero selection mass"):
        g_hat(wspec, [0.0], np.zeros(1), q, fstar, leprosy_weights)


def test_inconsistent_stratum_error(leprosy_weights):
    wspec = WeightFunctionSpec(
        n_strata=2,
        q_weight=lambda x, t: np.array([0.0, 1.0]),
        q_weight_grad=lambda x, t: np.zeros((2, 1)),
        q_weight_hess=lambda x, t: np.zeros((2, 1, 1)),
    )
    from semest.reparam import ConditionalFamily, FStarEstimate

    family = ConditionalFamily(
        lambda y, x, t: 0.0, lambda y, x, t: np.zeros(1), lambda y, x, t: np.zeros((1, 1))
    )
    fstar = FStarEstimate(np.array([[0.0]]), np.array([1.0]))
    with pytest.raises(EvaluationError, match="inconsistent with its stratum"):
        log_density_star(
            wspec, family, 1, 0.0, [0.0], np.zeros(1), QVector.from_free([1.0]),
            fstar, leprosy_weights,
        )


def test_include_fstar_is_constant_shift(leprosy, leprosy_weights):
    m0 = casecontrol_reparam_model(leprosy, leprosy_weights, include_fstar=False)
    m1 = casecontrol_reparam_model(leprosy, leprosy_weights, include_fstar=True)
    shift = None
    for params in (np.array([0.5, -0.3, -2.0, 0.1]), np.array([-0.2, 0.4, 1.0, -0.3])):
        d = log_likelihood(m1, params, leprosy) - log_likelihood(m0, params, leprosy)
        if shift is None:
            shift = d
        assert d == pytest.approx(shift, abs=1e-9)
    expected = sum(
        o.multiplicity * np.log(m1.fstar.lookup(o.x)) for o in leprosy.observations
    )
    assert shift == pytest.approx(expected, abs=1e-9)


def test_lookup_unknown_covariate(leprosy, leprosy_weights):
    fstar = fstar_empirical(leprosy, leprosy_weights)
    with pytest.raises(EvaluationError, match="not in the support"):
        fstar.lookup([123.0, 456.0])


def test_normalization_linearity_and_single_stratum(leprosy, leprosy_weights):
    # a deliberately broken plug-in that sums to 0.9 is detected linearly
    model = casecontrol_reparam_model(leprosy, leprosy_weights)
    from semest.reparam import FStarEstimate

    broken = FStarEstimate(model.fstar.support, 0.9 * model.fstar.values)
    theta = np.array([0.4, -0.3, -2.0])
    q = QVector.from_free([0.8])
    total = check_normalization(model.wspec, theta, q, broken, leprosy_weights)
    assert total == pytest.approx(0.9, abs=1e-12)

    # degenerate single-stratum design: the identity is exactly 1
    wspec1 = WeightFunctionSpec(
        n_strata=1,
        q_weight=lambda x, t: np.array([1.0]),
        q_weight_grad=lambda x, t: np.zeros((1, 1)),
        q_weight_hess=lambda x, t: np.zeros((1, 1, 1)),
        partition=True,
    )
    total1 = check_normalization(
        wspec1, np.zeros(1), QVector([1.0]), model.fstar, Weights([1.0])
    )
    assert total1 == pytest.approx(1.0, abs=1e-14)


def test_fixed_point_matches_direct_maximization(leprosy, leprosy_weights):
    """Profiling q by direct likelihood maximization and by the
    self-consistency fixed point must agree at the fitted theta."""
    from semest import fstar_empirical, maximize

    model = casecontrol_reparam_model(leprosy, leprosy_weights)
    fit = maximize(model, leprosy).require_converged()
    theta_hat = fit.params[: model.n_theta]
    q_direct = np.exp(fit.params[model.n_theta :])
    fstar = fstar_empirical(leprosy, leprosy_weights)
    qhat = fixed_point_q(model.wspec, theta_hat, fstar, leprosy_weights)
    np.testing.assert_allclose(qhat.free, q_direct, atol=1e-8)

"""Case-control (two-stratum stratified) logistic regression models.

Three builders for the same design:

* ``build_full_mle_model`` -- joint maximum likelihood over the regression
  parameters and the discrete covariate distribution g on the observed
  support (softmax coordinates, last one pinned to 0);
* ``build_nonidentifiable_model`` -- the reparametrized submodel in
  (alpha, beta, log rho1); the likelihood depends on (alpha, log rho1)
  only through their sum, an exactly flat ridge;
* ``build_identifiable_model`` -- the further reparametrization
  alpha_star = alpha + log rho1, which is identifiable and is algebraically
  a prospective logistic fit with a fixed intercept offset.

Strata: sample 1 = controls (y = 0), sample 2 = cases (y = 1).  Covariates
are stored as (scar, transformed age) for the bundled leprosy data.
"""

from __future__ import annotations

import csv
from importlib import resources

import numpy as np

from .data import MultisampleDataset, Weights, load_casecontrol_csv
from .errors import DataError
from .likelihood import ModelSpec
from .reparam import ConditionalFamily, WeightFunctionSpec


def transform_age(age):
    """Covariate transform 100 (age + 7.5)^-2."""
    age = np.asarray(age, dtype=float)
    if np.any(age <= -7.5):
        raise DataError("age must exceed -7.5")
    out = 100.0 / (age + 7.5) ** 2
    return float(out) if out.ndim == 0 else out


def _sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))), np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
    return float(out) if out.ndim == 0 else out


def _log1pexp(t):
    return np.logaddexp(0.0, t)


def logistic_density(y, x, alpha, beta):
    """f(y | x; alpha, beta) for y in {0, 1}."""
    eta = alpha + float(np.dot(np.atleast_1d(x), np.atleast_1d(beta)))
    return float(np.exp(y * eta - _log1pexp(eta)))


def _design(x):
    return np.concatenate([[1.0], np.atleast_1d(x)])


class IdentifiableLogisticModel(ModelSpec):
    """Parameters (alpha_star, beta).  Estimation-mode log-density
    y u - log(w0 + w1 e^u) with u = alpha_star + x' beta."""

    def __init__(self, weights: Weights, covariate_labels):
        if len(weights) != 2:
            raise DataError("identifiable case-control model requires S=2")
        self.weights = weights
        self._log_w0 = np.log(weights.w[0])
        self._log_w1 = np.log(weights.w[1])
        self.param_labels = ("alpha*",) + tuple(covariate_labels)
        self.interest_idx = tuple(range(1, len(self.param_labels)))

    def _mu(self, u):
        # w1 e^u / (w0 + w1 e^u)
        return _sigmoid(u + self._log_w1 - self._log_w0)

    def log_density(self, obs, params):
        y = obs.sample - 1
        u = float(_design(obs.x) @ params)
        return y * u - np.logaddexp(self._log_w0, self._log_w1 + u)

    def score(self, obs, params):
        y = obs.sample - 1
        z = _design(obs.x)
        return (y - self._mu(float(z @ params))) * z

    def hessian(self, obs, params):
        z = _design(obs.x)
        mu = self._mu(float(z @ params))
        return -mu * (1.0 - mu) * np.outer(z, z)

    def init_params(self, dataset):
        init = np.zeros(self.n_params)
        init[0] = np.log(dataset.sample_sizes[1] / dataset.sample_sizes[0])
        return init


class NonidentifiableLogisticModel(ModelSpec):
    """Parameters (alpha, beta, log rho1); the log-density depends on
    (alpha, log rho1) only through alpha + log rho1."""

    def __init__(self, weights: Weights, covariate_labels):
        if len(weights) != 2:
            raise DataError("non-identifiable case-control model requires S=2")
        self.weights = weights
        self._log_w0 = np.log(weights.w[0])
        self._log_w1 = np.log(weights.w[1])
        self.param_labels = ("alpha",) + tuple(covariate_labels) + ("log_rho1",)
        self.interest_idx = tuple(range(len(self.param_labels) - 1))

    def _design(self, x):
        return np.concatenate([[1.0], np.atleast_1d(x), [1.0]])

    def log_density(self, obs, params):
        y = obs.sample - 1
        u = float(self._design(obs.x) @ params)
        return y * u - np.logaddexp(self._log_w0, self._log_w1 + u)

    def score(self, obs, params):
        y = obs.sample - 1
        z = self._design(obs.x)
        mu = _sigmoid(float(z @ params) + self._log_w1 - self._log_w0)
        return (y - mu) * z

    def hessian(self, obs, params):
        z = self._design(obs.x)
        mu = _sigmoid(float(z @ params) + self._log_w1 - self._log_w0)
        return -mu * (1.0 - mu) * np.outer(z, z)

    def init_params(self, dataset):
        init = np.zeros(self.n_params)
        init[0] = np.log(dataset.sample_sizes[1] / dataset.sample_sizes[0])
        return init


class DiscreteG:
    """Softmax coordinates for a discrete distribution on K support points:
    g_k = exp(phi_k) / sum_j exp(phi_j) with phi_K fixed to 0."""

    @staticmethod
    def to_g(phi_free):
        phi = np.append(np.asarray(phi_free, dtype=float), 0.0)
        phi = phi - phi.max()
        e = np.exp(phi)
        return e / e.sum()

    @staticmethod
    def from_g(g):
        g = np.asarray(g, dtype=float)
        if np.any(g <= 0) or abs(g.sum() - 1.0) > 1e-10:
            raise DataError("g must be a strictly positive probability vector")
        phi = np.log(g)
        return (phi - phi[-1])[:-1]


class FullMLELogisticModel(ModelSpec):
    """Parameters (alpha, beta, phi_1..phi_{K-1}).  Per-observation
    log-density log f(y|v_k) + log g_k - log sum_j f(y|v_j) g_j."""

    def __init__(self, support, covariate_labels):
        support = np.asarray(support, dtype=float)
        if len(support) < 2:
            raise DataError("need at least 2 support points to profile g")
        self.support = support
        self.K = len(support)
        self._Z = np.column_stack([np.ones(self.K), support])  # (K, 1+p)
        self._lookup = {v.tobytes(): k for k, v in enumerate(support)}
        self.param_labels = (
            ("alpha",)
            + tuple(covariate_labels)
            + tuple(f"phi{k + 1}" for k in range(self.K - 1))
        )
        self.n_theta = 1 + len(covariate_labels)
        self.interest_idx = tuple(range(self.n_theta))

    def _parts(self, obs, params):
        t = params[: self.n_theta]
        g = DiscreteG.to_g(params[self.n_theta :])
        y = obs.sample - 1
        k = self._lookup[np.asarray(obs.x, dtype=float).tobytes()]
        eta = self._Z @ t
        mu = _sigmoid(eta)
        f = mu if y == 1 else 1.0 - mu  # f(y | v_j) for every j
        return y, k, g, eta, mu, f

    def log_density(self, obs, params):
        y, k, g, eta, mu, f = self._parts(obs, params)
        logf_k = y * eta[k] - _log1pexp(eta[k])
        D = float(f @ g)
        with np.errstate(divide="ignore"):
            return logf_k + np.log(g[k]) - np.log(D)

    def score(self, obs, params):
        y, k, g, eta, mu, f = self._parts(obs, params)
        D = float(f @ g)
        a = g * f / D
        b = y - mu
        grad_t = b[k] * self._Z[k] - (a * b) @ self._Z
        grad_phi = -a[:-1].copy()
        if k < self.K - 1:
            grad_phi[k] += 1.0
        return np.concatenate([grad_t, grad_phi])

    def hessian(self, obs, params):
        y, k, g, eta, mu, f = self._parts(obs, params)
        D = float(f @ g)
        a = g * f / D
        b = y - mu
        c = mu * (1.0 - mu)
        Z = self._Z
        m = (a * b) @ Z
        # middle term: sum_j a_j (b_j^2 - c_j) z_j z_j^T
        h_tt = (
            -c[k] * np.outer(Z[k], Z[k])
            - (Z * (a * (b**2 - c))[:, None]).T @ Z
            + np.outer(m, m)
        )
        h_tphi = np.empty((self.n_theta, self.K - 1))
        for j in range(self.K - 1):
            h_tphi[:, j] = a[j] * (m - b[j] * Z[j])
        h_phiphi = np.outer(a[:-1], a[:-1]) - np.diag(a[:-1])
        top = np.hstack([h_tt, h_tphi])
        bottom = np.hstack([h_tphi.T, h_phiphi])
        return np.vstack([top, bottom])

    def init_params(self, dataset):
        init = np.zeros(self.n_params)
        init[0] = np.log(dataset.sample_sizes[1] / dataset.sample_sizes[0])
        return init

    def fitted_g(self, params):
        return DiscreteG.to_g(params[self.n_theta :])


def build_identifiable_model(weights, covariate_labels=("Scar", "Age")):
    return IdentifiableLogisticModel(weights, covariate_labels)


def build_nonidentifiable_model(weights, covariate_labels=("Scar", "Age")):
    return NonidentifiableLogisticModel(weights, covariate_labels)


def build_full_mle_model(dataset, covariate_labels=("Scar", "Age")):
    return FullMLELogisticModel(dataset.support, covariate_labels)


def casecontrol_weight_spec(p):
    """WeightFunctionSpec for case-control sampling: Q_{s|X}(x; theta) =
    f(s-1 | x; theta) with theta = (alpha, beta), a partition of the
    outcome space."""

    def q_weight(x, theta):
        z = _design(x)
        mu = _sigmoid(float(z @ theta))
        return np.array([1.0 - mu, mu])

    def q_weight_grad(x, theta):
        z = _design(x)
        mu = _sigmoid(float(z @ theta))
        c = mu * (1.0 - mu)
        return np.vstack([-c * z, c * z])

    def q_weight_hess(x, theta):
        z = _design(x)
        mu = _sigmoid(float(z @ theta))
        c = mu * (1.0 - mu)
        zz = np.outer(z, z)
        # d2 mu = c (1 - 2 mu) z z^T
        d2mu = c * (1.0 - 2.0 * mu) * zz
        return np.stack([-d2mu, d2mu])

    return WeightFunctionSpec(
        n_strata=2,
        q_weight=q_weight,
        q_weight_grad=q_weight_grad,
        q_weight_hess=q_weight_hess,
        partition=True,
    )


def casecontrol_family():
    """ConditionalFamily for the logistic f(y | x; (alpha, beta))."""

    def log_f(y, x, theta):
        eta = float(_design(x) @ theta)
        return y * eta - _log1pexp(eta)

    def log_f_grad(y, x, theta):
        z = _design(x)
        return (y - _sigmoid(float(z @ theta))) * z

    def log_f_hess(y, x, theta):
        z = _design(x)
        mu = _sigmoid(float(z @ theta))
        return -mu * (1.0 - mu) * np.outer(z, z)

    return ConditionalFamily(log_f, log_f_grad, log_f_hess)


# Leprosy case-control table, 14 rows (7 ages x 2 scar levels), as
# (age, scar, cases, controls).  The packaged CSV must agree bit-exactly.
LEPROSY_TABLE = (
    (2.5, 0, 1, 24),
    (2.5, 1, 1, 31),
    (7.5, 0, 11, 22),
    (7.5, 1, 14, 39),
    (12.5, 0, 28, 23),
    (12.5, 1, 22, 27),
    (17.5, 0, 16, 5),
    (17.5, 1, 28, 22),
    (22.5, 0, 20, 9),
    (22.5, 1, 19, 12),
    (27.5, 0, 36, 17),
    (27.5, 1, 11, 5),
    (32.5, 0, 47, 21),
    (32.5, 1, 6, 3),
)


def _bundled_rows():
    with resources.files("semest").joinpath("data/leprosy.csv").open(
        "r", encoding="utf-8"
    ) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = tuple(
            (float(r[0]), int(r[1]), int(r[2]), int(r[3])) for r in reader if r
        )
    if header != ["age", "scar", "cases", "controls"]:
        raise DataError("bundled leprosy.csv has an unexpected header")
    return rows


def leprosy_dataset() -> MultisampleDataset:
    """The bundled leprosy case-control dataset, grouped, with covariates
    (scar, transform_age(age)).  Controls are sample 1, cases sample 2."""
    rows = _bundled_rows()
    if rows != LEPROSY_TABLE:
        raise DataError("bundled leprosy.csv disagrees with the embedded table")
    with resources.as_file(
        resources.files("semest").joinpath("data/leprosy.csv")
    ) as path:
        return load_casecontrol_csv(path, transform=transform_age)

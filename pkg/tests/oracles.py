"""Independent numerical oracles used by the tests.

Nothing here imports estimation code from the package; the point is that
these values are produced by a different algorithm (IRLS, complex-step
differentiation) written against the raw data, so agreement is evidence
and not circularity.
"""

import numpy as np

# (age, scar, cases, controls) -- typed independently from the published
# frequency table that ships with the package.
CASECONTROL_TABLE = (
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


def design_and_counts():
    """Row-per-cell design matrix (1, scar, 100/(age+7.5)^2) with case and
    control counts."""
    Z, cases, controls = [], [], []
    for age, scar, ca, co in CASECONTROL_TABLE:
        Z.append([1.0, float(scar), 100.0 / (age + 7.5) ** 2])
        cases.append(ca)
        controls.append(co)
    return np.array(Z), np.array(cases, float), np.array(controls, float)


def irls_logistic(Z, y, counts, offset=0.0, tol=1e-12, max_iter=100):
    """Weighted logistic regression by iteratively reweighted least
    squares.  Returns (beta, cov) with cov = (Z' W Z)^{-1}."""
    beta = np.zeros(Z.shape[1])
    for _ in range(max_iter):
        eta = Z @ beta + offset
        mu = 1.0 / (1.0 + np.exp(-eta))
        W = counts * mu * (1.0 - mu)
        grad = Z.T @ (counts * (y - mu))
        H = (Z * W[:, None]).T @ Z
        step = np.linalg.solve(H, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    eta = Z @ beta + offset
    mu = 1.0 / (1.0 + np.exp(-eta))
    W = counts * mu * (1.0 - mu)
    cov = np.linalg.inv((Z * W[:, None]).T @ Z)
    return beta, cov


def prospective_fit():
    """IRLS fit of case status on (scar, transformed age) over the grouped
    table: coefficients (intercept, scar, age) and their covariance."""
    Z, cases, controls = design_and_counts()
    ZZ = np.vstack([Z, Z])
    y = np.concatenate([np.ones(len(Z)), np.zeros(len(Z))])
    counts = np.concatenate([cases, controls])
    return irls_logistic(ZZ, y, counts)


def prospective_loglik(beta):
    """Grouped binomial log-likelihood sum_cells [ca log mu + co log(1-mu)]."""
    Z, cases, controls = design_and_counts()
    eta = Z @ beta
    logmu = -np.log1p(np.exp(-eta))
    log1mmu = -np.log1p(np.exp(eta))
    return float(cases @ logmu + controls @ log1mmu)


def complex_step_gradient(f, x, h=1e-30):
    """Machine-precision first derivatives of an analytic real function via
    complex-step differentiation."""
    x = np.asarray(x, dtype=complex)
    g = np.empty(len(x))
    for i in range(len(x)):
        xp = x.copy()
        xp[i] += 1j * h
        g[i] = f(xp).imag / h
    return g

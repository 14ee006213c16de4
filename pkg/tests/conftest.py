import numpy as np
import pytest

from semest import compute_weights, leprosy_dataset
from semest.analysis import compare_methods, fit_method


@pytest.fixture(scope="session")
def leprosy():
    return leprosy_dataset()


@pytest.fixture(scope="session")
def leprosy_weights(leprosy):
    return compute_weights(leprosy)


@pytest.fixture(scope="session")
def leprosy_reports(leprosy):
    """(reports, releff) for all three methods; fitted once per session."""
    return compare_methods(leprosy)


@pytest.fixture(scope="session")
def leprosy_id_fit(leprosy):
    """(FitResult, EfficiencyReport, model) for the identifiable method."""
    return fit_method(leprosy, "reparam-id")


@pytest.fixture(scope="session")
def oracle_prospective():
    """Independent IRLS fit (coef, cov) of the grouped table."""
    from oracles import prospective_fit

    return prospective_fit()


@pytest.fixture
def rng():
    return np.random.default_rng(20230815)


def pytest_terminal_summary(terminalreporter):
    """Show the one-line-per-criterion acceptance results after the run."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULT_LINES:
            terminalreporter.write_line(line)

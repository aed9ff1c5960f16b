import pytest

from threshold_gms.validation import SuiteConfig, SuiteContext


@pytest.fixture(scope="session")
def suite_context():
    """Shared acceptance context so heavy Monte Carlo runs happen once."""
    return SuiteContext(SuiteConfig())


@pytest.fixture(scope="session")
def count_run(suite_context):
    return suite_context.count_run()


@pytest.fixture(scope="session")
def limit_run(suite_context):
    return suite_context.limit_run()

import pytest

from twoline_parking.core import ModelVariant

MODELS = list(ModelVariant)


@pytest.fixture(params=MODELS, ids=[m.value for m in MODELS])
def model(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

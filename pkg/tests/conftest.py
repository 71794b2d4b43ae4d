import hypothesis
import numpy as np
import pytest

# numba compiles on first call, which would trip per-example deadlines
hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None and (report.when == "call" or report.outcome != "passed"):
        number, title = marker.args
        if report.when == "call" or number not in _ACCEPTANCE:
            _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL")
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth_reports():
    """The default synthetic experiment on five seeds, shared by several modules."""
    from concave_rank.experiments import SynthConfig, run_synth_experiment

    return [run_synth_experiment(SynthConfig(seed=s)) for s in range(5)]


@pytest.fixture(scope="session")
def ad_report():
    from concave_rank.experiments import AdConfig, run_ad_experiment

    return run_ad_experiment(AdConfig())

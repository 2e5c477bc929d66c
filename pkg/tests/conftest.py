import pytest

from vidplan.toyplan import ToyPlanConfig, train_toy


@pytest.fixture(scope="session")
def toy_cfg():
    return ToyPlanConfig()


@pytest.fixture(scope="session")
def toy_params(toy_cfg):
    """The toy denoiser trained once per session (a few minutes on one CPU core)."""
    params, _ = train_toy(toy_cfg)
    return params


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        terminalreporter.write_line(mod.RESULTS.get(n, f"FAIL criterion {n:>2}: not run or errored"))

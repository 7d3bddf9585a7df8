"""Shared fixtures and the acceptance-criteria reporter.

The lifting benches are session scoped so every acceptance criterion
that needs a trained model reuses the same one; a model is trained the
first time any test asks for it.
"""

import pytest

from perspective_crop.camera import CameraIntrinsics
from perspective_crop.experiments import ExperimentConfig, LiftingBench

ACCEPTANCE_LINES = []


def criterion(num: int, description: str, passed: bool, detail: str) -> None:
    """Record and print one acceptance-criterion verdict, then assert it."""
    verdict = "PASS" if passed else "FAIL"
    line = f"[criterion {num:02d}] {verdict} {description}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def intr():
    return CameraIntrinsics(fx=0.7, fy=0.7, cx=0.5, cy=0.5, width=512, height=512)


@pytest.fixture(scope="session")
def small_cfg():
    """Cheap settings for unit tests that only need the plumbing to run."""
    return ExperimentConfig(
        n_train=250, n_test=100, hidden=32, cube_hidden=24, epochs=8, batch_size=32
    )


@pytest.fixture(scope="session")
def acceptance_cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def bench0(acceptance_cfg):
    return LiftingBench(acceptance_cfg, seed=0)


@pytest.fixture(scope="session")
def bench1(acceptance_cfg):
    return LiftingBench(acceptance_cfg, seed=1)


@pytest.fixture(scope="session")
def bench2(acceptance_cfg):
    return LiftingBench(acceptance_cfg, seed=2)

import numpy as np
import pytest

from emnet.netcore import Architecture, ModelState
from emnet.trainer import TrainConfig, train

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record a criterion outcome for the end-of-run report, then assert it."""

    def check(name: str, ok: bool, detail: str):
        _ACCEPTANCE[name] = (bool(ok), detail)
        assert ok, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def exact_arch1(consts) -> ModelState:
    """W_1 rows constant c_i, W_2 = diag(1/c_i): computes A x for every A."""
    c = np.asarray(consts, dtype=float)
    n = len(c)
    return ModelState(Architecture(n, (1,)), [np.repeat(c[:, None], n, axis=1), np.diag(1.0 / c)])


def exact_arch0(n) -> ModelState:
    return ModelState(Architecture(n, ()), [np.ones((n, n))])


@pytest.fixture(scope="session")
def trained_n5():
    """n=5, arch (1), paper defaults, shuffled, 3 epochs x 16 meta-epochs."""
    return train(TrainConfig(n=5, arch=(1,), epochs=3, meta_epochs=16, condition="shuffled", seed=7))

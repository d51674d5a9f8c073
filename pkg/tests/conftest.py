import numpy as np
import pytest
from hypothesis import settings

from fracmorrey.grid import Field, GridSpec

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid: GridSpec, seed: int = 0, smooth: float | None = None) -> Field:
    """Seeded real random field; ``smooth`` applies a Gaussian spectral taper."""
    v = np.random.default_rng(seed).standard_normal(grid.shape)
    f = Field.physical(grid, v)
    if smooth:
        from fracmorrey.semigroup import heat

        f = Field.physical(grid, heat(f, 2.0, smooth).real)
    return f


ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``ok`` for the assert."""
    line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

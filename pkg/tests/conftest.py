import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import breakfvm as bf  # noqa: E402


@pytest.fixture
def worked():
    """Two uniform cells on ]0, 1], K = 2*eps*rho, b = 2/rho, c = (1, 1)."""
    mesh = bf.build_uniform(1.0, 2)
    k = bf.CollisionKernel(1.0, 1.0, 1.0)
    b = bf.BreakageKernel("power_conserving", 0.0)
    return mesh, k, b, bf.build_tables(mesh, k, b), bf.State(np.ones(2))


def ulp_close(a, b, n):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.all(np.abs(a - b) <= n * np.spacing(scale))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)

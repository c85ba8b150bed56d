import numpy as np
import pytest

from dualnorm.fem import build_hf, build_mesh
from dualnorm.problems import make_affine_synthetic, sample_parameters, thermal_block_spec


@pytest.fixture(scope="session")
def hf3():
    return build_hf(build_mesh(3))


@pytest.fixture(scope="session")
def hf6():
    return build_hf(build_mesh(6))


@pytest.fixture(scope="session")
def hf12():
    return build_hf(build_mesh(12))


@pytest.fixture(scope="session")
def thermal6(hf6):
    return thermal_block_spec(hf6, "phi1")


@pytest.fixture(scope="session")
def affine6(hf6):
    return make_affine_synthetic(hf6, 3, seed=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_vectors(hf, J):
    """J linearly independent smooth nodal functions (not tied to any functional)."""
    x, y = hf.mesh.nodes.T
    cols = [np.cos(0.7 * (k + 1) * x) * np.sin(0.5 * (k % 3 + 1) * y + 0.3 * k) + 0.05 * k for k in range(J)]
    return np.column_stack(cols)


def train_params(spec, n, seed=7):
    return sample_parameters(spec.box, n, seed)


CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the caller still asserts on its own."""

    def record(label: str, ok: bool, detail: str = "", soft: bool = False):
        tag = ("PASS" if ok else "FAIL") + (" (soft)" if soft else "")
        line = f"{label}: {tag}  {detail}".rstrip()
        CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from distrust.dataset import Dataset

# rows t1..t10 of the Example 2 table
EXAMPLE2 = np.array([
    [0.61, 0.58], [0.32, 0.77], [0.79, 0.41], [0.13, 0.90], [0.74, 0.44],
    [0.55, 0.64], [0.18, 0.85], [0.93, 0.12], [0.38, 0.71], [0.05, 0.92],
])
EXAMPLE2_RHO = [0.191, 0.161, 0.247, 0.082, 0.191, 0.183, 0.147, 0.372, 0.183, 0.147]
EXAMPLE2_2NN = [{5, 6}, {7, 9}, {1, 5}, {7, 10}, {1, 3}, {1, 9}, {4, 10}, {3, 5}, {2, 6}, {4, 7}]
EXAMPLE2_Q = np.array([0.81, 0.76])
EXAMPLE2_LABELS = ["a", "a", "b", "a", "b", "a", "a", "b", "a", "a"]


@pytest.fixture
def example2():
    return Dataset.from_arrays(EXAMPLE2, EXAMPLE2_LABELS, bounds="identity")


@pytest.fixture
def example2_csv(tmp_path):
    path = tmp_path / "example2.csv"
    lines = ["x1,x2,y"] + [f"{a},{b},{y}" for (a, b), y in zip(EXAMPLE2, EXAMPLE2_LABELS)]
    path.write_text("\n".join(lines) + "\n")
    return path


def planted_outliers(seed=0, n=500, share=0.1, scale=10.0):
    """Tight Gaussian cluster plus a ring of outliers at ``scale`` times its spread."""
    rng = np.random.default_rng(seed)
    m = int(round(share * n))
    inliers = rng.normal(0.0, 1.0, (n - m, 2))
    ang = rng.uniform(0.0, 2 * np.pi, m)
    rad = scale * rng.uniform(0.9, 1.1, m)
    X = np.vstack([inliers, np.c_[rad * np.cos(ang), rad * np.sin(ang)]])
    return Dataset.from_arrays(X, np.zeros(n))


def uncertainty_step(n_clusters=100, size=10, mixed_share=0.1, seed=0):
    """Well-separated clusters of ``size`` points; ``mixed_share`` of them have
    half/half labels, the rest one label. With k = size - 1 each row's
    neighborhood is exactly the rest of its cluster."""
    rng = np.random.default_rng(seed)
    centers = np.arange(n_clusters, dtype=float) * 10.0
    X, y = [], []
    n_mixed = int(round(mixed_share * n_clusters))
    for c, x0 in enumerate(centers):
        pts = x0 + rng.uniform(-0.1, 0.1, (size, 2))
        X.append(pts)
        y += [i % 2 for i in range(size)] if c < n_mixed else [0] * size
    return Dataset.from_arrays(np.vstack(X), y)


# acceptance criteria report one line each; printed in the terminal summary
_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

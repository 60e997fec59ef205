import numpy as np
import pytest

from latgas.pde import Grid, GridFunction


def boundary_profile(M, alpha, beta, bump=0.0, mode=1, shape="sine"):
    """Linear profile plus a perturbation vanishing at both ends."""
    grid = Grid(M)
    u = grid.nodes
    if shape == "sine":
        pert = np.sin(mode * np.pi * u)
    else:
        pert = u * (1 - u) * np.sin(2 * np.pi * mode * u)
    return GridFunction(grid, alpha + (beta - alpha) * u + bump * pert, "density")


def random_smooth_profile(rng, M, alpha, beta, modes=4, room=0.9):
    """Random sine series on the linear profile, scaled to stay inside (0,1)."""
    grid = Grid(M)
    u = grid.nodes
    base = alpha + (beta - alpha) * u
    coef = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
    pert = sum(c * np.sin((k + 1) * np.pi * u) for k, c in enumerate(coef))
    cap = room * min(np.min(base[1:-1] / np.maximum(-pert[1:-1], 1e-300), initial=np.inf),
                     np.min((1 - base[1:-1]) / np.maximum(pert[1:-1], 1e-300), initial=np.inf))
    scale = min(rng.uniform(0.2, 1.0) * cap, 0.3 / max(np.max(np.abs(pert)), 1e-300))
    return GridFunction(grid, base + scale * pert, "density")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

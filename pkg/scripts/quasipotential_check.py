"""Cost of the reversed adjoint relaxation against the free energy.

Random smooth profiles at two resolutions; prints the relative gap
|I(optimal path) - F(gamma)| / F(gamma) and the HJ residual.
"""
import argparse

import numpy as np

from latgas.pde import Grid, GridFunction
from latgas.quasipotential import hamilton_jacobi_residual, verify_quasipotential


def random_profile(rng, alpha, beta, modes=4):
    coef = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
    u = np.linspace(0, 1, 2001)
    raw = lambda x: sum(c * np.sin((k + 1) * np.pi * x) for k, c in enumerate(coef))  # noqa: E731
    amp = rng.uniform(0.05, 0.15) / np.max(np.abs(raw(u)))
    return lambda x: alpha + (beta - alpha) * x + amp * raw(x)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profiles", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--M", type=int, nargs="+", default=[200, 400])
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    rng = np.random.default_rng(a.seed)
    head = "  ".join(f"gap(M={M})" for M in a.M) + "  " + "  ".join(f"HJ(M={M})" for M in a.M)
    print(f"  #  {'free energy':>11s}  {head}")
    for i in range(a.profiles):
        f = random_profile(rng, a.alpha, a.beta)
        gaps, hjs, value = [], [], None
        for M in a.M:
            g = Grid(M)
            gam = GridFunction(g, f(g.nodes))
            chk = verify_quasipotential(gam, a.alpha, a.beta)
            gaps.append(chk.relative_gap)
            hjs.append(hamilton_jacobi_residual(gam, a.alpha, a.beta).total)
            value = chk.free_energy
        cols = "  ".join(f"{x:9.2e}" for x in gaps) + "  " + "  ".join(f"{x:9.2e}" for x in hjs)
        print(f"{i:3d}  {value:11.6f}  {cols}")


if __name__ == "__main__":
    main()

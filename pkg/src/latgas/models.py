"""Macroscopic transport models: diffusion D(rho), mobility chi(rho), field E(u).

Every builtin model registers closed-form derivatives. Models built from a
user callable fall back to central finite differences with step ``FD_STEP``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import ValidationError

FD_STEP = 1e-5
CONDITION_TOL = 1e-10
KMP_RHO_MAX = 10.0
GL_HALF_WIDTH = 10.0


@dataclass(frozen=True)
class Boundary:
    alpha: float
    beta: float


@dataclass(frozen=True)
class Periodic:
    mass: float


Geometry = Union[Boundary, Periodic]


def _const(value):
    def f(x):
        return np.full(np.shape(x), float(value)) if np.ndim(x) else float(value)
    return f


@dataclass(frozen=True)
class TransportModel:
    """A lattice gas at the macroscopic level.

    Equality and hashing use ``name``, ``params``, ``density_range`` and
    ``geometry`` only, so two builds from the same parameters compare equal.
    ``D``, ``chi`` and ``E`` are vectorised callables; ``E`` takes the
    macroscopic position u, not the density.
    """

    name: str
    params: tuple
    density_range: tuple
    geometry: Optional[Geometry]
    D: Callable = field(compare=False, repr=False)
    chi: Callable = field(compare=False, repr=False)
    E: Callable = field(compare=False, repr=False)
    dD: Optional[Callable] = field(default=None, compare=False, repr=False)
    dchi: Optional[Callable] = field(default=None, compare=False, repr=False)
    d2chi: Optional[Callable] = field(default=None, compare=False, repr=False)
    has_field: bool = False

    def __post_init__(self):
        lo, hi = self.density_range
        if not lo < hi:
            raise ValidationError(f"empty density range {self.density_range}")
        g = self.geometry
        if isinstance(g, Boundary):
            for key, val in (("alpha", g.alpha), ("beta", g.beta)):
                if not lo < val < hi:
                    raise ValidationError(
                        f"{key}={val} must lie strictly inside the density range ({lo}, {hi})")
        elif isinstance(g, Periodic):
            if not lo < g.mass < hi:
                raise ValidationError(f"mass={g.mass} must lie strictly inside ({lo}, {hi})")

    # derivatives, closed form when registered

    def D_prime(self, rho):
        if self.dD is not None:
            return self.dD(rho)
        return (self.D(rho + FD_STEP) - self.D(rho - FD_STEP)) / (2 * FD_STEP)

    def chi_prime(self, rho):
        if self.dchi is not None:
            return self.dchi(rho)
        return (self.chi(rho + FD_STEP) - self.chi(rho - FD_STEP)) / (2 * FD_STEP)

    def chi_second(self, rho):
        if self.d2chi is not None:
            return self.d2chi(rho)
        h = 1e2 * FD_STEP  # second differences need a larger step against roundoff
        return (self.chi(rho + h) - 2 * self.chi(rho) + self.chi(rho - h)) / h**2

    def current(self, rho, grad_rho, u):
        """Instantaneous current J = -D(rho) grad rho + chi(rho) E(u)."""
        J = -self.D(rho) * grad_rho
        if self.has_field:
            J = J + self.chi(rho) * self.E(u)
        return J

    def with_geometry(self, geometry):
        return replace(self, geometry=geometry)

    @property
    def boundary(self):
        return isinstance(self.geometry, Boundary)

    @property
    def periodic(self):
        return isinstance(self.geometry, Periodic)

    def contains(self, rho, closed=True):
        lo, hi = self.density_range
        rho = np.asarray(rho)
        if closed:
            return bool(np.all((rho >= lo) & (rho <= hi)))
        return bool(np.all((rho > lo) & (rho < hi)))


# zero range rate families: name -> (Psi, Psi', Psi'')
def _psi_family(family, params):
    if family == "linear":
        c = float(params.get("c", 1.0))
        if c <= 0:
            raise ValidationError("zero_range linear family needs c > 0")
        return (lambda r: c * np.asarray(r, dtype=float),
                _const(c), _const(0.0))
    if family == "power":
        p = float(params.get("p", 1.0))
        if p <= 0:
            raise ValidationError("zero_range power family needs p > 0")
        return (lambda r: np.asarray(r, dtype=float) ** p,
                lambda r: p * np.asarray(r, dtype=float) ** (p - 1),
                lambda r: p * (p - 1) * np.asarray(r, dtype=float) ** (p - 2))
    if family == "saturating":
        # Psi = r / (1 + r/c): bounded jump rates
        c = float(params.get("c", 1.0))
        if c <= 0:
            raise ValidationError("zero_range saturating family needs c > 0")
        return (lambda r: np.asarray(r, dtype=float) / (1 + np.asarray(r, dtype=float) / c),
                lambda r: 1.0 / (1 + np.asarray(r, dtype=float) / c) ** 2,
                lambda r: -2.0 / c / (1 + np.asarray(r, dtype=float) / c) ** 3)
    raise ValidationError(f"unknown zero_range family {family!r}")


def _check_increasing(psi, lo, hi, n=1001):
    grid = np.linspace(lo, hi, n)
    vals = np.asarray(psi(grid), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("Psi is not finite on the density range")
    if not np.all(np.diff(vals) > 0):
        raise ValidationError("Psi must be strictly increasing on the density range")


def builtin_model(name, geometry=None, **params):
    """Build a registered model.

    ``name`` is one of ssep, wasep, kmp, zero_range, ginzburg_landau.
    Keyword parameters:

    - kmp, zero_range: ``rho_max`` (default 10) truncates the range.
    - zero_range: ``psi`` either a callable or a family name (linear, power,
      saturating) with its numeric parameters ``c`` / ``p``.
    - ginzburg_landau: ``chi0`` (mobility constant), ``d0`` and ``d2`` for
      D = d0 + d2 rho^2, ``half_width`` for the range [-L, L].
    - wasep: ``E`` field amplitude (required, nonzero).
    """
    key = tuple(sorted((k, v if not callable(v) else getattr(v, "__name__", "callable"))
                       for k, v in params.items()))
    if name == "ssep" or name == "wasep":
        E = 0.0
        if name == "wasep":
            if "E" not in params:
                raise ValidationError("wasep requires the field amplitude E")
            E = float(params["E"])
            if E == 0:
                raise ValidationError("wasep requires E != 0")
        return TransportModel(
            name=name, params=key, density_range=(0.0, 1.0), geometry=geometry,
            D=_const(0.5),
            chi=lambda r: np.asarray(r, dtype=float) * (1 - np.asarray(r, dtype=float)),
            E=_const(E),
            dD=_const(0.0),
            dchi=lambda r: 1 - 2 * np.asarray(r, dtype=float),
            d2chi=_const(-2.0),
            has_field=(E != 0),
        )
    if name == "kmp":
        rho_max = float(params.get("rho_max", KMP_RHO_MAX))
        return TransportModel(
            name=name, params=key, density_range=(0.0, rho_max), geometry=geometry,
            D=_const(1.0),
            chi=lambda r: np.asarray(r, dtype=float) ** 2,
            E=_const(0.0),
            dD=_const(0.0),
            dchi=lambda r: 2 * np.asarray(r, dtype=float),
            d2chi=_const(2.0),
        )
    if name == "zero_range":
        rho_max = float(params.get("rho_max", KMP_RHO_MAX))
        psi = params.get("psi", "linear")
        if callable(psi):
            _check_increasing(psi, 0.0, rho_max)
            return TransportModel(
                name=name, params=key, density_range=(0.0, rho_max), geometry=geometry,
                D=lambda r: (psi(np.asarray(r) + FD_STEP) - psi(np.asarray(r) - FD_STEP)) / (2 * FD_STEP),
                chi=psi, E=_const(0.0))
        Psi, dPsi, d2Psi = _psi_family(psi, params)
        _check_increasing(Psi, 0.0, rho_max)
        # D = Psi', chi = Psi, so D' = Psi'' and chi'' = Psi''
        d3Psi = None
        if psi == "linear":
            d3Psi = _const(0.0)
        elif psi == "power":
            p = float(params.get("p", 1.0))
            d3Psi = lambda r: p * (p - 1) * (p - 2) * np.asarray(r, dtype=float) ** (p - 3)  # noqa: E731
        elif psi == "saturating":
            c = float(params.get("c", 1.0))
            d3Psi = lambda r: 6.0 / c**2 / (1 + np.asarray(r, dtype=float) / c) ** 4  # noqa: E731
        return TransportModel(
            name=name, params=key, density_range=(0.0, rho_max), geometry=geometry,
            D=dPsi, chi=Psi, E=_const(0.0), dD=d2Psi, dchi=dPsi, d2chi=d2Psi)
    if name == "ginzburg_landau":
        L = float(params.get("half_width", GL_HALF_WIDTH))
        chi0 = float(params.get("chi0", 1.0))
        d0 = float(params.get("d0", 1.0))
        d2 = float(params.get("d2", 0.0))
        if chi0 <= 0 or d0 <= 0 or d2 < 0:
            raise ValidationError("ginzburg_landau needs chi0 > 0, d0 > 0, d2 >= 0")
        return TransportModel(
            name=name, params=key, density_range=(-L, L), geometry=geometry,
            D=lambda r: d0 + d2 * np.asarray(r, dtype=float) ** 2,
            chi=_const(chi0), E=_const(0.0),
            dD=lambda r: 2 * d2 * np.asarray(r, dtype=float),
            dchi=_const(0.0), d2chi=_const(0.0))
    raise ValidationError(f"unknown model {name!r}")


@dataclass
class ConditionReport:
    gradient_condition: bool
    gradient_margin: float
    inv_chi_convex: bool
    inv_chi_margin: float
    chi_convex_at: np.ndarray
    grid: np.ndarray
    tol: float = CONDITION_TOL


def check_conditions(model, grid, tol=CONDITION_TOL):
    """Evaluate the two structural conditions on a density grid.

    gradient margin: min over the grid of D' chi' - D chi''. Nonnegative
    means D chi'' <= D' chi' holds everywhere.

    inverse-mobility margin: min over interior points of the discrete second
    derivative of 1/chi (second difference / h^2).
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = model.density_range
    if grid.ndim != 1 or grid.size < 3:
        raise ValidationError("density grid needs at least 3 points")
    if np.any(grid <= lo) or np.any(grid >= hi):
        raise ValidationError(f"density grid must lie strictly inside ({lo}, {hi})")
    if not np.all(np.diff(grid) > 0):
        raise ValidationError("density grid must be strictly increasing")

    D = np.asarray(model.D(grid), dtype=float) * np.ones_like(grid)
    dD = np.asarray(model.D_prime(grid), dtype=float) * np.ones_like(grid)
    chi = np.asarray(model.chi(grid), dtype=float) * np.ones_like(grid)
    dchi = np.asarray(model.chi_prime(grid), dtype=float) * np.ones_like(grid)
    d2chi = np.asarray(model.chi_second(grid), dtype=float) * np.ones_like(grid)
    for arr in (D, dD, chi, dchi, d2chi):
        if not np.all(np.isfinite(arr)):
            raise ValidationError("non-finite coefficient values on the density grid")

    gradient_margin = float(np.min(dD * dchi - D * d2chi))

    inv = 1.0 / chi
    hl = grid[1:-1] - grid[:-2]
    hr = grid[2:] - grid[1:-1]
    second = 2 * (hl * inv[2:] - (hl + hr) * inv[1:-1] + hr * inv[:-2]) / (hl * hr * (hl + hr))
    inv_margin = float(np.min(second))

    return ConditionReport(
        gradient_condition=gradient_margin >= -tol,
        gradient_margin=gradient_margin,
        inv_chi_convex=inv_margin >= -tol,
        inv_chi_margin=inv_margin,
        chi_convex_at=grid[d2chi > tol],
        grid=grid,
        tol=tol,
    )

"""Radial grids on [0, R] in dimension d = 2 or 3, and nonnegative density
profiles on them.

A grid splits [0, R] into N annular cells with uniform edge spacing
dr = R/N.  Cell i occupies radii [e_i, e_{i+1}] and carries the full
d-dimensional annulus volume w_i = vol_d(e_{i+1}) - vol_d(e_i).  A profile
stores one density value per cell, interpreted as the cell average, so

    mass(u) = sum_i u_i w_i  ~  int_{R^d} u dx.

Profiles are immutable after construction and always nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator

SPHERE_AREA = {2: 2.0 * math.pi, 3: 4.0 * math.pi}  # |S^{d-1}|


def ball_volume(d: int, r):
    """Volume of the ball of radius r in R^d."""
    if d == 2:
        return math.pi * np.square(r)
    if d == 3:
        return (4.0 / 3.0) * math.pi * np.power(r, 3)
    raise ValueError(f"dimension must be 2 or 3, got {d}")


class SupportOverflowError(ValueError):
    """Rescaling pushed more mass past the outer radius than tolerated."""

    def __init__(self, lost: float, mass: float, lam: float):
        self.lost = lost
        self.mass = mass
        self.lam = lam
        super().__init__(
            f"rescale lambda={lam:g} truncates mass {lost:.3e} "
            f"(relative {lost / mass:.3e}) past the grid"
        )


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid: N annular cells on [0, R] in dimension d."""

    d: int
    R: float
    N: int
    edges: np.ndarray = field(init=False, repr=False, compare=False)
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    volumes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if not (self.R > 0):
            raise ValueError(f"outer radius must be positive, got {self.R}")
        if self.N < 2:
            raise ValueError(f"need at least 2 cells, got {self.N}")
        edges = np.linspace(0.0, self.R, self.N + 1)
        vols = ball_volume(self.d, edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "centers", 0.5 * (edges[:-1] + edges[1:]))
        object.__setattr__(self, "volumes", np.diff(vols))
        for a in ("edges", "centers", "volumes"):
            getattr(self, a).setflags(write=False)

    @property
    def dr(self) -> float:
        return self.R / self.N

    @property
    def total_volume(self) -> float:
        return ball_volume(self.d, self.R)

    def __eq__(self, other):
        return (
            isinstance(other, RadialGrid)
            and self.d == other.d
            and self.R == other.R
            and self.N == other.N
        )

    def __hash__(self):
        return hash((self.d, self.R, self.N))


@dataclass(frozen=True)
class Profile:
    """Nonnegative cell-averaged density on a radial grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        vmin = v.min(initial=0.0)
        if vmin < 0.0:
            # tolerate pure roundoff, reject anything structural
            if vmin < -1e-12 * max(v.max(initial=0.0), 1e-300):
                raise ValueError(f"negative density {vmin:.3e}")
            v = np.maximum(v, 0.0)
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @classmethod
    def from_function(cls, grid: RadialGrid, f, quad_order: int = 8) -> "Profile":
        """Profile of cell averages of a radial function f(r).

        Each cell average is int f(r) dvol / w_i with a fixed-order
        Gauss-Legendre rule per cell, so mass(profile) is a high-order
        composite quadrature of int f dx.
        """
        x, gw = leggauss(quad_order)
        e = grid.edges
        h = 0.5 * grid.dr
        mid = 0.5 * (e[:-1] + e[1:])
        # nodes: (N, q); weight r^{d-1} carries the volume element
        r = mid[:, None] + h * x[None, :]
        fr = np.asarray(f(r), dtype=float)
        integ = SPHERE_AREA[grid.d] * h * np.sum(gw[None, :] * fr * r ** (grid.d - 1), axis=1)
        return cls(grid, integ / grid.volumes)

    def with_values(self, values) -> "Profile":
        return Profile(self.grid, values)


def mass(u: Profile) -> float:
    """Total mass sum_i u_i w_i."""
    return float(np.dot(u.values, u.grid.volumes))


def lp_norm(u: Profile, p: float) -> float:
    """L^p norm (sum u_i^p w_i)^{1/p}; max for p = inf."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if math.isinf(p):
        return float(u.values.max(initial=0.0))
    return float(np.dot(u.values**p, u.grid.volumes) ** (1.0 / p))


def cumulative_mass(u: Profile) -> np.ndarray:
    """Mass inside radius e_k for every grid edge, shape (N+1,)."""
    c = np.empty(u.grid.N + 1)
    c[0] = 0.0
    np.cumsum(u.values * u.grid.volumes, out=c[1:])
    return c


def concentration(u: Profile, rho: float) -> float:
    """Mass inside the ball of radius rho; boundary cell split by volume."""
    g = u.grid
    if not (0.0 <= rho <= g.R + 1e-12 * g.R):
        raise ValueError(f"radius {rho} outside [0, {g.R}]")
    rho = min(rho, g.R)
    c = cumulative_mass(u)
    k = min(int(np.searchsorted(g.edges, rho, side="right")) - 1, g.N - 1)
    if k < 0:
        return 0.0
    part = ball_volume(g.d, rho) - ball_volume(g.d, g.edges[k])
    return float(c[k] + u.values[k] * part)


def rescale_mass_invariant(u: Profile, lam: float, tol: float = 1e-6) -> Profile:
    """Mass-invariant rescaling u_lam(x) = lam^d u(lam x) on the same grid.

    Resampled conservatively through the cumulative mass function: the
    rescaled profile has cumulative mass C(lam * rho), which is evaluated
    with a monotone (PCHIP) interpolant of the edgewise cumulative masses
    and differenced back into cell averages.  Mass is preserved exactly up
    to whatever the grid truncates; truncation beyond tol * mass raises
    SupportOverflowError.
    """
    if not (lam > 0):
        raise ValueError(f"scale must be positive, got {lam}")
    if lam == 1.0:
        return Profile(u.grid, u.values.copy())
    g = u.grid
    c = cumulative_mass(u)
    m = c[-1]
    if m == 0.0:
        return Profile(g, np.zeros(g.N))
    chat = PchipInterpolator(g.edges, c, extrapolate=False)
    scaled = np.minimum(lam * g.edges, g.R)
    cnew = chat(scaled)
    q = np.diff(cnew)
    lost = m - cnew[-1]
    if lost > tol * m:
        raise SupportOverflowError(float(lost), float(m), float(lam))
    return Profile(g, np.maximum(q, 0.0) / g.volumes)


def ball_indicator(grid: RadialGrid, rho: float, height: float = 1.0) -> Profile:
    """Cell-averaged indicator of the ball of radius rho (exact volume fractions)."""
    v0 = ball_volume(grid.d, np.minimum(grid.edges[:-1], rho))
    v1 = ball_volume(grid.d, np.minimum(grid.edges[1:], rho))
    return Profile(grid, height * np.clip((v1 - v0) / grid.volumes, 0.0, 1.0))


def random_bump_profile(grid: RadialGrid, rng: np.random.Generator, bumps: int = 4) -> Profile:
    """Random smooth nonnegative profile: a mixture of radial Gaussian bumps."""
    amp = rng.uniform(0.1, 2.0, size=bumps)
    ctr = rng.uniform(0.0, 0.6 * grid.R, size=bumps)
    wid = rng.uniform(0.05 * grid.R, 0.25 * grid.R, size=bumps)

    def f(r):
        out = np.zeros_like(r)
        for a, c, w in zip(amp, ctr, wid):
            out += a * np.exp(-(((r - c) / w) ** 2))
        return out

    return Profile.from_function(grid, f)


def write_profile_csv(u: Profile, path, header_lines: list[str] | None = None) -> None:
    """Two-column CSV (r_i, u_i); comment lines carry d, R, N."""
    g = u.grid
    lines = []
    for h in header_lines or []:
        lines.append(f"# {h}")
    lines.append(f"# d={g.d} R={g.R!r} N={g.N}")
    lines.append("r,u")
    for r, v in zip(g.centers.tolist(), u.values.tolist()):
        lines.append(f"{r!r},{v!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile_csv(path) -> Profile:
    """Read a profile written by write_profile_csv."""
    d = R = N = None
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                toks = dict(
                    t.split("=", 1) for t in line[1:].split() if "=" in t
                )
                if {"d", "R", "N"} <= toks.keys():
                    d, R, N = int(toks["d"]), float(toks["R"]), int(toks["N"])
                continue
            if line.lower().startswith("r,"):
                continue
            _, v = line.split(",")
            vals.append(float(v))
    if d is None:
        raise ValueError(f"{path}: missing '# d=.. R=.. N=..' header line")
    if len(vals) != N:
        raise ValueError(f"{path}: expected {N} rows, got {len(vals)}")
    return Profile(RadialGrid(d, R, N), np.array(vals))

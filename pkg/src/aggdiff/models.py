"""Kernel and entropy-law catalog.

Kernels K are radial, nonnegative, nonincreasing, with enough structure
that ||K||_1, the weak-L^p seminorm of the local singularity, and the
derived exponent m* = (p+1)/p can be computed with analytic tails:

    exponential(c, a):   K(r) = c exp(-r/a)
    gaussian(c, a):      K(r) = c exp(-(r/a)^2)
    tophat(c, rho0):     K(r) = c for r <= rho0, else 0
    power_law(c, beta):  K(r) = c r^{-beta} for r <= r_c,
                         c r_c^{-beta} exp(-(r - r_c)) beyond (r_c = 1)

Entropy densities Phi are strictly convex sums of powers c z^e with
e > 1, so Phi(0) = 0 and Phi(z)/z -> 0 at 0.  The small-z quadratic
coefficient chi and the growth exponents at 0 and infinity are read off
the exponent list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grids import ball_volume

_SHAPES = ("exponential", "gaussian", "tophat", "power_law")


@dataclass(frozen=True)
class Kernel:
    shape: str
    d: int
    c: float
    a: float = 1.0  # length scale (exponential, gaussian)
    rho0: float = 1.0  # support radius (tophat)
    beta: float = 0.0  # singularity exponent (power_law)
    cutoff: float = 1.0  # power-law matching radius r_c
    trunc: float = math.inf  # restriction K * 1_{B_trunc}, inf = none

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.c < 0:
            raise ValueError("amplitude must be >= 0")
        if self.shape in ("exponential", "gaussian") and not self.a > 0:
            raise ValueError("scale must be positive")
        if self.shape == "tophat" and not self.rho0 > 0:
            raise ValueError("tophat radius must be positive")
        if self.shape == "power_law":
            if not 0 < self.beta < self.d:
                raise ValueError(
                    f"power_law needs 0 < beta < d for local integrability, "
                    f"got beta={self.beta}, d={self.d}"
                )
            if not self.cutoff > 0:
                raise ValueError("cutoff must be positive")
        if not self.trunc > 0:
            raise ValueError("truncation radius must be positive")

    def truncated(self, delta: float) -> "Kernel":
        """The kernel K * 1_{B_delta}."""
        return replace(self, trunc=min(self.trunc, delta))


def kernel_eval(K: Kernel, r):
    """K(r), vectorized; r >= 0."""
    r = np.asarray(r, dtype=float)
    if K.shape == "exponential":
        out = K.c * np.exp(-r / K.a)
    elif K.shape == "gaussian":
        out = K.c * np.exp(-((r / K.a) ** 2))
    elif K.shape == "tophat":
        out = np.where(r <= K.rho0, K.c, 0.0)
    else:
        rc = K.cutoff
        with np.errstate(divide="ignore"):
            inner = K.c * np.power(np.maximum(r, 0.0), -K.beta)
        outer = K.c * rc**-K.beta * np.exp(-(r - rc))
        out = np.where(r <= rc, inner, outer)
    if np.isfinite(K.trunc):
        out = np.where(r <= K.trunc, out, 0.0)
    return out if out.ndim else float(out)


def _l1_radial_tail(K: Kernel, T: float) -> float:
    """int_T^inf K(r) r^{d-1} dr for the exponential-type outer branch."""
    d = K.d
    if K.shape == "tophat":
        return 0.0 if T >= K.rho0 else K.c * (K.rho0**d - T**d) / d
    if K.shape == "exponential":
        a = K.a
        x = T / a
        if d == 2:
            return K.c * a**2 * math.exp(-x) * (1 + x)
        return K.c * a**3 * math.exp(-x) * (2 + 2 * x + x**2)
    if K.shape == "gaussian":
        a = K.a
        x = (T / a) ** 2
        if d == 2:
            return K.c * a**2 / 2 * math.exp(-x)
        # int r^2 e^{-(r/a)^2} = a^3 [sqrt(pi)/4 erfc(T/a) + (T/2a) e^{-x}]
        return K.c * a**3 * (math.sqrt(math.pi) / 4 * math.erfc(T / a) + (T / (2 * a)) * math.exp(-x))
    # power_law outer branch c0 e^{-(r - rc)} with c0 = c rc^{-beta}
    rc = K.cutoff
    c0 = K.c * rc**-K.beta
    T = max(T, rc)
    s = T - rc
    if d == 2:
        return c0 * math.exp(-s) * (1 + T)
    return c0 * math.exp(-s) * (T**2 + 2 * T + 2)


def kernel_l1(K: Kernel) -> float:
    """||K||_1 = sigma_{d-1} int_0^inf K(r) r^{d-1} dr, analytic per shape."""
    from .grids import SPHERE_AREA

    d, sig = K.d, SPHERE_AREA[K.d]
    up = K.trunc

    def head(T):
        # int_0^T over the inner branch, T inside it
        if K.shape == "tophat":
            return K.c * min(T, K.rho0) ** d / d
        if K.shape in ("exponential", "gaussian"):
            return _l1_radial_tail(K, 0.0) - _l1_radial_tail(K, T)
        rc = K.cutoff
        Ti = min(T, rc)
        inner = K.c * Ti ** (d - K.beta) / (d - K.beta)
        if T <= rc:
            return inner
        return inner + (_l1_radial_tail(K, rc) - _l1_radial_tail(K, T))

    if math.isinf(up):
        if K.shape in ("exponential", "gaussian", "tophat"):
            return sig * _l1_radial_tail(K, 0.0) if K.shape != "tophat" else sig * K.c * K.rho0**d / d
        rc = K.cutoff
        return sig * (K.c * rc ** (d - K.beta) / (d - K.beta) + _l1_radial_tail(K, rc))
    return sig * head(up)


def _inverse_radius(K: Kernel, t: float) -> float:
    """sup{r : K(r) > t} for the untruncated profile, 0 if empty."""
    if t >= K.c and K.shape != "power_law":
        return 0.0
    if K.shape == "exponential":
        return K.a * math.log(K.c / t)
    if K.shape == "gaussian":
        return K.a * math.sqrt(math.log(K.c / t))
    if K.shape == "tophat":
        return K.rho0
    rc = K.cutoff
    kc = K.c * rc**-K.beta  # value at the matching radius
    if t >= kc:
        return rc * (K.c * rc**-K.beta / t) ** (1 / K.beta) if t > 0 else math.inf
    return rc + math.log(kc / t)


def kernel_weak_lp(K: Kernel, p: float, delta: float) -> float:
    """Weak-L^p seminorm of K restricted to B_delta:

        sup_{t>0} t |{x in B_delta : K(|x|) > t}|^{1/p}.

    For radial nonincreasing K the level set is a ball, so the supremum
    equals sup_{0 < r <= delta} K(r) vol_d(r)^{1/p}, swept on a log grid
    in r and refined around the maximum.  Returns inf when the local
    singularity is too strong for p (power law with p beta > d).
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if K.c == 0:
        return 0.0
    d = K.d
    delta = min(delta, K.trunc)
    if K.shape == "power_law" and p * K.beta > d:
        return math.inf

    def g(r):
        return kernel_eval(K, r) * ball_volume(d, np.minimum(r, delta)) ** (1.0 / p)

    pts = [delta]
    if K.shape == "tophat":
        pts.append(min(K.rho0, delta))
    if K.shape == "power_law":
        pts.append(min(K.cutoff, delta))
    lo, hi = delta * 1e-8, delta
    grid = np.unique(np.concatenate([np.geomspace(lo, hi, 2000), np.asarray(pts)]))
    vals = g(grid)
    k = int(np.argmax(vals))
    best = float(vals[k])
    # local refinement around the incumbent
    for _ in range(4):
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, len(grid) - 1)]
        if b <= a:
            break
        grid = np.geomspace(max(a, lo * 1e-4), b, 200)
        vals = g(grid)
        k = int(np.argmax(vals))
        best = max(best, float(vals[k]))
    return best


def kernel_singularity_index(K: Kernel) -> float:
    """The p with K 1_{B_1} in weak-L^p: d/beta for power laws, inf if bounded."""
    if K.shape == "power_law":
        return K.d / K.beta
    return math.inf


def kernel_mstar(K: Kernel) -> float:
    """m* = (p+1)/p from the singularity index; 1 for bounded kernels."""
    p = kernel_singularity_index(K)
    if math.isinf(p):
        return 1.0
    return (p + 1) / p


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyLaw:
    """Sum of powers Phi(z) = sum_k c_k z^{e_k}, all c_k > 0, e_k > 1.

    form records how it was built: power(m, coeff) means
    Phi(z) = coeff z^m/(m-1); quadratic(chi0) means chi0 z^2; power_sum
    takes plain (coefficient, exponent) terms.
    """

    form: str
    terms: tuple  # ((coeff, exponent), ...) in the plain c z^e sense

    def __post_init__(self):
        if self.form not in ("power", "quadratic", "power_sum"):
            raise ValueError(f"unknown entropy form {self.form!r}")
        if not self.terms:
            raise ValueError("entropy needs at least one term")
        for c, e in self.terms:
            if not c > 0:
                raise ValueError(f"coefficient must be positive, got {c}")
            if not e > 1:
                raise ValueError(
                    f"exponent must exceed 1 (strict convexity, Phi(z)/z -> 0), got {e}"
                )
        object.__setattr__(self, "terms", tuple(sorted((float(c), float(e)) for c, e in self.terms)))

    @classmethod
    def power(cls, m: float, coeff: float = 1.0) -> "EntropyLaw":
        if not m > 1:
            raise ValueError(f"power entropy needs m > 1, got {m}")
        return cls("power", ((coeff / (m - 1), m),))

    @classmethod
    def quadratic(cls, chi0: float) -> "EntropyLaw":
        return cls("quadratic", ((chi0, 2.0),))

    @classmethod
    def power_sum(cls, terms) -> "EntropyLaw":
        return cls("power_sum", tuple((c, e) for c, e in terms))

    @property
    def g0(self) -> float:
        """Growth exponent at 0 (smallest power)."""
        return min(e for _, e in self.terms)

    @property
    def g_inf(self) -> float:
        """Growth exponent at infinity (largest power)."""
        return max(e for _, e in self.terms)

    def coeff_at(self, e: float) -> float:
        return sum(c for c, ee in self.terms if ee == e)


def phi_eval(phi: EntropyLaw, z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for c, e in phi.terms:
        out += c * np.power(z, e)
    return out if out.ndim else float(out)


def phi_prime(phi: EntropyLaw, z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for c, e in phi.terms:
        out += c * e * np.power(z, e - 1)
    return out if out.ndim else float(out)


def chi_of(phi: EntropyLaw) -> float:
    """Coefficient of z^2 in Phi near 0: 0, finite, or inf.

    Governed by the smallest exponent: below 2 the ratio Phi(z)/z^2
    blows up, above 2 it dies, at 2 it is that term's coefficient.
    """
    g0 = phi.g0
    if g0 < 2:
        return math.inf
    if g0 > 2:
        return 0.0
    return phi.coeff_at(2.0)


def growth_limit(phi: EntropyLaw, exponent: float) -> float:
    """lim_{z->inf} Phi(z)/z^exponent: 0, the matching coefficient, or inf."""
    gi = phi.g_inf
    if gi > exponent:
        return math.inf
    if gi < exponent:
        return 0.0
    return phi.coeff_at(gi)

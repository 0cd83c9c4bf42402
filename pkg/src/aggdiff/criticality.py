"""Regime classification for the mass-constrained minimization of F.

The classifier weighs three analytic quantities against each other: the
small-density balance chi (the z^2 coefficient of Phi near 0) versus the
kernel mass ||K||_1, the large-density growth of Phi versus the kernel's
weak-L^p singularity through the exponent m*, and two fallback growth
conditions for entropies with no finite chi.  Outcomes:

  exists_chi_zero          chi = 0 and growth subcritical: minimizers at
                           every mass (aggregation always beats spreading
                           at low density)
  exists_strong_kernel     0 < chi < inf and 2 chi < ||K||_1, growth
                           subcritical: minimizers at every mass
  nonexistence_weak_kernel S = chi ||u||_2^2 with ||K||_1 < 2 chi: the
                           infimum is 0 and is not attained
  exists_large_mass        sub-quadratic entropy growth Phi(tz) <= t^nu
                           Phi(z): minimizers once the mass is large
  exists_slow_decay        kernel with a power-type lower decay bound plus
                           flat small-z entropy: minimizers exist
  borderline_balance       2 chi = ||K||_1 exactly: no claim either way
  indeterminate            none of the certificates applies

The subcriticality certificate compares liminf Phi(z)/z^{m*} against
(1/2) C0 wk(delta) M^{2 - m*}, where wk is the weak-L^p seminorm of the
kernel truncated to B_delta and C0 the chain constant, known here only
through an empirical lower-bound estimate; every report carries the C0
and delta it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import InteractionOperator, free_energy, ghls_check, interaction
from .grids import Profile, RadialGrid, SupportOverflowError, random_bump_profile, rescale_mass_invariant
from .models import (
    EntropyLaw,
    Kernel,
    chi_of,
    growth_limit,
    kernel_eval,
    kernel_l1,
    kernel_mstar,
    kernel_singularity_index,
    kernel_weak_lp,
    phi_eval,
)

REGIMES = (
    "exists_chi_zero",
    "exists_strong_kernel",
    "nonexistence_weak_kernel",
    "exists_large_mass",
    "exists_slow_decay",
    "borderline_balance",
    "indeterminate",
)


@dataclass(frozen=True)
class CriticalityReport:
    m_star: float
    chi: float  # math.inf allowed
    k_l1: float  # math.inf allowed
    subcritical_ok: bool
    regime: str
    m_c: float  # largest certified-subcritical mass, math.inf allowed
    delta_used: float
    c0_used: float
    notes: tuple


def _small_z_limit(phi: EntropyLaw, exponent: float) -> float:
    """lim_{z->0} Phi(z)/z^exponent: the smallest term exponent decides."""
    if phi.g0 > exponent:
        return 0.0
    if phi.g0 < exponent:
        return math.inf
    return phi.coeff_at(phi.g0)


def entropy_subhomogeneous(phi: EntropyLaw, nu: float) -> bool:
    """Phi(t z) <= t^nu Phi(z) for all t >= 1 (sampled on a log grid;
    exact for single powers, where it holds iff the exponent is <= nu)."""
    if not 1.0 < nu < 2.0:
        raise ValueError("nu must lie in (1, 2)")
    t = np.logspace(0.0, 3.0, 40)
    z = np.logspace(-3.0, 3.0, 40)
    lhs = phi_eval(phi, np.outer(t, z))
    rhs = np.power(t, nu)[:, None] * phi_eval(phi, z)[None, :]
    return bool(np.all(lhs <= rhs * (1.0 + 1e-12)))


def kernel_decay_condition(kernel: Kernel, alpha: float, phi: EntropyLaw) -> bool:
    """K(t r) >= t^-alpha K(r) for t >= 1 (power-type lower decay bound),
    together with Phi(z)/z^{1+alpha/d} -> 0 as z -> 0."""
    if not 0.0 < alpha < kernel.d:
        raise ValueError("alpha must lie in (0, d)")
    if _small_z_limit(phi, 1.0 + alpha / kernel.d) != 0.0:
        return False
    r = np.logspace(-2.0, 1.0, 30)
    t = np.logspace(0.0, 3.0, 30)
    base = kernel_eval(kernel, r)
    far = kernel_eval(kernel, np.outer(t, r))
    ok = far >= np.power(t, -alpha)[:, None] * base[None, :] * (1.0 - 1e-12)
    return bool(np.all(ok))


def _condition_rhs(kernel: Kernel, p: float, delta: float, c0: float, M: float, m_star: float) -> float:
    wk = kernel_weak_lp(kernel, p, delta)
    return 0.5 * c0 * wk * M ** (2.0 - m_star)


def classify(
    phi: EntropyLaw,
    kernel: Kernel,
    M: float,
    delta: float = 1.0,
    c0_est: float | None = None,
    nu: float | None = None,
    alpha: float | None = None,
) -> CriticalityReport:
    if not M > 0:
        raise ValueError("M must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    m_star = kernel_mstar(kernel)
    p = kernel_singularity_index(kernel)
    chi = chi_of(phi)
    k1 = kernel_l1(kernel)
    notes = []

    lhs = growth_limit(phi, m_star)
    if lhs == math.inf:
        subcritical_ok = True
        delta_used = delta
        c0 = 0.0 if c0_est is None else c0_est
        notes.append(f"growth exponent above {m_star:g}: subcritical at any mass and any chain constant")
    else:
        if c0_est is None:
            c0 = default_chain_constant(kernel, p, delta)
            notes.append(f"chain constant estimated from a default ensemble: {c0:.6g}")
        else:
            c0 = c0_est
        # "for some delta": smaller truncation radius only shrinks the bound
        best = min((delta / 4.0, delta, 4.0 * delta), key=lambda dd: _condition_rhs(kernel, p, dd, c0, M, m_star))
        delta_used = best
        subcritical_ok = lhs > _condition_rhs(kernel, p, best, c0, M, m_star)
        notes.append(f"growth condition checked with empirical lower-bound chain constant at delta={best:g}")

    m_c = critical_mass_bound(phi, kernel, delta_used, c0)

    quad_chi = chi if phi.terms == ((chi, 2.0),) else None
    if quad_chi is not None and math.isfinite(quad_chi) and k1 < 2.0 * quad_chi:
        regime = "nonexistence_weak_kernel"
        notes.append("kernel mass below the quadratic-entropy threshold: infimum 0, not attained")
    elif not subcritical_ok:
        regime = "indeterminate"
        notes.append(f"growth condition fails at M={M:g}: no certificate at this mass")
    elif chi == 0.0:
        regime = "exists_chi_zero"
    elif math.isfinite(chi) and 2.0 * chi < k1:
        regime = "exists_strong_kernel"
    elif math.isfinite(chi) and 2.0 * chi == k1:
        regime = "borderline_balance"
        notes.append("2 chi equals the kernel mass exactly: existence undecided at the balance point")
    elif math.isfinite(chi):
        regime = "indeterminate"
        notes.append("finite chi with 2 chi > ||K||_1 but entropy not exactly quadratic")
    else:
        if nu is not None and entropy_subhomogeneous(phi, nu):
            regime = "exists_large_mass"
            notes.append(f"sub-homogeneous entropy (nu={nu:g}): minimizers for all sufficiently large mass")
        elif alpha is not None and kernel_decay_condition(kernel, alpha, phi):
            regime = "exists_slow_decay"
        else:
            regime = "indeterminate"
            notes.append("entropy has no finite chi and no growth certificate was supplied")

    return CriticalityReport(
        m_star=m_star,
        chi=chi,
        k_l1=k1,
        subcritical_ok=subcritical_ok,
        regime=regime,
        m_c=m_c,
        delta_used=delta_used,
        c0_used=c0,
        notes=tuple(notes),
    )


def critical_mass_bound(phi: EntropyLaw, kernel: Kernel, delta: float, c0_est: float) -> float:
    """Largest mass at which the growth condition certifies subcriticality:
    [2 L / (c0 wk)]^{1/(2-m*)} when Phi grows exactly like z^{m*} with
    coefficient L; inf when it grows faster, 0 when slower."""
    m_star = kernel_mstar(kernel)
    if m_star == 1.0:
        return math.inf
    L = growth_limit(phi, m_star)
    if L == math.inf:
        return math.inf
    if L == 0.0:
        return 0.0
    if c0_est < 0:
        raise ValueError("chain-constant estimate must be nonnegative")
    if c0_est == 0.0:
        return math.inf  # vacuous right-hand side
    wk = kernel_weak_lp(kernel, kernel_singularity_index(kernel), delta)
    if wk == 0.0 or wk == math.inf:
        return math.inf if wk == 0.0 else 0.0
    return float((2.0 * L / (c0_est * wk)) ** (1.0 / (2.0 - m_star)))


# -- scaling probe -----------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    lams: tuple
    values: tuple  # F(u_lam) per evaluated lambda
    negative_found: bool
    fitted_exponent: float  # nan when fewer than two negative points in the decade
    skipped: tuple  # lambdas whose spread profile overflowed the grid


def scaling_probe(u: Profile, phi: EntropyLaw, op: InteractionOperator, lam_grid) -> ProbeReport:
    """Evaluate F along the mass-invariant dilation family u_lam (lam <= 1
    spreads) and fit the small-lam power of |F| over the lowest decade in
    which F is negative."""
    lams, values, skipped = [], [], []
    for lam in sorted(set(float(l) for l in lam_grid), reverse=True):
        if not 0.0 < lam <= 1.0:
            raise ValueError("lambda grid must lie in (0, 1]")
        try:
            ul = rescale_mass_invariant(u, lam)
        except SupportOverflowError:
            skipped.append(lam)
            continue
        lams.append(lam)
        values.append(free_energy(phi, op, ul).F)
    neg = [(l, F) for l, F in zip(lams, values) if F < 0.0]
    exponent = math.nan
    if neg:
        lmin = min(l for l, _ in neg)
        decade = [(l, F) for l, F in neg if l <= 10.0 * lmin]
        if len(decade) >= 2:
            xs = np.log([l for l, _ in decade])
            ys = np.log([-F for _, F in decade])
            exponent = float(np.polyfit(xs, ys, 1)[0])
    return ProbeReport(
        lams=tuple(lams),
        values=tuple(values),
        negative_found=bool(neg),
        fitted_exponent=exponent,
        skipped=tuple(skipped),
    )


# -- empirical chain constant ------------------------------------------------


@dataclass(frozen=True)
class ChainConstant:
    value: float
    degenerate: bool


def estimate_chain_constant(
    kernel: Kernel,
    p: float,
    delta: float,
    ensemble_size: int = 200,
    seed: int = 0,
    grid: RadialGrid | None = None,
) -> ChainConstant:
    """Empirical lower bound for the constant tying the truncated
    interaction energy to the weak-norm Lebesgue bound: the ensemble
    maximum of lhs/mid over seeded random profiles.  A lower bound only;
    the true constant may be larger."""
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be >= 1")
    g = grid if grid is not None else RadialGrid(kernel.d, 20.0, 256)
    op_trunc = interaction(g, kernel.truncated(delta))
    rng = np.random.default_rng(seed)
    best = 0.0
    any_ok = False
    for _ in range(ensemble_size):
        u = random_bump_profile(g, rng)
        rep = ghls_check(u, kernel, p, delta, op_trunc=op_trunc)
        if not rep.degenerate:
            any_ok = True
            best = max(best, rep.ratio)
    return ChainConstant(value=best, degenerate=not any_ok)


def default_chain_constant(kernel: Kernel, p: float, delta: float) -> float:
    """Small-ensemble estimate on a coarse grid, for classify callers that
    do not supply their own constant."""
    rep = estimate_chain_constant(kernel, p, delta, ensemble_size=64, seed=20, grid=RadialGrid(kernel.d, 12.0, 128))
    return rep.value

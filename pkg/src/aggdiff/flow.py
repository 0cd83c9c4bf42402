"""Energy-descending flows toward candidate minimizers of F over the
fixed-mass class, and the trichotomy bookkeeping for their iterates.

Two schemes:

* finite_volume_pde: explicit conservative upwind discretization of
  u_t + div(u grad K*u) = Lap P(u), P(z) = c (e-1) z^e for a single-power
  entropy c z^e (so P = coeff z^m when Phi = coeff z^m/(m-1)).  Interface
  flux = A [u_upw v - (P_{i+1} - P_i)/dr] with v the radial derivative of
  K*u and zero flux through r = 0 and r = R.  Mass is conserved by
  telescoping; positivity and energy dissipation hold under the CFL bound
  and are re-checked every step, with the step retried at half tau on
  violation.

* projected_descent: u <- max(0, u - tau (g - mu)) with g the first
  variation and the multiplier mu solved by bisection so the mass
  constraint is exact; backtracking line search keeps F nonincreasing.

Iterates are classified against a truncated-domain proxy of the
concentration-compactness trichotomy: vanishing (sup small, F near 0),
boundary saturation (mass piling into the outer annuli, the grid's
observable stand-in for dichotomy or escape to infinity), or stationary
(small mass-weighted KKT residual with stagnating F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import InteractionOperator
from .grids import Profile, mass
from .models import EntropyLaw, phi_eval, phi_prime
from .rearrange import is_nonincreasing, symmetric_decreasing_rearrangement

TRACE_COLUMNS = ("step", "S", "W", "F", "sup", "boundary_mass", "mass_error", "residual")
_STAG_WINDOW = 100  # steps over which F stagnation is measured


class CflViolation(RuntimeError):
    """Explicit step produced a negative cell or increased F."""


class NumericalFailure(RuntimeError):
    """Flow collapsed: repeated CFL rejection or non-finite values."""


@dataclass(frozen=True)
class FlowConfig:
    scheme: str = "projected_descent"  # or "finite_volume_pde"
    tau: float | None = None  # None = adaptive (CFL / line search)
    cfl: float = 0.4
    max_steps: int = 60000
    tol_stat: float = 1e-5
    tol_sup: float = 0.02
    tol_F: float = 1e-6
    theta_b: float = 0.3
    resymmetrize_every: int = 0
    widths: tuple = (0.5, 1.0, 2.0)
    log_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("projected_descent", "finite_volume_pde"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.theta_b < 1:
            raise ValueError("theta_b must lie in (0, 1)")
        for name in ("tol_stat", "tol_sup", "tol_F"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1 or self.log_every < 1:
            raise ValueError("max_steps and log_every must be >= 1")


@dataclass(frozen=True)
class MinimizeResult:
    final: Profile
    trace: np.ndarray  # rows of TRACE_COLUMNS
    outcome: str  # stationary | vanishing | dichotomy_saturation | max_iter
    residual: float
    mu: float
    i_m: float  # this run's upper-bound contribution to I_M
    steps: int


@dataclass(frozen=True)
class StationarityReport:
    mu: float
    residual: float
    degenerate: bool


def first_variation(phi: EntropyLaw, op: InteractionOperator, u: Profile) -> np.ndarray:
    """g_i = Phi'(u_i) - (K*u)_i, the gradient of F in the mass-weighted
    inner product <a, b> = sum a_i b_i w_i.  Not a density, hence a bare
    array rather than a Profile."""
    conv = op.psi @ (op.kappa * u.values)
    return phi_prime(phi, u.values) - conv


def _kkt(u_vals, w, g, M):
    """Multiplier and L1 residual of the mass-weighted KKT condition."""
    uw = u_vals * w
    supp = uw.sum()
    if supp <= 0:
        return 0.0, 0.0, True
    mu = float(np.dot(g, uw) / supp)
    res = float(np.dot(np.abs(g - mu), uw) / M)
    return mu, res, False


def stationarity_check(u: Profile, phi: EntropyLaw, op: InteractionOperator) -> StationarityReport:
    """Euler-Lagrange check Phi'(u) = K*u + mu on the support of u:
    mu is the mass-weighted mean of g there, the residual the worst
    |g - mu| u_i / M over the support."""
    M = mass(u)
    if M == 0:
        return StationarityReport(0.0, 0.0, True)
    g = first_variation(phi, op, u)
    tol = 1e-12 * u.values.max(initial=0.0)
    supp = u.values > tol
    uw = u.values * u.grid.volumes
    mu = float(np.dot(g[supp], uw[supp]) / uw[supp].sum())
    res = float(np.max(np.abs(g[supp] - mu) * u.values[supp]) / M)
    return StationarityReport(mu, res, False)


# -- single steps -----------------------------------------------------------


def _pressure_term(phi: EntropyLaw):
    if len(phi.terms) != 1:
        raise ValueError("finite_volume_pde needs a single-power entropy")
    c, e = phi.terms[0]
    return c * (e - 1.0), e


def fv_stable_tau(phi: EntropyLaw, op: InteractionOperator, u: Profile, cfl: float = 0.4) -> float:
    """CFL bound cfl * min(dr / max|v|, dr^2 / (2 max P'(u)))."""
    g = u.grid
    conv = op.psi @ (op.kappa * u.values)
    vmax = float(np.abs(np.diff(conv)).max(initial=0.0)) / g.dr
    pc, pe = _pressure_term(phi)
    dmax = float(pc * pe * np.power(u.values.max(initial=0.0), pe - 1.0))
    t_adv = g.dr / vmax if vmax > 0 else math.inf
    t_dif = g.dr**2 / (2.0 * dmax) if dmax > 0 else math.inf
    tau = cfl * min(t_adv, t_dif)
    if math.isinf(tau):
        raise NumericalFailure("flow is frozen: zero velocity and zero pressure")
    return tau


def step_finite_volume(phi: EntropyLaw, op: InteractionOperator, u: Profile, tau: float) -> Profile:
    """One explicit conservative step; raises CflViolation on a negative cell."""
    g = u.grid
    vals = u.values
    conv = op.psi @ (op.kappa * vals)
    pc, pe = _pressure_term(phi)
    press = pc * np.power(vals, pe)
    # interior faces at edges e_1 .. e_{N-1}
    v = np.diff(conv) / g.dr
    upw = np.where(v >= 0, vals[:-1], vals[1:])
    area = _face_areas(g)
    flux = area * (upw * v - np.diff(press) / g.dr)
    div = np.zeros(g.N)
    div[:-1] += flux
    div[1:] -= flux
    new = vals - (tau / g.volumes) * div
    if not np.all(np.isfinite(new)):
        raise NumericalFailure("non-finite density in finite-volume step")
    floor = new.min(initial=0.0)
    if floor < 0.0:
        if floor < -1e-14 * max(new.max(initial=0.0), 1e-300):
            raise CflViolation(f"negative cell {floor:.3e} at tau={tau:.3e}")
        new = np.maximum(new, 0.0)
    return Profile(g, new)


def _face_areas(g) -> np.ndarray:
    from .grids import SPHERE_AREA

    return SPHERE_AREA[g.d] * g.edges[1:-1] ** (g.d - 1)


def project_to_mass(u_vals, w, g, tau: float, M: float):
    """max(0, u - tau (g - mu)) with mu bisected so the mass is M."""
    lo = float(g.min())
    hi = float(g.max())

    def trial(mu):
        return np.maximum(0.0, u_vals - tau * (g - mu))

    if hi <= lo:
        return u_vals.copy(), lo
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if float(np.dot(trial(mid), w)) < M:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    return trial(mu), mu


def step_projected_descent(
    phi: EntropyLaw, op: InteractionOperator, u: Profile, tau: float
) -> tuple[Profile, float]:
    """One projected-gradient step at fixed tau (no line search)."""
    g = first_variation(phi, op, u)
    vals, mu = project_to_mass(u.values, u.grid.volumes, g, tau, mass(u))
    return Profile(u.grid, vals), mu


# -- the driver -------------------------------------------------------------


def _free_energy_parts(phi, op, vals, w):
    conv = op.psi @ (op.kappa * vals)
    S = float(np.dot(phi_eval(phi, vals), w))
    W = float(np.dot(vals * w, conv))
    return S, W, S - 0.5 * W, conv


def minimize(
    u0: Profile, phi: EntropyLaw, op: InteractionOperator, config: FlowConfig
) -> MinimizeResult:
    g = u0.grid
    w = g.volumes
    M = mass(u0)
    if M <= 0:
        raise ValueError("minimize needs a profile with positive mass")
    n_bnd = max(1, int(round(0.1 * g.N)))  # outer 10% of radii

    u = Profile(g, u0.values.copy())
    rows = []
    f_hist = []
    outcome = "max_iter"
    descent = config.scheme == "projected_descent"
    tau = config.tau if config.tau is not None else (0.1 if descent else None)
    safety = 1.0
    mu = 0.0
    residual = math.inf

    step = 0
    while True:
        vals = u.values
        S, W, F, conv = _free_energy_parts(phi, op, vals, w)
        if not math.isfinite(F):
            raise NumericalFailure("free energy is not finite")
        grad = phi_prime(phi, vals) - conv
        mu, residual, _ = _kkt(vals, w, grad, M)
        bnd = float(np.dot(vals[-n_bnd:], w[-n_bnd:]))
        merr = abs(float(np.dot(vals, w)) - M)
        if step % config.log_every == 0 or step == config.max_steps:
            rows.append((step, S, W, F, vals.max(initial=0.0), bnd, merr, residual))
        f_hist.append(F)

        if vals.max(initial=0.0) < config.tol_sup and F > -config.tol_F:
            outcome = "vanishing"
            break
        if bnd > config.theta_b * M:
            outcome = "dichotomy_saturation"
            break
        stagnated = (
            len(f_hist) > _STAG_WINDOW
            and f_hist[-_STAG_WINDOW - 1] - F <= config.tol_stat * max(abs(F), 1e-30)
        )
        if residual < config.tol_stat and (len(f_hist) == 1 or stagnated):
            outcome = "stationary"
            break
        if step >= config.max_steps:
            outcome = "max_iter"
            break

        # one accepted step, retrying on rejection
        if descent:
            trial_tau = tau
            accepted = False
            for _ in range(40):
                new_vals, new_mu = project_to_mass(vals, w, grad, trial_tau, M)
                nS, nW, nF, _ = _free_energy_parts(phi, op, new_vals, w)
                if nF <= F:
                    accepted = True
                    break
                trial_tau *= 0.5
            if not accepted:
                # cannot decrease F at any step size: numerically stationary
                outcome = "stationary"
                break
            tau = min(trial_tau * 1.3, 1e3)
            mu = new_mu
            u = Profile(g, new_vals)
        else:
            base = fv_stable_tau(phi, op, u, config.cfl) if config.tau is None else config.tau
            trial_tau = base * safety
            accepted = False
            for _ in range(40):
                try:
                    cand = step_finite_volume(phi, op, u, trial_tau)
                except CflViolation:
                    trial_tau *= 0.5
                    safety *= 0.5
                    continue
                _, _, cF, _ = _free_energy_parts(phi, op, cand.values, w)
                if cF <= F + 1e-10 * abs(F):
                    accepted = True
                    break
                trial_tau *= 0.5
                safety *= 0.5
            if not accepted:
                raise NumericalFailure("finite-volume step rejected 40 times")
            safety = min(1.0, safety * 1.1)
            u = cand
        step += 1

        if config.resymmetrize_every and step % config.resymmetrize_every == 0:
            sym = symmetric_decreasing_rearrangement(u)
            _, _, sF, _ = _free_energy_parts(phi, op, sym.values, w)
            if sF <= f_hist[-1]:
                u = sym

    changed = False
    if config.resymmetrize_every and not is_nonincreasing(u):
        sym = symmetric_decreasing_rearrangement(u)
        _, _, sF, _ = _free_energy_parts(phi, op, sym.values, w)
        if sF <= f_hist[-1]:
            u = sym
            changed = True

    if changed or rows[-1][0] != step:
        vals = u.values
        S, W, F, conv = _free_energy_parts(phi, op, vals, w)
        grad = phi_prime(phi, vals) - conv
        mu, residual, _ = _kkt(vals, w, grad, M)
        bnd = float(np.dot(vals[-n_bnd:], w[-n_bnd:]))
        row = (step, S, W, F, vals.max(initial=0.0), bnd, abs(float(np.dot(vals, w)) - M), residual)
        if rows[-1][0] == step:
            rows[-1] = row
        else:
            rows.append(row)
    final_F = rows[-1][3]
    i_m = 0.0 if outcome == "vanishing" else min(final_F, 0.0)
    return MinimizeResult(
        final=u,
        trace=np.array(rows),
        outcome=outcome,
        residual=residual,
        mu=mu,
        i_m=i_m,
        steps=step,
    )


def trichotomy_diagnose(trace: np.ndarray, M: float, config: FlowConfig) -> str:
    """Re-derive the outcome from a saved trace (pure function of the rows)."""
    last = trace[-1]
    sup, bnd, F, res = last[4], last[5], last[3], last[7]
    if sup < config.tol_sup and F > -config.tol_F:
        return "vanishing"
    if bnd > config.theta_b * M:
        return "dichotomy_saturation"
    window = trace[trace[:, 0] >= last[0] - _STAG_WINDOW]
    stagnated = window[0, 3] - F <= config.tol_stat * max(abs(F), 1e-30)
    if res < config.tol_stat and stagnated:
        return "stationary"
    return "max_iter"


@dataclass(frozen=True)
class InfimumReport:
    estimate: float
    outcomes: tuple
    finals: tuple  # final F per start
    all_vanished: bool


def gaussian_profile(grid, M: float, width: float) -> Profile:
    """Gaussian bump of exact discrete mass M."""
    u = Profile.from_function(grid, lambda r: np.exp(-((r / width) ** 2)))
    return Profile(grid, u.values * (M / mass(u)))


def infimum_estimate(
    M: float,
    phi: EntropyLaw,
    op: InteractionOperator,
    config: FlowConfig,
    widths=None,
) -> InfimumReport:
    """Upper bound for I_M: best final F over multistart Gaussians of mass M
    (a vanished start contributes 0, consistent with spreading to zero)."""
    widths = tuple(widths) if widths is not None else config.widths
    if not widths:
        raise ValueError("need at least one start width")
    outs, finals, contribs = [], [], []
    for wdt in widths:
        res = minimize(gaussian_profile(op.grid, M, wdt), phi, op, config)
        outs.append(res.outcome)
        finals.append(float(res.trace[-1, 3]))
        contribs.append(res.i_m)
    return InfimumReport(
        estimate=min(min(contribs), 0.0),
        outcomes=tuple(outs),
        finals=tuple(finals),
        all_vanished=all(o == "vanishing" for o in outs),
    )

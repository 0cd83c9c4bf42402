import numpy as np
import pytest

from aggdiff.energy import free_energy, interaction
from aggdiff.flow import (
    CflViolation,
    FlowConfig,
    MinimizeResult,
    first_variation,
    fv_stable_tau,
    gaussian_profile,
    infimum_estimate,
    minimize,
    project_to_mass,
    step_finite_volume,
    step_projected_descent,
    stationarity_check,
    trichotomy_diagnose,
)
from aggdiff.grids import Profile, RadialGrid, mass
from aggdiff.models import EntropyLaw, Kernel, kernel_l1
from aggdiff.rearrange import is_nonincreasing

from tests.conftest import random_profile

QUAD = EntropyLaw.power(2.0, 1.0)


def zero_kernel(d=2):
    return Kernel(shape="exponential", d=d, c=0.0)


def strong_kernel():
    # ||K||_1 = 2 pi, well above the quadratic-entropy threshold 2
    return Kernel(shape="exponential", d=2, c=1.0)


def weak_kernel():
    # ||K||_1 = 1/2, below threshold: spreading wins
    return Kernel(shape="exponential", d=2, c=1.0 / (4.0 * np.pi))


# -- config ------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(scheme="jko")
    with pytest.raises(ValueError):
        FlowConfig(tau=0.0)
    with pytest.raises(ValueError):
        FlowConfig(theta_b=1.0)
    with pytest.raises(ValueError):
        FlowConfig(tol_stat=-1e-5)
    with pytest.raises(ValueError):
        FlowConfig(max_steps=0)


# -- first variation ---------------------------------------------------------


def test_first_variation_pure_entropy(grid_d2):
    op = interaction(grid_d2, zero_kernel())
    u = gaussian_profile(grid_d2, 1.0, 1.0)
    g = first_variation(QUAD, op, u)
    assert np.allclose(g, 2.0 * u.values, rtol=0, atol=1e-14)


def test_first_variation_zero_profile(grid_d2):
    op = interaction(grid_d2, strong_kernel())
    u = Profile(grid_d2, np.zeros(grid_d2.N))
    assert np.all(first_variation(QUAD, op, u) == 0.0)


def test_gradient_matches_finite_differences(grid_d2):
    # directional derivative <g,h> vs central differences of F
    op = interaction(grid_d2, strong_kernel())
    phi = EntropyLaw.power(2.5, 1.3)
    rng = np.random.default_rng(7)
    w = grid_d2.volumes
    eps = 1e-5
    for _ in range(20):
        base = random_profile(grid_d2, rng).values + 1e-3
        u = Profile(grid_d2, base)
        h = random_profile(grid_d2, rng, bumps=3).values - random_profile(grid_d2, rng, bumps=3).values
        g = first_variation(phi, op, u)
        lhs = float(np.dot(g * w, h))
        fp = free_energy(phi, op, u.with_values(base + eps * h)).F
        fm = free_energy(phi, op, u.with_values(base - eps * h)).F
        fd = (fp - fm) / (2 * eps)
        assert abs(lhs - fd) <= 1e-5 * max(abs(fd), 1e-12)


# -- projection --------------------------------------------------------------


def test_projection_mass_exact(grid_d2):
    rng = np.random.default_rng(3)
    w = grid_d2.volumes
    for _ in range(10):
        u = random_profile(grid_d2, rng)
        M = mass(u)
        g = rng.normal(size=grid_d2.N)
        vals, mu = project_to_mass(u.values, w, g, 0.1, M)
        assert np.all(vals >= 0)
        assert abs(float(np.dot(vals, w)) - M) <= 1e-12 * M


def test_projection_constant_gradient_fixed_point(grid_d2):
    op = interaction(grid_d2, zero_kernel())
    u = Profile(grid_d2, np.full(grid_d2.N, 0.3))
    new, mu = step_projected_descent(QUAD, op, u, 0.1)
    assert np.allclose(new.values, u.values, rtol=0, atol=1e-12)
    assert abs(mu - 0.6) < 1e-9  # g = 2u = 0.6 everywhere


# -- finite-volume step ------------------------------------------------------


def test_fv_constant_no_kernel_is_fixed_point(grid_d2):
    op = interaction(grid_d2, zero_kernel())
    u = Profile(grid_d2, np.full(grid_d2.N, 0.5))
    new = step_finite_volume(QUAD, op, u, 1e-3)
    assert np.array_equal(new.values, u.values)


def test_fv_porous_medium_max_decreases(grid_d2):
    # no attraction, m = 2: degenerate diffusion spreads any bump
    op = interaction(grid_d2, zero_kernel())
    u = gaussian_profile(grid_d2, 1.0, 1.5)
    sup = u.values.max()
    for _ in range(200):
        tau = fv_stable_tau(QUAD, op, u, 0.4)
        u = step_finite_volume(QUAD, op, u, tau)
        new_sup = u.values.max()
        assert new_sup < sup
        sup = new_sup


def test_fv_rejects_giant_step(grid_d2):
    op = interaction(grid_d2, strong_kernel())
    u = gaussian_profile(grid_d2, 1.0, 1.0)
    with pytest.raises(CflViolation):
        step_finite_volume(QUAD, op, u, 50.0)


def test_fv_needs_single_power(grid_d2):
    op = interaction(grid_d2, zero_kernel())
    phi = EntropyLaw(form="power_sum", terms=((1.0, 2.0), (0.5, 3.0)))
    u = gaussian_profile(grid_d2, 1.0, 1.0)
    with pytest.raises(ValueError):
        step_finite_volume(phi, op, u, 1e-3)


def test_fv_mass_and_positivity_long_run(grid_d2):
    op = interaction(grid_d2, strong_kernel())
    u0 = gaussian_profile(grid_d2, 1.0, 1.0)
    res = minimize(u0, QUAD, op, FlowConfig(scheme="finite_volume_pde", max_steps=2000))
    assert res.trace[:, 6].max() <= 1e-10
    assert res.final.values.min() >= 0.0
    dF = np.diff(res.trace[:, 3])
    assert np.all(dF <= 1e-10 * np.abs(res.trace[:-1, 3]))


# -- minimize: the three regimes --------------------------------------------


@pytest.fixture(scope="module")
def strong_op(grid_d2):
    return interaction(grid_d2, strong_kernel())


@pytest.fixture(scope="module")
def weak_op(grid_d2):
    return interaction(grid_d2, weak_kernel())


@pytest.fixture(scope="module")
def strong_run(grid_d2, strong_op):
    u0 = gaussian_profile(grid_d2, 1.0, 1.0)
    return minimize(u0, QUAD, strong_op, FlowConfig(resymmetrize_every=25))


def test_strong_kernel_reaches_stationary(strong_run):
    assert strong_run.outcome == "stationary"
    assert strong_run.trace[-1, 3] < 0
    assert strong_run.residual < 1e-5
    assert is_nonincreasing(strong_run.final)


def test_strong_kernel_trace_monotone(strong_run):
    tr = strong_run.trace
    dF = np.diff(tr[:, 3])
    assert np.all(dF <= 1e-10 * np.abs(tr[:-1, 3]))
    assert tr[:, 6].max() <= 1e-10


def test_strong_kernel_euler_lagrange(strong_run, strong_op):
    rep = stationarity_check(strong_run.final, QUAD, strong_op)
    assert not rep.degenerate
    assert rep.residual < 1e-4
    # quadratic entropy: multiplying the stationarity relation by u gives mu = 2F/M
    assert abs(rep.mu - 2.0 * strong_run.trace[-1, 3]) < 1e-6


def test_schemes_agree_on_final_energy(grid_d2, strong_op, strong_run):
    u0 = gaussian_profile(grid_d2, 1.0, 1.0)
    fv = minimize(u0, QUAD, strong_op, FlowConfig(scheme="finite_volume_pde", max_steps=10000))
    f_d, f_fv = strong_run.trace[-1, 3], fv.trace[-1, 3]
    assert abs(f_fv - f_d) <= 0.01 * abs(f_d)


def test_weak_kernel_vanishes(grid_d2, weak_op):
    k1 = kernel_l1(weak_kernel())
    for width in (0.5, 1.0, 2.0):
        res = minimize(gaussian_profile(grid_d2, 1.0, width), QUAD, weak_op, FlowConfig())
        assert res.outcome == "vanishing"
        tr = res.trace
        # S = ||u||_2^2 here; spreading obeys the quadratic lower bound throughout
        assert np.all(tr[:, 3] >= (1.0 - k1 / 2.0) * tr[:, 1] - 1e-3 * tr[:, 1])


def test_rerun_of_converged_state_exits_immediately(strong_run, strong_op):
    again = minimize(strong_run.final, QUAD, strong_op, FlowConfig())
    assert again.outcome == "stationary"
    assert again.steps == 0


def test_max_iter_outcome(grid_d2, strong_op):
    res = minimize(gaussian_profile(grid_d2, 1.0, 1.0), QUAD, strong_op, FlowConfig(max_steps=3))
    assert res.outcome == "max_iter"
    assert res.steps == 3


def test_minimize_rejects_zero_mass(grid_d2, strong_op):
    with pytest.raises(ValueError):
        minimize(Profile(grid_d2, np.zeros(grid_d2.N)), QUAD, strong_op, FlowConfig())


def test_quadratic_mass_scaling(grid_d2, strong_op):
    # S and W are exactly quadratic forms, so I_M = M^2 I_1 cell by cell
    i1 = infimum_estimate(1.0, QUAD, strong_op, FlowConfig())
    i2 = infimum_estimate(2.0, QUAD, strong_op, FlowConfig())
    assert i2.estimate < i1.estimate < 0
    assert abs(i2.estimate - 4.0 * i1.estimate) <= 1e-9 * abs(i1.estimate)


def test_infimum_weak_kernel_is_zero(grid_d2, weak_op):
    rep = infimum_estimate(1.0, QUAD, weak_op, FlowConfig())
    assert rep.estimate == 0.0
    assert rep.all_vanished
    assert rep.outcomes == ("vanishing",) * 3


def test_infimum_pure_diffusion(grid_d2):
    op = interaction(grid_d2, zero_kernel())
    rep = infimum_estimate(1.0, EntropyLaw.power(3.0), op, FlowConfig())
    assert rep.estimate == 0.0
    assert rep.all_vanished


def test_infimum_needs_widths(grid_d2, strong_op):
    with pytest.raises(ValueError):
        infimum_estimate(1.0, QUAD, strong_op, FlowConfig(), widths=())


# -- diagnosis ---------------------------------------------------------------


def test_diagnose_matches_run_outcomes(strong_run, grid_d2, weak_op):
    cfg = FlowConfig()
    assert trichotomy_diagnose(strong_run.trace, 1.0, FlowConfig(resymmetrize_every=25)) == "stationary"
    weak = minimize(gaussian_profile(grid_d2, 1.0, 1.0), QUAD, weak_op, cfg)
    assert trichotomy_diagnose(weak.trace, 1.0, cfg) == "vanishing"


def test_diagnose_boundary_loaded_trace():
    # synthetic trace: 40% of the mass parked in the outer annuli
    cfg = FlowConfig()
    row = [10.0, 0.5, 0.2, 0.4, 1.0, 0.4, 0.0, 0.1]
    trace = np.array([[0.0, 0.6, 0.1, 0.55, 1.2, 0.05, 0.0, 0.5], row])
    assert trichotomy_diagnose(trace, 1.0, cfg) == "dichotomy_saturation"


def test_diagnose_max_iter():
    cfg = FlowConfig()
    trace = np.array([[float(k), 0.5, 0.2, 0.4 - 1e-3 * k, 1.0, 0.0, 0.0, 0.1] for k in range(5)])
    assert trichotomy_diagnose(trace, 1.0, cfg) == "max_iter"


def test_stationarity_check_degenerate(grid_d2, strong_op):
    rep = stationarity_check(Profile(grid_d2, np.zeros(grid_d2.N)), QUAD, strong_op)
    assert rep.degenerate


def test_stationarity_check_random_is_far(grid_d2, strong_op):
    rng = np.random.default_rng(11)
    rep = stationarity_check(random_profile(grid_d2, rng), QUAD, strong_op)
    assert rep.residual > 1e-3


# -- misc --------------------------------------------------------------------


def test_trace_logging_stride(grid_d2, strong_op):
    res = minimize(
        gaussian_profile(grid_d2, 1.0, 1.0), QUAD, strong_op, FlowConfig(max_steps=50, log_every=10)
    )
    steps = res.trace[:, 0]
    assert steps[0] == 0
    assert steps[-1] == res.steps
    assert np.all(np.diff(steps) <= 10)


def test_gaussian_profile_mass(grid_d3):
    u = gaussian_profile(grid_d3, 2.5, 1.2)
    assert abs(mass(u) - 2.5) < 1e-12

"""Experiment drivers behind both the CLI and the HTTP service.

Each run_* function takes a validated RunConfig, computes with the core
modules, and returns a JSON-ready dict; with out_dir set it also writes
the canonical CSV/text artifacts.  Every written file starts with a
comment line carrying the artifact version and the config hash, so saved
outputs are traceable to the exact run that made them.  Identical config
and seed give bit-identical files.

Non-finite numbers are mapped to None in returned dicts (strict JSON has
no inf/nan); the text artifacts keep the literal inf.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .criticality import classify, estimate_chain_constant, scaling_probe
from .energy import InteractionOperator, free_energy, interaction
from .flow import TRACE_COLUMNS, gaussian_profile, minimize
from .grids import RadialGrid, mass, read_profile_csv, write_profile_csv
from .models import EntropyLaw, growth_limit, kernel_mstar, kernel_singularity_index
from .schemas import ClassifySpec, ProbeSpec, RunConfig
from .svg import line_chart


def _stamp(cfg: RunConfig) -> str:
    return f"aggdiff {__version__} config_sha256={cfg.config_hash()}"


def _emit(out_dir: str, name: str, stamp: str, lines) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w") as fh:
        fh.write(f"# {stamp}\n")
        for line in lines:
            fh.write(line + "\n")


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run_energy(cfg: RunConfig, out_dir: str | None = None) -> dict:
    grid = cfg.grid.to_grid()
    phi = cfg.entropy.to_entropy()
    kernel = cfg.kernel.to_kernel()
    if cfg.profile is not None and cfg.profile.path is not None:
        u = read_profile_csv(cfg.profile.path)
        if u.grid != grid:
            raise ValueError("profile grid does not match the config grid")
    else:
        width = cfg.profile.width if cfg.profile is not None else 1.0
        u = gaussian_profile(grid, cfg.mass, width)
    rep = free_energy(phi, interaction(grid, kernel), u)
    result = {"S": rep.S, "W": rep.W, "F": rep.F, "mass": mass(u)}
    if out_dir:
        _emit(out_dir, "energy.txt", _stamp(cfg), [f"{k}={v!r}" for k, v in result.items()])
    return result


def run_classify(cfg: RunConfig, out_dir: str | None = None) -> dict:
    spec = cfg.classify if cfg.classify is not None else ClassifySpec()
    phi = cfg.entropy.to_entropy()
    kernel = cfg.kernel.to_kernel()
    if spec.c0 is not None:
        c0 = spec.c0
    elif math.isinf(growth_limit(phi, kernel_mstar(kernel))):
        c0 = 0.0  # growth strictly supercritical-proof: the constant is irrelevant
    else:
        est = estimate_chain_constant(
            kernel,
            kernel_singularity_index(kernel),
            spec.delta,
            ensemble_size=spec.ensemble,
            seed=cfg.seed,
            grid=RadialGrid(kernel.d, 12.0, 128),
        )
        c0 = est.value
    rep = classify(phi, kernel, cfg.mass, spec.delta, c0, spec.nu, spec.alpha)
    raw = {
        "regime": rep.regime,
        "m_star": rep.m_star,
        "chi": rep.chi,
        "k_l1": rep.k_l1,
        "subcritical_ok": rep.subcritical_ok,
        "m_c": rep.m_c,
        "delta_used": rep.delta_used,
        "c0_used": rep.c0_used,
        "notes": list(rep.notes),
    }
    if out_dir:
        _emit(out_dir, "classify.txt", _stamp(cfg), [f"{k}={v!r}" for k, v in raw.items()])
    return {k: _jsonable(v) for k, v in raw.items()}


def run_probe(cfg: RunConfig, out_dir: str | None = None) -> dict:
    spec = cfg.probe if cfg.probe is not None else ProbeSpec()
    grid = cfg.grid.to_grid()
    phi = cfg.entropy.to_entropy()
    op = interaction(grid, cfg.kernel.to_kernel())
    u = gaussian_profile(grid, cfg.mass, spec.width)
    rep = scaling_probe(u, phi, op, spec.lambdas)
    result = {
        "rows": [[l, F] for l, F in zip(rep.lams, rep.values)],
        "negative_found": rep.negative_found,
        "fitted_exponent": _jsonable(rep.fitted_exponent),
        "skipped": list(rep.skipped),
    }
    if out_dir:
        stamp = _stamp(cfg)
        _emit(out_dir, "probe.csv", stamp, ["lambda,F"] + [f"{l!r},{F!r}" for l, F in zip(rep.lams, rep.values)])
        absF = [max(abs(F), 1e-300) for F in rep.values]
        svg = line_chart(
            list(rep.lams), absF, title="free energy under dilation",
            xlabel="lambda", ylabel="|F|", logx=True, logy=True,
        )
        with open(os.path.join(out_dir, "probe.svg"), "w") as fh:
            fh.write(f"<!-- {stamp} -->\n" + svg + "\n")
    return result


def _multistart(grid, phi, op, M: float, fcfg):
    runs = []
    for w in fcfg.widths:
        runs.append((w, minimize(gaussian_profile(grid, M, w), phi, op, fcfg)))
    finals = [res.trace[-1, 3] for _, res in runs]
    best = int(np.argmin(finals))
    estimate = min(min(res.i_m for _, res in runs), 0.0)
    return runs, best, estimate


def _run_summary(width: float, res) -> dict:
    return {
        "width": width,
        "outcome": res.outcome,
        "final_F": float(res.trace[-1, 3]),
        "residual": res.residual,
        "steps": res.steps,
        "sup": float(res.trace[-1, 4]),
    }


def run_minimize(cfg: RunConfig, out_dir: str | None = None) -> dict:
    grid = cfg.grid.to_grid()
    phi = cfg.entropy.to_entropy()
    op = interaction(grid, cfg.kernel.to_kernel())
    fcfg = cfg.flow.to_config()
    runs, best, estimate = _multistart(grid, phi, op, cfg.mass, fcfg)
    result = {
        "runs": [_run_summary(w, res) for w, res in runs],
        "best_width": runs[best][0],
        "best_outcome": runs[best][1].outcome,
        "estimate": estimate,
    }
    if out_dir:
        stamp = _stamp(cfg)
        for w, res in runs:
            rows = [",".join(repr(v) for v in row) for row in res.trace.tolist()]
            _emit(out_dir, f"trace_w{w:g}.csv", stamp, [",".join(TRACE_COLUMNS)] + rows)
        write_profile_csv(runs[best][1].final, os.path.join(out_dir, "final.csv"), header_lines=[stamp])
        lines = [f"estimate={estimate!r}", f"best_width={runs[best][0]:g}"]
        for w, res in runs:
            s = _run_summary(w, res)
            lines.append(
                f"width={w:g} outcome={s['outcome']} F={s['final_F']!r} "
                f"residual={s['residual']!r} steps={s['steps']}"
            )
        _emit(out_dir, "summary.txt", stamp, lines)
    return result


def _sweep_point(cfg: RunConfig, grid, base_phi, base_kernel, base_op, value: float):
    phi, op, M = base_phi, base_op, cfg.mass
    if cfg.sweep.parameter == "kernel_c":
        kernel = replace(base_kernel, c=value)
        op = InteractionOperator(
            grid=grid,
            kernel=kernel,
            psi=base_op.psi * value,
            kappa=base_op.kappa,
            err_near=base_op.err_near * value,
            err_far=base_op.err_far * value,
        )
    elif cfg.sweep.parameter == "mass":
        M = value
    else:  # entropy_m
        if cfg.entropy.form != "power":
            raise ValueError("entropy_m sweep needs a power entropy")
        phi = EntropyLaw.power(value, cfg.entropy.coeff)
    runs, best, estimate = _multistart(grid, phi, op, M, cfg.flow.to_config())
    w, res = runs[best]
    return {
        "value": value,
        "outcome": res.outcome,
        "i_m": estimate,
        "sup": float(res.trace[-1, 4]),
    }


def run_sweep(cfg: RunConfig, out_dir: str | None = None, jobs: int = 1) -> dict:
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    grid = cfg.grid.to_grid()
    phi = cfg.entropy.to_entropy()
    kernel = cfg.kernel.to_kernel()
    if cfg.sweep.parameter == "kernel_c":
        # the pair weights are linear in the amplitude: build once at c = 1
        base_op = interaction(grid, replace(kernel, c=1.0))
    else:
        base_op = interaction(grid, kernel)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda v: _sweep_point(cfg, grid, phi, kernel, base_op, v), cfg.sweep.values))
    else:
        rows = [_sweep_point(cfg, grid, phi, kernel, base_op, v) for v in cfg.sweep.values]
    result = {"parameter": cfg.sweep.parameter, "rows": rows}
    if out_dir:
        _emit(
            out_dir,
            "sweep.csv",
            _stamp(cfg),
            ["value,outcome,i_m,sup"]
            + [f"{r['value']!r},{r['outcome']},{r['i_m']!r},{r['sup']!r}" for r in rows],
        )
    return result

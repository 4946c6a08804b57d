"""Experiment drivers behind the command-line subcommands.

Each ``run_*`` function takes a merged configuration mapping and returns an
ordered mapping of output file name to :class:`Table`. Writing files is the
CLI's job.
"""

import math
from typing import NamedTuple

from .config import ConfigError, grid, select
from .copula import LoanClassParams, PortfolioSpec
from .dist import delta_from_shape
from .exposure import ExposureLaw, fit_power_law, hhi, hhi_powerlaw_limit, read_exposure_csv
from .errors import BoundaryCaseError
from .lhp import LimitModel, mix_cdf, mix_density, mix_var
from .montecarlo import McConfig, convergence_experiment, simulate_losses


class Table(NamedTuple):
    columns: tuple
    rows: list


def mc_config(cfg, levels=None):
    mc = cfg["mc"]
    return McConfig(
        n_samples=int(mc["n_samples"]),
        seed=int(mc["seed"]),
        quantile_levels=tuple(levels if levels is not None else (0.99, 0.995, 0.999)),
        chunk_size=int(mc["chunk_size"]),
        workers=int(mc.get("workers", 1)),
        method=mc.get("method", "auto"),
    )


def sensitivity_model(scn, shape, omega_green):
    return LimitModel.from_shape(scn["pd_green"], scn["pd_brown"], scn["rho_green"], scn["rho_brown"], omega_green, shape)


def loss_grid(points):
    """``points`` uniform levels strictly inside (0, 1)."""
    return [k / (points + 1) for k in range(1, points + 1)]


def run_limit(cfg, scenarios=()):
    sens = cfg["sensitivity"]
    chosen = select(sens["scenarios"], scenarios, "scenario")
    ells = loss_grid(int(cfg["limit"]["grid_points"]))
    rows = []
    for name, scn in chosen.items():
        for shape in sens["shapes"]:
            model = sensitivity_model(scn, float(shape), float(sens["omega_green"]))
            dens = mix_density(model, ells)
            cdf = mix_cdf(model, ells)
            rows.extend((name, float(shape), ell, float(f), float(c)) for ell, f, c in zip(ells, dens, cdf))
    return {"limit_density.csv": Table(("scenario", "shape", "loss", "density", "cdf"), rows)}


def run_var(cfg, scenarios=()):
    sens = cfg["sensitivity"]
    vcfg = cfg["var"]
    names = list(scenarios) or list(vcfg["scenarios"])
    chosen = select(sens["scenarios"], names, "scenario")
    pd_grid = grid(vcfg["pd_green_grid"])
    levels = [float(q) for q in vcfg["levels"]]
    profile = []
    for name, scn in chosen.items():
        for shape in vcfg["shapes"]:
            for pg in pd_grid:
                scn_pg = dict(scn, pd_green=float(pg), pd_brown=float(vcfg["pd_brown"]))
                model = sensitivity_model(scn_pg, float(shape), float(sens["omega_green"]))
                for q in levels:
                    profile.append((name, float(shape), q, float(pg), mix_var(model, q)))

    sweep_cfg = vcfg["omega_sweep"]
    level = float(sweep_cfg["level"])
    sweep = []
    all_scn = select(sens["scenarios"], scenarios, "scenario")
    for name, scn in all_scn.items():
        for shape in sweep_cfg["shapes"]:
            # VaR is affine in omega_green, so two evaluations fix the whole line.
            v0 = mix_var(sensitivity_model(scn, float(shape), 0.0), level)
            v1 = mix_var(sensitivity_model(scn, float(shape), 1.0), level)
            for wg in grid(sweep_cfg["omega_green_grid"]):
                model = sensitivity_model(scn, float(shape), float(wg))
                sweep.append((name, float(shape), level, float(wg), mix_var(model, level), (1 - wg) * v0 + wg * v1))
    return {
        "var_vs_pd_green.csv": Table(("scenario", "shape", "level", "pd_green", "var"), profile),
        "var_vs_omega_green.csv": Table(("scenario", "shape", "level", "omega_green", "var", "var_affine"), sweep),
    }


def run_alpha_sens(cfg, configs=()):
    acfg = cfg["alpha_sens"]
    chosen = select(acfg["configs"], configs, "config")
    level = float(acfg["level"])
    rows = []
    for cid, c in chosen.items():
        for alpha in grid(acfg["alpha_grid"]):
            alpha = round(float(alpha), 12)
            model = LimitModel.from_shape(c["pd"], c["pd"], c["rho"], c["rho"], 1.0, alpha)
            rows.append((cid, alpha, mix_var(model, level)))
    return {"var_vs_alpha.csv": Table(("config_id", "alpha", "var99"), rows)}


def convergence_template(scn, decay, shift=0.0):
    delta = delta_from_shape(float(scn["shape"]))
    return PortfolioSpec(
        LoanClassParams(scn["pd_green"], scn["rho"], delta, 0.0, 0),
        LoanClassParams(scn["pd_brown"], scn["rho"], delta, 1.0, 0),
        ExposureLaw.power(float(decay), shift),
    )


def _with_share(template, share):
    return PortfolioSpec(template.green.replace(omega=share), template.brown.replace(omega=1.0 - share), template.exposure_law)


def run_converge(cfg, scenarios=()):
    ccfg = cfg["converge"]
    chosen = select(ccfg["scenarios"], scenarios, "scenario")
    levels = [float(q) for q in ccfg["levels"]]
    mc = mc_config(cfg, levels)
    share = float(ccfg["green_share"])
    out = {}
    errors = []
    for name, scn in chosen.items():
        rows = []
        for decay in ccfg["decays"]:
            template = _with_share(convergence_template(scn, decay), share)
            for r in convergence_experiment(template, ccfg["sizes"], mc, green_share=share):
                rows.append(tuple(r))
                errors.append((name, r.a, r.level, r.n, abs(r.error)))
        out[f"converge_{name}.csv"] = Table(
            ("n", "a", "level", "var_empirical", "var_analytic", "error", "hhi_g", "hhi_b"), rows
        )
    out["converge_errors.csv"] = Table(("scenario", "a", "level", "n", "abs_error"), errors)
    return out


def run_fit_exposures(path):
    """Fit the power law to ranked exposures read from ``path``.

    Returns the tables and a list of human-readable notes.
    """
    data = read_exposure_csv(path)
    fit = fit_power_law(data)
    notes = []
    if fit.a < 1e-3:
        notes.append("fitted decay a is ~0: exposures are flat and the power-law model is degenerate")
    try:
        lim = hhi_powerlaw_limit(fit.a)
        limit, rate, exact = lim.limit, lim.rate_exponent, lim.exact_limit
    except BoundaryCaseError:
        limit = rate = exact = math.nan
        notes.append(f"a = {fit.a} is a boundary case; HHI limits not reported")
    row = (
        len(data),
        fit.a,
        fit.b,
        fit.c,
        *fit.ci95["a"],
        *fit.ci95["b"],
        *fit.ci95["c"],
        fit.rmse,
        fit.r2,
        hhi(data),
        limit,
        math.nan if exact is None else exact,
        math.nan if rate is None else rate,
    )
    cols = (
        "n", "a", "b", "c", "a_lo", "a_hi", "b_lo", "b_hi", "c_lo", "c_hi",
        "rmse", "r2", "hhi", "hhi_limit_approx", "hhi_limit_exact", "hhi_rate_exponent",
    )
    return {"fit_exposures.csv": Table(cols, [row])}, notes, fit


def simulate_spec(scfg):
    try:
        delta = delta_from_shape(float(scfg["shape"]))
        n = int(scfg["n"])
        n_green = int(round(float(scfg["green_share"]) * n))
        wg = float(scfg["omega_green"])
        green = LoanClassParams(scfg["pd_green"], scfg["rho_green"], delta, wg, n_green)
        brown = LoanClassParams(scfg["pd_brown"], scfg["rho_brown"], delta, 1.0 - wg, n - n_green)
    except KeyError as exc:
        raise ConfigError(f"simulate block is missing {exc}") from exc
    return PortfolioSpec(green, brown, ExposureLaw.power(float(scfg["decay"]), float(scfg.get("shift", 0.0))))


def run_simulate(cfg):
    scfg = cfg["simulate"]
    spec = simulate_spec(scfg)
    levels = [float(q) for q in scfg["levels"]]
    mc = mc_config(cfg, levels)
    summary = simulate_losses(spec, mc, keep_samples=True)
    model = LimitModel.from_spec(spec)
    rows = [
        (q, summary.empirical_quantiles[q], mix_var(model, q), summary.empirical_quantiles[q] - mix_var(model, q))
        for q in levels
    ]
    stats_rows = [
        ("n_samples", float(summary.n_samples)),
        ("mean", summary.mean),
        ("variance", summary.variance),
        ("hhi_g", summary.hhi_g),
        ("hhi_b", summary.hhi_b),
    ]
    tables = {
        "simulate_quantiles.csv": Table(("level", "var_empirical", "var_analytic", "error"), rows),
        "simulate_stats.csv": Table(("statistic", "value"), stats_rows),
    }
    return tables, summary

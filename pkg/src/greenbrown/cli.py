"""Command-line entry point: ``greenbrown <command> [options]``.

Exit codes: 0 on success, 2 on usage, configuration or ingestion errors,
1 on numeric failures.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import ConfigError, config_hash, load_config
from .errors import DomainError, FitError, IngestionError

log = logging.getLogger("greenbrown")

# Plot scripts are emitted as text for the user to run; nothing here imports matplotlib.
_PLOT_HEADER = '''"""Generated by greenbrown {cmd}. Run with: python {name}"""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def read(name):
    with open(HERE / name) as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    return rows


def series(rows, keys, x, y):
    out = defaultdict(lambda: ([], []))
    for r in rows:
        k = tuple(r[c] for c in keys)
        out[k][0].append(float(r[x]))
        out[k][1].append(float(r[y]))
    return out

'''

_PLOT_BODIES = {
    "limit": '''
rows = read("limit_density.csv")
scenarios = sorted({r["scenario"] for r in rows})
fig, axes = plt.subplots(1, len(scenarios), figsize=(4 * len(scenarios), 3.5), squeeze=False)
for ax, scn in zip(axes[0], scenarios):
    for (shape,), (x, y) in series([r for r in rows if r["scenario"] == scn], ["shape"], "loss", "density").items():
        ax.plot(x, y, label=f"shape {shape}")
    ax.set_xlim(0, 0.2)
    ax.set_title(scn)
    ax.set_xlabel("loss")
    ax.legend()
fig.tight_layout()
fig.savefig(HERE / "limit_density.png", dpi=150)
''',
    "var": '''
rows = read("var_vs_pd_green.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for (scn, shape, level), (x, y) in series(rows, ["scenario", "shape", "level"], "pd_green", "var").items():
    ax.plot(x, y, label=f"{scn} shape {shape} level {level}")
ax.set_xlabel("green PD")
ax.set_ylabel("VaR")
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig(HERE / "var_vs_pd_green.png", dpi=150)

rows = read("var_vs_omega_green.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for (scn, shape), (x, y) in series(rows, ["scenario", "shape"], "omega_green", "var").items():
    ax.plot(x, y, label=f"{scn} shape {shape}")
ax.set_xlabel("green exposure share")
ax.set_ylabel("VaR")
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig(HERE / "var_vs_omega_green.png", dpi=150)
''',
    "alpha-sens": '''
rows = read("var_vs_alpha.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for (cid,), (x, y) in series(rows, ["config_id"], "alpha", "var99").items():
    ax.plot(x, y, label=cid)
ax.set_xlabel("shape")
ax.set_ylabel("VaR 99%")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "var_vs_alpha.png", dpi=150)
''',
    "converge": '''
rows = read("converge_errors.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for (scn, a, level), (x, y) in series(rows, ["scenario", "a", "level"], "n", "abs_error").items():
    ax.plot(x, y, marker="o", label=f"{scn} a={a} level {level}")
ax.set_xlabel("portfolio size n")
ax.set_ylabel("|empirical - analytic VaR|")
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig(HERE / "converge_errors.png", dpi=150)
''',
    "fit-exposures": '''
row = read("fit_exposures.csv")[0]
a, b, c = float(row["a"]), float(row["b"]), float(row["c"])
n = int(row["n"])
i = list(range(1, n + 1))
fig, ax = plt.subplots(figsize=(6, 4))
ax.loglog(i, [c / (b + k) ** a for k in i], label=f"fit a={a:.4f} b={b:.3f} c={c:.4g}")
ax.set_xlabel("rank")
ax.set_ylabel("exposure weight")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "fit_exposures.png", dpi=150)
''',
    "simulate": '''
rows = read("simulate_quantiles.csv")
fig, ax = plt.subplots(figsize=(6, 4))
lv = [float(r["level"]) for r in rows]
ax.plot(lv, [float(r["var_empirical"]) for r in rows], "o-", label="empirical")
ax.plot(lv, [float(r["var_analytic"]) for r in rows], "s--", label="limit")
ax.set_xlabel("level")
ax.set_ylabel("VaR")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "simulate_quantiles.png", dpi=150)
''',
}


def write_table(path, table, provenance):
    with open(path, "w", newline="") as fh:
        fh.write(provenance + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        # str() of a Python float is its shortest round-trip repr.
        writer.writerows([[float(v) if isinstance(v, np.floating) else v for v in row] for row in table.rows])


def write_outputs(out_dir, cmd, tables, cfg):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = f"# greenbrown {cmd} config_sha256={config_hash(cfg)} seed={cfg['mc']['seed']}"
    written = []
    for name, table in tables.items():
        write_table(out_dir / name, table, provenance)
        written.append(out_dir / name)
    script_name = f"plot_{cmd.replace('-', '_')}.py"
    script = _PLOT_HEADER.format(cmd=cmd, name=script_name) + _PLOT_BODIES[cmd]
    (out_dir / script_name).write_text(script)
    written.append(out_dir / script_name)
    return written


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file merged over the packaged presets")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
    common.add_argument("--samples", type=int, help="Monte Carlo replications")
    common.add_argument("--quick", action="store_true", help="use the small quick-mode sample count")
    common.add_argument("--workers", type=int, help="worker processes for simulation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="greenbrown", description="Green/brown skew-normal credit portfolio analytics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("limit", parents=[common], help="limit density and cdf on a loss grid")
    p.add_argument("--scenario", action="append", default=[], help="sensitivity preset (repeatable)")
    p = sub.add_parser("var", parents=[common], help="VaR profiles over green PD and green share")
    p.add_argument("--scenario", action="append", default=[], help="sensitivity preset (repeatable)")
    p = sub.add_parser("alpha-sens", parents=[common], help="VaR 99%% as a function of the shape")
    p.add_argument("--scenario", action="append", default=[], help="market configuration preset (repeatable)")
    p = sub.add_parser("converge", parents=[common], help="finite-portfolio convergence study")
    p.add_argument("--scenario", action="append", default=[], help="convergence preset (repeatable)")
    p = sub.add_parser("fit-exposures", parents=[common], help="fit u_i = c/(b+i)^a to ranked exposures")
    p.add_argument("csv_path", type=Path, help="CSV with header rank,weight")
    p = sub.add_parser("simulate", parents=[common], help="simulate one finite portfolio")
    p.add_argument("--raw", action="store_true", help="also write the sorted loss sample to losses.npy")
    return parser


def apply_overrides(cfg, args):
    mc = cfg["mc"]
    if args.quick:
        mc["n_samples"] = mc["quick_samples"]
    if args.samples is not None:
        mc["n_samples"] = args.samples
    if args.seed is not None:
        mc["seed"] = args.seed
    if args.workers is not None:
        mc["workers"] = args.workers
    return cfg


def run(args):
    cfg = apply_overrides(load_config(args.config), args)
    cmd = args.command
    if cmd == "limit":
        tables = harness.run_limit(cfg, args.scenario)
    elif cmd == "var":
        tables = harness.run_var(cfg, args.scenario)
    elif cmd == "alpha-sens":
        tables = harness.run_alpha_sens(cfg, args.scenario)
    elif cmd == "converge":
        tables = harness.run_converge(cfg, args.scenario)
    elif cmd == "fit-exposures":
        tables, notes, _ = harness.run_fit_exposures(args.csv_path)
        for note in notes:
            log.warning(note)
    elif cmd == "simulate":
        tables, summary = harness.run_simulate(cfg)
    written = write_outputs(args.out, cmd, tables, cfg)
    if cmd == "simulate" and args.raw:
        np.save(args.out / "losses.npy", summary.losses)
        written.append(args.out / "losses.npy")
    for path in written:
        log.info("wrote %s", path)
    return written


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        run(args)
    except (ConfigError, IngestionError) as exc:
        print(f"greenbrown: error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, FitError) as exc:
        print(f"greenbrown: numeric failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

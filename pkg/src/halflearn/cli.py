"""Experiment runner: single runs, parameter sweeps, spectral studies, plots.

Configuration precedence is flags over config-file keys over defaults, and the
effective configuration is echoed into summary.txt so every output is
reproducible from it. All outputs (CSV and SVG) are byte-deterministic given
the configuration and seed.

Exit codes: 0 success, 1 validation error, 2 infeasible or failed learning
run, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import svg as svgmod
from .adversary import AttackStrategy, MaliciousOracle, NastyOracle
from .core import ConstantsProfile, named_profile, random_unit
from .dist import DistributionSpec, RejectionBudgetError
from .learner import LearnFailure, LearnerConfig, Mode, run_malicious, run_nasty
from .outlier import RemovalInfeasible
from .rng import stream
from .spectral import SpectralStudy, chernoff_study, exceedance_frequency, write_study_csv

DEFAULTS = {
    "mode": "malicious",
    "d": 10,
    "eps": 0.1,
    "delta": 0.05,
    "eta": 0.0,
    "dist": "gaussian",
    "strategy": "randomflip",
    "profile": "practical",
    "seed": 0,
    "out": ".",
    "diagnostics": False,
    "format": "csv",
    "workers": 1,
    "iter_budget": 2000,
}

_BOOL_KEYS = {"diagnostics"}
_INT_KEYS = {"d", "seed", "workers", "iter_budget"}
_FLOAT_KEYS = {"eps", "delta", "eta"}


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in _BOOL_KEYS:
            return value.strip().lower() in ("1", "true", "yes", "on")
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    return value


def load_config_file(path) -> dict:
    """Flat key=value lines; # starts a comment; keys may be dotted."""
    out = {}
    text = Path(path).read_text()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key=value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def effective_config(args: argparse.Namespace, flag_keys) -> dict:
    cfg = dict(DEFAULTS)
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = load_config_file(args.config)
    for key, value in file_cfg.items():
        cfg[key] = value
    for key in flag_keys:
        value = getattr(args, key.replace(".", "_"), None)
        if value is not None:
            cfg[key] = value
    return {k: _coerce(k, v) for k, v in cfg.items()}


def build_profile(cfg: dict) -> ConstantsProfile:
    profile = named_profile(str(cfg.get("profile", "practical")))
    overrides = {
        key.split(".", 1)[1]: str(value)
        for key, value in cfg.items()
        if key.startswith("profile.")
    }
    if overrides:
        text = "\n".join(f"{k}={v}" for k, v in overrides.items())
        profile = ConstantsProfile.from_text(text, base=profile)
    return profile


def build_dist(cfg: dict) -> DistributionSpec:
    token = str(cfg["dist"])
    if ":" in token:
        return DistributionSpec.parse(token)
    return DistributionSpec.parse(f"{token}:d={int(cfg['d'])}")


def _write_lines(path: Path, items) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in items))


def execute_run(cfg: dict) -> tuple[object, object]:
    """Build oracle and learner from an effective config and run once."""
    profile = build_profile(cfg)
    dist = build_dist(cfg)
    mode = Mode(str(cfg["mode"]))
    seed = int(cfg["seed"])
    eta = float(cfg["eta"])
    strategy = AttackStrategy.parse(str(cfg["strategy"]), seed=seed)
    target = random_unit(stream(seed, "target"), dist.dim)
    learner_cfg = LearnerConfig(
        epsilon=float(cfg["eps"]),
        delta=float(cfg["delta"]),
        dist=dist,
        profile=profile,
        mode=mode,
        seed=seed,
        diagnostics=bool(cfg["diagnostics"]),
        iter_budget=int(cfg["iter_budget"]),
    )
    if mode is Mode.MALICIOUS:
        oracle = MaliciousOracle(dist, target, eta, strategy, seed=seed)
        result = run_malicious(learner_cfg, oracle, diag_target=target)
    else:
        oracle = NastyOracle(dist, target, eta, strategy, seed=seed)
        result = run_nasty(learner_cfg, oracle, diag_target=target)
    return result, target


def cmd_run(cfg: dict) -> int:
    out_dir = Path(str(cfg["out"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    result, _ = execute_run(cfg)
    report = result.report
    report.write_csv(out_dir / "run_report.csv")
    items = [(f"config.{k}", cfg[k]) for k in sorted(cfg)]
    items += report.summary_items()
    _write_lines(out_dir / "summary.txt", items)
    return 0


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("d", "eta", "eps", "strategy", "nscale")


def _parse_axis(token: str, caster):
    return [caster(part) for part in str(token).split(",") if part.strip()]


def _sweep_cell(payload: dict) -> dict:
    cfg = dict(payload["cfg"])
    cell = payload["cell"]
    seeds = payload["seeds"]
    cfg.update({k: v for k, v in cell.items() if k != "nscale"})
    if "nscale" in cell:
        cfg["profile.n_scale"] = repr(cell["nscale"])
    errs = []
    failures = 0
    n_total = 0
    for seed in seeds:
        cfg["seed"] = seed
        try:
            result, _ = execute_run(cfg)
            errs.append(result.report.final_err_estimate)
            n_total = result.report.total_instance_calls
        except (LearnFailure, RemovalInfeasible, RejectionBudgetError):
            failures += 1
    row = dict(cell)
    row["seeds"] = len(seeds)
    row["failures"] = failures
    row["n_total"] = n_total
    row["err_median"] = statistics.median(errs) if errs else math.nan
    row["status"] = "ok" if failures == 0 else ("failed" if not errs else "partial")
    return row


def cmd_sweep(cfg: dict) -> int:
    out_dir = Path(str(cfg["out"]))
    out_dir.mkdir(parents=True, exist_ok=True)

    axes: dict[str, list] = {}
    casters = {"d": int, "eta": float, "eps": float, "strategy": str, "nscale": float}
    for axis in SWEEP_AXES:
        token = cfg.get(f"sweep.{axis}")
        if token is not None:
            axes[axis] = _parse_axis(token, casters[axis])
    if not axes:
        raise ValueError("sweep requires at least one sweep.<axis> (d, eta, eps, strategy, nscale)")
    n_seeds = int(cfg.get("sweep.seeds", 5))
    seeds = [int(cfg["seed"]) + i for i in range(n_seeds)]

    cells = [{}]
    for axis, values in axes.items():
        cells = [dict(cell, **{axis: v}) for cell in cells for v in values]
    payloads = [{"cfg": cfg, "cell": cell, "seeds": seeds} for cell in cells]

    workers = int(cfg.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(p) for p in payloads]

    columns = list(axes.keys()) + ["seeds", "failures", "n_total", "err_median", "status"]
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns]
            )

    if str(cfg["format"]) in ("svg", "both"):
        _sweep_plots(rows, axes, float(cfg["eps"]), out_dir)
    return 0


def _sweep_plots(rows, axes, eps_target: float, out_dir: Path) -> None:
    by_d: dict[object, svgmod.Series] = {}
    for row in rows:
        if math.isnan(row["err_median"]) or row["n_total"] <= 0:
            continue
        key = row.get("d", "all")
        series = by_d.setdefault(key, svgmod.Series(label=f"d={key}", points=[]))
        series.points.append((row["n_total"], max(row["err_median"], 1e-6)))
    if by_d:
        text = svgmod.scatter_svg(
            list(by_d.values()),
            title="error vs sample budget",
            xlabel="instance calls",
            ylabel="median error",
            log_x=True,
            log_y=True,
        )
        (out_dir / "error_vs_n.svg").write_text(text)
    if "d" in axes and "nscale" in axes:
        pts = []
        for d in axes["d"]:
            feas = [
                row["n_total"]
                for row in rows
                if row.get("d") == d
                and row["status"] == "ok"
                and not math.isnan(row["err_median"])
                and row["err_median"] <= eps_target
            ]
            if feas:
                pts.append((float(d), float(min(feas))))
        if pts:
            text = svgmod.scatter_svg(
                [svgmod.Series(label="minimal n", points=pts)],
                title="minimal sample budget vs dimension",
                xlabel="dimension",
                ylabel="instance calls",
                log_x=True,
                log_y=True,
            )
            (out_dir / "min_n_vs_d.svg").write_text(text)


# ---------------------------------------------------------------------------
# Spectral study
# ---------------------------------------------------------------------------


def cmd_spectral(cfg: dict) -> int:
    out_dir = Path(str(cfg["out"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    dims = tuple(_parse_axis(cfg.get("spectral.dims", "10,50"), int))
    n_factors = tuple(_parse_axis(cfg.get("spectral.nfactors", "20"), float))
    study = SpectralStudy(
        dims=dims,
        n_factors=n_factors,
        halfwidth=float(cfg.get("spectral.b", 0.1)),
        radius=float(cfg.get("spectral.r", 0.1)),
        trials=int(cfg.get("spectral.trials", 40)),
        seed=int(cfg["seed"]),
        kind=build_dist(cfg).kind,
    )
    rows = chernoff_study(study)
    write_study_csv(rows, out_dir / "spectral.csv")
    items = [(f"config.{k}", cfg[k]) for k in sorted(cfg)]
    for d in dims:
        for nf in n_factors:
            freq = exceedance_frequency(rows, d=d, n_factor=nf)
            items.append((f"exceedance.d{d}.nf{nf}", repr(freq)))
    _write_lines(out_dir / "summary.txt", items)
    if str(cfg["format"]) in ("svg", "both"):
        series = []
        for d in dims:
            pts = [(float(r.n), r.lambda_max) for r in rows if r.d == d]
            series.append(svgmod.Series(label=f"d={d}", points=pts, draw_line=False))
        (out_dir / "spectral.svg").write_text(
            svgmod.scatter_svg(
                series,
                title="empirical top eigenvalue",
                xlabel="slab draws",
                ylabel="lambda max",
                log_x=True,
            )
        )
    return 0


def cmd_report(cfg: dict) -> int:
    """Re-render SVG plots from CSV files already present in the out dir."""
    out_dir = Path(str(cfg["out"]))
    made = 0
    sweep_path = out_dir / "sweep.csv"
    if sweep_path.exists():
        with open(sweep_path, newline="") as fh:
            rows = []
            for rec in csv.DictReader(fh):
                rows.append(
                    {
                        "d": int(rec["d"]) if "d" in rec else "all",
                        "n_total": int(rec["n_total"]),
                        "err_median": float(rec["err_median"]),
                        "status": rec["status"],
                    }
                )
        axes = {"d": sorted({r["d"] for r in rows})} if rows and rows[0]["d"] != "all" else {}
        _sweep_plots(rows, axes, float(cfg["eps"]), out_dir)
        made += 1
    spectral_path = out_dir / "spectral.csv"
    if spectral_path.exists():
        with open(spectral_path, newline="") as fh:
            recs = list(csv.DictReader(fh))
        series: dict[int, svgmod.Series] = {}
        for rec in recs:
            d = int(rec["d"])
            s = series.setdefault(d, svgmod.Series(label=f"d={d}", points=[], draw_line=False))
            s.points.append((float(rec["n"]), float(rec["lambda_max"])))
        (out_dir / "spectral.svg").write_text(
            svgmod.scatter_svg(
                list(series.values()),
                title="empirical top eigenvalue",
                xlabel="slab draws",
                ylabel="lambda max",
                log_x=True,
            )
        )
        made += 1
    if made == 0:
        raise ValueError(f"no sweep.csv or spectral.csv found under {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> list[str]:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--mode", choices=["malicious", "nasty"])
    parser.add_argument("--d", type=int, help="instance dimension")
    parser.add_argument("--eps", type=float, help="target error rate")
    parser.add_argument("--delta", type=float, help="failure probability")
    parser.add_argument("--eta", type=float, help="corruption rate")
    parser.add_argument("--dist", help="distribution token, e.g. gaussian or explog:d=50")
    parser.add_argument("--strategy", help="attack token, e.g. bandflip or faroutlier:R=100")
    parser.add_argument("--profile", help="constants profile name (practical or theory)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--diagnostics", action="store_const", const=True, default=None)
    parser.add_argument("--format", choices=["csv", "svg", "both"])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--iter-budget", dest="iter_budget", type=int)
    return [
        "mode", "d", "eps", "delta", "eta", "dist", "strategy",
        "profile", "seed", "out", "diagnostics", "format", "workers", "iter_budget",
    ]


def make_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="halflearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    flag_keys = {}

    p_run = sub.add_parser("run", help="one learning run")
    flag_keys["run"] = _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="cross-product parameter sweep")
    keys = _add_common(p_sweep)
    for axis in SWEEP_AXES:
        p_sweep.add_argument(f"--sweep-{axis}", dest=f"sweep.{axis}".replace(".", "_"))
    p_sweep.add_argument("--seeds", dest="sweep_seeds", type=int)
    flag_keys["sweep"] = keys + [f"sweep.{a}" for a in SWEEP_AXES] + ["sweep.seeds"]

    p_spec = sub.add_parser("spectral", help="covariance concentration study")
    keys = _add_common(p_spec)
    p_spec.add_argument("--dims", dest="spectral_dims")
    p_spec.add_argument("--nfactors", dest="spectral_nfactors")
    p_spec.add_argument("--b", dest="spectral_b", type=float)
    p_spec.add_argument("--r", dest="spectral_r", type=float)
    p_spec.add_argument("--trials", dest="spectral_trials", type=int)
    flag_keys["spectral"] = keys + [
        "spectral.dims", "spectral.nfactors", "spectral.b", "spectral.r", "spectral.trials",
    ]

    p_rep = sub.add_parser("report", help="re-render plots from CSV outputs")
    flag_keys["report"] = _add_common(p_rep)
    return parser, flag_keys


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "spectral": cmd_spectral, "report": cmd_report}


def main(argv=None) -> int:
    parser, flag_keys = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = effective_config(args, flag_keys[args.command])
        return COMMANDS[args.command](cfg)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LearnFailure, RemovalInfeasible, RejectionBudgetError) as exc:
        print(f"learning failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()

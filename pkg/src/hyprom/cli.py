"""Command-line entry points: hdm-solve, offline, online-solve, uq, validate-indicator."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .archive import ArchiveError, archive_digest, load_archive, save_archive
from .config import ConfigError, RunConfig
from .greedy import (OfflineProblem, OfflineSettings, TrainingSet, estimate_lipschitz, run_offline,
                     second_level_spaces)
from .hdm import evolve
from .indicator import validate_bound
from .online import OnlineOperator, system_norm
from .uq import DistributionSpec, run_uq_campaign, sample_parameters

log = logging.getLogger("hyprom")

FMT = "%.17g"


def _fmt(v) -> str:
    return FMT % v if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _mu_string(mu) -> str:
    return ";".join(FMT % v for v in mu)


def _training(cfg: RunConfig) -> TrainingSet:
    dom = cfg.build_domain()
    t = cfg.training
    if t.sampling == "uniform_grid":
        return TrainingSet.uniform_grid(dom, t.counts)
    return TrainingSet.monte_carlo(dom, t.M, t.seed)


def _problem(cfg: RunConfig, workers: int) -> OfflineProblem:
    return OfflineProblem(cfg.build_model(), cfg.build_grid(), cfg.build_schedule(), _training(cfg),
                          muscl=cfg.muscl, stride=cfg.offline.stride, workers=workers)


def _settings(cfg: RunConfig) -> OfflineSettings:
    o = cfg.offline
    return OfflineSettings(mode=o.mode, error_mode=o.error_mode, greedy_tol=o.greedy_tol, n_max=o.n_max,
                           max_iterations=o.max_iterations, eim_tol=o.eim_tol, eim_max=o.eim_max,
                           eim_seed_tol=o.eim_seed_tol, eim_seed_max=o.eim_seed_max, n_pod_init=o.n_pod_init,
                           n_pod_add=o.n_pod_add, compression_tol=o.compression_tol,
                           n_eim_extra=cfg.indicator.n_eim_extra, mu0_index=o.mu0_index)


def _state_rows(grid, fields, names):
    for i, x in enumerate(grid.centers):
        yield [float(x)] + [float(fields[c, i]) for c in range(len(names))]


def cmd_hdm_solve(cfg: RunConfig, out: Path, mu=None) -> dict:
    model, grid, schedule = cfg.build_model(), cfg.build_grid(), cfg.build_schedule()
    mu = cfg.default_mu() if mu is None else np.asarray(mu, dtype=float)
    if not cfg.build_domain().contains(mu):
        raise ConfigError(f"--mu {mu.tolist()} lies outside the parameter domain")
    traj = evolve(model, grid, schedule, mu, muscl=cfg.muscl)
    out.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(traj.states, dtype="<f8").tofile(out / "trajectory.bin")
    names = list(model.component_names)
    write_csv(out / "final_state.csv", ["x"] + names, _state_rows(grid, traj.final, names))
    summary = {"mu": mu.tolist(), "n_steps": traj.n_steps, "shape": list(traj.states.shape),
               "dtype": "<f8", "flux_evaluations": traj.flux_evaluations, "config_hash": cfg.offline_hash()}
    (out / "trajectory.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def cmd_offline(cfg: RunConfig, out: Path, workers: int = 1):
    problem = _problem(cfg, workers)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        state = run_offline(problem, _settings(cfg), cfg.build_domain())
    for w in caught:
        log.warning("%s", w.message)
    adir = save_archive(out / "archive", state, cfg.offline_hash(), cfg.to_dict(),
                        extra={"tolerances": {"greedy_tol": cfg.offline.greedy_tol, "eim_tol": cfg.offline.eim_tol},
                               "warning": None if state.converged else "greedy stopped above tolerance"})
    rows = [[r.iteration, "|".join(map(str, r.n_rb)), "|".join(map(str, r.n_eim)), r.max_error,
             "" if r.mu is None else _mu_string(r.mu), int(r.discarded)] for r in state.history]
    write_csv(out / "convergence.csv", ["iteration", "N", "N_EIM", "max_error", "mu", "discarded"], rows)
    log.info("offline done: N=%s N_EIM=%s converged=%s digest=%s", state.n_rb, state.n_eim,
             state.converged, archive_digest(adir))
    return state, adir


def _load(cfg: RunConfig, archive: Path):
    state, manifest = load_archive(archive, cfg.offline_hash())
    op = OnlineOperator(cfg.build_model(), cfg.build_grid(), state.bases, state.spaces,
                        cfg.schedule.dt, muscl=cfg.muscl)
    return state, op


def cmd_online_solve(cfg: RunConfig, archive: Path, out: Path, mu=None) -> dict:
    state, op = _load(cfg, archive)
    mu = cfg.default_mu() if mu is None else np.asarray(mu, dtype=float)
    t0 = time.perf_counter()
    red = op.solve(mu, cfg.schedule.n_steps)
    elapsed = time.perf_counter() - t0
    grid = cfg.build_grid()
    names = list(cfg.build_model().component_names)
    write_csv(out / "reduced_final_state.csv", ["x"] + names,
              _state_rows(grid, red.reconstruct(state.bases, -1), names))
    summary = {"mu": mu.tolist(), "seconds": elapsed, "flux_evaluations_per_step": red.flux_evaluations_per_step,
               "N": list(state.n_rb), "N_EIM": list(state.n_eim)}
    (out / "reduced_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _stats_rows(grid, stats, n_comp):
    cols = [stats.mean, stats.variance, stats.mean_plus_std, stats.mean_minus_std]
    for i, x in enumerate(grid.centers):
        row = [float(x)]
        for c in range(n_comp):
            row += [float(a[c, i]) for a in cols]
        yield row


def cmd_uq(cfg: RunConfig, out: Path, mode: str = "reduced", archive: Path | None = None, seed=None) -> dict:
    if cfg.uq.M < 2:
        raise ConfigError("uq.M: the variance estimator needs at least 2 samples")
    model, grid, schedule = cfg.build_model(), cfg.build_grid(), cfg.build_schedule()
    dom = cfg.build_domain()
    spec = DistributionSpec.uniform(dom, cfg.uq.seed if seed is None else seed, cfg.uq.M)
    mus = sample_parameters(spec)
    modes = ["truth", "reduced"] if mode == "both" else [mode]
    state = op = None
    if "reduced" in modes:
        if archive is None:
            raise ConfigError("reduced UQ needs --archive")
        state, op = _load(cfg, archive)
    names = list(model.component_names)
    header = ["x"] + [f"{n}_{s}" for n in names for s in ("mean", "variance", "mean_plus_std", "mean_minus_std")]
    report = {}
    for m in modes:
        res = run_uq_campaign(m, model, grid, schedule, spec, online=op,
                              bases=state.bases if state else None, muscl=cfg.muscl, parameters=mus)
        write_csv(out / f"stats_{m}.csv", header, _stats_rows(grid, res.stats, len(names)))
        report[m] = {"M": len(mus), "mean_seconds": res.mean_time, "total_seconds": float(res.timings.sum()),
                     "flux_evaluations_per_solve": float(res.flux_evaluations.mean())}
    write_csv(out / "uq_timing.csv", ["solver", "M", "mean_seconds", "total_seconds", "flux_evaluations_per_solve"],
              [[m, r["M"], r["mean_seconds"], r["total_seconds"], r["flux_evaluations_per_solve"]]
               for m, r in report.items()])
    return report


def cmd_validate_indicator(cfg: RunConfig, archive: Path, out: Path, mode: str | None = None,
                           workers: int = 1) -> tuple[int, Path]:
    state, _ = _load(cfg, archive)
    model, grid, schedule = cfg.build_model(), cfg.build_grid(), cfg.build_schedule()
    dom = cfg.build_domain()
    mode = mode or cfg.indicator.mode
    mus = sample_parameters(DistributionSpec.uniform(dom, cfg.indicator.test_seed, cfg.indicator.n_test))
    C = estimate_lipschitz(model, grid, dom, schedule.dt)
    training = None
    if mode == "fixed":
        problem = _problem(cfg, workers)
        training = [problem.eim_training(c) for c in range(model.n_components)]
    report = validate_bound(model, grid, schedule, state.bases, state.spaces, mus, mode=mode,
                            n_extra=cfg.indicator.n_eim_extra, training=training, muscl=cfg.muscl, C=C)
    d = len(dom.lows)
    path = write_csv(out / f"indicator_{mode}.csv", [f"mu_{j}" for j in range(d)] +
                     ["true_error", "eta", "effectivity", "bound_holds"],
                     [[*mu, e, eta, eff, int(eta >= e - 1e-12)] for mu, e, eta, eff in report.rows()])
    return len(report.violations()), path


def _parse_mu(text):
    if text is None:
        return None
    return np.array([float(v) for v in text.split(",")])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyprom", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="config JSON path or preset name")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--mode", default=None)
        return sp

    common(sub.add_parser("hdm-solve", help="truth trajectory")).add_argument("--mu")
    common(sub.add_parser("offline", help="build RB and EIM spaces"))
    for name in ("online-solve", "uq", "validate-indicator"):
        sp = common(sub.add_parser(name))
        sp.add_argument("--archive", type=Path, default=None)
        if name == "online-solve":
            sp.add_argument("--mu")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("HYPROM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = args.out or Path(cfg.output_dir) / cfg.name
        archive = getattr(args, "archive", None) or out / "archive"
        if args.command == "hdm-solve":
            summary = cmd_hdm_solve(cfg, out, _parse_mu(args.mu))
            print(json.dumps(summary))
        elif args.command == "offline":
            state, adir = cmd_offline(cfg, out, args.workers)
            print(f"N={list(state.n_rb)} N_EIM={list(state.n_eim)} converged={state.converged} archive={adir}")
            if not state.converged:
                print("warning: greedy stopped above tolerance", file=sys.stderr)
        elif args.command == "online-solve":
            print(json.dumps(cmd_online_solve(cfg, archive, out, _parse_mu(args.mu))))
        elif args.command == "uq":
            mode = args.mode or "reduced"
            if mode not in ("reduced", "truth", "both"):
                raise ConfigError("--mode for uq: reduced, truth or both")
            print(json.dumps(cmd_uq(cfg, out, mode, archive if mode != "truth" else None, args.seed)))
        elif args.command == "validate-indicator":
            mode = args.mode or cfg.indicator.mode
            if mode not in ("full_second_level", "fixed"):
                raise ConfigError("--mode for validate-indicator: full_second_level or fixed")
            violations, path = cmd_validate_indicator(cfg, archive, out, mode, args.workers)
            print(f"{path}: {violations} bound violations")
            if violations and mode == "full_second_level":
                return 3
    except (ConfigError, ArchiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

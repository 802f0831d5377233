"""Experiment harness: scenario builds, paired-seed scheme runs, sweeps, exports."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .ao import AlternatingOptimizer, SolutionRecord, complexity_report
from .baselines import exhaustive_baseline, random_baseline, sdr_baseline
from .channel import ChannelSet, build_channels
from .config import ScenarioConfig, watts_to_dbm
from .geometry import SPACES, sample_geometry
from .metrics import beampattern

SCHEMES = ("ES", "MS", "TS", "STAR", "ACTIVE", "PASSIVE", "RANDOM")

_FLOAT_FMT = "%.9g"


def build_scenario(cfg: ScenarioConfig, seed: int | None = None):
    """Geometry and channels for one seed; schemes sharing a panel layout share draws."""
    seed = cfg.seed if seed is None else seed
    root = np.random.SeedSequence([int(seed), 101])
    geom_rng, chan_rng = (np.random.default_rng(s) for s in root.spawn(2))
    geom = sample_geometry(cfg, geom_rng)
    channels = build_channels(geom, cfg, chan_rng)
    return geom, channels


def run_scheme(scheme: str, cfg: ScenarioConfig, seed: int | None = None) -> SolutionRecord:
    """One optimization run of the named scheme on common-random-number channels."""
    scheme = scheme.upper()
    seed = cfg.seed if seed is None else seed
    if scheme == "RANDOM":
        scheme_cfg = cfg.with_updates(protocol="ES", seed=seed)
        _, channels = build_scenario(scheme_cfg, seed)
        return random_baseline(channels, scheme_cfg)
    if scheme in ("EXHAUSTIVE", "SDR"):
        scheme_cfg = cfg.with_updates(protocol="ES", seed=seed)
        _, channels = build_scenario(scheme_cfg, seed)
        if scheme == "EXHAUSTIVE":
            return exhaustive_baseline(channels, scheme_cfg)
        return sdr_baseline(channels, scheme_cfg)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    scheme_cfg = cfg.with_updates(protocol=scheme, seed=seed)
    _, channels = build_scenario(scheme_cfg, seed)
    return AlternatingOptimizer(scheme_cfg).fit(channels).record_


def record_to_dict(rec: SolutionRecord) -> dict:
    """JSON-ready summary of a solution record (timing excluded: deterministic)."""
    out = {
        "protocol": rec.protocol,
        "objective": rec.objective,
        "objective_db": rec.objective_db,
        "sensing_sinr": rec.sensing_sinr,
        "rates": rec.rates.tolist(),
        "feasible": rec.report.ok,
        "violations": rec.report.violations,
        "converged": rec.converged,
        "outer_iters": rec.outer_iters,
        "monotone": rec.monotone,
        "objectives": rec.objectives,
    }
    if rec.time_split is not None:
        out["time_split"] = list(rec.time_split)
    if rec.tx is not None:
        out["bs_power"] = float(np.sum(np.abs(rec.tx.W) ** 2)
                                + np.sum(np.abs(rec.tx.F) ** 2))
    return out


def write_solution_json(path, rec: SolutionRecord, cfg: ScenarioConfig):
    payload = {"config": cfg.to_dict(), "solution": record_to_dict(rec),
               "complexity": complexity_report(cfg)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_convergence_csv(path, rec: SolutionRecord):
    """Per-block objective trail: iter,block,objective,feasible,wall_ms."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "block", "objective", "feasible", "wall_ms"])
        for step in rec.blocks:
            writer.writerow([step.iteration, step.block,
                             _FLOAT_FMT % step.objective,
                             int(rec.report.ok),
                             _FLOAT_FMT % step.wall_ms])


def _sweep_config(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "M":
        return cfg.with_updates(m_elems=int(value))
    if axis == "M_s":
        return cfg.with_updates(m_sense=int(value))
    if axis == "P_total":
        return cfg.with_updates(p_total_dbm=float(value))
    if axis == "R_th":
        return cfg.with_updates(r_th=float(value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected M, M_s, P_total or R_th")


def _sweep_cell(args):
    cfg_dict, axis, value, scheme, seed = args
    cfg = ScenarioConfig(**cfg_dict)
    cell_cfg = _sweep_config(cfg, axis, value)
    try:
        rec = run_scheme(scheme, cell_cfg, seed)
        return {
            "scheme": scheme, "axis": axis, "value": value, "seed": seed,
            "objective": rec.objective, "objective_db": rec.objective_db,
            "rate_min": float(rec.rates.min()) if rec.rates.size else 0.0,
            "feasible": int(rec.report.ok),
        }
    except Exception as exc:  # per-cell failures are logged, not fatal
        return {"scheme": scheme, "axis": axis, "value": value, "seed": seed,
                "objective": np.nan, "objective_db": np.nan,
                "rate_min": np.nan, "feasible": 0, "error": str(exc)}


def run_sweep(cfg: ScenarioConfig, axis: str, values, seeds, schemes,
              jobs: int = 1) -> list:
    """Per (scheme, value, seed) runs with common random numbers within a cell."""
    values = list(values)
    if sorted(values) != values:
        raise ValueError("sweep values must be sorted ascending")
    tasks = [(cfg.to_dict(), axis, value, scheme, seed)
             for scheme in schemes for value in values for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    rows.sort(key=lambda r: (r["scheme"], r["value"], r["seed"]))
    return rows


def summarize_sweep(rows) -> list:
    """Mean/std summary per (scheme, value) over seeds, NaN cells dropped."""
    groups = {}
    for row in rows:
        groups.setdefault((row["scheme"], row["value"]), []).append(row)
    out = []
    for (scheme, value), cells in sorted(groups.items()):
        obj = np.array([c["objective"] for c in cells], dtype=float)
        ok = obj[np.isfinite(obj)]
        out.append({
            "scheme": scheme, "value": value,
            "n": len(ok),
            "objective_mean": float(ok.mean()) if ok.size else np.nan,
            "objective_std": float(ok.std()) if ok.size else np.nan,
            "objective_db_mean": 10 * np.log10(ok.mean()) if ok.size and ok.mean() > 0
            else np.nan,
            "feasible_frac": float(np.mean([c["feasible"] for c in cells])),
        })
    return out


def write_sweep_csv(path, rows, summary):
    fields = ["scheme", "axis", "value", "seed", "objective", "objective_db",
              "rate_min", "feasible"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row["scheme"], row["axis"], row["value"], row["seed"],
                             _FLOAT_FMT % row["objective"],
                             _FLOAT_FMT % row["objective_db"],
                             _FLOAT_FMT % row["rate_min"], row["feasible"]])
        writer.writerow([])
        writer.writerow(["scheme", "value", "n", "objective_mean", "objective_std",
                         "objective_db_mean", "feasible_frac"])
        for s in summary:
            writer.writerow([s["scheme"], s["value"], s["n"],
                             _FLOAT_FMT % s["objective_mean"],
                             _FLOAT_FMT % s["objective_std"],
                             _FLOAT_FMT % s["objective_db_mean"],
                             _FLOAT_FMT % s["feasible_frac"]])


def run_convergence(cfg: ScenarioConfig, seeds, dims) -> list:
    """Traces for multiple (N, M, M_s) tuples; every trace is monotonicity-audited."""
    rows = []
    for (n, m, m_s) in dims:
        dim_cfg = cfg.with_updates(n_tx=int(n), m_elems=int(m), m_sense=int(m_s))
        for seed in seeds:
            rec = run_scheme(dim_cfg.protocol, dim_cfg, seed)
            if not rec.monotone:
                raise AssertionError(
                    f"objective trace decreased for dims N={n}, M={m}, M_s={m_s}, "
                    f"seed {seed}")
            for step in rec.blocks:
                rows.append({"n_tx": n, "m_elems": m, "m_sense": m_s, "seed": seed,
                             "iter": step.iteration, "block": step.block,
                             "objective": step.objective, "wall_ms": step.wall_ms})
    return rows


def write_convergence_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_tx", "m_elems", "m_sense", "seed", "iter", "block",
                         "objective", "wall_ms"])
        for r in rows:
            writer.writerow([r["n_tx"], r["m_elems"], r["m_sense"], r["seed"],
                             r["iter"], r["block"], _FLOAT_FMT % r["objective"],
                             _FLOAT_FMT % r["wall_ms"]])


def beampattern_rows(cfg: ScenarioConfig, rec: SolutionRecord, channels: ChannelSet,
                     elev_step_deg: float = 1.0, azim_step_deg: float = 2.0):
    """Gain maps of the fitted design: face,phi_deg,varphi_deg,gain_db rows."""
    elev = np.arange(-90.0, 90.0 + 1e-9, elev_step_deg)
    azim = np.arange(0.0, 180.0 + 1e-9, azim_step_deg)
    maps = beampattern(rec.ris, rec.tx, channels, elev, azim,
                       cfg.element_spacing_ratio)
    rows = []
    for d in SPACES:
        gains = maps[d]
        floor = gains.max() * 1e-12 + 1e-300
        for i, phi in enumerate(elev):
            for j, varphi in enumerate(azim):
                rows.append((d, phi, varphi,
                             10.0 * np.log10(max(gains[i, j], floor))))
    return rows, (elev, azim), maps


def write_beampattern_csv(path, rows, target_meta):
    with open(path, "w", newline="") as fh:
        fh.write("# target_angles_deg: " + json.dumps(target_meta) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["face", "phi_deg", "varphi_deg", "gain_db"])
        for face, phi, varphi, gain in rows:
            writer.writerow([face, _FLOAT_FMT % phi, _FLOAT_FMT % varphi,
                             _FLOAT_FMT % gain])


def find_peaks(gain_map, elev, azim, n_peaks: int = 2, min_sep_deg: float = 10.0):
    """Top local maxima of a gain map with non-maximum suppression."""
    flat_order = np.argsort(gain_map.ravel())[::-1]
    peaks = []
    for idx in flat_order:
        i, j = np.unravel_index(idx, gain_map.shape)
        cand = (float(elev[i]), float(azim[j]))
        if any(max(abs(cand[0] - p[0]), abs(cand[1] - p[1])) < min_sep_deg
               for p in peaks):
            continue
        peaks.append(cand)
        if len(peaks) == n_peaks:
            break
    return peaks


def canonical_target_angles(cfg: ScenarioConfig):
    """Configured (vertical, horizontal) target angles mapped onto the grid domain.

    A Y-Z panel cannot resolve the sign of the horizontal angle, so +/-h both
    canonicalize to |h| measured from the +Y axis.
    """
    out = {d: [] for d in SPACES}
    if cfg.target_angles_deg is None:
        return out
    for j, (horiz, vert) in enumerate(cfg.target_angles_deg):
        d = "r" if j < cfg.targets_r else "t"
        out[d].append((float(vert), abs(float(horiz))))
    return out

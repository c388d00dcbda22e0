"""Monte Carlo harness: metrics, per-trial pipelines, sweeps, export.

One trial draws a channel, sounds it once, then runs every requested
algorithm on the same realization. Sweeps aggregate per (algorithm,
sweep value) with normal-approximation confidence intervals. Trials can
run in a process pool; per-trial seeds are base_seed XOR trial index, so
results are independent of scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .angles import ds_music, enm_estimate, project_rest_csi
from .dictionary import bs_dictionary_for, ris_dictionary
from .exceptions import SimulationError, UndefinedMetricError
from .model import (ChannelRealization, SystemConfig, coupled_angles,
                    draw_paths, steering_matrix, synthesize_channels)
from .recovery import (default_sparsity, estimate_cascaded_two_sc,
                       solve_gamp_factored, solve_omp_factored)
from .reconstruct import oracle_ls, reconstruct_all_sc
from .sounding import (PilotSchedule, compress_measurements, compress_pilots,
                       factor_observation, generate_pilots, measure)

ALGORITHMS = ("proposed", "cbs_gamp_all_sc", "omp_conventional", "omp_bsa",
              "oracle_ls")
SWEEP_VARIABLES = ("snr_db", "n_subframes", "n_slots", "n_paths", "n_ris")
CSV_COLUMNS = ("algorithm", "variable", "value", "trials", "nmse_mean",
               "nmse_ci", "rmse_mean", "pc_bs", "pc_ris", "runtime_ms",
               "solver_calls", "failures")
FAILURE_FRACTION_LIMIT = 0.1


def nmse(h_true: np.ndarray, h_est: np.ndarray) -> float:
    """Mean over leading axes of per-matrix squared-error ratios."""
    if h_true.size == 0:
        raise UndefinedMetricError("nmse of empty input")
    if h_true.shape != h_est.shape:
        raise ValueError("shape mismatch between truth and estimate")
    diff = h_est - h_true
    axes = tuple(range(1, h_true.ndim)) if h_true.ndim >= 2 else (0,)
    err = np.sum(np.abs(diff) ** 2, axis=axes)
    ref = np.sum(np.abs(h_true) ** 2, axis=axes)
    if np.any(ref == 0):
        raise UndefinedMetricError("nmse reference with zero energy")
    return float(np.mean(err / ref))


def match_angles(true: np.ndarray, est: np.ndarray) -> np.ndarray:
    """Greedy one-to-one matching by absolute difference.

    Returns the matched absolute errors (length = min of the two sizes).
    """
    true = np.asarray(true, dtype=float).reshape(-1)
    est = np.asarray(est, dtype=float).reshape(-1)
    if true.size == 0 or est.size == 0:
        raise UndefinedMetricError("angle matching with empty inputs")
    cand = sorted((abs(t - e), i, j)
                  for i, t in enumerate(true) for j, e in enumerate(est))
    used_t: set = set()
    used_e: set = set()
    errs = []
    for d, i, j in cand:
        if i in used_t or j in used_e:
            continue
        errs.append(d)
        used_t.add(i)
        used_e.add(j)
    return np.array(errs)


def rmse_angle(true: np.ndarray, est: np.ndarray, squared: bool = False) -> float:
    """Angle error metric sqrt(mean |e|); squared=True uses sqrt(mean e^2)."""
    errs = match_angles(true, est)
    if squared:
        return float(np.sqrt(np.mean(errs ** 2)))
    return float(np.sqrt(np.mean(errs)))


def correct_probability(true: np.ndarray, est: np.ndarray, delta: float) -> float:
    """Fraction of matched angles within half a grid step."""
    errs = match_angles(true, est)
    return float(np.mean(errs < delta / 2.0))


@dataclass
class TrialResult:
    """Outcome of one algorithm on one channel realization."""

    algorithm: str
    nmse: float = math.nan
    rmse: float = math.nan
    pc_bs: float = math.nan
    pc_ris: float = math.nan
    runtime_ms: dict = field(default_factory=dict)
    solver_calls: int = 0
    ls_calls: int = 0
    error: Optional[str] = None

    @property
    def total_ms(self) -> float:
        return sum(self.runtime_ms.values())


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a variable, its values, and the algorithms to compare."""

    base_config: SystemConfig
    variable: str
    values: tuple
    algorithms: tuple
    trials: int
    base_seed: int

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable '{self.variable}'")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithm(s): {', '.join(sorted(bad))}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def apply_sweep_value(config: SystemConfig, variable: str, value) -> SystemConfig:
    if variable == "n_paths":
        return config.replace(n_paths_bs=int(value), n_paths_ue=int(value))
    if variable == "snr_db":
        return config.replace(snr_db=float(value))
    return config.replace(**{variable: int(value)})


def _proposed_pipeline(config: SystemConfig, channel: ChannelRealization,
                       pilots: PilotSchedule, y_user: np.ndarray,
                       nv_user: np.ndarray, user: int, result: TrialResult):
    """Two-phase estimate for one user; accumulates metrics into result."""
    timer = time.perf_counter
    t0 = timer()
    phase1 = estimate_cascaded_two_sc(y_user, nv_user, pilots, config,
                                      channel.etas)
    result.runtime_ms["phase1"] = result.runtime_ms.get("phase1", 0.0) \
        + (timer() - t0) * 1e3
    result.solver_calls += phase1.solver_calls

    t0 = timer()
    paths_bs = channel.paths_bs
    if config.bs_dods_known:
        dods = paths_bs.dod
    else:
        est = enm_estimate([s.x_hat for s in phase1.solutions],
                           config.n_paths_bs, config.q_tx, config.q_ris)
        dods = est.dods
    result.runtime_ms["enm"] = result.runtime_ms.get("enm", 0.0) \
        + (timer() - t0) * 1e3

    t0 = timer()
    u_by_sc = []
    for sc, h_hat in zip(phase1.sc_indices, phase1.h_hat):
        a_t = steering_matrix(dods, float(channel.etas[sc]), config.n_tx)
        u_by_sc.append(project_rest_csi(h_hat, a_t).u)
    anchor_etas = [float(channel.etas[sc]) for sc in phase1.sc_indices]
    ris_est = ds_music(u_by_sc, anchor_etas, config.n_paths_ue, config.q_ris,
                       n_sub=config.n_sub)
    result.runtime_ms["ds_music"] = result.runtime_ms.get("ds_music", 0.0) \
        + (timer() - t0) * 1e3

    t0 = timer()
    recon = reconstruct_all_sc(y_user, pilots, config, channel.etas, phase1,
                               dods, ris_est.coupled)
    result.runtime_ms["phase2"] = result.runtime_ms.get("phase2", 0.0) \
        + (timer() - t0) * 1e3
    result.ls_calls += recon.ls_calls

    true_coupled = coupled_angles(paths_bs, channel.paths_ue[user])
    ris_errs = match_angles(true_coupled.reshape(-1), ris_est.coupled.reshape(-1))
    delta_ris = 2.0 / config.q_ris
    pc_ris = float(np.mean(ris_errs < delta_ris / 2.0))
    if config.bs_dods_known:
        # transmit side is prior knowledge: only surface angles are estimated
        return (nmse(channel.cascaded[user], recon.h_hat), ris_errs,
                math.nan, pc_ris)
    bs_errs = match_angles(paths_bs.dod, dods)
    delta_bs = 2.0 / config.q_tx
    return (nmse(channel.cascaded[user], recon.h_hat),
            np.concatenate([bs_errs, ris_errs]),
            float(np.mean(bs_errs < delta_bs / 2.0)),
            pc_ris)


def _per_sc_sparse(config: SystemConfig, channel: ChannelRealization,
                   pilots: PilotSchedule, y_user: np.ndarray,
                   nv_user: np.ndarray, algorithm: str, user: int,
                   result: TrialResult) -> float:
    """Per-subcarrier sparse baseline; returns this user's channel NMSE."""
    variant = {"cbs_gamp_all_sc": "cbs", "omp_conventional": "conventional",
               "omp_bsa": "bsa"}[algorithm]
    rate = config.sparsity_rate or default_sparsity(config)
    n_atoms = config.n_paths_bs * config.n_paths_ue
    h_hat = np.empty_like(channel.cascaded[user])
    timer = time.perf_counter
    t0 = timer()
    for m in range(config.n_sc):
        eta = float(channel.etas[m])
        c_t = bs_dictionary_for(variant, config.q_tx, eta, config.n_tx)
        xi, _, _ = ris_dictionary(variant, config.q_ris, eta, config.n_ris)
        fac = factor_observation(pilots, c_t, xi)
        if algorithm == "cbs_gamp_all_sc":
            sol = solve_gamp_factored(y_user[m], fac, float(nv_user[m]), rate,
                                      damping=config.gamp_damping,
                                      max_iter=config.gamp_max_iter,
                                      tol=config.gamp_tol)
        else:
            sol = solve_omp_factored(y_user[m], fac, n_atoms)
        coeffs = sol.x_hat.reshape(xi.shape[1], c_t.shape[1], order="F")
        h_hat[m] = xi @ coeffs @ c_t.conj().T
        result.solver_calls += 1
    result.runtime_ms["solve"] = result.runtime_ms.get("solve", 0.0) \
        + (timer() - t0) * 1e3
    return nmse(channel.cascaded[user], h_hat)


def run_trial(config: SystemConfig, algorithms: Sequence[str], trial_seed: int,
              analog_bf: Optional[np.ndarray] = None) -> dict:
    """One channel realization, all algorithms. Returns {name: TrialResult}."""
    rng = np.random.default_rng(trial_seed)
    timer = time.perf_counter
    t0 = timer()
    paths_bs, paths_ue = draw_paths(config, rng)
    channel = synthesize_channels(config, paths_bs, paths_ue)
    pilots = generate_pilots(config, rng, analog_bf=analog_bf)
    y, noise_var = measure(channel, pilots, config.snr_db, rng)
    # receiver-side: project each subframe onto its beam span (exact)
    pilots, transforms = compress_pilots(pilots)
    y = compress_measurements(y, transforms)
    sounding_ms = (timer() - t0) * 1e3

    out = {}
    for name in algorithms:
        result = TrialResult(algorithm=name)
        result.runtime_ms["sounding"] = sounding_ms / len(algorithms)
        try:
            if name == "proposed":
                per_user = [_proposed_pipeline(config, channel, pilots, y[k],
                                               noise_var[k], k, result)
                            for k in range(config.n_users)]
                result.nmse = float(np.mean([p[0] for p in per_user]))
                errs = np.concatenate([p[1] for p in per_user])
                result.rmse = float(np.sqrt(np.mean(errs ** 2) if config.rmse_squared
                                            else np.mean(errs)))
                result.pc_bs = float(np.mean([p[2] for p in per_user]))
                result.pc_ris = float(np.mean([p[3] for p in per_user]))
            elif name == "oracle_ls":
                t1 = timer()
                vals = []
                for k in range(config.n_users):
                    recon = oracle_ls(y[k], pilots, config, channel.etas,
                                      paths_bs, channel.paths_ue[k])
                    result.ls_calls += recon.ls_calls
                    vals.append(nmse(channel.cascaded[k], recon.h_hat))
                result.runtime_ms["solve"] = (timer() - t1) * 1e3
                result.nmse = float(np.mean(vals))
            else:
                vals = [_per_sc_sparse(config, channel, pilots, y[k],
                                       noise_var[k], name, k, result)
                        for k in range(config.n_users)]
                result.nmse = float(np.mean(vals))
        except (SimulationError, np.linalg.LinAlgError) as exc:
            result.error = f"{type(exc).__name__}: {exc}"
        out[name] = result
    return out


def _trial_job(args):
    config, algorithms, seed, analog_bf = args
    return run_trial(config, algorithms, seed, analog_bf)


def _pool_init():
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"
    os.environ["MKL_NUM_THREADS"] = "1"


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Execute a sweep and aggregate rows per (algorithm, value).

    Metric columns are deterministic for a fixed (spec, seed); runtime_ms
    carries wall-clock. Aborts when more than 10% of an (algorithm,
    value) cell's trials fail.
    """
    rows = []
    for value in spec.values:
        config = apply_sweep_value(spec.base_config, spec.variable, value)
        exp_rng = np.random.default_rng(spec.base_seed)
        analog_bf = np.exp(1j * exp_rng.uniform(
            0.0, 2.0 * np.pi, (config.n_tx, config.n_rf))) / math.sqrt(config.n_tx)
        jobs = [(config, tuple(spec.algorithms), spec.base_seed ^ t, analog_bf)
                for t in range(spec.trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers,
                                     initializer=_pool_init) as pool:
                trial_outs = list(pool.map(_trial_job, jobs))
        else:
            trial_outs = [_trial_job(j) for j in jobs]
        for name in spec.algorithms:
            results = [t[name] for t in trial_outs]
            rows.append(_aggregate(name, spec, value, results))
    return rows


def _aggregate(name: str, spec: SweepSpec, value, results: list) -> dict:
    failures = sum(1 for r in results if r.error is not None)
    if failures > FAILURE_FRACTION_LIMIT * len(results):
        msgs = {r.error for r in results if r.error}
        raise SimulationError(
            f"{name} at {spec.variable}={value}: {failures}/{len(results)} "
            f"trials failed ({'; '.join(sorted(msgs))})")
    ok = [r for r in results if r.error is None]
    nm = np.array([r.nmse for r in ok])
    ci = 1.96 * float(np.std(nm, ddof=1)) / math.sqrt(len(nm)) if len(nm) > 1 else 0.0
    rmse_vals = np.array([r.rmse for r in ok])
    pc_bs = np.array([r.pc_bs for r in ok])
    pc_ris = np.array([r.pc_ris for r in ok])
    with np.errstate(invalid="ignore"):
        rmse_mean = float(np.nanmean(rmse_vals)) if not np.all(np.isnan(rmse_vals)) else math.nan
        pcb = float(np.nanmean(pc_bs)) if not np.all(np.isnan(pc_bs)) else math.nan
        pcr = float(np.nanmean(pc_ris)) if not np.all(np.isnan(pc_ris)) else math.nan
    return {
        "algorithm": name,
        "variable": spec.variable,
        "value": value,
        "trials": len(results),
        "nmse_mean": float(np.mean(nm)),
        "nmse_ci": ci,
        "rmse_mean": rmse_mean,
        "pc_bs": pcb,
        "pc_ris": pcr,
        "runtime_ms": float(np.mean([r.total_ms for r in ok])),
        "solver_calls": int(round(float(np.mean([r.solver_calls for r in ok])))),
        "failures": failures,
    }


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_csv(rows: list, path: str):
    """Write aggregate rows with the stable column set, 10 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def write_json(rows: list, path: str):
    """JSON mirror of the CSV rows (NaN encoded as null)."""
    clean = []
    for row in rows:
        item = {}
        for c in CSV_COLUMNS:
            v = row[c]
            if isinstance(v, float) and math.isnan(v):
                v = None
            item[c] = v
        clean.append(item)
    with open(path, "w") as fh:
        json.dump(clean, fh, indent=2)
        fh.write("\n")

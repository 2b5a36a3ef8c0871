"""Monte Carlo driver and command line entry point.

Each trial draws one channel, one QPSK frame, and one unit-variance noise
frame from a trial-keyed seed sequence, then reuses those draws across every
scheme and SNR so comparisons are paired. Records are deterministic up to
the runtime column regardless of worker count.
"""

import argparse
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dd_core import DDFrame, SystemParams, devectorize, generate_jakes_channel, vectorize_frame
from .evaluation import (EstimateResult, count_multiplications, genie_on_grid,
                         genie_perfect, nmse_db, reconstruct_H_DD, taps_from_posterior)
from .grid_refine import RefinementConfig, grasbi_run, select_peaks
from .oddm_txrx import apply_channel_time, build_H_DD, demodulate, modulate
from .pilot_sensing import (build_measurement_matrix, build_virtual_grid,
                            embed_pilot, estimate_P_hat, extract_region)
from .sbl import sbl_e_step, sbl_run
from .tgraesbi import tgraesbi_run

__all__ = [
    "C_LIGHT",
    "RUN_SCHEMES",
    "COMPLEXITY_SCHEMES",
    "CSV_HEADER",
    "ExperimentConfig",
    "TrialRecord",
    "config_from_dict",
    "validate_config",
    "system_params",
    "doppler_hz",
    "run_experiment",
    "write_records",
    "cli_main",
]

C_LIGHT = 3e8

RUN_SCHEMES = ("sbl", "grasbi", "tgraesbi", "genie-on-grid", "genie-perfect")

COMPLEXITY_SCHEMES = {
    "ogsbi": "OGSBI",
    "gesbi": "GESBI",
    "t-geesbi": "T-GEESBI",
    "grasbi": "GRASBI",
    "tgraesbi": "T-GRAESBI",
}

CSV_HEADER = "scheme,snr_db,trial,seed,nmse_db,total_mults,exter_iters,runtime_ms"


@dataclass
class ExperimentConfig:
    """Everything one experiment needs; defaults reproduce the reference
    operating point (32 x 32 frame, 4 paths at 500 km/h, 10 x 10 grid)."""

    M: int = 32
    N: int = 32
    T: float = 1.0 / 15000.0
    fc: float = 4e9
    D: int = 4
    kmax: int = 4
    beta: float = 0.15
    l0: int = 16
    k0: int = 16
    pilot_offset_db: float = 30.0
    p_paths: int = 4
    speed_kmh: float = 500.0
    doppler_hz: float = None
    m_tau: int = 10
    n_nu: int = 10
    n_inter1: int = 500
    n_inter2: int = 10
    n_exter: int = 5
    tol: float = 1e-3
    m_hat: int = 50
    n_hat: int = 50
    c1: float = 2e-6
    d0_prior: float = 1e-6
    c: float = 1e-6
    d: float = 1e-6
    eps_s0: float = 1e-4
    schemes: tuple = RUN_SCHEMES
    snr_db: tuple = (10.0,)
    trials: int = 50
    master_seed: int = 12345
    out: str = "results.csv"
    jobs: int = 1
    time_domain_check: bool = False

    def __post_init__(self):
        if isinstance(self.schemes, str):
            self.schemes = (self.schemes,)
        self.schemes = tuple(self.schemes)
        if isinstance(self.snr_db, (int, float)):
            self.snr_db = (float(self.snr_db),)
        self.snr_db = tuple(float(s) for s in self.snr_db)


@dataclass
class TrialRecord:
    scheme: str
    snr_db: float
    trial: int
    seed: int
    nmse_db: float
    total_mults: int
    exter_iters: int
    runtime_ms: float


def config_from_dict(d):
    """Build a config from a plain dict, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**d)


def validate_config(cfg):
    if cfg.trials < 1:
        raise ValueError("trials must be >= 1")
    if cfg.jobs < 1:
        raise ValueError("jobs must be >= 1")
    if cfg.p_paths < 1:
        raise ValueError("p_paths must be >= 1")
    if not cfg.schemes:
        raise ValueError("at least one scheme required")
    bad = [s for s in cfg.schemes if s not in RUN_SCHEMES]
    if bad:
        raise ValueError(f"unknown schemes: {', '.join(bad)} "
                         f"(choose from {', '.join(RUN_SCHEMES)})")
    if not cfg.snr_db:
        raise ValueError("at least one SNR required")


def system_params(cfg, snr):
    return SystemParams(M=cfg.M, N=cfg.N, T=cfg.T, fc=cfg.fc, D=cfg.D,
                        kmax=cfg.kmax, beta=cfg.beta, l0=cfg.l0, k0=cfg.k0,
                        pilot_offset_db=cfg.pilot_offset_db, snr_db=snr)


def doppler_hz(cfg):
    """Maximum Doppler shift: explicit override, else speed and carrier."""
    if cfg.doppler_hz is not None:
        return float(cfg.doppler_hz)
    return cfg.speed_kmh / 3.6 * cfg.fc / C_LIGHT


def _refinement_config(cfg):
    return RefinementConfig(m_hat=cfg.m_hat, n_hat=cfg.n_hat,
                            n_inter2=cfg.n_inter2, n_exter=cfg.n_exter)


def _run_scheme(scheme, y_t, channel, params, cfg):
    """Dispatch one scheme; returns (estimate, total_mults, exter_iters)."""
    grid = build_virtual_grid(cfg.m_tau, cfg.n_nu, params)
    if scheme == "sbl":
        model = build_measurement_matrix(grid, params, y_t=y_t)
        state = sbl_run(model, max_iters=cfg.n_inter1, tol=cfg.tol)
        mu, _ = sbl_e_step(model, state)
        peaks = select_peaks(state.gamma, estimate_P_hat(params, grid))
        taps = taps_from_posterior(mu, grid, peaks.indices, params)
        est = EstimateResult(taps=taps, final_grid=grid, mu=mu,
                             diagnostics=[{"iters": state.iters,
                                           "converged": state.converged}])
        return est, 0, 1
    if scheme == "grasbi":
        est = grasbi_run(y_t, params, grid, _refinement_config(cfg),
                         n_inter1=cfg.n_inter1, tol=cfg.tol)
        mults = count_multiplications(
            "GRASBI", params.region_size, grid.size, estimate_P_hat(params, grid),
            mn_hat=cfg.m_hat * cfg.n_hat, n_inter1=cfg.n_inter1,
            n_inter2=cfg.n_inter2, n_exter=cfg.n_exter)
        return est, mults, cfg.n_exter
    if scheme == "tgraesbi":
        est = tgraesbi_run(y_t, params, grid, _refinement_config(cfg),
                           n_inter1=cfg.n_inter1, tol=cfg.tol, c1=cfg.c1,
                           d0_prior=cfg.d0_prior, c=cfg.c, d=cfg.d,
                           epsilon=cfg.eps_s0)
        mults = count_multiplications(
            "T-GRAESBI", params.region_size, grid.size, estimate_P_hat(params, grid),
            mn_hat=cfg.m_hat * cfg.n_hat, n_inter1=cfg.n_inter1,
            n_inter2=cfg.n_inter2, n_exter=cfg.n_exter)
        return est, mults, cfg.n_exter
    if scheme == "genie-on-grid":
        return genie_on_grid(y_t, channel, grid, params), 0, 0
    if scheme == "genie-perfect":
        return genie_perfect(y_t, channel, params), 0, 0
    raise ValueError(f"unknown scheme {scheme!r}")


def _trial_records(arg):
    """All records of one trial; a single-argument callable so it maps over
    a process pool."""
    cfg, trial = arg
    seq = np.random.SeedSequence(cfg.master_seed, spawn_key=(trial,))
    seed = int(seq.generate_state(1, np.uint64)[0])
    rng = np.random.default_rng(seq)

    draw_params = system_params(cfg, cfg.snr_db[0])
    channel = generate_jakes_channel(cfg.p_paths, doppler_hz(cfg), draw_params, rng)
    b0 = rng.integers(0, 2, size=(cfg.M, cfg.N))
    b1 = rng.integers(0, 2, size=(cfg.M, cfg.N))
    data = DDFrame(((1.0 - 2.0 * b0) + 1j * (1.0 - 2.0 * b1)) / np.sqrt(2.0))
    mn = cfg.M * cfg.N
    unit_noise = (rng.standard_normal(mn) + 1j * rng.standard_normal(mn)) / np.sqrt(2.0)

    frame = embed_pilot(data, draw_params)
    op = build_H_DD(channel, draw_params)
    y_clean = op.H @ vectorize_frame(frame)

    trial_ok = True
    if cfg.time_domain_check:
        y_time = apply_channel_time(modulate(frame, draw_params), channel, 0.0, draw_params)
        y_dd = vectorize_frame(demodulate(y_time, draw_params))
        err = np.linalg.norm(y_dd - y_clean) / np.linalg.norm(y_clean)
        trial_ok = bool(err < 1e-8)

    records = []
    for snr in cfg.snr_db:
        params = system_params(cfg, snr)
        sigma2 = 0.0 if np.isinf(snr) else 10.0 ** (-snr / 10.0)
        y_frame = devectorize(y_clean + np.sqrt(sigma2) * unit_noise, cfg.M, cfg.N)
        y_t = extract_region(y_frame, params)
        for scheme in cfg.schemes:
            t0 = time.perf_counter()
            try:
                est, mults, exiters = _run_scheme(scheme, y_t, channel, params, cfg)
                h_hat = reconstruct_H_DD(est, params)
                nmse = nmse_db(op.H, h_hat.H) if trial_ok else float("nan")
            except Exception:
                grid = build_virtual_grid(cfg.m_tau, cfg.n_nu, params)
                mults = 0
                if scheme in ("grasbi", "tgraesbi"):
                    mults = count_multiplications(
                        COMPLEXITY_SCHEMES[scheme], params.region_size, grid.size,
                        estimate_P_hat(params, grid), mn_hat=cfg.m_hat * cfg.n_hat,
                        n_inter1=cfg.n_inter1, n_inter2=cfg.n_inter2,
                        n_exter=cfg.n_exter)
                exiters = {"sbl": 1, "grasbi": cfg.n_exter,
                           "tgraesbi": cfg.n_exter}.get(scheme, 0)
                nmse = float("nan")
            runtime_ms = (time.perf_counter() - t0) * 1e3
            records.append(TrialRecord(scheme=scheme, snr_db=snr, trial=trial,
                                       seed=seed, nmse_db=nmse, total_mults=mults,
                                       exter_iters=exiters, runtime_ms=runtime_ms))
    return records


def run_experiment(cfg):
    """All trial records, sorted by scheme (config order), SNR, trial."""
    validate_config(cfg)
    args = [(cfg, t) for t in range(cfg.trials)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_trial = list(pool.map(_trial_records, args))
    else:
        per_trial = [_trial_records(a) for a in args]
    records = [r for chunk in per_trial for r in chunk]
    scheme_pos = {s: i for i, s in enumerate(cfg.schemes)}
    snr_pos = {s: i for i, s in enumerate(cfg.snr_db)}
    records.sort(key=lambda r: (scheme_pos[r.scheme], snr_pos[r.snr_db], r.trial))
    return records


def _fmt(value):
    return repr(float(value))


def write_records(records, path):
    """Write the records CSV plus a <path>.summary.csv with per-cell
    nan-filtered mean and median."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            r.scheme, _fmt(r.snr_db), str(r.trial), str(r.seed),
            _fmt(r.nmse_db), str(r.total_mults), str(r.exter_iters),
            _fmt(r.runtime_ms)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    cells = {}
    for r in records:
        cells.setdefault((r.scheme, r.snr_db), []).append(r.nmse_db)
    out = ["scheme,snr_db,median_nmse_db,mean_nmse_db"]
    for (scheme, snr), vals in cells.items():
        vals = np.asarray(vals, dtype=float)
        vals = vals[np.isfinite(vals)]
        med = float(np.median(vals)) if vals.size else float("nan")
        mean = float(np.mean(vals)) if vals.size else float("nan")
        out.append(",".join([scheme, _fmt(snr), _fmt(med), _fmt(mean)]))
    with open(path + ".summary.csv", "w") as fh:
        fh.write("\n".join(out) + "\n")


def _parse_snr(text):
    return tuple(float(s) for s in text.split(","))


def _build_parser():
    p = argparse.ArgumentParser(
        prog="ddce",
        description="Monte Carlo evaluation of delay-Doppler channel estimators")
    p.add_argument("--config", help="JSON file of config overrides")
    p.add_argument("--scheme", action="append",
                   help="scheme to run (repeatable); with --print-complexity, "
                        "a scheme to price")
    p.add_argument("--snr", help="comma separated SNR list in dB (inf allowed)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--nexter", type=int, help="exterior iteration count")
    p.add_argument("--mtau", type=int, help="virtual grid delay points")
    p.add_argument("--nnu", type=int, help="virtual grid Doppler points")
    p.add_argument("--out", help="records CSV path")
    p.add_argument("--jobs", type=int, help="parallel trial workers")
    p.add_argument("--time-domain-check", action="store_true",
                   help="cross-check each trial against the sample-level chain")
    p.add_argument("--print-complexity", action="store_true",
                   help="print multiplication counts instead of running")
    return p


def _print_complexity(cfg, schemes, stream):
    names = []
    for s in schemes:
        key = s.lower()
        if key not in COMPLEXITY_SCHEMES:
            raise ValueError(f"unknown scheme {s!r} "
                             f"(choose from {', '.join(COMPLEXITY_SCHEMES)})")
        names.append(COMPLEXITY_SCHEMES[key])
    params = system_params(cfg, cfg.snr_db[0])
    grid = build_virtual_grid(cfg.m_tau, cfg.n_nu, params)
    totals = [count_multiplications(
        name, params.region_size, grid.size, estimate_P_hat(params, grid),
        mn_hat=cfg.m_hat * cfg.n_hat, n_inter1=cfg.n_inter1,
        n_inter2=cfg.n_inter2, n_exter=cfg.n_exter) for name in names]
    if len(totals) == 1:
        print(totals[0], file=stream)
    else:
        for name, total in zip(names, totals):
            print(f"{name} {total}", file=stream)


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    overrides = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except OSError as exc:
            print(f"--config: cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        except ValueError as exc:
            print(f"--config: invalid JSON in {args.config}: {exc}", file=sys.stderr)
            return 2
    if args.snr is not None:
        overrides["snr_db"] = _parse_snr(args.snr)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.nexter is not None:
        overrides["n_exter"] = args.nexter
    if args.mtau is not None:
        overrides["m_tau"] = args.mtau
    if args.nnu is not None:
        overrides["n_nu"] = args.nnu
    if args.out is not None:
        overrides["out"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.time_domain_check:
        overrides["time_domain_check"] = True

    schemes = tuple(args.scheme) if args.scheme else None
    try:
        if args.print_complexity:
            cfg = config_from_dict(overrides)
            _print_complexity(cfg, schemes or ("grasbi", "tgraesbi"), sys.stdout)
            return 0
        if schemes is not None:
            overrides["schemes"] = schemes
        cfg = config_from_dict(overrides)
        validate_config(cfg)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2

    records = run_experiment(cfg)
    write_records(records, cfg.out)
    cells = {}
    for r in records:
        cells.setdefault((r.scheme, r.snr_db), []).append(r.nmse_db)
    print(f"wrote {len(records)} records to {cfg.out}")
    for (scheme, snr), vals in cells.items():
        vals = np.asarray(vals, dtype=float)
        ok = vals[np.isfinite(vals)]
        med = float(np.median(ok)) if ok.size else float("nan")
        print(f"{scheme} @ {snr:g} dB: median NMSE {med:.2f} dB "
              f"({ok.size}/{vals.size} trials)")
    return 0


if __name__ == "__main__":
    raise SystemExit(cli_main())

"""
Monte Carlo SER simulation.

Each trial draws one channel and one pilot-noise realization, forms the
BLMMSE estimate, then pushes every tested symbol vector through its own
data-noise draw, every configured receiver and every detector.

Random streams are keyed by ``(master_seed, M, K, snr index, trial index)``
so results do not depend on the number of worker threads.
"""

import csv
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .air_interface import constellation_by_label, data_phase, pilot_phase
from .channel import build_scenario, sample_channel
from .config import thread_count
from .detectors import e_sud_batch, genie_batch, h_sud_batch, jd_batch, n_jd_batch, rml_batch
from .estimator import blmmse_estimate
from .expectations import (
    build_expectation_table,
    index_vectors,
    load_table,
    perfect_csi_table,
    save_table,
    table_cache_key,
)
from .moments import compute_moments
from .pilots import dft_pilots, zadoff_chu_pilots
from .receivers import conventional_receiver, lmmd_precompute

__all__ = [
    "SER_COLUMNS",
    "SerRow",
    "SerTable",
    "GridPoint",
    "prepare_point",
    "run_trial",
    "run_point",
    "run_sweep",
    "emit_csv",
    "read_csv",
    "min_over_snr",
    "format_value",
]

SER_COLUMNS = ("snr_db", "M", "K", "tau", "receiver", "detector", "N", "trials",
               "symbol_vectors_per_trial", "errors", "symbols_tested", "ser", "seed", "wall_time_s")


@dataclass(frozen=True)
class SerRow:
    snr_db: float
    M: int
    K: int
    tau: int
    receiver: str
    detector: str
    N: int
    trials: int
    symbol_vectors_per_trial: int
    errors: int
    symbols_tested: int
    ser: float
    seed: int
    wall_time_s: float

    def __post_init__(self):
        if not 0 <= self.errors <= self.symbols_tested:
            raise ValueError("errors must lie in [0, symbols_tested]")


@dataclass
class SerTable:
    rows: list = field(default_factory=list)
    per_ue: list = field(default_factory=list)  # (snr_db, M, K, receiver, detector, N, ue, errors, tested)

    def select(self, **kw):
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]

    def ser(self, **kw):
        rows = self.select(**kw)
        if len(rows) != 1:
            raise LookupError(f"{len(rows)} rows match {kw}")
        return rows[0].ser


def _parse_receiver(spec, default_csi):
    kind, _, csi = spec.partition(":")
    kind = kind.strip().upper()
    csi = (csi.strip().lower() or default_csi)
    if kind not in ("MRC", "ZF", "MMSE", "LMMD"):
        raise ValueError(f"unknown receiver {spec!r}")
    if csi not in ("estimated", "perfect"):
        raise ValueError(f"unknown CSI mode in {spec!r}")
    return kind, csi


def _label(kind, csi, default_csi):
    return kind if csi == default_csi else f"{kind}:{csi}"


def _strategies(config):
    """(detector, N) pairs in config order; RML is handled separately."""
    out = []
    for d in config.detectors:
        d = d.lower()
        if d == "n_jd":
            out.extend(("n_jd", int(n)) for n in config.n_values)
        elif d != "rml":
            out.append((d, 0))
    return out


@dataclass(frozen=True)
class GridPoint:
    """Everything a trial needs at one (M, K, rho); read-only after construction."""

    config: object
    M: int
    K: int
    snr_db: float
    snr_index: int
    scenario: object
    book: object
    moments: object
    constellation: object
    receivers: tuple  # ((label, kind, csi), ...)
    tables: dict  # (kind, csi) -> ExpectationTable


def _pilot_book(config, K):
    if config.pilot_kind.lower() in ("zadoff_chu", "zc"):
        return zadoff_chu_pilots(config.tau, K, config.pilot_root)
    if config.pilot_kind.lower() == "dft":
        return dft_pilots(config.tau, K)
    raise ValueError(f"unknown pilot kind {config.pilot_kind!r}")


def _table(kind, csi, moments, scenario, book, constellation, config):
    if csi == "perfect" and kind != "LMMD":
        return perfect_csi_table(scenario, constellation, kind, config.table_budget)
    # LMMD targets the MRC expectations e(x) in both CSI modes
    kind = "MRC" if kind == "LMMD" else kind
    if config.cache_dir is None:
        return build_expectation_table(moments, constellation, kind, config.table_budget, use_symmetry=True)
    key = table_cache_key(scenario, book, constellation, kind)
    path = Path(config.cache_dir) / f"table-{key[:24]}.npz"
    table = load_table(path, key)
    if table is None:
        table = build_expectation_table(moments, constellation, kind, config.table_budget, use_symmetry=True)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_table(table, path, key)
    return table


def prepare_point(config, M, K, snr_db, snr_index=0):
    rho = 10.0 ** (snr_db / 10.0)
    scenario = build_scenario(M, K, rho, azimuth0_deg=config.azimuth0_deg,
                              separation_deg=config.separation_deg, spread_deg=config.spread_deg,
                              spacing_wavelengths=config.spacing_wavelengths, iid=config.iid)
    book = _pilot_book(config, K)
    moments = compute_moments(scenario, book)
    constellation = constellation_by_label(config.constellation)
    receivers = []
    for spec in config.receivers:
        kind, csi = _parse_receiver(spec, config.csi_mode)
        receivers.append((_label(kind, csi, config.csi_mode), kind, csi))
    tables = {}
    for _, kind, csi in receivers:
        if (kind, csi) not in tables:
            tables[(kind, csi)] = _table(kind, csi, moments, scenario, book, constellation, config)
    return GridPoint(config, M, K, snr_db, snr_index, scenario, book, moments, constellation,
                     tuple(receivers), tables)


def trial_rng(master_seed, M, K, snr_index, trial):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(M, K, snr_index, trial)))


def _tested_indices(point, rng):
    cfg, L, K = point.config, point.constellation.L, point.K
    if cfg.symbol_mode == "enumerate_all":
        return index_vectors(L, K)
    return rng.integers(0, L, size=(cfg.symbols_per_trial, K))


def _detect(strategy, N, X_hat, table, truth):
    if strategy == "jd":
        return jd_batch(X_hat, table)
    if strategy == "n_jd":
        return n_jd_batch(X_hat, table, N)
    if strategy == "h_sud":
        return h_sud_batch(X_hat, table)
    if strategy == "e_sud":
        return e_sud_batch(X_hat, table)
    if strategy == "genie":
        return genie_batch(X_hat, table, truth)
    raise ValueError(f"unknown detector {strategy!r}")


def run_trial(point, trial, master_seed=None):
    """
    One channel realization at a grid point.

    Returns ``{(receiver_label, detector, N): per-UE error counts}`` and
    ``{key: elapsed seconds}``. RML appears under receiver ``"none"``.
    """
    cfg = point.config
    seed = cfg.master_seed if master_seed is None else master_seed
    rng = trial_rng(seed, point.M, point.K, point.snr_index, trial)
    sc = point.scenario
    H = sample_channel(sc, rng)
    r_p = pilot_phase(sc, point.book, H, rng).r
    H_hat = blmmse_estimate(point.moments, r_p).H_hat
    truth = _tested_indices(point, rng)
    X = point.constellation.symbols[truth]
    R = data_phase(sc, H, X, rng).r  # fresh noise for every symbol vector
    errors, timing = {}, {}
    strategies = _strategies(cfg)
    for label, kind, csi in point.receivers:
        t0 = time.perf_counter()
        H_eff = H if csi == "perfect" else H_hat
        table = point.tables[(kind, csi)]
        if kind == "LMMD":
            pre = lmmd_precompute(H_eff, table, point.constellation, sc.rho, point.K, budget=cfg.table_budget)
            V = pre.C_r_pinv @ pre.rhs
        else:
            V = conventional_receiver(H_eff, sc.rho, kind, csi).V
        X_hat = R @ V.conj()
        shared = time.perf_counter() - t0
        for strategy, N in strategies:
            t1 = time.perf_counter()
            decided = _detect(strategy, N, X_hat, table, truth)
            errors[(label, strategy, N)] = np.sum(decided != truth, axis=0)
            timing[(label, strategy, N)] = shared + time.perf_counter() - t1
    if "rml" in (d.lower() for d in cfg.detectors):
        t0 = time.perf_counter()
        H_eff = H if cfg.csi_mode == "perfect" else H_hat
        decided = rml_batch(R, H_eff, sc.rho, point.K, point.constellation)
        errors[("none", "rml", 0)] = np.sum(decided != truth, axis=0)
        timing[("none", "rml", 0)] = time.perf_counter() - t0
    return errors, timing


def run_point(point, threads=None, master_seed=None):
    """All trials at one grid point; returns ``(errors, timing, vectors_per_trial)``."""
    cfg = point.config
    threads = thread_count(cfg) if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: run_trial(point, t, master_seed), range(cfg.trials)))
    else:
        results = [run_trial(point, t, master_seed) for t in range(cfg.trials)]
    errors, timing = defaultdict(int), defaultdict(float)
    for err, tim in results:  # trial order; integer sums are exact anyway
        for key, v in err.items():
            errors[key] = errors[key] + v
            timing[key] += tim[key]
    vectors = point.constellation.L ** point.K if cfg.symbol_mode == "enumerate_all" else cfg.symbols_per_trial
    return dict(errors), dict(timing), vectors


def run_sweep(config, threads=None, master_seed=None, progress=None):
    """Iterate (M, K) points x SNR grid; one row per receiver/detector pair."""
    seed = config.master_seed if master_seed is None else master_seed
    table = SerTable()
    for M, K in config.points():
        for i, snr_db in enumerate(config.snr_grid_db):
            point = prepare_point(config, M, K, snr_db, i)
            errors, timing, vectors = run_point(point, threads, seed)
            tested = config.trials * vectors
            for (label, strategy, N), per_ue in errors.items():
                total = int(np.sum(per_ue))
                table.rows.append(SerRow(
                    snr_db=float(snr_db), M=M, K=K, tau=config.tau, receiver=label, detector=strategy,
                    N=N, trials=config.trials, symbol_vectors_per_trial=vectors, errors=total,
                    symbols_tested=tested * K, ser=total / (tested * K), seed=seed,
                    wall_time_s=timing[(label, strategy, N)]))
                if config.per_ue:
                    for k, e in enumerate(per_ue):
                        table.per_ue.append((float(snr_db), M, K, label, strategy, N, k, int(e), tested))
            if progress is not None:
                progress(M, K, snr_db)
    return table


def min_over_snr(table, **kw):
    """Minimum SER over the SNR grid for the rows matching ``kw``, keyed by (M, K)."""
    out = {}
    for r in table.select(**kw):
        key = (r.M, r.K)
        out[key] = min(out.get(key, np.inf), r.ser)
    return out


def format_value(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def emit_csv(table, path):
    """Header plus one line per row, fixed column order, floats at 10 significant digits."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(SER_COLUMNS)
            for row in table.rows:
                w.writerow([format_value(getattr(row, c)) for c in SER_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write SER table to {path}: {exc.strerror}") from exc
    if table.per_ue:
        side = path.with_name(path.stem + ".per_ue.csv")
        with open(side, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(("snr_db", "M", "K", "receiver", "detector", "N", "ue", "errors", "symbols_tested", "ser"))
            for snr, M, K, rec, det, N, k, e, n in table.per_ue:
                w.writerow([format_value(snr), M, K, rec, det, N, k, e, n, format_value(e / n)])
    return path


_INT_COLS = {"M", "K", "tau", "N", "trials", "symbol_vectors_per_trial", "errors", "symbols_tested", "seed"}


def read_csv(path):
    """Parse a file written by :func:`emit_csv` back into a :class:`SerTable`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SER_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = []
        for rec in reader:
            vals = {c: int(rec[c]) if c in _INT_COLS else (rec[c] if c in ("receiver", "detector") else float(rec[c]))
                    for c in SER_COLUMNS}
            rows.append(SerRow(**vals))
    return SerTable(rows)

"""
Experiment configuration.

Configs are INI files with three flat sections::

    [experiment]
    M = 32
    K = 2
    tau = 31
    snr_db = -10, 0, 10
    receivers = MRC, MMSE, LMMD
    detectors = jd, n_jd, h_sud
    n_values = 3
    trials = 500
    symbol_mode = uniform_random
    symbols_per_trial = 256
    seed = 1

    [scenario]
    spread_deg = 30
    separation_deg = 30
    azimuth0_deg = -45

    [sweep]
    M_values = 16, 32, 64

Receivers may carry a CSI suffix, e.g. ``MMSE:perfect``.
"""

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

__all__ = ["ExperimentConfig", "load_config", "thread_count", "THREADS_ENV"]

THREADS_ENV = "ONEBIT_MIMO_THREADS"
SYMBOL_MODES = ("uniform_random", "enumerate_all")


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 32
    K: int = 2
    tau: int = 31
    snr_grid_db: tuple = (0.0,)
    pilot_kind: str = "zadoff_chu"
    pilot_root: int = 1
    constellation: str = "16qam"
    receivers: tuple = ("MRC", "MMSE", "LMMD")
    detectors: tuple = ("jd",)
    n_values: tuple = (3,)
    trials: int = 500
    symbol_mode: str = "uniform_random"
    symbols_per_trial: int = 256
    master_seed: int = 0
    csi_mode: str = "estimated"
    output: str = None
    per_ue: bool = False
    # scenario geometry
    azimuth0_deg: float = -45.0
    separation_deg: float = 30.0
    spread_deg: float = 30.0
    spacing_wavelengths: float = 0.5
    iid: bool = False
    # sweeps; empty means (M,) / (K,)
    M_values: tuple = ()
    K_values: tuple = ()
    antennas_per_ue: float = None
    table_budget: int = 16 ** 3
    cache_dir: str = None
    threads: int = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ValueError("the SNR grid must not be empty")
        if self.symbol_mode not in SYMBOL_MODES:
            raise ValueError(f"symbol_mode must be one of {SYMBOL_MODES}")
        if self.csi_mode not in ("estimated", "perfect"):
            raise ValueError("csi_mode must be 'estimated' or 'perfect'")
        for K in self.K_values or (self.K,):
            if self.tau < K:
                raise ValueError(f"tau={self.tau} must be >= K={K}")
        unknown = set(d.lower() for d in self.detectors) - {"e_sud", "h_sud", "genie", "jd", "n_jd", "rml"}
        if unknown:
            raise ValueError(f"unknown detectors: {sorted(unknown)}")

    def points(self):
        """(M, K) pairs covered by the sweep."""
        Ks = self.K_values or (self.K,)
        if self.antennas_per_ue:
            return [(int(round(self.antennas_per_ue * K)), K) for K in Ks]
        Ms = self.M_values or (self.M,)
        return [(M, K) for K in Ks for M in Ms]

    def with_(self, **kw):
        return replace(self, **kw)


_LIST_FIELDS = {"snr_grid_db": float, "receivers": str, "detectors": str, "n_values": int,
                "M_values": int, "K_values": int}
_ALIASES = {"snr_db": "snr_grid_db", "seed": "master_seed", "pilot": "pilot_kind", "root": "pilot_root",
            "out": "output", "m": "M", "k": "K", "m_values": "M_values", "k_values": "K_values"}


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def load_config(path):
    """Read an INI experiment file into an :class:`ExperimentConfig`."""
    path = Path(path)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    types = {f.name: f for f in fields(ExperimentConfig)}
    lower = {name.lower(): name for name in types}
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = _ALIASES.get(key, _ALIASES.get(key.lower(), key))
            name = name if name in types else lower.get(name.lower())
            if name is None:
                raise ValueError(f"{path}: unknown key {key!r} in [{section}]")
            values[name] = _convert(name, raw, types[name].default)
    return ExperimentConfig(**values)


def _convert(name, raw, default):
    raw = raw.strip()
    if name in _LIST_FIELDS:
        conv = _LIST_FIELDS[name]
        return tuple(conv(v.strip()) for v in raw.split(",") if v.strip())
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int) or name in ("threads", "table_budget"):
        return int(raw)
    if isinstance(default, float) or name == "antennas_per_ue":
        return float(raw)
    return raw


def thread_count(config=None):
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    if config is not None and config.threads:
        return config.threads
    return 1

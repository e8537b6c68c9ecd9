"""
Expected soft-estimated symbols.

For MRC the expectation over channel, pilot noise and data noise is
available in closed form::

    E_k(x) = sqrt(rho) tr(C_rp^{-1} A_p P_k^* C_k C_rrp(x))

ZF and MMSE expectations are approximated by scaling it with the estimate
energy. An :class:`ExpectationTable` holds the expectation vectors for
every x in S^K; it is the reference geometry all detectors match against.
"""

import hashlib
import io
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimator import estimate_energy
from .moments import crosscovariance_batch

__all__ = [
    "ExpectationTable",
    "TableBudgetError",
    "RECEIVER_KINDS",
    "index_vectors",
    "expected_soft_symbol_mrc",
    "expected_soft_symbols_mrc_batch",
    "expected_soft_symbol_scaled",
    "build_expectation_table",
    "expectation_vector_e",
    "perfect_csi_table",
    "table_cache_key",
    "save_table",
    "load_table",
]

RECEIVER_KINDS = ("MRC", "ZF", "MMSE")
DEFAULT_TABLE_BUDGET = 16 ** 3
TABLE_FORMAT_VERSION = 1
_BATCH = 16


class TableBudgetError(ValueError):
    pass


def index_vectors(L, K):
    """All index vectors (l_1, ..., l_K) in lexicographic order, shape (L^K, K)."""
    return np.array(list(itertools.product(range(L), repeat=K)), dtype=np.intp).reshape(L ** K, K)


def expected_soft_symbols_mrc_batch(moments, X):
    """MRC expectations for a batch of symbol vectors ``X`` (B, K) -> (B, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    out = np.empty(X.shape, dtype=complex)
    sr = np.sqrt(moments.scenario.rho)
    for start in range(0, X.shape[0], _BATCH):
        chunk = X[start:start + _BATCH]
        c_rrp, _ = crosscovariance_batch(moments.scenario, moments.book, chunk, _template=moments.template)
        # tr(W_k C_rrp) = sum_{j, m} W_k[j, m] C_rrp[m, j]
        out[start:start + _BATCH] = sr * np.einsum("kjm,bmj->bk", moments.W, c_rrp)
    return out


def expected_soft_symbol_mrc(moments, cross, k):
    """Closed-form MRC expectation of UE ``k`` (0-based) for the vector in ``cross``."""
    return complex(np.sqrt(moments.scenario.rho) * np.sum(moments.W[k].T * cross.C_rrp))


def expected_soft_symbol_scaled(mrc_value, energies, rho, k, kind):
    """
    ZF: ``E_MRC / E||h_hat_k||^2``. MMSE: ``E_MRC / (1 + rho E||h_hat_k||^2)``.
    """
    kind = kind.upper()
    if kind == "ZF":
        return mrc_value / energies[k]
    if kind == "MMSE":
        return mrc_value / (1.0 + rho * energies[k])
    if kind == "MRC":
        return mrc_value
    raise ValueError(f"unknown receiver kind {kind!r}")


@dataclass(frozen=True)
class ExpectationTable:
    """
    Expectation vectors for all L^K symbol-index vectors.

    ``entries[i]`` is the K-vector for ``indices[i]``; ``averaged[k, l]`` is
    the mean of ``entries[:, k]`` over rows with ``indices[:, k] == l``.
    """

    receiver_kind: str
    entries: np.ndarray  # (L^K, K)
    constellation: object
    averaged: np.ndarray  # (K, L)
    csi_mode: str = "estimated"

    @property
    def K(self):
        return self.entries.shape[1]

    @property
    def L(self):
        return self.constellation.L

    @property
    def indices(self):
        return index_vectors(self.L, self.K)

    def flat_index(self, l):
        """Row of the table for index vector ``l``."""
        l = np.asarray(l)
        return int(np.ravel_multi_index(tuple(l), (self.L,) * self.K))

    def scaled(self, factors, kind):
        e = self.entries / np.asarray(factors)[None, :]
        return ExpectationTable(kind, e, self.constellation, _averaged(e, self.L, self.K), self.csi_mode)


def _averaged(entries, L, K):
    cube = entries.reshape((L,) * K + (K,))
    out = np.empty((K, L), dtype=complex)
    for k in range(K):
        other = tuple(a for a in range(K) if a != k)
        out[k] = cube[..., k].mean(axis=other) if other else cube[..., k]
    return out


def _check_budget(L, K, budget):
    if L ** K > budget:
        raise TableBudgetError(
            f"L^K = {L ** K} symbol vectors exceeds the table budget {budget}; "
            "reduce K, use N-JD, or shard the table"
        )


def build_expectation_table(moments, constellation, receiver_kind="MRC", budget=DEFAULT_TABLE_BUDGET,
                            use_symmetry=False):
    """
    Enumerate x in S^K in lexicographic index order and store the expected
    soft-symbol vector of every UE.

    With ``use_symmetry`` only vectors whose first symbol lies in one
    rotation orbit representative set are evaluated; the rest follow from
    ``E(j x) = j E(x)``.
    """
    kind = receiver_kind.upper()
    if kind not in RECEIVER_KINDS:
        raise ValueError(f"receiver kind must be one of {RECEIVER_KINDS}")
    L, K = constellation.L, moments.scenario.K
    _check_budget(L, K, budget)
    idx = index_vectors(L, K)
    perm = constellation.rotation_permutation() if use_symmetry else None
    if perm is not None:
        entries = _mrc_by_rotation(moments, constellation, idx, perm)
    else:
        entries = expected_soft_symbols_mrc_batch(moments, constellation.symbols[idx])
    table = ExpectationTable("MRC", entries, constellation, _averaged(entries, L, K))
    if kind == "MRC":
        return table
    energies = estimate_energy(moments)
    rho = moments.scenario.rho
    factors = energies if kind == "ZF" else 1.0 + rho * energies
    return table.scaled(factors, kind)


def _mrc_by_rotation(moments, constellation, idx, perm):
    L, K = constellation.L, idx.shape[1]
    # orbit representatives of the first symbol under multiplication by j
    seen, reps = set(), []
    for l in range(L):
        if l not in seen:
            reps.append(l)
            orbit, cur = set(), l
            while cur not in orbit:
                orbit.add(cur)
                cur = int(perm[cur])
            seen |= orbit
    rep_rows = np.flatnonzero(np.isin(idx[:, 0], reps))
    base = expected_soft_symbols_mrc_batch(moments, constellation.symbols[idx[rep_rows]])
    entries = np.full((L ** K, K), np.nan + 0j)
    shape = (L,) * K
    cur_idx, cur_val = idx[rep_rows], base
    for _ in range(4):
        rows = np.ravel_multi_index(tuple(cur_idx.T), shape)
        entries[rows] = cur_val
        cur_idx, cur_val = perm[cur_idx], 1j * cur_val
    if np.isnan(entries.real).any():
        raise RuntimeError("rotation orbits do not cover the table")
    return entries


def perfect_csi_table(scenario, constellation, receiver_kind="MRC", budget=DEFAULT_TABLE_BUDGET):
    """
    Expectations when the receiver uses the true channel.

    Bussgang's theorem gives ``E[h_k^H r | x] = sqrt(2 rho (rho K + 1) / pi)
    x_k sum_m [C_k]_mm / sqrt(beta_m)``, a scaled copy of the constellation.
    ZF/MMSE scale by ``tr C_k`` and ``1 + rho tr C_k``.
    """
    kind = receiver_kind.upper()
    L, K, rho = constellation.L, scenario.K, scenario.rho
    _check_budget(L, K, budget)
    idx = index_vectors(L, K)
    X = constellation.symbols[idx]
    diag = np.einsum("kmm->km", scenario.covariances).real
    beta = 1.0 + rho * (np.abs(X) ** 2) @ diag  # (B, M)
    gain = np.sqrt(2.0 * rho * (rho * K + 1) / np.pi) * (diag[None, :, :] / np.sqrt(beta)[:, None, :]).sum(-1)
    entries = gain * X
    tr = diag.sum(-1)
    if kind == "ZF":
        entries = entries / tr
    elif kind == "MMSE":
        entries = entries / (1.0 + rho * tr)
    return ExpectationTable(kind, entries, constellation, _averaged(entries, L, K), csi_mode="perfect")


def expectation_vector_e(table, x_index_vector):
    """``e(x) = [E_1, ..., E_K]`` from an MRC table."""
    if table.receiver_kind != "MRC":
        raise ValueError("e(x) is defined on the MRC table")
    l = np.asarray(x_index_vector)
    if l.shape != (table.K,) or np.any(l < 0) or np.any(l >= table.L):
        raise KeyError(f"no table entry for index vector {tuple(l)}")
    return table.entries[table.flat_index(l)].copy()


def table_cache_key(scenario, book, constellation, receiver_kind, csi_mode="estimated"):
    h = hashlib.sha256()
    h.update(f"v{TABLE_FORMAT_VERSION}|{receiver_kind.upper()}|{csi_mode}|{scenario.rho!r}|".encode())
    for arr in (scenario.covariances, book.P, constellation.symbols):
        a = np.ascontiguousarray(arr, dtype=complex)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def save_table(table, path, key):
    buf = io.BytesIO()
    np.savez(buf, version=TABLE_FORMAT_VERSION, key=key, kind=table.receiver_kind, csi=table.csi_mode,
             entries=table.entries, symbols=table.constellation.symbols, label=table.constellation.label)
    Path(path).write_bytes(buf.getvalue())


def load_table(path, key):
    """Load a cached table; returns None when missing, stale or from another version."""
    from .air_interface import Constellation

    path = Path(path)
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != TABLE_FORMAT_VERSION or str(z["key"]) != key:
            return None
        const = Constellation(symbols=z["symbols"], label=str(z["label"]))
        entries = z["entries"]
        return ExpectationTable(str(z["kind"]), entries, const,
                                _averaged(entries, const.L, entries.shape[1]), csi_mode=str(z["csi"]))

"""Synthetic chain-graph benchmark and evaluation metrics."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import time
from math import comb

import numpy as np

from .errors import NotNegativeDefiniteError
from .estimation import FitConfig, fit
from .family import FamilyTag
from .model import SqrModel
from .sampling import GibbsConfig, gibbs_sample

__all__ = [
    "ChainSpec",
    "chain_graph",
    "edge_precision",
    "relative_likelihood",
    "run_chain_experiment",
    "ExperimentRow",
    "REFERENCE_GRID",
    "chance_precision",
    "rows_to_csv",
    "CSV_FIELDS",
]

REFERENCE_GRID = dict(p=30, lam=1e-5, ks=(1, 2, 3, 4), ns=(100, 200, 400, 800, 1600))


@dataclasses.dataclass(frozen=True)
class ChainSpec:
    """Circular chain: node ``s`` linked to ``s+1, ..., s+k`` (mod ``p``).

    ``weight`` defaults to ``0.9 / (2k)``.  The diagonal is negative so that
    ``Phi`` is negative definite by Gershgorin (every row has off-diagonal
    mass ``2k * weight = 0.9 < |diag|``).
    """

    p: int = 30
    k: int = 1
    diag: float = -1.0
    weight: float | None = None

    @property
    def edge_weight(self) -> float:
        return 0.9 / (2 * self.k) if self.weight is None else float(self.weight)


def chain_graph(spec: ChainSpec) -> SqrModel:
    """Exponential SQR with ``theta = 0`` on a ``k``-nearest circular chain."""
    p, k = spec.p, spec.k
    if k < 1 or p <= 2 * k:
        raise ValueError(f"need k >= 1 and p > 2k (got p={p}, k={k})")
    w = spec.edge_weight
    if not abs(spec.diag) > 2 * k * abs(w) or spec.diag >= 0:
        raise NotNegativeDefiniteError(
            f"Gershgorin margin violated: |diag|={abs(spec.diag)} <= 2k|w|={2 * k * abs(w)}"
        )
    phi = np.diag(np.full(p, float(spec.diag)))
    for s in range(p):
        for j in range(1, k + 1):
            t = (s + j) % p
            phi[s, t] = phi[t, s] = w
    return SqrModel(FamilyTag.EXPONENTIAL, np.zeros(p), phi)


def edge_precision(phi_true, phi_est, top_n=None) -> float:
    """Fraction of true edges among the ``top_n`` largest ``|phi_est|`` pairs.

    Pairs ``s < t`` are ranked by ``|phi_est[s, t]|`` descending, ties broken
    by ``(s, t)`` in lexicographic order.  ``top_n`` defaults to the number
    of true edges (``k p`` for a chain graph).
    """
    phi_true = np.asarray(phi_true, float)
    phi_est = np.asarray(phi_est, float)
    if phi_true.shape != phi_est.shape or phi_true.shape[0] != phi_true.shape[1]:
        raise ValueError("matrices must be square and of equal shape")
    iu = np.triu_indices(phi_true.shape[0], k=1)
    truth = phi_true[iu] != 0
    n_true = int(truth.sum())
    if n_true == 0:
        return float("nan")
    top_n = n_true if top_n is None else int(top_n)
    # lexsort: last key is primary; stable order on (s, t) for ties
    order = np.lexsort((np.arange(truth.size), -np.abs(phi_est[iu])))
    hits = int(truth[order[:top_n]].sum())
    return hits / n_true


def chance_precision(p: int, top_n: int) -> float:
    """Expected precision of a random ranking: ``top_n / C(p, 2)``."""
    return top_n / comb(p, 2)


def relative_likelihood(l_model: float, l_baseline: float, n: int) -> float:
    """Geometric-mean likelihood ratio per instance, ``exp((L - L_base) / n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(np.exp((l_model - l_baseline) / n))


@dataclasses.dataclass(frozen=True)
class ExperimentRow:
    k: int
    n: int
    seed: int
    precision: float
    wall_seconds: float


def run_chain_experiment(
    p=30,
    lam=1e-5,
    ks=(1, 2, 3, 4),
    ns=(100, 200, 400, 800, 1600),
    seeds=(0,),
    gibbs: GibbsConfig | None = None,
    fit_cfg: FitConfig | None = None,
    threads=None,
    progress=None,
):
    """Edge-recovery experiment on circular chain graphs.

    For each ``(k, seed)`` one pool of ``max(ns)`` Gibbs samples is drawn
    from ``chain_graph(p, k)``; each ``n`` fits on the first ``n`` rows, so
    the sample sizes are nested.  The random stream of a cell depends only
    on ``(seed, k)``.
    """
    gibbs = GibbsConfig() if gibbs is None else gibbs
    fit_cfg = FitConfig(lam=lam) if fit_cfg is None else dataclasses.replace(fit_cfg, lam=lam)
    rows = []
    for k, seed in itertools.product(ks, seeds):
        model = chain_graph(ChainSpec(p=p, k=k))
        t0 = time.perf_counter()
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(k),))
        pool = gibbs_sample(model, max(ns), gibbs, rng=ss, threads=threads)
        t_sample = time.perf_counter() - t0
        for n in sorted(ns):
            t1 = time.perf_counter()
            est = fit(pool[:n], fit_cfg, FamilyTag.EXPONENTIAL, threads=threads)
            prec = edge_precision(model.phi, est.phi)
            wall = time.perf_counter() - t1 + t_sample
            row = ExperimentRow(int(k), int(n), int(seed), prec, wall)
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


CSV_FIELDS = ("k", "n", "seed", "precision", "wall_seconds")


def rows_to_csv(rows, fh=None):
    out = io.StringIO() if fh is None else fh
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([r.k, r.n, r.seed, repr(r.precision), f"{r.wall_seconds:.3f}"])
    return out.getvalue() if fh is None else None

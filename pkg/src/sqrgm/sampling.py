"""Gibbs sampling and annealed importance sampling for SQR models.

All samplers are vectorised over chains: a node update computes the
node-conditional parameters for every chain at once and runs the slice
sampler on the whole batch.  Chains are processed in blocks of
``CHAIN_BLOCK``; block ``b`` draws from its own generator spawned from the
master seed, so output does not depend on the number of worker threads.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from .errors import DomainViolationError, InvalidParamsError
from .family import (
    FamilyTag,
    _poisson_draw,
    _slice_chain,
    check_domain,
    node_log_partition,
    sqrt_stat,
)
from .model import SqrModel, unnormalized_log_density

__all__ = [
    "GibbsConfig",
    "AisConfig",
    "AisResult",
    "anneal_model",
    "sample_independent",
    "independent_log_partition",
    "gibbs_sweep",
    "gibbs_sample",
    "ais_log_partition",
    "log_likelihood",
]

log = logging.getLogger(__name__)

CHAIN_BLOCK = 500


@dataclasses.dataclass(frozen=True)
class GibbsConfig:
    """Gibbs sampler settings.

    ``init`` is ``"independent"`` (draw the start from the diagonal part of
    the model) or an explicit start state of shape ``(p,)`` or ``(n, p)``.
    ``chains="independent"`` runs one chain per returned sample for
    ``sweeps`` sweeps; ``"single"`` runs one chain and keeps every
    ``sweeps``-th state.
    """

    sweeps: int = 1000
    slice_steps: int = 10
    init: object = "independent"
    chains: str = "independent"

    def __post_init__(self):
        if self.sweeps < 1 or self.slice_steps < 1:
            raise ValueError("sweeps and slice_steps must be >= 1")
        if self.chains not in ("independent", "single"):
            raise ValueError(f"unknown chain mode {self.chains!r}")


def linear_schedule(anneal_steps: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, anneal_steps + 1)


@dataclasses.dataclass(frozen=True)
class AisConfig:
    num_chains: int = 1000
    anneal_steps: int = 100
    gibbs_per_step: int = 10
    slice_steps: int = 10
    schedule: np.ndarray | None = None

    def __post_init__(self):
        if self.num_chains < 1 or self.anneal_steps < 1 or self.gibbs_per_step < 0:
            raise ValueError("invalid AIS configuration")
        sched = linear_schedule(self.anneal_steps) if self.schedule is None else np.asarray(self.schedule, float)
        if sched[0] != 0.0 or sched[-1] != 1.0 or np.any(np.diff(sched) <= 0):
            raise ValueError("schedule must increase strictly from 0 to 1")
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "anneal_steps", len(sched) - 1)


@dataclasses.dataclass(frozen=True)
class AisResult:
    """Output of :func:`ais_log_partition`.

    ``log_partition = independent_log_partition + logmeanexp(log_weights)``.
    """

    log_partition: float
    log_weights: np.ndarray
    std_err: float
    ess: float
    independent_log_partition: float
    config: AisConfig


# ---------------------------------------------------------------------------
# random streams

def _as_seedseq(rng):
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return rng.bit_generator.seed_seq.spawn(1)[0]
    return np.random.SeedSequence(rng)


def _block_rngs(rng, n):
    nblocks = -(-n // CHAIN_BLOCK)
    seqs = _as_seedseq(rng).spawn(nblocks)
    return [
        (b * CHAIN_BLOCK, min(n, (b + 1) * CHAIN_BLOCK), np.random.default_rng(s))
        for b, s in enumerate(seqs)
    ]


def _run_blocks(fn, blocks, threads):
    if threads is None or threads <= 1 or len(blocks) <= 1:
        return [fn(*b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


# ---------------------------------------------------------------------------

def anneal_model(model: SqrModel, beta: float) -> SqrModel:
    """Intermediate model ``(beta theta, beta Phi_off + Phi_diag)``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta == 1.0:
        return model
    diag = np.diag(np.diag(model.phi))
    return SqrModel(model.tag, beta * model.theta, beta * model.phi_off + diag)


def _check_base(model):
    d = model.phi_diag
    if model.tag is not FamilyTag.POISSON and np.any(d >= 0):
        raise InvalidParamsError("independent base needs phi[s, s] < 0")


def sample_independent(model: SqrModel, rng, size=None):
    """Exact draw from ``prod_s p(x_s | eta1 = phi_ss, eta2 = 0)``.

    Exponential: rate ``-phi_ss``; Poisson: mean ``exp(phi_ss)``; Gaussian:
    variance ``-1 / (2 phi_ss)`` about zero.
    """
    _check_base(model)
    d = model.phi_diag
    shape = (model.p,) if size is None else (size, model.p)
    if model.tag is FamilyTag.EXPONENTIAL:
        return rng.standard_exponential(shape) / -d
    if model.tag is FamilyTag.POISSON:
        return rng.poisson(np.exp(d), size=shape).astype(float)
    return rng.standard_normal(shape) * np.sqrt(-0.5 / d)


def independent_log_partition(model: SqrModel) -> float:
    """``sum_s A_node(phi_ss, 0)``, the log partition of the diagonal base."""
    _check_base(model)
    return float(np.sum(node_log_partition(model.tag, (model.phi_diag, np.zeros(model.p)))))


def _sweep(tag, theta, phi_off, eta1, state, slice_steps, rng):
    # state: (m, p), updated in place
    r = sqrt_stat(tag, state)
    for s in range(state.shape[1]):
        eta2 = theta[s] + 2.0 * (r @ phi_off[:, s])
        if tag is FamilyTag.POISSON:
            x = _poisson_draw(eta1[s], eta2, rng.random(len(eta2)))
        else:
            x = _slice_chain(tag, eta1[s], eta2, state[:, s], slice_steps, rng)
        state[:, s] = x
        r[:, s] = sqrt_stat(tag, x)
    return state


def gibbs_sweep(model: SqrModel, state, cfg: GibbsConfig, rng):
    """One systematic-scan sweep ``s = 0..p-1``; ``state`` is ``(p,)`` or ``(m, p)``.

    Each node is refreshed by ``cfg.slice_steps`` slice-sampling steps
    started from its current value (exact draw for Poisson).  Returns a new
    array.
    """
    state = np.asarray(state, dtype=float)
    if not np.all(check_domain(model.tag, state)):
        raise DomainViolationError("Gibbs state outside the family domain")
    single = state.ndim == 1
    st = np.array(state, ndmin=2)
    _sweep(model.tag, model.theta, model.phi_off, model.phi_diag, st, cfg.slice_steps, rng)
    return st[0] if single else st


def _initial(model, cfg, lo, hi, rng):
    if isinstance(cfg.init, str):
        if cfg.init != "independent":
            raise ValueError(f"unknown init {cfg.init!r}")
        return sample_independent(model, rng, size=hi - lo)
    init = np.asarray(cfg.init, dtype=float)
    if init.ndim == 1:
        return np.tile(init, (hi - lo, 1))
    return np.array(init[lo:hi])


def gibbs_sample(model: SqrModel, n: int, cfg: GibbsConfig | None = None, rng=None, threads=None):
    """Draw ``n`` samples (rows) from ``model`` by Gibbs sampling.

    Default: ``n`` independent chains, each started from an independent
    draw and run ``cfg.sweeps`` sweeps.  ``rng`` is a seed, ``SeedSequence``
    or ``Generator``; results are identical for any ``threads``.
    """
    cfg = GibbsConfig() if cfg is None else cfg
    if model.tag is FamilyTag.POISSON and cfg.slice_steps != 1:
        log.debug("Poisson node updates are exact; slice_steps ignored")
    if n == 0:
        return np.empty((0, model.p))
    tag, theta, phi_off, eta1 = model.tag, model.theta, model.phi_off, model.phi_diag

    if cfg.chains == "single":
        (_, _, g), = _block_rngs(rng, 1)
        st = _initial(model, cfg, 0, 1, g)[:1]
        out = np.empty((n, model.p))
        for i in range(n):
            for _ in range(cfg.sweeps):
                _sweep(tag, theta, phi_off, eta1, st, cfg.slice_steps, g)
            out[i] = st[0]
        return out

    def run(lo, hi, g):
        st = _initial(model, cfg, lo, hi, g)
        for _ in range(cfg.sweeps):
            _sweep(tag, theta, phi_off, eta1, st, cfg.slice_steps, g)
        return st

    return np.vstack(_run_blocks(run, _block_rngs(rng, n), threads))


def _interaction(tag, theta, phi_off, x):
    # d f_beta / d beta: the part of the exponent scaled by beta
    r = sqrt_stat(tag, x)
    return r @ theta + np.einsum("ki,ij,kj->k", r, phi_off, r)


def ais_log_partition(model: SqrModel, cfg: AisConfig | None = None, rng=None, threads=None) -> AisResult:
    """Estimate ``A(theta, Phi)`` by annealed importance sampling.

    The path scales the off-diagonal part of ``Phi`` and ``theta`` by
    ``beta`` from 0 (independent base, sampled exactly) to 1.  Each chain
    accumulates ``f_{beta_j}(x) - f_{beta_{j-1}}(x)`` and then takes
    ``gibbs_per_step`` Gibbs sweeps under ``beta_j``.
    """
    cfg = AisConfig() if cfg is None else cfg
    a_ind = independent_log_partition(model)
    tag, theta, phi_off, eta1 = model.tag, model.theta, model.phi_off, model.phi_diag
    sched = cfg.schedule

    def run(lo, hi, g):
        x = sample_independent(model, g, size=hi - lo)
        lw = np.zeros(hi - lo)
        for j in range(1, len(sched)):
            lw += (sched[j] - sched[j - 1]) * _interaction(tag, theta, phi_off, x)
            b = sched[j]
            for _ in range(cfg.gibbs_per_step):
                _sweep(tag, b * theta, b * phi_off, eta1, x, cfg.slice_steps, g)
        return lw

    lw = np.concatenate(_run_blocks(run, _block_rngs(rng, cfg.num_chains), threads))
    if not np.all(np.isfinite(lw)):
        raise InvalidParamsError("non-finite AIS log weights")
    m = len(lw)
    lme = special.logsumexp(lw) - np.log(m)
    w = np.exp(lw - lw.max())
    ess = float(w.sum() ** 2 / (w * w).sum())
    # delta method: se(log mean w) = sd(w) / (sqrt(m) mean(w))
    wn = np.exp(lw - lme)
    se = float(np.std(wn, ddof=1) / np.sqrt(m)) if m > 1 else float("inf")
    if ess < 2:
        warnings.warn(f"degenerate AIS weights (ESS = {ess:.3g})", RuntimeWarning, stacklevel=2)
    return AisResult(float(a_ind + lme), lw, se, ess, a_ind, cfg)


def log_likelihood(model: SqrModel, data, ais: AisResult | float) -> float:
    """``sum_i log p~(x_i) - n A`` with ``A`` from an AIS result (or a float)."""
    data = np.asarray(data, dtype=float)
    a = ais.log_partition if isinstance(ais, AisResult) else float(ais)
    return float(np.sum(unnormalized_log_density(model, data)) - data.shape[0] * a)

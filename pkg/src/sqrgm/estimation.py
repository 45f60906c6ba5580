"""l1-regularised node-wise estimation of SQR models.

Node ``s`` is fit by minimising the average negative node-conditional
log-likelihood

    f(w) = -(1/n) sum_i [eta1 T(x_si) + eta2_i sqrt(T(x_si)) + B(x_si) - A_node(eta1, eta2_i)]

with ``eta1 = phi_ss`` and ``eta2_i = theta_s + 2 phi_off' sqrt(T(x_{-s,i}))``,
plus ``lam * ||phi_off||_1``.  ``theta_s`` and ``phi_ss`` are not penalised.
The solver is proximal gradient descent with a backtracking line search;
the trial step of each iteration is a Barzilai-Borwein estimate.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DegenerateColumnError, DomainViolationError, InvalidParamsError, NoValidStartError
from .family import (
    FamilyTag,
    check_domain,
    log_base_measure,
    node_conditional_valid,
    node_log_partition,
    node_log_partition_and_grad,
    sqrt_stat,
    sufficient_stat,
)
from .model import SqrModel

__all__ = [
    "FitConfig",
    "NodeFit",
    "NodeObjective",
    "node_objective",
    "fit_node",
    "fit",
    "fit_independent_baseline",
    "kkt_violation",
]

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class FitConfig:
    lam: float = 0.0
    max_iters: int = 5000
    grad_tol: float = 1e-6
    fd_eps: float = 1e-3
    gradient: str = "exact"
    diag_cap: float = -1e-4
    step0: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.diag_cap >= 0:
            raise ValueError("diag_cap must be negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.gradient not in ("exact", "forward"):
            raise ValueError("gradient must be 'exact' or 'forward'")


@dataclasses.dataclass
class NodeFit:
    s: int
    theta_s: float
    phi_ss: float
    phi_off: np.ndarray
    objective_trace: list
    iterations: int = 0
    converged: bool = False
    kkt_residual: float = float("nan")

    def as_vector(self):
        return np.concatenate(([self.theta_s, self.phi_ss], self.phi_off))


def _check_data(tag, data):
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a 2-D array (instances x variables)")
    ok = check_domain(tag, data)
    if not np.all(ok):
        i, j = np.argwhere(~ok)[0]
        raise DomainViolationError(f"value {data[i, j]!r} at row {i}, column {j} outside the {tag.value} domain")
    return data


class NodeObjective:
    """Smooth part of the node-``s`` objective and its gradient.

    The parameter vector is ``w = [theta_s, phi_ss, phi_off...]`` where
    ``phi_off`` lists ``phi[s, t]`` for ``t != s`` in column order.
    """

    def __init__(self, tag, data, s, gradient="exact", fd_eps=1e-3):
        self.tag = FamilyTag.parse(tag)
        self.gradient = gradient
        self.fd_eps = fd_eps
        data = _check_data(self.tag, data)
        self.n, self.p = data.shape
        self.s = s
        y = data[:, s]
        self.t = sufficient_stat(self.tag, y)
        self.st = sqrt_stat(self.tag, y)
        self.b_mean = float(np.mean(log_base_measure(self.tag, y)))
        self.t_mean = float(np.mean(self.t))
        self.z = sqrt_stat(self.tag, np.delete(data, s, axis=1))

    def eta2(self, w):
        return w[0] + 2.0 * (self.z @ w[2:])

    def value(self, w):
        eta2 = self.eta2(w)
        a = node_log_partition(self.tag, (w[1], eta2))
        return -(w[1] * self.t_mean + np.mean(eta2 * self.st) + self.b_mean - np.mean(a))

    def _moments(self, eta1, eta2):
        if self.gradient == "exact":
            return node_log_partition_and_grad(self.tag, (eta1, eta2))
        # forward differences of A_node, three partition evaluations; the
        # eta1 step flips sign if eta1 + h would leave the valid set
        h = self.fd_eps
        h1 = h if np.all(node_conditional_valid(self.tag, (eta1 + h, eta2))) else -h
        a = np.asarray(node_log_partition(self.tag, (eta1, eta2)))
        a1 = np.asarray(node_log_partition(self.tag, (eta1 + h1, eta2)))
        a2 = np.asarray(node_log_partition(self.tag, (eta1, eta2 + h)))
        return a, (a1 - a) / h1, (a2 - a) / h

    def value_and_grad(self, w):
        eta2 = self.eta2(w)
        a, e_t, e_st = self._moments(w[1], eta2)
        f = -(w[1] * self.t_mean + np.mean(eta2 * self.st) + self.b_mean - np.mean(a))
        r = self.st - e_st
        g = np.empty_like(w)
        g[0] = -np.mean(r)
        g[1] = -(self.t_mean - np.mean(e_t))
        g[2:] = -2.0 * (self.z.T @ r) / self.n
        return float(f), g


def node_objective(data, s, params, lam, tag=FamilyTag.EXPONENTIAL):
    """Return ``(total, smooth, penalty)`` for node ``s`` at ``params``.

    ``params`` is a :class:`NodeFit` or a vector ``[theta_s, phi_ss, phi_off...]``.
    """
    w = params.as_vector() if isinstance(params, NodeFit) else np.asarray(params, dtype=float)
    smooth = float(NodeObjective(tag, data, s).value(w))
    penalty = float(lam * np.sum(np.abs(w[2:])))
    return smooth + penalty, smooth, penalty


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _prox(tag, v, step, lam, diag_cap):
    out = v.copy()
    out[2:] = _soft(v[2:], step * lam)
    if tag is not FamilyTag.POISSON:
        out[1] = min(out[1], diag_cap)
    return out


def _kkt(tag, w, g, lam, diag_cap):
    off, go = w[2:], g[2:]
    viol = np.where(off == 0, np.maximum(np.abs(go) - lam, 0.0), np.abs(go + lam * np.sign(off)))
    if tag is not FamilyTag.POISSON and w[1] >= diag_cap:
        v1 = max(g[1], 0.0)
    else:
        v1 = abs(g[1])
    return float(max(abs(g[0]), v1, viol.max(initial=0.0)))


def _baseline_diag(tag, col):
    if tag is FamilyTag.EXPONENTIAL:
        m = float(np.mean(col))
        if not m > 0:
            raise DegenerateColumnError("column mean must be positive for the exponential MLE")
        return -1.0 / m, 0.0
    if tag is FamilyTag.POISSON:
        m = float(np.mean(col))
        if not m > 0:
            raise DegenerateColumnError("column mean must be positive for the Poisson MLE")
        return float(np.log(m)), 0.0
    v = float(np.var(col))
    if not v > 0:
        raise DegenerateColumnError("column variance must be positive for the Gaussian MLE")
    return -0.5 / v, float(np.mean(col)) / v


def fit_node(data, s, cfg: FitConfig | None = None, tag=FamilyTag.EXPONENTIAL) -> NodeFit:
    """Fit node ``s`` by proximal gradient descent.

    Starts from ``theta_s = 0``, ``phi_off = 0`` and ``phi_ss`` at the
    independent-model MLE (clipped to ``diag_cap`` for continuous families).
    Each iteration soft-thresholds ``phi_off`` by ``step * lam``, clips
    ``phi_ss`` to ``diag_cap`` (Exponential/Gaussian) and backtracks until
    ``F(w+) <= F(w) - sufficient_decrease * ||w+ - w||^2 / step``.  Stops
    when the optimality residual of :func:`kkt_violation` at the new iterate
    drops below ``grad_tol``.
    """
    cfg = FitConfig() if cfg is None else cfg
    tag = FamilyTag.parse(tag)
    obj = NodeObjective(tag, data, s, cfg.gradient, cfg.fd_eps)
    if obj.n < 2:
        raise ValueError("need at least two instances")
    lam = cfg.lam

    w = np.zeros(obj.p + 1)
    try:
        w[1] = _baseline_diag(tag, np.asarray(data, float)[:, s])[0]
    except DegenerateColumnError:
        w[1] = -1.0
    if tag is not FamilyTag.POISSON:
        w[1] = min(w[1], cfg.diag_cap)

    def total(v):
        f, g = obj.value_and_grad(v)
        return f + lam * np.abs(v[2:]).sum(), f, g

    try:
        F, f, g = total(w)
    except InvalidParamsError as exc:
        raise NoValidStartError(str(exc)) from None
    trace = [F]
    step = cfg.step0
    gnorm = _kkt(tag, w, g, lam, cfg.diag_cap)
    converged = gnorm < cfg.grad_tol
    it = 0
    for it in range(1, 0 if converged else cfg.max_iters + 1):
        while True:
            w_new = _prox(tag, w - step * g, step, lam, cfg.diag_cap)
            d = w_new - w
            dd = float(d @ d)
            try:
                F_new, f_new, g_new = total(w_new)
            except InvalidParamsError:
                F_new = np.inf
            if F_new <= F - cfg.sufficient_decrease * dd / step:
                break
            step *= cfg.shrink
            if step < 1e-20:
                break
        if not F_new <= F:
            # no descent possible at machine precision
            break
        y = g_new - g
        w, F, g = w_new, F_new, g_new
        trace.append(F)
        gnorm = _kkt(tag, w, g, lam, cfg.diag_cap)
        if gnorm < cfg.grad_tol:
            converged = True
            break
        sy = float(d @ y)
        step = dd / sy if sy > 0 else step * 2.0
        step = min(max(step, 1e-10), 1e10)
    return NodeFit(
        s=s, theta_s=float(w[0]), phi_ss=float(w[1]), phi_off=w[2:].copy(),
        objective_trace=trace, iterations=it, converged=converged, kkt_residual=float(gnorm),
    )


def kkt_violation(data, fit: NodeFit, lam, tag=FamilyTag.EXPONENTIAL, diag_cap=-1e-4):
    """Largest violation of the first-order optimality conditions at ``fit``.

    Zero off-diagonal coordinates need ``|grad| <= lam``; nonzero ones need
    ``grad + lam * sign = 0``.  ``theta_s`` needs zero gradient, and
    ``phi_ss`` zero gradient unless it sits on the cap, where the gradient
    must be nonpositive.
    """
    tag = FamilyTag.parse(tag)
    w = fit.as_vector()
    _, g = NodeObjective(tag, data, fit.s).value_and_grad(w)
    return _kkt(tag, w, g, lam, diag_cap)


def fit(data, cfg: FitConfig | None = None, tag=FamilyTag.EXPONENTIAL, threads=None, return_nodes=False):
    """Fit all ``p`` nodes and assemble a symmetric :class:`SqrModel`.

    Off-diagonal entries average the two node estimates,
    ``phi_st = (phi_st^(s) + phi_ts^(t)) / 2``.  Node fits run on up to
    ``threads`` workers; the result does not depend on the thread count.
    """
    cfg = FitConfig() if cfg is None else cfg
    tag = FamilyTag.parse(tag)
    data = _check_data(tag, data)
    p = data.shape[1]
    job = lambda s: fit_node(data, s, cfg, tag)
    if threads is not None and threads > 1 and p > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nodes = list(pool.map(job, range(p)))
    else:
        nodes = [job(s) for s in range(p)]
    phi = np.zeros((p, p))
    theta = np.zeros(p)
    for nf in nodes:
        others = [t for t in range(p) if t != nf.s]
        phi[nf.s, others] = nf.phi_off
        phi[nf.s, nf.s] = nf.phi_ss
        theta[nf.s] = nf.theta_s
        if not nf.converged:
            log.info("node %d stopped after %d iterations (KKT residual %.3g)", nf.s, nf.iterations, nf.kkt_residual)
    phi = 0.5 * (phi + phi.T)
    model = SqrModel(tag, theta, phi)
    return (model, nodes) if return_nodes else model


def fit_independent_baseline(data, tag=FamilyTag.EXPONENTIAL) -> SqrModel:
    """Independent-model MLE as a diagonal SQR model.

    Exponential ``phi_ss = -1/mean``; Poisson ``phi_ss = log(mean)``;
    Gaussian ``phi_ss = -1/(2 var)`` with ``theta_s = mean/var``.
    """
    tag = FamilyTag.parse(tag)
    data = _check_data(tag, data)
    if data.shape[0] < 1:
        raise DegenerateColumnError("no instances")
    diag = np.empty(data.shape[1])
    theta = np.zeros(data.shape[1])
    for s in range(data.shape[1]):
        try:
            diag[s], theta[s] = _baseline_diag(tag, data[:, s])
        except DegenerateColumnError as exc:
            raise DegenerateColumnError(f"column {s}: {exc}") from None
    return SqrModel(tag, theta, np.diag(diag))

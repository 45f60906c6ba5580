"""Univariate base families and the two-parameter node-conditional family.

A node conditional of an SQR model has density (w.r.t. Lebesgue or
counting measure)

    p(x) = exp(eta1 * T(x) + eta2 * sqrt(T(x)) + B(x) - A_node(eta1, eta2))

where ``T`` and ``B`` come from the base family.  For the Gaussian family
``T(x) = x**2`` and ``sqrt(T(x))`` is taken to be ``x`` itself (signed), so
the node conditional is again Gaussian.

Everything here works on numpy arrays: ``eta2`` (and usually ``eta1``)
may be vectors, which is how the estimation and sampling code evaluate
one node for many instances or chains at once.
"""

from __future__ import annotations

import enum
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import EmptySliceError, InvalidParamsError, NonConvergenceError

__all__ = [
    "FamilyTag",
    "NodeConditionalParams",
    "sufficient_stat",
    "sqrt_stat",
    "log_base_measure",
    "check_domain",
    "node_conditional_valid",
    "node_log_partition",
    "node_log_partition_grad",
    "node_log_partition_and_grad",
    "node_log_partition_quadrature",
    "node_moments_quadrature",
    "poisson_support_size",
    "slice_interval",
    "node_mode",
    "sample_node_conditional",
]


class FamilyTag(str, enum.Enum):
    EXPONENTIAL = "exponential"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value) -> "FamilyTag":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown family {value!r}; expected one of {names}") from None

    @property
    def continuous(self) -> bool:
        return self is not FamilyTag.POISSON


class NodeConditionalParams(NamedTuple):
    """Natural parameters of a node conditional.

    ``eta1`` multiplies ``T(x)`` and ``eta2`` multiplies ``sqrt(T(x))``.
    """

    eta1: float
    eta2: float


# ---------------------------------------------------------------------------
# base-family pieces

def sufficient_stat(tag, x):
    tag = FamilyTag.parse(tag)
    x = np.asarray(x, dtype=float)
    return x * x if tag is FamilyTag.GAUSSIAN else x


def sqrt_stat(tag, x):
    """``sqrt(T(x))``; the identity for the Gaussian family (no abs)."""
    tag = FamilyTag.parse(tag)
    x = np.asarray(x, dtype=float)
    if tag is FamilyTag.GAUSSIAN:
        return x
    return np.sqrt(x)


def log_base_measure(tag, x):
    tag = FamilyTag.parse(tag)
    x = np.asarray(x, dtype=float)
    if tag is FamilyTag.POISSON:
        return -special.gammaln(x + 1.0)
    return np.zeros_like(x)


def check_domain(tag, x):
    """Boolean mask of entries of ``x`` inside the family's support."""
    tag = FamilyTag.parse(tag)
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x)
    if tag is FamilyTag.GAUSSIAN:
        return ok
    ok &= x >= 0
    if tag is FamilyTag.POISSON:
        ok &= np.floor(x) == x
    return ok


def _split(params):
    eta1, eta2 = params
    return np.asarray(eta1, dtype=float), np.asarray(eta2, dtype=float)


def node_conditional_valid(tag, params):
    """Whether ``A_node`` is finite at ``params`` (elementwise for arrays).

    Exponential: ``eta1 < 0`` or ``eta1 == 0 and eta2 < 0``.
    Poisson: always.  Gaussian: ``eta1 < 0``.
    """
    tag = FamilyTag.parse(tag)
    eta1, eta2 = _split(params)
    finite = np.isfinite(eta1) & np.isfinite(eta2)
    if tag is FamilyTag.EXPONENTIAL:
        ok = (eta1 < 0) | ((eta1 == 0) & (eta2 < 0))
    elif tag is FamilyTag.GAUSSIAN:
        ok = np.broadcast_to(eta1 < 0, np.broadcast(eta1, eta2).shape)
    else:
        ok = np.ones(np.broadcast(eta1, eta2).shape, dtype=bool)
    ok = ok & finite
    return bool(ok) if ok.ndim == 0 else ok


def _require_valid(tag, eta1, eta2):
    ok = np.asarray(node_conditional_valid(tag, (eta1, eta2)))
    if ok.all():
        return
    e1, e2, ok = np.broadcast_arrays(eta1, eta2, ok)
    i = np.flatnonzero(~ok.ravel())[0]
    raise InvalidParamsError(
        f"{tag.value} node conditional diverges for eta1={e1.flat[i]!r}, eta2={e2.flat[i]!r}"
    )


def _scalarize(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


# ---------------------------------------------------------------------------
# exponential family, closed form
#
# With s = sqrt(x) the partition is Z = int_0^inf 2 s exp(-a s^2 + b s) ds,
# a = -eta1, b = eta2.  Writing J_k = int_0^inf s^k exp(-a s^2 + b s) ds:
#   J_0 = sqrt(pi) / (2 sqrt(a)) * erfcx(z),  z = -b / (2 sqrt(a))
#   J_{k+1} = (k J_{k-1} + b J_k) / (2a),     J_1 = (1 + b J_0) / (2a)
# so Z = 2 J_1 = h(z) / a with h(z) = 1 - sqrt(pi) z erfcx(z), and
# E[sqrt x] = J_2 / J_1, E[x] = J_3 / J_1.
# h(z) cancels catastrophically for large z; there (and for a == 0) the
# series J_k = k!/beta^(k+1) sum_m (-a/beta^2)^m (k+2m)!/(k! m!), beta=-b,
# is used instead.

_SQRT_PI = math.sqrt(math.pi)
_LOG_SQRT_PI = 0.5 * math.log(math.pi)
# series branch when z > 8, i.e. a / b^2 < 1/256
_SERIES_C = 1.0 / 256.0
_SERIES_TERMS = 40


def _series_coeffs(k):
    m = np.arange(_SERIES_TERMS)
    logc = special.gammaln(k + 2 * m + 1) - special.gammaln(k + 1) - special.gammaln(m + 1)
    return np.exp(logc) * (-1.0) ** m


_COEF = {k: _series_coeffs(k) for k in (1, 2, 3)}


def _poly(coef, c):
    out = np.zeros_like(c)
    for a in coef[::-1]:
        out = out * c + a
    return out


def _log_erfcx(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = np.log(special.erfcx(z[pos]))
    zn = z[~pos]
    out[~pos] = zn * zn + np.log(special.erfc(zn))
    return out


def _log_h(z, log_erfcx):
    out = np.empty_like(z)
    neg = z < 0
    with np.errstate(divide="ignore"):
        t = np.log(_SQRT_PI * -z[neg]) + log_erfcx[neg]
    out[neg] = np.logaddexp(0.0, t)
    zp = z[~neg]
    out[~neg] = np.log1p(-_SQRT_PI * zp * np.exp(log_erfcx[~neg]))
    return out


def _exp_node(eta1, eta2, grad):
    a, b = np.broadcast_arrays(-np.asarray(eta1, float), np.asarray(eta2, float))
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    logz = np.empty(a.shape)
    e_x = np.empty(a.shape)
    e_sx = np.empty(a.shape)

    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(b < 0, a / (b * b), np.inf)
    ser = c < _SERIES_C
    if np.any(ser):
        cs, beta = c[ser], -b[ser]
        s1 = _poly(_COEF[1], cs)
        logz[ser] = math.log(2.0) + np.log(s1) - 2.0 * np.log(beta)
        if grad:
            e_sx[ser] = 2.0 * _poly(_COEF[2], cs) / (beta * s1)
            e_x[ser] = 6.0 * _poly(_COEF[3], cs) / (beta * beta * s1)

    cl = ~ser
    if np.any(cl):
        ac, bc = a[cl], b[cl]
        ra = np.sqrt(ac)
        z = -bc / (2.0 * ra)
        lex = _log_erfcx(z)
        lh = _log_h(z, lex)
        logz[cl] = lh - np.log(ac)
        if grad:
            ratio = np.exp(_LOG_SQRT_PI + lex - lh)
            esx = (ratio - 2.0 * z) / (2.0 * ra)
            e_sx[cl] = esx
            e_x[cl] = (2.0 + bc * esx) / (2.0 * ac)
    if grad:
        return logz, e_x, e_sx
    return logz


def _gauss_node(eta1, eta2, grad):
    a = -np.asarray(eta1, float)
    b = np.asarray(eta2, float)
    logz = 0.5 * np.log(np.pi / a) + b * b / (4.0 * a)
    if not grad:
        return logz
    e_x = b / (2.0 * a)
    e_x2 = 1.0 / (2.0 * a) + e_x * e_x
    return logz, e_x2, e_x


# ---------------------------------------------------------------------------
# Poisson, truncated summation
#
# Log terms l(x) = eta1 x + eta2 sqrt(x) - log x!.  Once the term ratio
# r(x) = exp(l(x+1) - l(x)) is below one and decreasing (guaranteed for
# x > eta2^2/4 + 1 when eta2 < 0, always otherwise) the tail past x is at
# most t(x) r / (1 - r).

_POISSON_RTOL = 1e-15
_POISSON_MAX_TERMS = 10 ** 6


def _poisson_log_terms(eta1, eta2, xs):
    return eta1 * xs + eta2 * np.sqrt(xs) - special.gammaln(xs + 1.0)


def poisson_support_size(eta1, eta2, rtol=_POISSON_RTOL, max_terms=_POISSON_MAX_TERMS):
    """Number of leading terms of the Poisson node sum needed for ``rtol``.

    Returns ``K`` such that the terms ``x >= K`` contribute less than
    ``rtol`` times the partial sum over ``x < K``.  For array arguments the
    largest ``eta1``/``eta2`` are used, which dominates every entry.
    """
    e1 = float(np.max(eta1))
    e2 = float(np.max(eta2))
    if not (math.isfinite(e1) and math.isfinite(e2)):
        raise InvalidParamsError(f"non-finite Poisson parameters eta1={e1}, eta2={e2}")
    x_min = e2 * e2 / 4.0 + 1.0 if e2 < 0 else 0.0
    log_rtol = math.log(rtol)
    start = 0
    block = 256
    run = -np.inf
    while start < max_terms:
        xs = np.arange(start, min(start + block + 1, max_terms + 1), dtype=float)
        lt = _poisson_log_terms(e1, e2, xs)
        lse = np.logaddexp.accumulate(np.concatenate(([run], lt[:-1])))[1:]
        lr = np.diff(lt)
        xs, lt = xs[:-1], lt[:-1]
        with np.errstate(divide="ignore"):
            tail = lt + lr - np.log(-np.expm1(np.minimum(lr, 0.0)))
        ok = (lr < 0) & (xs >= x_min) & (tail - lse < log_rtol)
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(xs[hit[0]]) + 1
        run = lse[-1]
        start += block
        block *= 2
    raise NonConvergenceError(
        f"Poisson node sum did not converge within {max_terms} terms (eta1={e1}, eta2={e2})"
    )


def _poisson_node(eta1, eta2, grad, max_cells=4_000_000):
    eta1 = np.asarray(eta1, float)
    eta2 = np.asarray(eta2, float)
    shape = np.broadcast(eta1, eta2).shape
    e1 = np.broadcast_to(eta1, shape).ravel()
    e2 = np.broadcast_to(eta2, shape).ravel()
    K = poisson_support_size(e1, e2)
    xs = np.arange(K, dtype=float)
    sx = np.sqrt(xs)
    lg = special.gammaln(xs + 1.0)
    logz = np.empty(e1.size)
    e_x = np.empty(e1.size)
    e_sx = np.empty(e1.size)
    rows = max(1, max_cells // K)
    for lo in range(0, e1.size, rows):
        sl = slice(lo, lo + rows)
        lt = e1[sl, None] * xs + e2[sl, None] * sx - lg
        lz = special.logsumexp(lt, axis=1)
        logz[sl] = lz
        if grad:
            w = np.exp(lt - lz[:, None])
            e_x[sl] = w @ xs
            e_sx[sl] = w @ sx
    logz = logz.reshape(shape)
    if grad:
        return logz, e_x.reshape(shape), e_sx.reshape(shape)
    return logz


# ---------------------------------------------------------------------------
# public log partition API

def node_log_partition(tag, params):
    """Log partition ``A_node(eta1, eta2)`` of the node-conditional family.

    Closed form for the Exponential and Gaussian families, truncated
    summation for Poisson.  Broadcasts over array-valued parameters.

    Raises
    ------
    InvalidParamsError
        If the parameters make the integral/sum diverge.
    """
    tag = FamilyTag.parse(tag)
    eta1, eta2 = _split(params)
    _require_valid(tag, eta1, eta2)
    if tag is FamilyTag.EXPONENTIAL:
        out = _exp_node(eta1, eta2, grad=False)
    elif tag is FamilyTag.GAUSSIAN:
        out = _gauss_node(eta1, eta2, grad=False)
    else:
        out = _poisson_node(eta1, eta2, grad=False)
    if not np.all(np.isfinite(out)):
        raise InvalidParamsError(f"{tag.value} log partition overflowed")
    return _scalarize(out)


def node_log_partition_and_grad(tag, params):
    """Return ``(A, dA/deta1, dA/deta2)`` in one pass.

    The gradient is the pair of moments ``(E[T(x)], E[sqrt(T(x))])`` under
    the node conditional, exact for every family (Poisson moments come
    from the same truncated sum as ``A``).
    """
    tag = FamilyTag.parse(tag)
    eta1, eta2 = _split(params)
    _require_valid(tag, eta1, eta2)
    if tag is FamilyTag.EXPONENTIAL:
        out = _exp_node(eta1, eta2, grad=True)
    elif tag is FamilyTag.GAUSSIAN:
        out = _gauss_node(eta1, eta2, grad=True)
    else:
        out = _poisson_node(eta1, eta2, grad=True)
    if not all(np.all(np.isfinite(o)) for o in out):
        raise InvalidParamsError(f"{tag.value} log partition overflowed")
    return tuple(_scalarize(o) for o in out)


def node_log_partition_grad(tag, params, eps=None, method="exact"):
    """Gradient ``(dA/deta1, dA/deta2)`` of the node log partition.

    Parameters
    ----------
    method : {"exact", "forward"}
        ``"exact"`` uses closed-form moments (Exponential, Gaussian) or the
        moments of the truncated sum (Poisson).  ``"forward"`` uses forward
        differences of :func:`node_log_partition` with step ``eps``
        (default 0.001), which only needs partition evaluations.
    """
    tag = FamilyTag.parse(tag)
    if method == "exact":
        _, g1, g2 = node_log_partition_and_grad(tag, params)
        return g1, g2
    if method != "forward":
        raise ValueError(f"unknown gradient method {method!r}")
    eps = 1e-3 if eps is None else float(eps)
    eta1, eta2 = _split(params)
    a0 = np.asarray(node_log_partition(tag, (eta1, eta2)))
    a1 = np.asarray(node_log_partition(tag, (eta1 + eps, eta2)))
    a2 = np.asarray(node_log_partition(tag, (eta1, eta2 + eps)))
    return _scalarize((a1 - a0) / eps), _scalarize((a2 - a0) / eps)


# ---------------------------------------------------------------------------
# quadrature / summation oracle; deliberately independent of the code above

def _continuous_exponent(tag, eta1, eta2):
    if tag is FamilyTag.EXPONENTIAL:
        return lambda x: eta1 * x + eta2 * math.sqrt(x)
    return lambda x: eta1 * x * x + eta2 * x


def _locate_mass(tag, g):
    # coarse log grid: where the integrand peaks and whether its tail decays
    grid = np.logspace(-12, 12, 2401)
    if tag is FamilyTag.GAUSSIAN:
        grid = np.concatenate((-grid[::-1], [0.0], grid))
    else:
        grid = np.concatenate(([0.0], grid))
    vals = np.array([g(x) for x in grid])
    i = int(np.argmax(vals))
    gmax = float(vals[i])
    decayed = vals[-1] < gmax - 60 and (tag is not FamilyTag.GAUSSIAN or vals[0] < gmax - 60)
    return grid, vals, float(grid[i]), gmax, decayed


def node_log_partition_quadrature(tag, params, tol=1e-10):
    """Brute-force ``A_node`` by adaptive quadrature or direct summation.

    Serves as a ground-truth oracle; it does not consult the validity
    predicate and instead detects divergence from the integrand itself.

    Raises
    ------
    NonConvergenceError
        If the integrand/terms do not decay, i.e. the partition diverges.
    """
    tag = FamilyTag.parse(tag)
    eta1, eta2 = (float(v) for v in params)
    if tag is FamilyTag.POISSON:
        return _poisson_sum_oracle(eta1, eta2)
    g = _continuous_exponent(tag, eta1, eta2)
    grid, vals, peak, gmax, decayed = _locate_mass(tag, g)
    if not decayed or not math.isfinite(gmax):
        raise NonConvergenceError(
            f"{tag.value} node integrand does not decay (eta1={eta1}, eta2={eta2})"
        )
    total = _integrate_shifted(tag, g, grid, vals, peak, gmax, tol, lambda x: 1.0)
    return math.log(total) + gmax


def _integrate_shifted(tag, g, grid, vals, peak, gmax, tol, weight):
    # split at the peak and at the edges of the effective support
    inside = grid[vals > gmax - 45]
    left, right = float(inside.min()), float(inside.max())
    pts = sorted({left, peak, right})
    f = lambda x: weight(x) * math.exp(g(x) - gmax)
    pieces = []
    lo_end = -math.inf if tag is FamilyTag.GAUSSIAN else 0.0
    edges = [lo_end] + pts + [math.inf]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if a == b:
                continue
            try:
                val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=500)
            except integrate.IntegrationWarning as exc:
                raise NonConvergenceError(f"quadrature failed on [{a}, {b}]: {exc}") from None
            pieces.append(val)
    return math.fsum(pieces)


def _poisson_sum_oracle(eta1, eta2, weight=None, max_terms=_POISSON_MAX_TERMS):
    # plain summation: stop after the terms have been falling for a while and
    # have dropped below 1e-17 of the largest term
    logs = []
    best = -math.inf
    falling = 0
    prev = -math.inf
    for x in range(max_terms):
        lt = eta1 * x + eta2 * math.sqrt(x) - math.lgamma(x + 1)
        if not math.isfinite(lt):
            raise NonConvergenceError(f"non-finite Poisson term at x={x}")
        logs.append(lt)
        best = max(best, lt)
        falling = falling + 1 if lt < prev else 0
        prev = lt
        if falling >= 20 and lt < best - 40 * math.log(10):
            break
    else:
        raise NonConvergenceError(f"Poisson sum did not converge in {max_terms} terms")
    terms = [math.exp(v - best) for v in logs]
    if weight is None:
        return math.log(math.fsum(terms)) + best
    num = math.fsum(t * weight(x) for x, t in enumerate(terms))
    return num / math.fsum(terms)


def node_moments_quadrature(tag, params, tol=1e-11):
    """``(E[T(x)], E[sqrt(T(x))])`` under the node conditional, by brute force."""
    tag = FamilyTag.parse(tag)
    eta1, eta2 = (float(v) for v in params)
    if tag is FamilyTag.POISSON:
        return (
            _poisson_sum_oracle(eta1, eta2, weight=float),
            _poisson_sum_oracle(eta1, eta2, weight=math.sqrt),
        )
    g = _continuous_exponent(tag, eta1, eta2)
    grid, vals, peak, gmax, decayed = _locate_mass(tag, g)
    if not decayed:
        raise NonConvergenceError("node integrand does not decay")
    if tag is FamilyTag.EXPONENTIAL:
        t, st = (lambda x: x), math.sqrt
    else:
        t, st = (lambda x: x * x), (lambda x: x)
    z = _integrate_shifted(tag, g, grid, vals, peak, gmax, tol, lambda x: 1.0)
    m1 = _integrate_shifted(tag, g, grid, vals, peak, gmax, tol, t)
    m2 = _integrate_shifted(tag, g, grid, vals, peak, gmax, tol, st)
    return m1 / z, m2 / z


# ---------------------------------------------------------------------------
# slice sampling

def _exponent(tag, eta1, eta2, x):
    if tag is FamilyTag.GAUSSIAN:
        return eta1 * x * x + eta2 * x
    return eta1 * x + eta2 * np.sqrt(x)


def node_mode(tag, params):
    """Mode of a continuous node conditional.

    Exponential: ``x = max(0, -eta2 / (2 eta1))**2`` (the exponent is a
    concave quadratic in ``sqrt(x)``); Gaussian: ``-eta2 / (2 eta1)``.
    """
    tag = FamilyTag.parse(tag)
    eta1, eta2 = _split(params)
    with np.errstate(divide="ignore", invalid="ignore"):
        if tag is FamilyTag.GAUSSIAN:
            out = -eta2 / (2.0 * eta1)
        elif tag is FamilyTag.EXPONENTIAL:
            s = np.where(eta1 < 0, np.maximum(0.0, -eta2 / (2.0 * eta1)), 0.0)
            out = s * s
        else:
            raise ValueError("mode is only defined here for continuous families")
    return _scalarize(out)


def _slice_bounds(tag, eta1, eta2, level):
    """Vectorised slice {x : g(x) >= level}; assumes level <= max g."""
    disc = np.maximum(eta2 * eta2 + 4.0 * eta1 * level, 0.0)
    sq = np.sqrt(disc)
    # stable roots of eta1 r^2 + eta2 r - level = 0
    q = -0.5 * (eta2 + np.copysign(sq, eta2))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / eta1
        r2 = -level / q
    if np.any(q == 0):
        r2 = np.where(q == 0, 0.0, r2)
    if np.any(eta1 == 0):
        # exponential with eta1 == 0, eta2 < 0: g(s) = eta2 s is linear
        lin = np.broadcast_to(eta1 == 0, np.shape(r1))
        r1 = np.where(lin, -np.inf, r1)
        r2 = np.where(lin, level / eta2, r2)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    if tag is FamilyTag.GAUSSIAN:
        return lo, hi
    lo = np.maximum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    return lo * lo, hi * hi


def _slice_chain(tag, eta1, eta2, x, steps, rng):
    # no validation: callers guarantee valid parameters and a state in domain
    shape = np.shape(x)
    for _ in range(steps):
        if tag is FamilyTag.GAUSSIAN:
            g = (eta1 * x + eta2) * x
        else:
            g = eta1 * x + eta2 * np.sqrt(x)
        level = g - rng.standard_exponential(shape)
        lo, hi = _slice_bounds(tag, eta1, eta2, level)
        x = lo + (hi - lo) * rng.random(shape)
    return x


def slice_interval(params, level, tag=FamilyTag.EXPONENTIAL):
    """Closed-form slice ``{x : g(x) >= level}`` of a node conditional.

    For the Exponential family ``g(x) = eta1 x + eta2 sqrt(x)``; with
    ``s = sqrt(x)`` the slice is where the concave quadratic
    ``eta1 s^2 + eta2 s - level`` is nonnegative, giving
    ``[max(0, s_lo)^2, s_hi^2]``.  For the Gaussian family the exponent is
    already quadratic in ``x``.

    Raises
    ------
    EmptySliceError
        If ``level`` exceeds the maximum of ``g``.
    """
    tag = FamilyTag.parse(tag)
    if tag is FamilyTag.POISSON:
        raise ValueError("slices are only defined for continuous families")
    eta1, eta2 = (float(v) for v in params)
    _require_valid(tag, eta1, eta2)
    level = float(level)
    gmax = float(_exponent(tag, eta1, eta2, node_mode(tag, (eta1, eta2))))
    if level > gmax + 1e-12 * max(1.0, abs(gmax)):
        raise EmptySliceError(f"level {level} above the maximum {gmax} of the exponent")
    lo, hi = _slice_bounds(tag, np.float64(eta1), np.float64(eta2), np.float64(level))
    return float(lo), float(hi)


def _poisson_draw(eta1, eta2, u):
    eta2 = np.asarray(eta2, float)
    shape = np.broadcast(np.asarray(eta1), eta2, u).shape
    e1 = np.broadcast_to(np.asarray(eta1, float), shape).ravel()
    e2 = np.broadcast_to(eta2, shape).ravel()
    uu = np.broadcast_to(u, shape).ravel()
    K = poisson_support_size(e1, e2)
    xs = np.arange(K, dtype=float)
    lt = e1[:, None] * xs + e2[:, None] * np.sqrt(xs) - special.gammaln(xs + 1.0)
    cdf = np.cumsum(np.exp(lt - lt.max(axis=1, keepdims=True)), axis=1)
    idx = (cdf < uu[:, None] * cdf[:, -1:]).sum(axis=1)
    return np.minimum(idx, K - 1).astype(float).reshape(shape)


def sample_node_conditional(tag, params, slice_steps, rng, x0=None, size=None):
    """Draw from the node conditional.

    Continuous families run ``slice_steps`` iterations of a slice sampler
    whose slices are exact intervals (no stepping out or shrinkage).  The
    chain starts at ``x0`` if given, else at the conditional mode; starting
    from the current value, as the Gibbs sampler does, leaves the
    conditional exactly invariant.  Poisson draws are exact, by inverse CDF
    over the truncated support, and ignore ``slice_steps``.

    Parameters broadcast; pass array ``eta2`` to update many chains at once.
    """
    tag = FamilyTag.parse(tag)
    if slice_steps < 1:
        raise ValueError("slice_steps must be >= 1")
    eta1, eta2 = _split(params)
    _require_valid(tag, eta1, eta2)
    shape = np.broadcast(eta1, eta2).shape if size is None else tuple(np.atleast_1d(size))
    if tag is FamilyTag.POISSON:
        u = rng.random(shape)
        return _scalarize(_poisson_draw(eta1, eta2, u))
    eta1 = np.broadcast_to(eta1, shape)
    eta2 = np.broadcast_to(eta2, shape)
    if x0 is None:
        x = np.array(node_mode(tag, (eta1, eta2)), dtype=float).reshape(shape)
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, float), shape))
    return _scalarize(_slice_chain(tag, eta1, eta2, x, slice_steps, rng))

"""The SQR joint model.

Density (up to the log partition ``A``)::

    log p(x) = theta' sqrt(T(x)) + sqrt(T(x))' Phi sqrt(T(x)) + sum_s B(x_s) - A

``Phi`` is symmetric and keeps its diagonal: ``phi[s, s]`` is the
coefficient of ``T(x_s)`` in node ``s``'s conditional.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import warnings

import numpy as np
from scipy import integrate, special

from .errors import (
    DomainViolationError,
    FormatError,
    InvalidParamsError,
    NonConvergenceError,
    NotNegativeDefiniteError,
)
from .family import (
    FamilyTag,
    NodeConditionalParams,
    check_domain,
    log_base_measure,
    poisson_support_size,
    sqrt_stat,
    sufficient_stat,
)

__all__ = [
    "SqrModel",
    "RadialParams",
    "Normalizability",
    "Diagnostic",
    "unnormalized_log_density",
    "node_conditional_params",
    "radial_conditional_params",
    "check_normalizable",
    "exact_log_partition_small",
    "gaussian_equivalent",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]

SYMMETRY_WARN_TOL = 1e-8


@dataclasses.dataclass(frozen=True, eq=False)
class SqrModel:
    """Square root graphical model ``(tag, theta, phi)``.

    ``phi`` is symmetrised as ``(phi + phi.T) / 2`` on construction, with a
    warning when the asymmetry exceeds 1e-8.  Exponential and Gaussian
    models need every ``phi[s, s] < 0``; otherwise even the single-node
    directions are not normalizable.
    """

    tag: FamilyTag
    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        tag = FamilyTag.parse(self.tag)
        phi = np.array(self.phi, dtype=float, ndmin=2)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ValueError(f"phi must be square, got shape {phi.shape}")
        p = phi.shape[0]
        theta = np.zeros(p) if self.theta is None else np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape != (p,):
            raise ValueError(f"theta must have length {p}, got {theta.shape}")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
            raise InvalidParamsError("model parameters must be finite")
        asym = float(np.max(np.abs(phi - phi.T))) if p else 0.0
        if asym > SYMMETRY_WARN_TOL:
            warnings.warn(f"phi asymmetric by {asym:.3g}; symmetrising", stacklevel=3)
        phi = 0.5 * (phi + phi.T)
        if tag is not FamilyTag.POISSON and np.any(np.diag(phi) >= 0):
            s = int(np.flatnonzero(np.diag(phi) >= 0)[0])
            raise InvalidParamsError(
                f"{tag.value} SQR needs phi[s, s] < 0 for all s; phi[{s}, {s}] = {phi[s, s]!r}"
            )
        theta.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @property
    def phi_diag(self) -> np.ndarray:
        return np.diag(self.phi).copy()

    @property
    def phi_off(self) -> np.ndarray:
        return self.phi - np.diag(np.diag(self.phi))

    def replace(self, **changes) -> "SqrModel":
        return dataclasses.replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, SqrModel):
            return NotImplemented
        return (
            self.tag is other.tag
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.phi, other.phi)
        )

    def __repr__(self):
        return f"SqrModel(tag={self.tag.value!r}, p={self.p})"

    @classmethod
    def independent(cls, tag, phi_diag, theta=None) -> "SqrModel":
        phi_diag = np.asarray(phi_diag, dtype=float)
        return cls(tag, theta, np.diag(phi_diag))


@dataclasses.dataclass(frozen=True)
class RadialParams:
    eta1_bar: float
    eta2_bar: float
    u: np.ndarray


class Normalizability(str, enum.Enum):
    CERTIFIED = "Certified"
    LIKELY_VALID = "LikelyValid"
    INVALID = "Invalid"


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    status: Normalizability
    reason: str
    witness: np.ndarray | None = None
    eta1_bar: float | None = None

    def __str__(self):
        msg = f"{self.status.value}: {self.reason}"
        if self.witness is not None:
            u = " ".join(f"{v:.6g}" for v in self.witness)
            msg += f" (u = [{u}], eta1_bar = {self.eta1_bar:.6g})"
        return msg


def _validate_x(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.p,):
        raise ValueError(f"expected trailing dimension {model.p}, got shape {x.shape}")
    ok = check_domain(model.tag, x)
    if not np.all(ok):
        idx = tuple(int(i) for i in np.argwhere(~ok)[0])
        raise DomainViolationError(
            f"value {x[idx]!r} at {idx} outside the {model.tag.value} domain"
        )
    return x


def unnormalized_log_density(model: SqrModel, x):
    """Exponent of the SQR density without ``A``; ``x`` may be ``(p,)`` or ``(n, p)``."""
    x = _validate_x(model, x)
    r = sqrt_stat(model.tag, x)
    quad = np.einsum("...i,ij,...j->...", r, model.phi, r)
    out = r @ model.theta + quad + log_base_measure(model.tag, x).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def node_conditional_params(model: SqrModel, s: int, x_minus) -> NodeConditionalParams:
    """``(eta1, eta2) = (phi_ss, theta_s + 2 phi_{-s}' sqrt(T(x_{-s})))``.

    ``x_minus`` holds the other ``p - 1`` coordinates in order; a trailing
    batch dimension is allowed and yields array ``eta2``.
    """
    x_minus = np.asarray(x_minus, dtype=float)
    if x_minus.shape[-1:] != (model.p - 1,):
        raise ValueError(f"x_minus must have trailing dimension {model.p - 1}")
    ok = check_domain(model.tag, x_minus)
    if not np.all(ok):
        raise DomainViolationError(f"x_minus outside the {model.tag.value} domain")
    col = np.delete(model.phi[:, s], s)
    eta2 = model.theta[s] + 2.0 * (sqrt_stat(model.tag, x_minus) @ col)
    eta2 = float(eta2) if np.ndim(eta2) == 0 else eta2
    return NodeConditionalParams(float(model.phi[s, s]), eta2)


def radial_conditional_params(model: SqrModel, u) -> RadialParams:
    """``eta1_bar = sqrt(u)' Phi sqrt(u)`` and ``eta2_bar = theta' sqrt(u)``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.p,):
        raise ValueError(f"u must have shape ({model.p},)")
    if np.any(u < 0) or not math.isclose(u.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("u must lie on the probability simplex")
    su = np.sqrt(u)
    return RadialParams(float(su @ model.phi @ su), float(model.theta @ su), u)


# ---------------------------------------------------------------------------
# normalizability

def _is_negative_definite(m):
    try:
        np.linalg.cholesky(-m)
    except np.linalg.LinAlgError:
        return False
    return True


def _pair_max(a, b, c):
    """Max of ``v' [[a, c], [c, b]] v`` over unit ``v >= 0``, and the argmax.

    With ``v = (cos t, sin t)``, ``t`` in ``[0, pi/2]``: the unconstrained
    maximiser is the top eigenvector, which is admissible iff it can be
    taken nonnegative; otherwise the max sits at an endpoint.
    """
    w, vecs = np.linalg.eigh(np.array([[a, c], [c, b]]))
    v = vecs[:, 1]
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    if v[0] >= 0 and v[1] >= 0:
        return float(w[1]), np.abs(v)
    if a >= b:
        return float(a), np.array([1.0, 0.0])
    return float(b), np.array([0.0, 1.0])


def _radial_invalid(eta1_bar, eta2_bar):
    # eta1_bar == 0 diverges unless eta2_bar < 0
    return eta1_bar > 0 or (eta1_bar == 0 and eta2_bar >= 0)


def check_normalizable(model: SqrModel, n_probes: int = 10_000, rng=None) -> Diagnostic:
    """Diagnose whether the SQR log partition is finite.

    Poisson models are always normalizable.  Gaussian models need ``Phi``
    negative definite.  Exponential models need ``sqrt(u)' Phi sqrt(u) < 0``
    on the whole simplex; this is certified exactly when ``Phi`` (or its
    upper bound with the negative off-diagonal entries dropped) is negative
    definite, and exactly for ``p = 2``.  Otherwise vertices, every pair of
    coordinates (solved exactly) and ``n_probes`` Dirichlet(1) directions
    are searched for a violating direction.
    """
    tag, phi, p = model.tag, model.phi, model.p
    if tag is FamilyTag.POISSON:
        return Diagnostic(Normalizability.CERTIFIED, "Poisson SQR is normalizable for any finite parameters")
    if _is_negative_definite(phi):
        return Diagnostic(Normalizability.CERTIFIED, "negative definite")
    if tag is FamilyTag.GAUSSIAN:
        w, v = np.linalg.eigh(phi)
        return Diagnostic(
            Normalizability.INVALID, "Gaussian SQR requires negative definite phi",
            witness=v[:, -1], eta1_bar=float(w[-1]),
        )

    def witness(u, reason):
        rp = radial_conditional_params(model, u)
        return Diagnostic(Normalizability.INVALID, reason, witness=u, eta1_bar=rp.eta1_bar)

    for s in range(p):
        u = np.zeros(p)
        u[s] = 1.0
        rp = radial_conditional_params(model, u)
        if _radial_invalid(rp.eta1_bar, rp.eta2_bar):
            return witness(u, "vertex direction not normalizable")

    best, best_u = -np.inf, None
    for i in range(p):
        for j in range(i + 1, p):
            val, v = _pair_max(phi[i, i], phi[j, j], phi[i, j])
            if val > best:
                u = np.zeros(p)
                u[i], u[j] = v[0] ** 2, v[1] ** 2
                best, best_u = val, u / u.sum()
    if best_u is not None:
        rp = radial_conditional_params(model, best_u)
        if _radial_invalid(rp.eta1_bar, rp.eta2_bar):
            return witness(best_u, "pairwise direction not normalizable")
    if p <= 2:
        return Diagnostic(Normalizability.CERTIFIED, "exact maximum over the simplex is negative")

    # sqrt(u) >= 0, so dropping negative off-diagonals can only increase the
    # form; a Metzler matrix is strictly copositive-negative iff neg. definite
    upper = np.diag(np.diag(phi)) + np.maximum(model.phi_off, 0.0)
    if _is_negative_definite(upper):
        return Diagnostic(Normalizability.CERTIFIED, "positive part of phi is negative definite")

    rng = np.random.default_rng(0) if rng is None else rng
    for lo in range(0, n_probes, 2048):
        u = rng.dirichlet(np.ones(p), size=min(2048, n_probes - lo))
        su = np.sqrt(u)
        vals = np.einsum("ki,ij,kj->k", su, phi, su)
        eta2 = su @ model.theta
        bad = (vals > 0) | ((vals == 0) & (eta2 >= 0))
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            return witness(u[k], "random direction not normalizable")
    return Diagnostic(Normalizability.LIKELY_VALID, f"no violating direction among {n_probes} probes")


# ---------------------------------------------------------------------------
# exact partition for p <= 2

def exact_log_partition_small(model: SqrModel, tol: float = 1e-10) -> float:
    """Brute-force ``A(theta, Phi)`` for ``p <= 2``.

    Continuous families use nested adaptive quadrature over the joint
    density; Poisson uses a double sum truncated where the boundary terms
    fall below 1e-15 of the total.
    """
    if model.p > 2:
        raise ValueError("exact_log_partition_small supports p <= 2")
    if model.tag is FamilyTag.POISSON:
        return _poisson_grid_log_partition(model)
    return _continuous_log_partition(model, tol)


def _poisson_grid_log_partition(model, rtol=1e-15, max_side=4096):
    p = model.p
    side = 64
    while side <= max_side:
        xs = np.arange(side, dtype=float)
        grids = np.meshgrid(*([xs] * p), indexing="ij")
        x = np.stack([g.ravel() for g in grids], axis=1)
        lt = unnormalized_log_density(model, x).reshape((side,) * p)
        total = special.logsumexp(lt)
        edge = [np.take(lt, [side - 1], axis=a) for a in range(p)]
        edge_max = max(float(e.max()) for e in edge)
        # boundary terms decay super-geometrically once past the mode
        if edge_max - total < math.log(rtol) - math.log(side):
            return float(total)
        side *= 2
    raise NonConvergenceError("Poisson double sum did not converge")


def _continuous_log_partition(model, tol):
    tag = model.tag
    theta, phi = model.theta, model.phi
    lo = -np.inf if tag is FamilyTag.GAUSSIAN else 0.0

    if tag is FamilyTag.EXPONENTIAL:
        # integrate in s = sqrt(x); dx = 2 s ds removes the sqrt cusp at 0
        def logf(*s):
            s = np.array(s)
            return float(theta @ s + s @ phi @ s + np.sum(np.log(2.0 * np.maximum(s, 1e-300))))
    else:
        def logf(*x):
            x = np.array(x)
            return float(theta @ x + x @ phi @ x)

    shift = _find_max(logf, model.p, tag)
    f = lambda *v: math.exp(logf(*v) - shift)
    opts = dict(epsabs=0.0, epsrel=tol, limit=200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if model.p == 1:
                val, _ = integrate.quad(f, lo, np.inf, **opts)
            else:
                inner = lambda y: integrate.quad(lambda x: f(x, y), lo, np.inf, **opts)[0]
                val, _ = integrate.quad(inner, lo, np.inf, **opts)
        except integrate.IntegrationWarning as exc:
            raise NonConvergenceError(f"quadrature failed: {exc}") from None
    if not (val > 0 and math.isfinite(val)):
        raise NonConvergenceError("joint integral is not finite")
    return math.log(val) + shift


def _find_max(logf, p, tag):
    from scipy import optimize

    x0 = np.full(p, 0.5)
    bounds = None if tag is FamilyTag.GAUSSIAN else [(0.0, None)] * p
    res = optimize.minimize(lambda v: -logf(*v), x0, bounds=bounds, method="L-BFGS-B")
    return max(-float(res.fun), logf(*x0))


# ---------------------------------------------------------------------------
# Gaussian reduction

def gaussian_equivalent(model: SqrModel):
    """``(mu, Sigma)`` of the normal distribution equal to a Gaussian SQR.

    ``Sigma = -inv(Phi) / 2`` and ``mu = Sigma theta``.
    """
    if model.tag is not FamilyTag.GAUSSIAN:
        raise ValueError("gaussian_equivalent needs a Gaussian SQR model")
    if not _is_negative_definite(model.phi):
        raise NotNegativeDefiniteError("phi must be negative definite")
    sigma = -0.5 * np.linalg.inv(model.phi)
    sigma = 0.5 * (sigma + sigma.T)
    return sigma @ model.theta, sigma


# ---------------------------------------------------------------------------
# plain-text model format

_MAGIC = "sqr-model"
_VERSION = "v1"


def _fmt(v):
    return format(float(v), ".17g")


def dumps_model(model: SqrModel) -> str:
    lines = [f"{_MAGIC} {_VERSION} {model.tag.value} p={model.p}"]
    lines.append(" ".join(_fmt(v) for v in model.theta))
    lines.extend(" ".join(_fmt(v) for v in row) for row in model.phi)
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> SqrModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty model file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != _MAGIC or not head[3].startswith("p="):
        raise FormatError(f"bad header line {lines[0]!r}")
    if head[1] != _VERSION:
        raise FormatError(f"unsupported model format version {head[1]!r}")
    try:
        tag = FamilyTag.parse(head[2])
        p = int(head[3][2:])
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if len(lines) != p + 2:
        raise FormatError(f"expected {p + 2} non-empty lines, found {len(lines)}")
    try:
        theta = np.array([float(v) for v in lines[1].split()])
        phi = np.array([[float(v) for v in ln.split()] for ln in lines[2:]])
    except ValueError as exc:
        raise FormatError(f"bad number in model file: {exc}") from None
    if theta.shape != (p,) or phi.shape != (p, p):
        raise FormatError("model dimensions do not match header")
    return SqrModel(tag, theta, phi)


def save_model(model: SqrModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> SqrModel:
    with open(path) as fh:
        return loads_model(fh.read())

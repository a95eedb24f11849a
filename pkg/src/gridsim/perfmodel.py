"""Additive cost model of distributed execution time, its fit, and pattern labels.

Predicted time on ``n`` instances::

    Tn = k*T1/n + (1-k)*T1 + serialization + communication + coordination + F - gain

with ``k`` the distributable fraction.  The four cost terms come from a
:class:`CostForms` object; :data:`LINEAR_FORMS` uses

    serialization = sigma*s            communication = c1*n*s*d/w
    coordination  = g*n*d/w            gain          = theta1*(N-1)

and ``N`` (physical nodes) defaults to ``n``.
"""

import enum
import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import lsq_linear

log = logging.getLogger(__name__)

MIN_TIME = 1e-9
FLAT_TOLERANCE = 0.01


class ModelDomainError(ValueError):
    pass


class ClampWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CostParams:
    k: float
    T1: float
    s: float = 0.0
    d: float = 0.0
    w: float = 1.0
    N: int = None
    F: float = 0.0
    sigma: float = 0.0
    c1: float = 0.0
    g: float = 0.0
    theta1: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ModelDomainError("k must lie in [0, 1]")
        if self.T1 <= 0:
            raise ModelDomainError("T1 must be positive")
        if self.w <= 0:
            raise ModelDomainError("bandwidth w must be positive")
        if self.N is not None and self.N < 1:
            raise ModelDomainError("N must be a positive node count")
        for name in ("s", "d", "F", "sigma", "c1", "g", "theta1"):
            if getattr(self, name) < 0:
                raise ModelDomainError(f"{name} must be non-negative")

    def nodes(self, n):
        return n if self.N is None else self.N


class CostForms:
    """Concrete cost terms; subclass to try other functional forms."""

    def serialization(self, p, n):
        return p.sigma * p.s

    def communication(self, p, n):
        return p.c1 * n * p.s * p.d / p.w

    def coordination(self, p, n):
        return p.g * n * p.d / p.w

    def gain(self, p, n):
        return p.theta1 * (p.nodes(n) - 1)


LINEAR_FORMS = CostForms()


@dataclass(frozen=True)
class ModelResult:
    n: int
    Tn: float
    Sn: float
    En: float
    P: float


def _check_n(n):
    if n < 1 or int(n) != n:
        raise ModelDomainError("n must be a positive integer")


def raw_time(params: CostParams, n, forms=LINEAR_FORMS):
    """Predicted time before clamping; may be nonpositive."""
    _check_n(n)
    p = params
    return (p.k * p.T1 / n + (1 - p.k) * p.T1
            + forms.serialization(p, n) + forms.communication(p, n)
            + forms.coordination(p, n) + p.F - forms.gain(p, n))


def predict_time(params: CostParams, n, forms=LINEAR_FORMS):
    t = raw_time(params, n, forms)
    if t <= 0:
        warnings.warn(f"predicted time {t:.6g} at n={n} is nonpositive; clamped to {MIN_TIME}",
                      ClampWarning, stacklevel=2)
        return MIN_TIME
    return t


def speedup(T1, Tn):
    if T1 <= 0 or Tn <= 0:
        raise ModelDomainError("times must be positive")
    return T1 / Tn


def efficiency(Sn, n):
    _check_n(n)
    return Sn / n


def percent_improvement(Sn):
    if Sn <= 0:
        raise ModelDomainError("speedup must be positive")
    return (1.0 - 1.0 / Sn) * 100.0


def percent_improvement_expanded(params: CostParams, n, forms=LINEAR_FORMS):
    """Percentage improvement written out term by term over T1."""
    _check_n(n)
    p = params
    gained = p.k * p.T1 * (1 - 1 / n) + forms.gain(p, n)
    spent = forms.serialization(p, n) + forms.communication(p, n) + forms.coordination(p, n) + p.F
    return (gained - spent) / p.T1 * 100.0


def evaluate(params: CostParams, n, forms=LINEAR_FORMS) -> ModelResult:
    tn = predict_time(params, n, forms)
    sn = speedup(params.T1, tn)
    return ModelResult(n, tn, sn, efficiency(sn, n), percent_improvement(sn))


def prediction_table(params: CostParams, ns, forms=LINEAR_FORMS):
    """Rows for ``ns`` plus the n with the highest efficiency."""
    rows = [evaluate(params, n, forms) for n in ns]
    best = max(rows, key=lambda r: r.En).n if rows else None
    return rows, best


# -- fitting ------------------------------------------------------------------

FIT_FIELDS = ("k", "serialization", "c1", "g", "theta1")


@dataclass(frozen=True)
class FitResult:
    params: CostParams
    serialization: float
    predicted: tuple
    residuals: tuple
    relative_residuals: tuple
    residual_norm: float
    rank: int
    degenerate: bool

    @property
    def max_relative_residual(self):
        return max((abs(r) for r in self.relative_residuals), default=0.0)


def _design(ns, T1, s, d, w, N):
    rows = []
    for n in ns:
        nodes = n if N is None else N
        rows.append([-T1 * (1 - 1 / n), 1.0, n * s * d / w, n * d / w, -(nodes - 1)])
    return np.array(rows, dtype=float)


def fit_params(measured, T1=None, s=1.0, d=1.0, w=1.0, N=None, F=0.0) -> FitResult:
    """Bounded least squares for (k, lumped serialization, c1, g, theta1).

    Minimizes squared absolute residuals with ``0 <= k <= 1`` and every cost
    coefficient non-negative.  On a fixed (s, d, w, N) the model only spans
    ``{1/n, 1, n}``, so three distinct n are needed to pin it down; with
    fewer the best solution is still returned, flagged degenerate.
    """
    pts = sorted((int(n), float(t)) for n, t in measured)
    if not pts:
        raise ModelDomainError("no measurements")
    if len({n for n, _ in pts}) != len(pts):
        raise ModelDomainError("duplicate n in measurements")
    if any(n < 1 or t <= 0 for n, t in pts):
        raise ModelDomainError("measurements need n >= 1 and positive times")
    if T1 is None:
        ones = [t for n, t in pts if n == 1]
        if not ones:
            raise ModelDomainError("T1 not given and no measurement at n=1")
        T1 = ones[0]
    ns = np.array([n for n, _ in pts], dtype=float)
    ts = np.array([t for _, t in pts])
    A = _design(ns, T1, s, d, w, N)
    b = ts - T1 - F
    basis = np.column_stack([1 / ns, np.ones_like(ns), ns])
    rank = int(np.linalg.matrix_rank(basis))
    upper = np.array([1.0, np.inf, np.inf, np.inf, np.inf])
    sol = lsq_linear(A, b, bounds=(np.zeros(5), upper), method="bvls", tol=1e-14)
    k, ser, c1, g, theta1 = (float(max(0.0, v)) for v in sol.x)
    k = min(k, 1.0)
    sigma = ser / s if s > 0 else 0.0
    params = CostParams(k=k, T1=T1, s=s, d=d, w=w, N=N, F=F, sigma=sigma, c1=c1, g=g, theta1=theta1)
    if s <= 0 and ser > 0:
        # no object size to carry the serialization cost: fold it into F
        params = replace(params, F=F + ser)
    predicted = tuple(raw_time(params, int(n)) for n in ns)
    residuals = tuple(p - t for p, t in zip(predicted, ts))
    rel = tuple(r / t for r, t in zip(residuals, ts))
    return FitResult(params, ser, predicted, residuals, rel, float(math.sqrt(sum(r * r for r in residuals))),
                     rank, rank < 3)


# -- scalability patterns -------------------------------------------------------


class Scalability(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    POSITIVE_THEN_NEGATIVE = "positiveThenNegative"
    COMPLEX = "complex"


def _directions(times, tol):
    dirs = []
    prev = 0
    for a, b in zip(times, times[1:]):
        rel = (b - a) / a
        step = 0 if abs(rel) <= tol else (1 if rel > 0 else -1)
        if step == 0:
            step = prev
        if step:
            dirs.append(step)
        prev = step
    compressed = []
    for s in dirs:
        if not compressed or compressed[-1] != s:
            compressed.append(s)
    return compressed


def classify_scalability(points, tolerance=FLAT_TOLERANCE) -> Scalability:
    """Label an ordered ``[(n, Tn)]`` series by its shape.

    Changes within ``tolerance`` (relative) count as flat and keep the
    previous direction.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ModelDomainError("need at least 3 points to classify")
    ns = [n for n, _ in pts]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ModelDomainError("n must be strictly increasing")
    times = [float(t) for _, t in pts]
    if any(t <= 0 for t in times):
        raise ModelDomainError("times must be positive")
    dirs = _directions(times, tolerance)
    if dirs in ([], [-1]):
        return Scalability.POSITIVE
    if dirs == [1]:
        return Scalability.NEGATIVE
    if dirs == [-1, 1]:
        return Scalability.POSITIVE_THEN_NEGATIVE
    return Scalability.COMPLEX

"""Comparison criteria for two generalized Bajraktarević means.

Every ``check_*`` function returns a :class:`Verdict`.  Sampled checks can
only speak about the points they probed; the certification label says how
many points and which tolerance.  Only :func:`classify_power` produces
closed-form verdicts.

Throughout, ``m1 = A[f, p]`` is the candidate smaller mean and
``m2 = A[g, q]`` the candidate larger one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .expr import EvalError, eval_array
from .kernel import (
    DEFAULT_SAMPLES,
    GeneratorSpec,
    MeanSpec,
    WeightFamily,
    Window,
    _solve_array,
)

HOLDS, FAILS, INCONCLUSIVE = "Holds", "Fails", "Inconclusive"
IMPLIED, REFUTED, UNKNOWN = "Implied", "Refuted", "Unknown"
CLOSED_FORM = "closed-form"
EPS = np.finfo(float).eps

# Static implication table.  Each rule names the reasoning step behind a
# conclusion; reports cite these keys.
RULES = {
    "weight-ratio-necessity":
        "locally smaller requires p_i/p_0 = q_i/q_0 for every i",
    "second-order-necessity":
        "locally smaller (smooth case) requires q_0^2|g'|/(p_0^2|f'|) to be increasing",
    "second-order-sufficiency":
        "equal weight ratios and q_0^2|g'|/(p_0^2|f'|) with positive derivative imply locally smaller",
    "global-sufficiency":
        "equal weight ratios and the two-point inequality "
        "p_0(x)(f(x)-f(y))/(p_0(y)f'(y)) <= q_0(x)(g(x)-g(y))/(q_0(y)g'(y)) imply globally smaller",
    "monotone-quotients":
        "equal weight ratios with q_0/p_0 and |g'|/|f'| increasing imply globally smaller",
    "shared-weights-equivalence":
        "for p = q: globally smaller <=> locally smaller <=> |g'/f'| increasing "
        "<=> f''/f' <= g''/g' <=> g o f^-1 convex (concave) <=> (f(x)-f(y))/f'(y) <= (g(x)-g(y))/g'(y)",
    "shared-generator-equivalence":
        "for f = g: globally smaller <=> locally smaller <=> equal weight ratios and q_0/p_0 increasing",
    "power-proportionality":
        "power weights: locally smaller requires mu_i = gamma*lambda_i and beta_i = alpha_i + delta",
    "power-local":
        "power means: a > b + 2*delta refutes, a < b + 2*delta implies locally smaller",
    "power-two-point":
        "power weights with proportionality and (f(x)-f(y))/f'(y) <= x^delta(g(x)-g(y))/(y^delta g'(y)) "
        "imply globally smaller",
    "power-global":
        "power means: min(a,0) <= delta+min(b,0) and max(a,0) <= delta+max(b,0) imply globally smaller",
    "identical-means":
        "the two means coincide, so each is globally smaller than the other",
    "global-implies-local":
        "globally smaller implies locally smaller (and not locally smaller refutes globally smaller)",
    "counterexample":
        "a point with A[f,p] > A[g,q] refutes global comparison",
}


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


@dataclass
class Tolerances:
    equality: float = 1e-9
    monotone: float = 1e-9
    minors: float = 1e-10


def sampled(k: int, tol: float) -> str:
    return f"sampled({k} points, tol={tol:g})"


@dataclass
class Verdict:
    status: str
    witness: Optional[dict] = None
    certification: str = CLOSED_FORM
    strict: Optional[bool] = None
    detail: str = ""

    def __post_init__(self):
        if self.status not in (HOLDS, FAILS, INCONCLUSIVE):
            raise ValueError(f"bad verdict status {self.status!r}")
        if self.status == FAILS and not self.witness:
            raise ValueError("a failing verdict needs a witness")

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def fails(self) -> bool:
        return self.status == FAILS

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None and v != ""}


@dataclass
class Conclusion:
    status: str = UNKNOWN
    rule: Optional[str] = None
    reason: str = ""

    def __str__(self) -> str:
        if self.rule is None:
            return self.status
        return f"{self.status} by {self.rule}"


@dataclass
class ComparisonReport:
    first_order: Optional[Verdict] = None
    ratio_monotone: Optional[Verdict] = None
    hessian_definite: Optional[Verdict] = None
    gsc: Optional[Verdict] = None
    gsc_plus: Optional[Verdict] = None
    extra: dict = field(default_factory=dict)
    locally_smaller: Conclusion = field(default_factory=Conclusion)
    globally_smaller: Conclusion = field(default_factory=Conclusion)
    notes: list = field(default_factory=list)

    def verdicts(self) -> dict:
        out = {}
        for name in ("first_order", "ratio_monotone", "hessian_definite", "gsc", "gsc_plus"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        out.update(self.extra)
        return out

    def to_dict(self) -> dict:
        return {
            "verdicts": {k: v.to_dict() for k, v in self.verdicts().items()},
            "conclusions": {
                "locally_smaller": asdict(self.locally_smaller),
                "globally_smaller": asdict(self.globally_smaller),
            },
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# helpers

def _grid(m: MeanSpec, samples: int, window, points) -> np.ndarray:
    if points is not None:
        return np.atleast_1d(np.asarray(points, dtype=float))
    return Window.for_interval(m.domain, window).grid(samples)


def _compatible(m1: MeanSpec, m2: MeanSpec):
    if m1.n != m2.n:
        raise ValueError(f"means have different arity ({m1.n} vs {m2.n})")
    if m1.domain != m2.domain:
        raise ValueError(f"means live on different intervals ({m1.domain} vs {m2.domain})")


def _weight_arrays(w: WeightFamily, xs: np.ndarray):
    """Return (p_i values (n, N), p_0, p_0')."""
    P = np.array([eval_array(e, xs) for e in w.weights])
    dP = np.array([eval_array(e.derivative, xs) for e in w.weights])
    return P, P.sum(axis=0), dP.sum(axis=0)


def _curvature(g: GeneratorSpec, xs: np.ndarray) -> np.ndarray:
    """f''/f'."""
    return eval_array(g.d2, xs) / eval_array(g.d1, xs)


def comparison_discriminant(m1: MeanSpec, m2: MeanSpec, xs) -> np.ndarray:
    """Logarithmic derivative of q_0^2|g'|/(p_0^2|f'|): 2 r_0'/r_0 + g''/g' - f''/f' with r_0 = q_0/p_0."""
    xs = np.asarray(xs, dtype=float)
    _, p0, dp0 = _weight_arrays(m1.weights, xs)
    _, q0, dq0 = _weight_arrays(m2.weights, xs)
    return 2.0 * (dq0 / q0 - dp0 / p0) + _curvature(m2.generator, xs) - _curvature(m1.generator, xs)


# ---------------------------------------------------------------------------
# local criteria

def check_first_order(m1: MeanSpec, m2: MeanSpec, *, tol: float = 1e-9, samples: int = DEFAULT_SAMPLES,
                      window=None, points=None) -> Verdict:
    """p_i/p_0 = q_i/q_0 on the sample; the witness index ``i`` is 0-based."""
    _compatible(m1, m2)
    xs = _grid(m1, samples, window, points)
    P, p0, _ = _weight_arrays(m1.weights, xs)
    Q, q0, _ = _weight_arrays(m2.weights, xs)
    diff = np.abs(P / p0 - Q / q0)
    cert = sampled(len(xs), tol)
    k = int(np.argmax(diff.max(axis=0)))
    i = int(np.flatnonzero(diff[:, k] >= diff[:, k].max() * (1 - 1e-12))[0])
    if diff[i, k] <= tol:
        return Verdict(HOLDS, certification=cert, detail=f"max |p_i/p_0 - q_i/q_0| = {diff[i, k]:.3g}")
    witness = {"x": float(xs[k]), "i": int(i), "p_ratio": float(P[i, k] / p0[k]),
               "q_ratio": float(Q[i, k] / q0[k])}
    return Verdict(FAILS, witness, cert, detail=f"|p_i/p_0 - q_i/q_0| = {diff[i, k]:.3g}")


def check_ratio_monotone(m1: MeanSpec, m2: MeanSpec, *, tol: float = 1e-9, samples: int = DEFAULT_SAMPLES,
                         window=None, points=None) -> Verdict:
    """q_0^2|g'|/(p_0^2|f'|) increasing, via the sign of its logarithmic derivative.

    ``strict`` is set when the derivative stays above ``tol`` everywhere.
    """
    _compatible(m1, m2)
    xs = _grid(m1, samples, window, points)
    chi = comparison_discriminant(m1, m2, xs)
    k = int(np.argmin(chi))
    cert = sampled(len(xs), tol)
    if chi[k] < -tol:
        return Verdict(FAILS, {"x": float(xs[k]), "chi": float(chi[k])}, cert, strict=False,
                       detail="log-derivative negative")
    return Verdict(HOLDS, certification=cert, strict=bool(chi[k] >= tol),
                   detail=f"min log-derivative {chi[k]:.3g}")


def closed_form_minors(p: Sequence[float], chi: float, kmax: int) -> list[float]:
    """Leading k x k minors (k = 1..kmax) of (p_i(delta_ij p_0 - p_j)/p_0^2 * chi)."""
    p = [float(v) for v in p]
    p0 = math.fsum(p)
    out = []
    for k in range(1, kmax + 1):
        out.append(chi**k * math.prod(p[:k]) * (p0 - math.fsum(p[:k])) / p0 ** (k + 1))
    return out


def direct_minors(p: Sequence[float], chi: float, kmax: int) -> list[float]:
    """Same minors by LU determinants of the explicit matrix."""
    p = np.asarray(p, dtype=float)
    p0 = math.fsum(p)
    M = p[:, None] * (np.eye(len(p)) * p0 - p[None, :]) / p0**2 * chi
    return [float(np.linalg.det(M[:k, :k])) for k in range(1, kmax + 1)]


def _minors_agree(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b)) or a == b


def hessian_minor_dets(m1: MeanSpec, m2: MeanSpec, x: float, kmax: Optional[int] = None, *,
                       tol: float = 1e-9, rtol: float = 1e-10) -> list[float]:
    """Leading principal minors of the Hessian of A[g,q] - A[f,p] at (x, ..., x).

    Computed by the closed form and cross-checked against LU determinants;
    needs equal weight ratios at ``x``.
    """
    _compatible(m1, m2)
    n = m1.n
    kmax = n - 1 if kmax is None else kmax
    if not 1 <= kmax <= n - 1:
        raise ValueError(f"kmax must be in 1..{n - 1}")
    p = np.array(m1.weights.values(x))
    q = np.array(m2.weights.values(x))
    gap = np.max(np.abs(p / p.sum() - q / q.sum()))
    if gap > tol:
        raise ValueError(f"weight ratios differ at x={x} (by {gap:.3g}); the minor formula does not apply")
    chi = float(comparison_discriminant(m1, m2, np.array([x]))[0])
    closed = closed_form_minors(p, chi, kmax)
    direct = direct_minors(p, chi, kmax)
    for k, (a, b) in enumerate(zip(closed, direct), start=1):
        if not _minors_agree(a, b, rtol):
            raise ConsistencyError(f"minor {k} at x={x}: closed form {a!r} vs determinant {b!r}")
    return closed


def check_hessian_definite(m1: MeanSpec, m2: MeanSpec, *, tol: float = 1e-9, rtol: float = 1e-10,
                           samples: int = 512, window=None, points=None,
                           first_order: Optional[Verdict] = None) -> Verdict:
    """Sign pattern of the leading minors (k = 1..n-1) over the sample.

    Each minor is divided by its positive weight factor and the k-th root
    taken, so the tolerance acts on the same scale as the discriminant.
    """
    _compatible(m1, m2)
    xs = _grid(m1, samples, window, points)
    cert = sampled(len(xs), tol)
    first_order = first_order or check_first_order(m1, m2, tol=tol, points=xs)
    if not first_order.holds:
        return Verdict(INCONCLUSIVE, certification=cert,
                       detail="weight ratios differ; the second-order matrix is not defined by the minor formula")
    n = m1.n
    P, p0, _ = _weight_arrays(m1.weights, xs)
    chi = comparison_discriminant(m1, m2, xs)
    worst, wx, wk = math.inf, None, None
    for j, x in enumerate(xs):
        p = P[:, j]
        closed = closed_form_minors(p, chi[j], n - 1)
        direct = direct_minors(p, chi[j], n - 1)
        for k, (a, b) in enumerate(zip(closed, direct), start=1):
            if not _minors_agree(a, b, rtol):
                raise ConsistencyError(f"minor {k} at x={x}: closed form {a!r} vs determinant {b!r}")
            pos = math.prod(p[:k]) * (p0[j] - math.fsum(p[:k])) / p0[j] ** (k + 1)
            r = a / pos
            norm = math.copysign(abs(r) ** (1.0 / k), r)
            if norm < worst:
                worst, wx, wk = norm, float(x), k
    if worst < -tol:
        return Verdict(FAILS, {"x": wx, "k": wk, "normalized_minor": worst}, cert, strict=False,
                       detail="a leading minor is negative: not positive semidefinite")
    return Verdict(HOLDS, certification=cert, strict=bool(worst >= tol),
                   detail="positive definite" if worst >= tol else "positive semidefinite")


# ---------------------------------------------------------------------------
# two-point inequalities

Sides = Callable[[np.ndarray, np.ndarray], tuple]


def _pairwise_check(sides: Sides, window: Window, grid: int, tol: float, refine: int = 8,
                    max_iter: int = 200) -> Verdict:
    """Check L(x, y) <= R(x, y) on a grid, then locally minimize the normalized slack.

    ``sides`` returns (L, R, noise) where ``noise`` bounds the rounding error
    of R - L.  A point violates when R - L < -(tol (|L| + |R|) + noise).
    """
    xs = window.grid(grid)
    with np.errstate(all="ignore"):
        L, R, noise = sides(xs[:, None], xs[None, :])
    scale = np.abs(L) + np.abs(R)
    slack = tol * scale + noise
    margin = R - L + slack
    norm = np.where(scale > 0, (R - L) / np.where(scale > 0, scale, 1.0), 0.0)
    cert = sampled(grid * grid, tol)
    if np.any(margin < 0):
        i, j = np.unravel_index(np.argmin(np.where(margin < 0, norm, np.inf)), margin.shape)
        return Verdict(FAILS, {"x": float(xs[i]), "y": float(xs[j]), "lhs": float(L[i, j]), "rhs": float(R[i, j])},
                       cert, detail="violated on grid")

    def objective(u):
        x, y = window.to_x(u)
        with np.errstate(all="ignore"):
            l, r, nz = (float(v) for v in sides(np.asarray(x), np.asarray(y)))
        s = abs(l) + abs(r)
        if not math.isfinite(s):
            return 1.0
        return (r - l) / s if s > 0 else 0.0

    worst = None
    off = ~np.eye(grid, dtype=bool)
    order = np.argsort(np.where(off, norm, np.inf), axis=None)[:refine]
    for flat in order:
        i, j = np.unravel_index(flat, norm.shape)
        u0 = np.array([i, j], dtype=float) / (grid - 1)
        try:
            res = minimize(objective, u0, method="Nelder-Mead", bounds=[(0, 1), (0, 1)],
                           options={"maxiter": max_iter, "xatol": 1e-12, "fatol": 1e-15})
        except EvalError:
            continue
        x, y = (float(v) for v in window.to_x(res.x))
        with np.errstate(all="ignore"):
            l, r, nz = (float(v) for v in sides(np.asarray(x), np.asarray(y)))
        if r - l < -(tol * (abs(l) + abs(r)) + nz):
            if worst is None or res.fun < worst[0]:
                worst = (res.fun, {"x": x, "y": y, "lhs": l, "rhs": r})
    cert = sampled(grid * grid, tol) + f"+{len(order)} local searches"
    if worst is not None:
        return Verdict(FAILS, worst[1], cert, detail="violated after local refinement")
    return Verdict(HOLDS, certification=cert, detail=f"min normalized slack {norm[off].min() if grid > 1 else 0:.3g}")


def _noise(*terms) -> np.ndarray:
    return 64 * EPS * sum(np.abs(t) for t in terms)


def gsc_sides(m1: MeanSpec, m2: MeanSpec) -> Sides:
    f, g = m1.generator, m2.generator
    p0e, q0e = m1.weights.total, m2.weights.total

    def sides(x, y):
        fx, fy, dfy = eval_array(f.expr, x), eval_array(f.expr, y), eval_array(f.d1, y)
        gx, gy, dgy = eval_array(g.expr, x), eval_array(g.expr, y), eval_array(g.d1, y)
        cf = eval_array(p0e, x) / (eval_array(p0e, y) * dfy)
        cg = eval_array(q0e, x) / (eval_array(q0e, y) * dgy)
        return cf * (fx - fy), cg * (gx - gy), _noise(cf * fx, cf * fy, cg * gx, cg * gy)

    return sides


def check_gsc(m1: MeanSpec, m2: MeanSpec, *, tol: float = 1e-9, grid: int = 256, window=None,
              refine: int = 8) -> Verdict:
    """p_0(x)(f(x)-f(y))/(p_0(y)f'(y)) <= q_0(x)(g(x)-g(y))/(q_0(y)g'(y)) for all probed x, y."""
    _compatible(m1, m2)
    return _pairwise_check(gsc_sides(m1, m2), Window.for_interval(m1.domain, window), grid, tol, refine)


def check_gsc_power(f: GeneratorSpec, g: GeneratorSpec, delta: float, *, tol: float = 1e-9, grid: int = 256,
                    window=None, refine: int = 8) -> Verdict:
    """(f(x)-f(y))/f'(y) <= x^delta (g(x)-g(y)) / (y^delta g'(y)) for all probed x, y > 0."""
    if f.domain.lower < 0:
        raise ValueError("the power two-point condition needs a positive domain")

    def sides(x, y):
        fx, fy, dfy = eval_array(f.expr, x), eval_array(f.expr, y), eval_array(f.d1, y)
        gx, gy, dgy = eval_array(g.expr, x), eval_array(g.expr, y), eval_array(g.d1, y)
        cf = 1.0 / dfy
        cg = (x / y) ** delta / dgy
        return cf * (fx - fy), cg * (gx - gy), _noise(cf * fx, cf * fy, cg * gx, cg * gy)

    return _pairwise_check(sides, Window.for_interval(f.domain, window), grid, tol, refine)


def _increasing_by_logderiv(values: np.ndarray, xs: np.ndarray, tol: float, what: str) -> Optional[dict]:
    k = int(np.argmin(values))
    if values[k] < -tol:
        return {"x": float(xs[k]), "function": what, "log_derivative": float(values[k])}
    return None


def check_gsc_plus(m1: MeanSpec, m2: MeanSpec, *, tol: float = 1e-9, samples: int = DEFAULT_SAMPLES,
                   window=None, points=None) -> Verdict:
    """q_0/p_0 and |g'|/|f'| both increasing (log-derivative signs)."""
    _compatible(m1, m2)
    xs = _grid(m1, samples, window, points)
    _, p0, dp0 = _weight_arrays(m1.weights, xs)
    _, q0, dq0 = _weight_arrays(m2.weights, xs)
    cert = sampled(len(xs), tol)
    w = _increasing_by_logderiv(dq0 / q0 - dp0 / p0, xs, tol, "q0/p0")
    if w is None:
        w = _increasing_by_logderiv(_curvature(m2.generator, xs) - _curvature(m1.generator, xs), xs, tol,
                                    "|g'|/|f'|")
    if w is not None:
        return Verdict(FAILS, w, cert, detail=f"{w['function']} decreases")
    return Verdict(HOLDS, certification=cert)


# ---------------------------------------------------------------------------
# equivalence batteries

@dataclass
class SharedWeightsResult:
    """The four equivalent conditions for a common weight family."""

    quotient_increasing: Verdict
    curvature_order: Verdict
    convex_composition: Verdict
    two_point: Verdict

    def as_dict(self) -> dict:
        return {"quotient_increasing": self.quotient_increasing, "curvature_order": self.curvature_order,
                "convex_composition": self.convex_composition, "two_point": self.two_point}

    @property
    def agree(self) -> bool:
        return len({v.status for v in self.as_dict().values()}) == 1

    @property
    def status(self) -> str:
        return next(iter(self.as_dict().values())).status if self.agree else INCONCLUSIVE


def check_shared_weights(f: GeneratorSpec, g: GeneratorSpec, p: Optional[WeightFamily] = None, *,
                         tol: float = 1e-9, samples: int = DEFAULT_SAMPLES, grid: int = 256,
                         window=None) -> SharedWeightsResult:
    """Evaluate each of the four equivalent conditions for A[f,p] <= A[g,p] independently.

    The weight family does not enter any of them; it is accepted for
    symmetry with the other checks.
    """
    if f.domain != g.domain:
        raise ValueError("generators live on different intervals")
    win = Window.for_interval(f.domain, window)
    xs = win.grid(samples)
    cert = sampled(samples, tol)

    # |g'/f'| increasing, by consecutive differences
    v = np.abs(eval_array(g.d1, xs) / eval_array(f.d1, xs))
    drop = v[1:] - v[:-1]
    slack = tol * np.maximum(v[1:], v[:-1]) + 8 * EPS * v[:-1]
    bad = np.flatnonzero(drop < -slack)
    if bad.size:
        k = int(bad[np.argmin(drop[bad] / v[bad])])
        quotient = Verdict(FAILS, {"x": float(xs[k]), "x_next": float(xs[k + 1])}, cert, detail="|g'/f'| decreases")
    else:
        quotient = Verdict(HOLDS, certification=cert)

    # f''/f' <= g''/g' pointwise
    d = _curvature(g, xs) - _curvature(f, xs)
    k = int(np.argmin(d))
    if d[k] < -tol:
        curvature = Verdict(FAILS, {"x": float(xs[k]), "difference": float(d[k])}, cert, detail="f''/f' > g''/g'")
    else:
        curvature = Verdict(HOLDS, certification=cert)

    # second derivative of g o f^-1 on a uniform grid of f's image
    ends = eval_array(f.expr, np.array([win.lo, win.hi]))
    us = np.linspace(ends.min(), ends.max(), samples)
    xu = _solve_array(f, us, np.full(samples, win.lo), np.full(samples, win.hi))
    d1f, d1g = eval_array(f.d1, xu), eval_array(g.d1, xu)
    h2 = d1g / d1f**2 * (_curvature(g, xu) - _curvature(f, xu))
    signed = g.direction * h2
    scale = np.abs(d1g) / d1f**2
    k = int(np.argmin(signed / scale))
    kind = "convex" if g.direction > 0 else "concave"
    if signed[k] < -tol * scale[k]:
        composition = Verdict(FAILS, {"u": float(us[k]), "x": float(xu[k]), "second_derivative": float(h2[k])},
                              cert, detail=f"g o f^-1 is not {kind}")
    else:
        composition = Verdict(HOLDS, certification=cert, detail=f"g o f^-1 {kind}")

    def sides(x, y):
        fx, fy, dfy = eval_array(f.expr, x), eval_array(f.expr, y), eval_array(f.d1, y)
        gx, gy, dgy = eval_array(g.expr, x), eval_array(g.expr, y), eval_array(g.d1, y)
        return (fx - fy) / dfy, (gx - gy) / dgy, _noise(fx / dfy, fy / dfy, gx / dgy, gy / dgy)

    two_point = _pairwise_check(sides, win, grid, tol)
    return SharedWeightsResult(quotient, curvature, composition, two_point)


def check_shared_generator(f: GeneratorSpec, p: WeightFamily, q: WeightFamily, *, tol: float = 1e-9,
                           samples: int = DEFAULT_SAMPLES, window=None) -> Verdict:
    """Common generator: equal weight ratios and q_0/p_0 increasing."""
    m1, m2 = MeanSpec(f, p), MeanSpec(f, q)
    first = check_first_order(m1, m2, tol=tol, samples=samples, window=window)
    if first.fails:
        return Verdict(FAILS, first.witness, first.certification, detail="weight ratios differ")
    xs = _grid(m1, samples, window, None)
    _, p0, dp0 = _weight_arrays(p, xs)
    _, q0, dq0 = _weight_arrays(q, xs)
    w = _increasing_by_logderiv(dq0 / q0 - dp0 / p0, xs, tol, "q0/p0")
    cert = sampled(len(xs), tol)
    if w is not None:
        return Verdict(FAILS, w, cert, detail="q0/p0 decreases")
    return Verdict(HOLDS, certification=cert)


# ---------------------------------------------------------------------------
# power family

@dataclass
class PowerParams:
    """Power generators x^a (log for a = 0) and weights lam_i x^alpha_i, mu_i x^beta_i."""

    a: float
    b: float
    lam: Sequence[float]
    mu: Sequence[float]
    alpha: Sequence[float]
    beta: Sequence[float]

    def __post_init__(self):
        if not len(self.lam) == len(self.mu) == len(self.alpha) == len(self.beta):
            raise ValueError("parameter vectors must have equal length")
        if len(self.lam) < 2:
            raise ValueError("n >= 2 required")
        if any(v <= 0 for v in list(self.lam) + list(self.mu)):
            raise ValueError("weight coefficients must be positive")

    @classmethod
    def from_specs(cls, m1: MeanSpec, m2: MeanSpec) -> Optional["PowerParams"]:
        f, g = m1.generator, m2.generator
        if f.power is None or g.power is None or not (m1.weights.is_power and m2.weights.is_power):
            return None
        return cls(f.power, g.power, m1.weights.coeffs, m2.weights.coeffs, m1.weights.exponents,
                   m2.weights.exponents)

    def gamma_delta(self) -> Optional[tuple[Fraction, Fraction]]:
        """Exact (gamma, delta) with mu = gamma*lam and beta = alpha + delta, or None."""
        lam = [Fraction(v) for v in self.lam]
        mu = [Fraction(v) for v in self.mu]
        gamma = mu[0] / lam[0]
        delta = Fraction(self.beta[0]) - Fraction(self.alpha[0])
        for l, m, al, be in zip(lam, mu, self.alpha, self.beta):
            if m != gamma * l or Fraction(be) - Fraction(al) != delta:
                return None
        return gamma, delta


def power_means_identical(a, b, delta) -> bool:
    """The two power means coincide: same exponent and shift, or the (a, -a) reflection with delta = a."""
    a, b, delta = Fraction(a), Fraction(b), Fraction(delta)
    return (a == b and delta == 0) or (a != 0 and b == -a and delta == a)


def classify_power(params: PowerParams) -> ComparisonReport:
    """Closed-form local and global verdicts for power means with power weights.

    All comparisons are exact (rational arithmetic on the given floats).
    """
    rep = ComparisonReport()
    gd = params.gamma_delta()
    if gd is None:
        lam, mu, al, be = params.lam, params.mu, params.alpha, params.beta
        i = next(i for i in range(len(lam))
                 if Fraction(mu[i]) * Fraction(lam[0]) != Fraction(mu[0]) * Fraction(lam[i])
                 or Fraction(be[i]) - Fraction(al[i]) != Fraction(be[0]) - Fraction(al[0]))
        rep.first_order = Verdict(FAILS, {"i": i, "reason": "mu/lambda or beta-alpha not constant"},
                                  detail="no gamma, delta exist")
        rep.locally_smaller = Conclusion(REFUTED, "power-proportionality")
        rep.globally_smaller = Conclusion(REFUTED, "global-implies-local")
        return rep
    gamma, delta = gd
    a, b = Fraction(params.a), Fraction(params.b)
    rep.first_order = Verdict(HOLDS, detail=f"gamma={float(gamma):g}, delta={float(delta):g}")
    key = b + 2 * delta - a
    slope = float(key)
    if key < 0:
        rep.ratio_monotone = Verdict(FAILS, {"x": 1.0, "exponent": slope}, strict=False,
                                     detail=f"x^(b-a+2delta) = x^{slope:g} decreases")
    else:
        rep.ratio_monotone = Verdict(HOLDS, strict=key > 0, detail=f"x^(b-a+2delta) = x^{slope:g}")
    gsc_pp = min(a, 0) <= delta + min(b, 0) and max(a, 0) <= delta + max(b, 0)
    rep.gsc = Verdict(HOLDS, detail="min/max exponent conditions hold") if gsc_pp else Verdict(
        INCONCLUSIVE, detail="min/max exponent conditions fail; the two-point inequality is not decided")
    if delta >= 0 and b >= a:
        rep.gsc_plus = Verdict(HOLDS, detail="gamma x^delta and x^(b-a) increasing")
    else:
        what = "q0/p0" if delta < 0 else "|g'|/|f'|"
        rep.gsc_plus = Verdict(FAILS, {"x": 1.0, "function": what}, detail=f"{what} decreases")
    rep.extra["power_parameters"] = Verdict(HOLDS, detail=f"a={float(a):g} b={float(b):g} "
                                            f"gamma={float(gamma):g} delta={float(delta):g}")

    identical = power_means_identical(a, b, delta)
    if key < 0:
        rep.locally_smaller = Conclusion(REFUTED, "power-local", f"a={float(a):g} > b+2delta={float(b + 2 * delta):g}")
    elif key > 0:
        rep.locally_smaller = Conclusion(IMPLIED, "power-local", f"a={float(a):g} < b+2delta={float(b + 2 * delta):g}")
    elif identical:
        rep.locally_smaller = Conclusion(IMPLIED, "identical-means")
    else:
        rep.locally_smaller = Conclusion(UNKNOWN, None, "a = b + 2delta: boundary case")

    if gsc_pp:
        rule = "identical-means" if identical else "power-global"
        rep.globally_smaller = Conclusion(IMPLIED, rule)
    elif rep.locally_smaller.status == REFUTED:
        rep.globally_smaller = Conclusion(REFUTED, "global-implies-local")
    else:
        rep.globally_smaller = Conclusion(UNKNOWN)
    if identical:
        rep.notes.append("the two means are identical")
    return rep


def g_divided_difference(r: float, s: float, t: float) -> float:
    """(t^r - t^s)/(r - s), or t^r log t when r == s."""
    if t <= 0:
        raise ValueError("t must be positive")
    if r == s:
        return t**r * math.log(t)
    return (t**r - t**s) / (r - s)


# ---------------------------------------------------------------------------
# aggregation

def _pick(candidates: list) -> Conclusion:
    """First decisive candidate; conflicting decisive candidates give Unknown."""
    decisive = [c for c in candidates if c.status in (IMPLIED, REFUTED)]
    if not decisive:
        return Conclusion()
    if len({c.status for c in decisive}) > 1:
        rules = ", ".join(f"{c.status} by {c.rule}" for c in decisive)
        return Conclusion(UNKNOWN, None, f"conflicting evidence: {rules}")
    return decisive[0]


def derive_conclusions(rep: ComparisonReport, closed: Optional[ComparisonReport] = None) -> None:
    """Fill ``rep.locally_smaller``/``rep.globally_smaller`` from its verdicts.

    Closed-form conclusions (``closed``) take priority over sampled ones.
    """
    local, glob = [], []
    fo, rm, hd = rep.first_order, rep.ratio_monotone, rep.hessian_definite
    if fo is not None and fo.fails:
        local.append(Conclusion(REFUTED, "weight-ratio-necessity"))
    if rm is not None and rm.fails:
        local.append(Conclusion(REFUTED, "second-order-necessity"))
    if hd is not None and hd.fails:
        local.append(Conclusion(REFUTED, "second-order-necessity"))
    if fo is not None and fo.holds and rm is not None and rm.holds and rm.strict:
        local.append(Conclusion(IMPLIED, "second-order-sufficiency"))
    if fo is not None and fo.holds and rep.gsc is not None and rep.gsc.holds:
        glob.append(Conclusion(IMPLIED, "global-sufficiency"))
    if fo is not None and fo.holds and rep.gsc_plus is not None and rep.gsc_plus.holds:
        glob.append(Conclusion(IMPLIED, "monotone-quotients"))
    pg = rep.extra.get("power_two_point")
    if pg is not None and pg.holds:
        glob.append(Conclusion(IMPLIED, "power-two-point"))
    sw = [v for k, v in rep.extra.items() if k.startswith("shared_weights.")]
    if sw and len({v.status for v in sw}) == 1 and sw[0].status != INCONCLUSIVE:
        c = Conclusion(IMPLIED if sw[0].holds else REFUTED, "shared-weights-equivalence")
        local.append(c)
        glob.append(c)
    sg = rep.extra.get("shared_generator")
    if sg is not None and sg.status != INCONCLUSIVE:
        c = Conclusion(IMPLIED if sg.holds else REFUTED, "shared-generator-equivalence")
        local.append(c)
        glob.append(c)
    cx = rep.extra.get("gap_search")
    if cx is not None and cx.fails:
        glob.append(Conclusion(REFUTED, "counterexample"))

    lc, gc = _pick(local), _pick(glob)
    if closed is not None:
        if closed.locally_smaller.status != UNKNOWN:
            lc = closed.locally_smaller
        if closed.globally_smaller.status != UNKNOWN:
            gc = closed.globally_smaller
    if gc.status == IMPLIED and lc.status == UNKNOWN:
        lc = Conclusion(IMPLIED, "global-implies-local")
    if lc.status == REFUTED and gc.status == UNKNOWN:
        gc = Conclusion(REFUTED, "global-implies-local")
    if gc.status == IMPLIED and lc.status == REFUTED:
        rep.notes.append(f"inconsistent conclusions: local {lc}, global {gc}")
    rep.locally_smaller, rep.globally_smaller = lc, gc


def compare_means(m1: MeanSpec, m2: MeanSpec, *, tol: Tolerances = Tolerances(), samples: int = DEFAULT_SAMPLES,
                  grid: int = 256, window=None, checks: Optional[Sequence[str]] = None) -> ComparisonReport:
    """Run every applicable criterion and derive the conclusions.

    ``checks`` restricts the run to a subset of
    ``first_order, ratio_monotone, hessian_definite, gsc, gsc_plus,
    shared_weights, shared_generator, power``.
    """
    _compatible(m1, m2)
    enabled = set(ALL_CHECKS if checks is None else checks)
    unknown = enabled - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    rep = ComparisonReport()
    kw = dict(samples=samples, window=window)
    fo = check_first_order(m1, m2, tol=tol.equality, **kw)
    if "first_order" in enabled:
        rep.first_order = fo
    if "ratio_monotone" in enabled:
        rep.ratio_monotone = check_ratio_monotone(m1, m2, tol=tol.monotone, **kw)
    if "hessian_definite" in enabled:
        rep.hessian_definite = check_hessian_definite(m1, m2, tol=tol.monotone, rtol=tol.minors,
                                                      window=window, samples=min(samples, 512))
    if "gsc" in enabled:
        rep.gsc = check_gsc(m1, m2, tol=tol.monotone, grid=grid, window=window)
    if "gsc_plus" in enabled:
        rep.gsc_plus = check_gsc_plus(m1, m2, tol=tol.monotone, **kw)
    if "shared_weights" in enabled and m1.weights.weights == m2.weights.weights:
        res = check_shared_weights(m1.generator, m2.generator, m1.weights, tol=tol.monotone, grid=grid, **kw)
        for name, v in res.as_dict().items():
            rep.extra[f"shared_weights.{name}"] = v
        if not res.agree:
            rep.notes.append("internal inconsistency: shared-weight conditions disagree")
    if "shared_generator" in enabled and m1.generator.expr == m2.generator.expr:
        rep.extra["shared_generator"] = check_shared_generator(m1.generator, m1.weights, m2.weights, tol=tol.monotone, **kw)
    closed = None
    params = PowerParams.from_specs(m1, m2) if "power" in enabled else None
    if params is not None:
        closed = classify_power(params)
        for name in ("first_order", "ratio_monotone", "gsc", "gsc_plus"):
            rep.extra[f"power.{name}"] = getattr(closed, name)
        gd = params.gamma_delta()
        if gd is not None:
            rep.extra["power_two_point"] = check_gsc_power(m1.generator, m2.generator, float(gd[1]),
                                                           tol=tol.monotone, grid=grid, window=window)
        rep.notes.extend(closed.notes)
    derive_conclusions(rep, closed)
    return rep


ALL_CHECKS = ("first_order", "ratio_monotone", "hessian_definite", "gsc", "gsc_plus", "shared_weights",
              "shared_generator", "power")

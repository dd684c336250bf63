"""Generalized Bajraktarević means: specs, evaluation, inversion, diagonal derivatives.

A mean is built from a strictly monotone generator ``f`` and ``n`` positive
weight functions ``p_1..p_n`` on an open interval ``I``::

    A(x_1..x_n) = f^{-1}( sum p_i(x_i) f(x_i) / sum p_i(x_i) )
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .expr import (
    Const,
    EvalError,
    Expr,
    Log,
    Mul,
    Pow,
    X,
    eval_array,
    eval_expr,
    parse_expr,
    sum_exprs,
)

INF = math.inf
DEFAULT_SAMPLES = 4096
POSITIVE_WINDOW = (1e-6, 1e6)
REAL_WINDOW = (-100.0, 100.0)


class SpecError(ValueError):
    """A generator or weight family fails its load-time certification."""


class InversionError(EvalError):
    pass


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lower, upper)``; endpoints may be infinite."""

    lower: float = 0.0
    upper: float = INF

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper) or not self.lower < self.upper:
            raise ValueError(f"empty interval ({self.lower}, {self.upper})")

    @property
    def positive(self) -> bool:
        return self.lower >= 0.0

    def __contains__(self, x: float) -> bool:
        return self.lower < x < self.upper

    def window(self, positive_window=POSITIVE_WINDOW, real_window=REAL_WINDOW) -> tuple[float, float]:
        """Finite closed sub-interval used for sampling.

        Unbounded sides are truncated to ``positive_window`` on subsets of
        the positive half-line and to ``real_window`` otherwise; finite open
        endpoints are nudged inward.
        """
        default = positive_window if self.positive else real_window
        lo = max(self.lower, default[0])
        hi = min(self.upper, default[1])
        if not lo < hi:
            lo, hi = self.lower, self.upper
        width = hi - lo
        if lo == self.lower:
            lo += 1e-9 * width
        if hi == self.upper:
            hi -= 1e-9 * width
        return lo, hi

    def __str__(self) -> str:
        return f"({self.lower:g}, {self.upper:g})"


@dataclass(frozen=True)
class Window:
    """Closed sampling box ``[lo, hi]``, log-scaled when ``log`` is set.

    ``to_x``/``to_unit`` map between the box and the unit interval; all
    searches work in unit coordinates.
    """

    lo: float
    hi: float
    log: bool = False

    @classmethod
    def for_interval(cls, interval: Interval, bounds: Optional[Sequence[float]] = None) -> "Window":
        if bounds is None:
            lo, hi = interval.window()
        else:
            lo, hi = float(bounds[0]), float(bounds[1])
            if not (interval.lower <= lo < hi <= interval.upper) or math.isinf(lo) or math.isinf(hi):
                raise ValueError(f"window [{lo}, {hi}] is not a finite part of {interval}")
            if lo == interval.lower or hi == interval.upper:
                lo, hi = Interval(lo, hi).window()
        return cls(lo, hi, log=interval.positive and lo > 0.0)

    def to_x(self, u):
        u = np.asarray(u, dtype=float)
        if self.log:
            a, b = math.log(self.lo), math.log(self.hi)
            out = np.exp(a + (b - a) * u)
        else:
            out = self.lo + (self.hi - self.lo) * u
        return np.clip(out, self.lo, self.hi)

    def to_unit(self, x):
        x = np.asarray(x, dtype=float)
        if self.log:
            a, b = math.log(self.lo), math.log(self.hi)
            return (np.log(x) - a) / (b - a)
        return (x - self.lo) / (self.hi - self.lo)

    def grid(self, count: int) -> np.ndarray:
        return self.to_x(np.linspace(0.0, 1.0, count))


def sample_points(domain: Interval, count: int = DEFAULT_SAMPLES, window=None) -> np.ndarray:
    """Deterministic sample of ``count`` points: log-spaced on positive domains, uniform otherwise."""
    return Window.for_interval(domain, window).grid(count)


# ---------------------------------------------------------------------------
# Specs

def _as_expr(e) -> Expr:
    return parse_expr(e) if isinstance(e, str) else e


@dataclass(frozen=True)
class GeneratorSpec:
    """Strictly monotone generator with nonvanishing derivative.

    ``direction`` is +1 or -1.  It is certified on samples only.
    ``power`` records the exponent when built by :func:`power_generator`.
    """

    expr: Expr
    domain: Interval
    direction: int
    power: Optional[float] = None
    samples: int = DEFAULT_SAMPLES

    @classmethod
    def create(cls, expr, domain: Interval, *, samples: int = DEFAULT_SAMPLES,
               window=None, power: Optional[float] = None) -> "GeneratorSpec":
        expr = _as_expr(expr)
        xs = sample_points(domain, samples, window)
        try:
            d = eval_array(expr.derivative, xs)
            eval_array(expr, xs)
        except EvalError as exc:
            raise SpecError(f"generator {expr} cannot be evaluated on {domain}: {exc}") from exc
        if np.all(d > 0):
            direction = 1
        elif np.all(d < 0):
            direction = -1
        else:
            bad = xs[np.argmin(np.abs(d))]
            raise SpecError(f"generator {expr} has a vanishing or sign-changing derivative near x={bad:.6g}")
        return cls(expr, domain, direction, power, samples)

    @property
    def d1(self) -> Expr:
        return self.expr.derivative

    @property
    def d2(self) -> Expr:
        return self.expr.derivative.derivative

    def __call__(self, x):
        return eval_expr(self.expr, x)

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class WeightFamily:
    """``n`` positive weight functions; ``total`` is their sum ``p_0``."""

    weights: tuple[Expr, ...]
    domain: Interval
    coeffs: Optional[tuple[float, ...]] = None
    exponents: Optional[tuple[float, ...]] = None

    @classmethod
    def create(cls, weights, domain: Interval, *, samples: int = DEFAULT_SAMPLES, window=None,
               coeffs=None, exponents=None) -> "WeightFamily":
        ws = tuple(_as_expr(w) for w in weights)
        if len(ws) < 2:
            raise SpecError("a weight family needs n >= 2 functions")
        xs = sample_points(domain, samples, window)
        for i, w in enumerate(ws):
            try:
                v = eval_array(w, xs)
                eval_array(w.derivative, xs)
            except EvalError as exc:
                raise SpecError(f"weight {i} ({w}) cannot be evaluated on {domain}: {exc}") from exc
            if not np.all(v > 0):
                bad = xs[np.argmin(v)]
                raise SpecError(f"weight {i} ({w}) is not positive near x={bad:.6g}")
        return cls(ws, domain,
                   None if coeffs is None else tuple(map(float, coeffs)),
                   None if exponents is None else tuple(map(float, exponents)))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> Expr:
        return sum_exprs(self.weights)

    @property
    def is_power(self) -> bool:
        return self.coeffs is not None

    def values(self, x: float) -> list[float]:
        return [eval_expr(w, x) for w in self.weights]

    def derivatives(self, x: float) -> list[float]:
        return [eval_expr(w.derivative, x) for w in self.weights]


@dataclass(frozen=True)
class MeanSpec:
    generator: GeneratorSpec
    weights: WeightFamily

    def __post_init__(self):
        if self.generator.domain != self.weights.domain:
            raise SpecError(f"generator domain {self.generator.domain} differs from weight domain {self.weights.domain}")
        if self.weights.n < 2:
            raise SpecError("means need n >= 2")

    @property
    def domain(self) -> Interval:
        return self.generator.domain

    @property
    def n(self) -> int:
        return self.weights.n

    def __call__(self, xs):
        return eval_mean(self, xs)

    def __str__(self) -> str:
        ws = ", ".join(str(w) for w in self.weights.weights)
        return f"A[f={self.generator}, p=({ws})]"


def power_generator(a: float, domain: Interval = Interval(0.0, INF), **kw) -> GeneratorSpec:
    """``x^a`` for ``a != 0`` and ``log(x)`` for ``a == 0``."""
    if domain.lower < 0:
        raise SpecError("power generators need a domain inside the positive half-line")
    a = float(a)
    expr = Log(X) if a == 0.0 else (X if a == 1.0 else Pow(X, a))
    return GeneratorSpec.create(expr, domain, power=a, **kw)


def power_weights(coeffs: Sequence[float], exponents: Sequence[float],
                  domain: Interval = Interval(0.0, INF), **kw) -> WeightFamily:
    """``p_i(x) = coeffs[i] * x^exponents[i]``."""
    if len(coeffs) != len(exponents):
        raise SpecError("coeffs and exponents must have the same length")
    if any(c <= 0 for c in coeffs):
        raise SpecError("power weight coefficients must be positive")
    if domain.lower < 0:
        raise SpecError("power weights need a domain inside the positive half-line")
    ws = []
    for c, e in zip(coeffs, exponents):
        c, e = float(c), float(e)
        base = Const(1.0) if e == 0.0 else Pow(X, e)
        ws.append(Const(c) if e == 0.0 else (base if c == 1.0 else Mul(Const(c), base)))
    return WeightFamily.create(ws, domain, coeffs=coeffs, exponents=exponents, **kw)


def power_mean(a: float, coeffs=None, exponents=None, n: int = 2,
               domain: Interval = Interval(0.0, INF)) -> MeanSpec:
    coeffs = [1.0] * n if coeffs is None else coeffs
    exponents = [0.0] * len(coeffs) if exponents is None else exponents
    return MeanSpec(power_generator(a, domain), power_weights(coeffs, exponents, domain))


# ---------------------------------------------------------------------------
# Inversion

def _ulp_close(lo: float, hi: float) -> bool:
    return hi - lo <= 4.0 * math.ulp(max(abs(lo), abs(hi)))


def _solve_scalar(g: GeneratorSpec, y: float, lo: float, hi: float, max_iter: int = 200) -> float:
    """Safeguarded Newton on a bracket ``[lo, hi]`` known to contain the root."""
    f, df = g.expr._scalar_fn, g.d1._scalar_fn
    s = g.direction
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = f(x) - y
        if r == 0.0:
            return x
        if s * r > 0:
            hi = x
        else:
            lo = x
        if _ulp_close(lo, hi):
            break
        d = df(x)
        cand = x - r / d if d != 0.0 else math.nan
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if abs(cand - x) <= 2.0 * math.ulp(x):
            x = cand
            break
        x = cand
    return x


def _solve_array(g: GeneratorSpec, y: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 max_iter: int = 200) -> np.ndarray:
    s = g.direction
    lo, hi, y = lo.copy(), hi.copy(), np.asarray(y, dtype=float)
    x = 0.5 * (lo + hi)
    active = hi > lo
    x[~active] = lo[~active]
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            if not active.any():
                break
            xa = x[active]
            r = eval_array(g.expr, xa) - y[active]
            up = s * r > 0
            lo_a, hi_a = lo[active], hi[active]
            hi_a = np.where(up, xa, hi_a)
            lo_a = np.where(up, lo_a, xa)
            d = eval_array(g.d1, xa)
            cand = xa - r / d
            bad = ~((cand > lo_a) & (cand < hi_a))
            cand = np.where(bad, 0.5 * (lo_a + hi_a), cand)
            done = (r == 0.0) | (hi_a - lo_a <= 4.0 * np.spacing(np.maximum(abs(lo_a), abs(hi_a))))
            done |= np.abs(cand - xa) <= 2.0 * np.spacing(np.abs(xa))
            x[active] = np.where(r == 0.0, xa, cand)
            lo[active], hi[active] = lo_a, hi_a
            idx = np.flatnonzero(active)
            active[idx[done]] = False
    return x


def invert_generator(g: GeneratorSpec, y: float, *, tol: float = 1e-12, max_expand: int = 200) -> float:
    """Return ``x`` in the domain with ``f(x) = y``.

    The bracket starts from the working window and expands geometrically
    towards the domain ends; raises :class:`InversionError` if ``y`` is not
    reached.
    """
    y = float(y)
    dom = g.domain
    lo, hi = dom.window()
    s = g.direction

    def side(x):
        return s * (g(x) - y)

    # expand downwards until side(lo) <= 0
    step = max(hi - lo, 1.0)
    for _ in range(max_expand):
        try:
            if side(lo) <= 0:
                break
        except EvalError:
            raise InversionError(f"{y!r} is outside the image of {g} (searched down to {lo!r})") from None
        nxt = lo - step if math.isinf(dom.lower) else 0.5 * (lo + dom.lower)
        if not nxt in dom or nxt == lo:
            raise InversionError(f"{y!r} is outside the image of {g} (searched [{lo!r}, {hi!r}])")
        lo, step = nxt, 2 * step
    else:
        raise InversionError(f"no bracket for {y!r} in [{lo!r}, {hi!r}]")
    step = max(hi - lo, 1.0)
    for _ in range(max_expand):
        try:
            if side(hi) >= 0:
                break
        except EvalError:
            raise InversionError(f"{y!r} is outside the image of {g} (searched up to {hi!r})") from None
        nxt = hi + step if math.isinf(dom.upper) else 0.5 * (hi + dom.upper)
        if not nxt in dom or nxt == hi:
            raise InversionError(f"{y!r} is outside the image of {g} (searched [{lo!r}, {hi!r}])")
        hi, step = nxt, 2 * step
    else:
        raise InversionError(f"no bracket for {y!r} in [{lo!r}, {hi!r}]")
    x = _solve_scalar(g, y, lo, hi)
    resid = abs(g(x) - y)
    if resid > tol * (1 + abs(y)) and not _ulp_close(x - 2 * math.ulp(x), x + 2 * math.ulp(x)):
        raise InversionError(f"inversion of {g} at {y!r} stalled with residual {resid:.3g}")
    return x


# ---------------------------------------------------------------------------
# Mean evaluation

def _neumaier(cols: list[np.ndarray]) -> np.ndarray:
    total = np.zeros_like(cols[0])
    comp = np.zeros_like(cols[0])
    for c in cols:
        t = total + c
        big = np.abs(total) >= np.abs(c)
        comp += np.where(big, (total - t) + c, (c - t) + total)
        total = t
    return total + comp


def eval_mean(m: MeanSpec, xs: Sequence[float]) -> float:
    xs = [float(v) for v in xs]
    if len(xs) != m.n:
        raise ValueError(f"expected {m.n} arguments, got {len(xs)}")
    for v in xs:
        if v not in m.domain:
            raise ValueError(f"argument {v!r} outside {m.domain}")
    lo, hi = min(xs), max(xs)
    if lo == hi:
        return lo
    g = m.generator
    ps = [eval_expr(w, v) for w, v in zip(m.weights.weights, xs)]
    fs = [g(v) for v in xs]
    y = math.fsum(p * fv for p, fv in zip(ps, fs)) / math.fsum(ps)
    if not math.isfinite(y):
        raise EvalError(f"weighted average is not finite at {xs}")
    # the value lies between f(min) and f(max), so [min, max] brackets the inverse
    return _solve_scalar(g, y, lo, hi)


def eval_mean_batch(m: MeanSpec, X) -> np.ndarray:
    """Evaluate the mean at each row of the ``(N, n)`` array ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.n:
        raise ValueError(f"expected an (N, {m.n}) array")
    if not np.all((X > m.domain.lower) & (X < m.domain.upper)):
        raise ValueError(f"arguments outside {m.domain}")
    ps = [eval_array(w, X[:, i]) for i, w in enumerate(m.weights.weights)]
    fs = [eval_array(m.generator.expr, X[:, i]) for i in range(m.n)]
    with np.errstate(all="ignore"):
        y = _neumaier([p * f for p, f in zip(ps, fs)]) / _neumaier(ps)
    if not np.all(np.isfinite(y)):
        raise EvalError("weighted average is not finite")
    lo, hi = X.min(axis=1), X.max(axis=1)
    return _solve_array(m.generator, y, lo, hi)


# ---------------------------------------------------------------------------
# Diagonal derivatives

def diag_first_partial(m: MeanSpec, i: int, x: float) -> float:
    """``d A / d x_i`` at ``(x, ..., x)``, equal to ``p_i(x) / p_0(x)`` (``i`` is 0-based)."""
    ps = m.weights.values(x)
    return ps[i] / math.fsum(ps)


def diag_first_partials(m: MeanSpec, x: float) -> np.ndarray:
    ps = m.weights.values(x)
    return np.array(ps) / math.fsum(ps)


def diag_second_partials(m: MeanSpec, x: float) -> np.ndarray:
    """Hessian of the mean at ``(x, ..., x)`` from the closed-form diagonal formulas."""
    p = np.array(m.weights.values(x))
    dp = np.array(m.weights.derivatives(x))
    g = m.generator
    curv = eval_expr(g.d2, x) / eval_expr(g.d1, x)
    p0 = math.fsum(p)
    H = -(np.outer(dp, p) + np.outer(p, dp)) / p0**2 - np.outer(p, p) / p0**2 * curv
    diag = 2 * dp * (p0 - p) / p0**2 + p * (p0 - p) / p0**2 * curv
    np.fill_diagonal(H, diag)
    return H

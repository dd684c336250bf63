"""Independent numerical oracles and randomized test batteries.

The oracles here never touch the symbolic or closed-form paths they are
used to check: derivatives come from Richardson-extrapolated finite
differences, roots from plain bisection, determinants from LU.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .comparator import (
    check_gsc,
    check_ratio_monotone,
    check_shared_weights,
    closed_form_minors,
    direct_minors,
)
from .expr import (
    Add,
    Const,
    Div,
    EvalError,
    Exp,
    Expr,
    Log,
    Mul,
    Neg,
    Pow,
    Sub,
    X,
    eval_expr,
    parse_expr,
)
from .kernel import (
    GeneratorSpec,
    Interval,
    MeanSpec,
    WeightFamily,
    diag_first_partials,
    diag_second_partials,
    eval_mean,
    power_mean,
)

BOX = Interval(0.5, 3.0)


# ---------------------------------------------------------------------------
# oracles

def richardson(estimate: Callable[[float], float], h0: float, shrink: float = 1.4,
               steps: int = 10) -> tuple[float, float]:
    """Ridders' extrapolation of a difference quotient with O(h^2) error.

    Returns (value, error estimate).
    """
    con2 = shrink * shrink
    table = [[estimate(h0)]]
    best, err = table[0][0], math.inf
    h = h0
    for i in range(1, steps):
        h /= shrink
        row = [estimate(h)]
        fac = con2
        for j in range(1, i + 1):
            row.append((row[j - 1] * fac - table[i - 1][j - 1]) / (fac - 1.0))
            fac *= con2
            e = max(abs(row[j] - row[j - 1]), abs(row[j] - table[i - 1][j - 1]))
            if e <= err:
                err, best = e, row[j]
        table.append(row)
        if abs(row[i] - table[i - 1][i - 1]) >= 2.0 * err:
            break
    return best, err


def fd_derivative(fn: Callable[[float], float], x: float, h0: float = None) -> tuple[float, float]:
    h0 = 0.05 * max(1.0, abs(x)) if h0 is None else h0
    return richardson(lambda h: (fn(x + h) - fn(x - h)) / (2 * h), h0)


def fd_second_derivative(fn: Callable[[float], float], x: float, h0: float = None) -> tuple[float, float]:
    h0 = 0.05 * max(1.0, abs(x)) if h0 is None else h0
    fx = fn(x)
    return richardson(lambda h: (fn(x + h) - 2 * fx + fn(x - h)) / (h * h), h0)


def fd_mean_gradient(m: MeanSpec, x: float, h0: float = None) -> np.ndarray:
    """Gradient of the mean at (x, ..., x) by extrapolated central differences."""
    h0 = 0.02 * x if h0 is None else h0
    n = m.n
    out = np.empty(n)
    for i in range(n):
        def shifted(t, i=i):
            xs = [x] * n
            xs[i] = t
            return eval_mean(m, xs)
        out[i] = fd_derivative(shifted, x, h0)[0]
    return out


def fd_mean_hessian(m: MeanSpec, x: float, h0: float = None) -> np.ndarray:
    """Hessian of the mean at (x, ..., x) by extrapolated central differences."""
    h0 = 0.02 * x if h0 is None else h0
    n = m.n
    H = np.empty((n, n))
    base = eval_mean(m, [x] * n)
    for i in range(n):
        for j in range(i, n):
            if i == j:
                def second(h, i=i):
                    xp, xm = [x] * n, [x] * n
                    xp[i] += h
                    xm[i] -= h
                    return (eval_mean(m, xp) - 2 * base + eval_mean(m, xm)) / (h * h)
                H[i, i] = richardson(second, h0)[0]
            else:
                def mixed(h, i=i, j=j):
                    vals = []
                    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                        xs = [x] * n
                        xs[i] += si * h
                        xs[j] += sj * h
                        vals.append(eval_mean(m, xs))
                    return (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h * h)
                H[i, j] = H[j, i] = richardson(mixed, h0)[0]
    return H


def bisect_root(fn: Callable[[float], float], y: float, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Plain bisection for fn(x) = y on [lo, hi] (monotone fn)."""
    flo = fn(lo) - y
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = fn(mid) - y
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# random specs

def random_generator_expr(rng: np.random.Generator) -> Expr:
    """A strictly monotone smooth function on BOX, drawn from mixed families."""
    kind = rng.integers(6)
    if kind == 0:
        a = rng.choice([-1, 1]) * rng.uniform(0.2, 2.5)
        return Pow(X, float(a))
    if kind == 1:
        return Log(X)
    if kind == 2:
        c = rng.choice([-1, 1]) * rng.uniform(0.2, 1.5)
        return Exp(Mul(Const(float(c)), X))
    if kind == 3:
        return Add(X, Mul(Const(float(rng.uniform(0.1, 1.0))), Pow(X, 3.0)))
    if kind == 4:
        return Neg(Pow(X, float(rng.uniform(0.3, 2.5))))
    return Log(Add(Const(1.0), Mul(Const(float(rng.uniform(0.2, 2.0))), X)))


def random_weight_expr(rng: np.random.Generator) -> Expr:
    lam = float(rng.uniform(0.2, 3.0))
    kind = rng.integers(4)
    if kind == 0:
        return Const(lam)
    if kind == 1:
        return Mul(Const(lam), Pow(X, float(rng.uniform(-2, 2))))
    if kind == 2:
        return Mul(Const(lam), Exp(Mul(Const(float(rng.uniform(-1, 1))), X)))
    return Add(Const(lam), Mul(Const(float(rng.uniform(0, 1))), Pow(X, 2.0)))


def random_mean(rng: np.random.Generator, n: int, domain: Interval = BOX) -> MeanSpec:
    f = GeneratorSpec.create(random_generator_expr(rng), domain, samples=512)
    p = WeightFamily.create([random_weight_expr(rng) for _ in range(n)], domain, samples=512)
    return MeanSpec(f, p)


def random_expr(rng: np.random.Generator, depth: int = 3) -> Expr:
    if depth == 0 or rng.random() < 0.25:
        return X if rng.random() < 0.7 else Const(float(np.round(rng.uniform(0.5, 2.0), 3)))
    kind = rng.integers(9)
    sub = lambda: random_expr(rng, depth - 1)  # noqa: E731
    if kind == 0:
        return Add(sub(), sub())
    if kind == 1:
        return Sub(sub(), sub())
    if kind == 2:
        return Mul(sub(), sub())
    if kind == 3:
        return Div(sub(), sub())
    if kind == 4:
        return Pow(sub(), float(rng.choice([2, 3, -1, 0.5, 1.5, -0.5])))
    if kind == 5:
        return Exp(sub())
    if kind == 6:
        return Log(sub())
    if kind == 7:
        return Neg(sub())
    return Mul(Const(float(np.round(rng.uniform(-2, 2), 3))), sub())


def random_shared_weight_pair(rng: np.random.Generator, margin: float = 0.05, domain: Interval = BOX):
    """(f, g, p) whose curvature gap g''/g' - f''/f' is either >= 0 or clearly negative somewhere.

    Pairs whose minimum falls in (-margin, 0) are redrawn so that sampled
    checks are not asked to resolve near-ties.
    """
    from .comparator import _curvature  # local: only needed for the margin filter
    xs = np.linspace(domain.lower, domain.upper, 2001)[1:-1]
    while True:
        f = GeneratorSpec.create(random_generator_expr(rng), domain, samples=512)
        g = f if rng.random() < 0.1 else GeneratorSpec.create(random_generator_expr(rng), domain, samples=512)
        d = _curvature(g, xs) - _curvature(f, xs)
        if f.expr != g.expr and -margin < d.min() < 1e-6:
            continue
        n = int(rng.integers(2, 5))
        p = WeightFamily.create([random_weight_expr(rng) for _ in range(n)], domain, samples=512)
        return f, g, p


def comparison_battery(seed: int = 2024, random_pairs: int = 30) -> list[tuple[MeanSpec, MeanSpec]]:
    """Fixed set of comparison pairs: power means, shared weights, shared generators, mixed."""
    rng = np.random.default_rng(seed)
    pairs = []
    I = Interval(0.25, 4.0)
    for a in (-1.0, 0.0, 1.0, 2.0):
        for b in (-1.0, 0.0, 1.0, 2.0):
            pairs.append((power_mean(a, domain=I), power_mean(b, domain=I)))
    for a, b, d in ((0.0, 1.0, 0.5), (1.0, 0.0, 0.5), (2.0, 1.0, 1.0), (1.0, 2.0, -1.0)):
        pairs.append((power_mean(a, [1, 2], [0, 1], domain=I), power_mean(b, [1, 2], [d, 1 + d], domain=I)))
    for _ in range(random_pairs):
        f, g, p = random_shared_weight_pair(rng)
        pairs.append((MeanSpec(f, p), MeanSpec(g, p)))
    for _ in range(random_pairs // 3):
        f = GeneratorSpec.create(random_generator_expr(rng), BOX, samples=512)
        p = WeightFamily.create([random_weight_expr(rng) for _ in range(2)], BOX, samples=512)
        scale = parse_expr(f"{rng.uniform(0.5, 2):.3f} * x^{rng.uniform(-1, 1):.3f}")
        q = WeightFamily.create([Mul(scale, w) for w in p.weights], BOX, samples=512)
        pairs.append((MeanSpec(f, p), MeanSpec(f, q)))
    for _ in range(random_pairs // 3):
        pairs.append((random_mean(rng, 2), random_mean(rng, 2)))
    return pairs


# ---------------------------------------------------------------------------
# suites

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


def suite_expression_derivatives(count: int = 1000, seed: int = 1) -> SuiteResult:
    """Symbolic first and second derivatives vs extrapolated finite differences."""
    rng = np.random.default_rng(seed)
    checked = worst = 0
    tries = 0
    while checked < count and tries < 50 * count:
        tries += 1
        e = random_expr(rng, 3)
        x = float(rng.uniform(0.6, 1.9))
        try:
            v = eval_expr(e, x)
            d1, d2 = eval_expr(e.derivative, x), eval_expr(e.derivative.derivative, x)
            if max(abs(v), abs(d1), abs(d2)) > 1e4:
                continue
            fn = lambda t: eval_expr(e, t)  # noqa: E731
            h0 = 0.05
            # the oracle needs the function smooth on [x - h0, x + h0]
            for t in np.linspace(x - h0, x + h0, 9):
                eval_expr(e, float(t))
            n1, err1 = fd_derivative(fn, x, h0)
            n2, err2 = fd_second_derivative(fn, x, h0)
        except EvalError:
            continue
        if err1 > 1e-8 * (1 + abs(d1)) or err2 > 1e-8 * (1 + abs(d2)):
            continue
        worst = max(worst, abs(d1 - n1) / (1 + abs(d1)), abs(d2 - n2) / (1 + abs(d2)))
        checked += 1
    ok = checked == count and worst <= 1e-6
    return SuiteResult("expression derivatives", ok, f"{checked} expressions, worst scaled error {worst:.2e}")


def suite_diagonal_partials(count: int = 200, seed: int = 2) -> SuiteResult:
    """Closed-form diagonal gradient/Hessian vs finite differences of the mean."""
    rng = np.random.default_rng(seed)
    worst1 = worst2 = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 6))
        m = random_mean(rng, n)
        x = float(rng.uniform(0.8, 2.5))
        worst1 = max(worst1, float(np.max(np.abs(diag_first_partials(m, x) - fd_mean_gradient(m, x)))))
        worst2 = max(worst2, float(np.max(np.abs(diag_second_partials(m, x) - fd_mean_hessian(m, x)))))
    ok = worst1 <= 1e-5 and worst2 <= 1e-4
    return SuiteResult("diagonal partials", ok, f"{count} specs, first {worst1:.2e} (<=1e-5), "
                       f"second {worst2:.2e} (<=1e-4)")


def suite_minor_determinants(count: int = 500, seed: int = 3) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 7))
        p = rng.uniform(0.1, 5.0, n)
        chi = float(rng.uniform(-3, 3))
        kmax = min(5, n - 1)
        for a, b in zip(closed_form_minors(p, chi, kmax), direct_minors(p, chi, kmax)):
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return SuiteResult("minor determinants", worst <= 1e-10, f"{count} draws, worst relative gap {worst:.2e}")


def suite_global_implies_ratio(pairs=None, grid: int = 64, samples: int = 1024) -> SuiteResult:
    """Every pair passing the two-point inequality also has an increasing ratio function."""
    pairs = comparison_battery() if pairs is None else pairs
    bad = passed = 0
    for m1, m2 in pairs:
        if check_gsc(m1, m2, grid=grid).holds:
            passed += 1
            if not check_ratio_monotone(m1, m2, samples=samples).holds:
                bad += 1
    return SuiteResult("two-point => increasing ratio", bad == 0,
                       f"{len(pairs)} pairs, {passed} pass the two-point check, {bad} counterexamples")


def suite_shared_weights(count: int = 100, seed: int = 4, grid: int = 64, samples: int = 1024) -> SuiteResult:
    rng = np.random.default_rng(seed)
    disagree = holds = 0
    for _ in range(count):
        f, g, p = random_shared_weight_pair(rng)
        res = check_shared_weights(f, g, p, samples=samples, grid=grid)
        disagree += not res.agree
        holds += res.status == "Holds"
    return SuiteResult("shared-weight equivalence", disagree == 0,
                       f"{count} pairs ({holds} hold), {disagree} disagreements")


def suite_strict_mean(count: int = 10000, seed: int = 5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    specs = [random_mean(rng, n) for n in (2, 3, 4, 5) for _ in range(5)]
    for _ in range(count):
        m = specs[int(rng.integers(len(specs)))]
        xs = rng.uniform(0.51, 2.99, m.n)
        v = eval_mean(m, xs)
        lo, hi = xs.min(), xs.max()
        if not (lo - 1e-12 <= v <= hi + 1e-12) or (lo < hi and not lo < v < hi):
            bad += 1
    return SuiteResult("strict mean bounds", bad == 0, f"{count} evaluations, {bad} violations")


SUITES = (
    ("expression derivatives", lambda: suite_expression_derivatives(300)),
    ("diagonal partials", lambda: suite_diagonal_partials(40)),
    ("minor determinants", lambda: suite_minor_determinants(500)),
    ("two-point => increasing ratio", lambda: suite_global_implies_ratio()),
    ("shared-weight equivalence", lambda: suite_shared_weights(20)),
    ("strict mean bounds", lambda: suite_strict_mean(2000)),
)


def run_suites(suites=SUITES) -> list[SuiteResult]:
    out = []
    for name, fn in suites:
        t = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing suite is a failing suite
            res = SuiteResult(name, False, f"error: {exc!r}")
        res.seconds = time.perf_counter() - t
        out.append(res)
    return out

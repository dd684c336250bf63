"""Numerical search for points where A[f,p] exceeds A[g,q].

Searches run in unit coordinates of a sampling :class:`Window` (log-scaled
on positive domains): a coarse sweep, then Nelder-Mead ascent from the best
sweep points.  A gap at or below the tolerance means "no violation found",
never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .expr import EvalError
from .kernel import MeanSpec, Window, eval_mean, eval_mean_batch


@dataclass
class SearchConfig:
    n: int = 2
    window: Optional[Sequence[float]] = None
    resolution: int = 32
    multistart: int = 64
    max_iter: int = 200
    radii: Sequence[float] = (1.0, 0.1, 0.01)
    seed: int = 0
    anchors: int = 16
    tol: float = 1e-9
    budget: int = 32768  # probe points per sweep; larger grids are replaced by random draws

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        radii = list(self.radii)
        if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
            raise ValueError(f"radii must be positive and strictly decreasing, got {radii}")
        self.radii = tuple(float(r) for r in radii)
        if self.multistart < 0 or self.anchors < 1:
            raise ValueError("multistart must be >= 0 and anchors >= 1")


@dataclass(frozen=True)
class GapWitness:
    point: tuple
    gap: float
    radius: Optional[float] = None  # None: found by the global search

    def recompute(self, m1: MeanSpec, m2: MeanSpec) -> float:
        return eval_mean(m1, self.point) - eval_mean(m2, self.point)

    def to_dict(self) -> dict:
        return {"point": list(self.point), "gap": self.gap,
                "radius": "global" if self.radius is None else self.radius}


@dataclass
class GapResult:
    gap: float
    witness: Optional[GapWitness]
    evaluations: int = 0
    skipped: int = 0

    def to_dict(self) -> dict:
        return {"gap": self.gap, "witness": None if self.witness is None else self.witness.to_dict(),
                "evaluations": self.evaluations, "skipped": self.skipped}


@dataclass
class LocalGap:
    radius: float
    gap: float
    witness: Optional[GapWitness] = None
    found: float = field(default=-math.inf, repr=False)  # raw maximum at this radius before monotone envelope

    def to_dict(self) -> dict:
        return {"radius": self.radius, "gap": self.gap,
                "witness": None if self.witness is None else self.witness.to_dict()}


def _gap_scalar(m1: MeanSpec, m2: MeanSpec, xs) -> float:
    try:
        return eval_mean(m1, xs) - eval_mean(m2, xs)
    except (EvalError, ValueError):
        return math.nan


def _gap_batch(m1: MeanSpec, m2: MeanSpec, X: np.ndarray) -> tuple[np.ndarray, int]:
    try:
        return eval_mean_batch(m1, X) - eval_mean_batch(m2, X), 0
    except (EvalError, ValueError):
        gaps = np.array([_gap_scalar(m1, m2, row) for row in X])
        return gaps, int(np.isnan(gaps).sum())


def _cloud(lo: np.ndarray, hi: np.ndarray, resolution: int, budget: int, rng) -> np.ndarray:
    n = len(lo)
    if resolution**n <= budget:
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    return lo + (hi - lo) * rng.random((budget, n))


def _threshold(tol: float, m2: MeanSpec, xs) -> float:
    return tol * max(1.0, max(abs(v) for v in xs))


def _search(m1: MeanSpec, m2: MeanSpec, cfg: SearchConfig, window: Window, boxes, radius, seed) -> GapResult:
    rng = np.random.default_rng(seed)
    per_box = max(cfg.budget // len(boxes), 2**cfg.n)
    U_all, G_all, B_all = [], [], []
    skipped = evaluations = 0
    for b, (lo, hi) in enumerate(boxes):
        U = _cloud(lo, hi, cfg.resolution, per_box, rng)
        G, s = _gap_batch(m1, m2, window.to_x(U))
        skipped += s
        evaluations += len(U)
        U_all.append(U)
        G_all.append(G)
        B_all.append(np.full(len(U), b))
    U, G, B = np.concatenate(U_all), np.concatenate(G_all), np.concatenate(B_all)
    G = np.where(np.isnan(G), -np.inf, G)

    best_u, best_gap = U[int(np.argmax(G))], float(np.max(G))
    starts = np.argsort(-G, kind="stable")[: cfg.multistart]
    for k, idx in enumerate(starts):
        if not np.isfinite(G[idx]):
            continue
        lo, hi = boxes[B[idx]]

        def negative_gap(u):
            v = _gap_scalar(m1, m2, window.to_x(np.clip(u, lo, hi)))
            return -v if math.isfinite(v) else math.inf

        res = minimize(negative_gap, U[idx], method="Nelder-Mead", bounds=list(zip(lo, hi)),
                       options={"maxiter": cfg.max_iter, "xatol": 1e-10, "fatol": 1e-15})
        evaluations += res.nfev
        if -res.fun > best_gap:
            best_gap, best_u = -res.fun, np.clip(res.x, lo, hi)

    point = tuple(float(v) for v in window.to_x(best_u))
    gap = _gap_scalar(m1, m2, point)
    witness = None
    if math.isfinite(gap) and gap > _threshold(cfg.tol, m2, point):
        witness = GapWitness(point, gap, radius)
    return GapResult(gap, witness, evaluations, skipped)


def _window(m1: MeanSpec, m2: MeanSpec, cfg: SearchConfig) -> Window:
    if m1.n != m2.n or m1.domain != m2.domain:
        raise ValueError("means are not comparable (different arity or interval)")
    if m1.n != cfg.n:
        raise ValueError(f"search configured for n={cfg.n}, means have n={m1.n}")
    return Window.for_interval(m1.domain, cfg.window)


def max_gap(m1: MeanSpec, m2: MeanSpec, cfg: SearchConfig) -> GapResult:
    """Largest A[f,p] - A[g,q] found over the whole window."""
    window = _window(m1, m2, cfg)
    box = (np.zeros(cfg.n), np.ones(cfg.n))
    return _search(m1, m2, cfg, window, [box], None, cfg.seed)


def local_gap_probe(m1: MeanSpec, m2: MeanSpec, cfg: SearchConfig) -> list[LocalGap]:
    """Largest gap in boxes of each radius (unit coordinates) around diagonal anchors.

    The reported gaps form a monotone envelope: a witness found at a small
    radius also lies in every larger box, so gaps never increase as the
    radius shrinks.
    """
    window = _window(m1, m2, cfg)
    centers = (np.arange(cfg.anchors) + 0.5) / cfg.anchors
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cfg.radii))
    raw = []
    for r, seed in zip(cfg.radii, seeds):
        boxes, seen = [], set()
        for c in centers:
            lo, hi = max(0.0, c - r), min(1.0, c + r)
            if (lo, hi) not in seen:
                seen.add((lo, hi))
                boxes.append((np.full(cfg.n, lo), np.full(cfg.n, hi)))
        raw.append(_search(m1, m2, cfg, window, boxes, r, int(seed)))
    out = []
    best = None
    for r, res in reversed(list(zip(cfg.radii, raw))):
        if best is None or res.gap > best.gap or (math.isnan(best.gap) and not math.isnan(res.gap)):
            best = res
        out.append(LocalGap(r, best.gap, best.witness, res.gap))
    return list(reversed(out))


def gap_landscape(m1: MeanSpec, m2: MeanSpec, window: Window, resolution: int) -> np.ndarray:
    """Rows ``(x, y, A[f,p], A[g,q], gap)`` over a ``resolution x resolution`` grid (n = 2 only)."""
    if m1.n != 2 or m2.n != 2:
        raise ValueError("the gap landscape needs n = 2")
    axis = window.grid(resolution)
    X = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    a1 = np.array([eval_mean(m1, row) for row in X])
    a2 = np.array([eval_mean(m2, row) for row in X])
    return np.column_stack([X, a1, a2, a1 - a2])

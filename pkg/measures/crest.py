# measures/crest.py
"""
Crest probabilities esc_n(x): the chance that a walk on Γ̂ from x reaches ∅ before depth n.

The harmonic system is assembled from the neighbor rule of Γ̂ (the double edge between
0 and 1 counts twice) and solved with preconditioned conjugate gradients. Per-level
normalization and a ratio-2 fit turn the finite-n values into limits.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from scipy import sparse
from scipy.sparse.linalg import cg

from dyadlab.errors import DegenerateLevel, DomainError, FitWarning, SolverError
from lattice.graphs import neighbors_wrapped
from lattice.words import EMPTY, Word, words_at_depth

logger = logging.getLogger(__name__)

MAX_CREST_DEPTH = 22


# ---------------------------------------------------------------------
# Dirichlet problems between two depths of Γ̂
# ---------------------------------------------------------------------

def _offset(top: int, depth: int) -> int:
    """Index of the first unknown at `depth` when depths top+1 .. are stacked."""
    return (1 << depth) - (1 << (top + 1))


def dirichlet_system(top: int, bottom: int, top_values: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    """
    deg(x)·h(x) − Σ_{y~x} h(y) = boundary terms, for every word x with top < depth < bottom.
    h is fixed to `top_values` at depth `top` and to 0 at depth `bottom`. The matrix is
    symmetric positive definite.
    """
    if not 0 <= top < bottom - 1:
        raise DomainError(f"no interior between depths {top} and {bottom}")
    size = _offset(top, bottom)
    rows, cols = [], []
    b = np.zeros(size)
    diagonal = np.empty(size)
    for d in range(top + 1, bottom):
        m = 1 << d
        v = np.arange(m)
        here = _offset(top, d) + v
        even = v % 2 == 0
        diagonal[here] = np.where(even, 4.0, 3.0)
        rows += [here, here]
        cols += [_offset(top, d) + (v - 1) % m, _offset(top, d) + (v + 1) % m]
        if d + 1 < bottom:
            rows.append(here)
            cols.append(_offset(top, d + 1) + 2 * v)
        parents = v[even] // 2
        if d - 1 > top:
            rows.append(here[even])
            cols.append(_offset(top, d - 1) + parents)
        else:
            b[here[even]] += top_values[parents]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    off = sparse.coo_matrix((-np.ones(len(r)), (r, c)), shape=(size, size))
    matrix = (off + sparse.diags(diagonal)).tocsr()
    return matrix, b


@dataclass
class SolveInfo:
    iterations: int
    residual: float


def solve_dirichlet(matrix, b, tol: float, max_iter: int | None = None) -> tuple[np.ndarray, SolveInfo]:
    """Jacobi-preconditioned CG; the max-norm residual must end up below `tol`."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    max_iter = max_iter or settings.DYADLAB_SOLVER_MAX_ITER
    count = 0

    def tick(_):
        nonlocal count
        count += 1

    preconditioner = sparse.diags(1.0 / matrix.diagonal())
    x, info = cg(matrix, b, rtol=0.0, atol=tol, maxiter=max_iter, M=preconditioner, callback=tick)
    residual = float(np.max(np.abs(b - matrix @ x))) if len(b) else 0.0
    if info != 0 or residual > tol:
        raise SolverError(
            f"CG stopped after {count} iterations with residual {residual:.3e} (tol {tol:.1e})",
            residual=residual,
            iterations=count,
        )
    logger.info("solved %d unknowns in %d iterations, residual %.2e", len(b), count, residual)
    return np.clip(x, 0.0, 1.0), SolveInfo(count, residual)


# ---------------------------------------------------------------------
# Crest fields
# ---------------------------------------------------------------------

@dataclass
class CrestField:
    """esc_n on every word of depth 0..n (esc_n(∅) = 1, zero at depth n)."""

    depth: int
    levels: list[np.ndarray]
    tol: float
    residual: float = 0.0
    iterations: int = 0

    def level(self, k: int) -> np.ndarray:
        return self.levels[k]

    def value(self, word: Word | str) -> float:
        w = Word.parse(word) if isinstance(word, str) else word
        if w.depth > self.depth:
            raise DomainError(f"{w} lies below depth {self.depth}")
        return float(self.levels[w.depth][w.value])

    def normalized(self, k: int) -> np.ndarray:
        return normalize_level(self, k)

    def csv_header(self):
        return ["depth", "label", "value", "normalized_value"]

    def csv_rows(self):
        for k in range(self.depth):
            values = self.levels[k]
            normalized = normalize_level(self, k)
            for v in range(len(values)):
                yield k, str(Word(v, k)), float(values[v]), float(normalized[v])

    def to_dict(self):
        return {
            "depth": self.depth,
            "tol": self.tol,
            "residual": self.residual,
            "iterations": self.iterations,
            "esc_0": self.value("0"),
            "esc_1": self.value("1"),
        }


def solve_crest(n: int, tol: float = 1e-12, max_iter: int | None = None) -> CrestField:
    if not 2 <= n <= MAX_CREST_DEPTH:
        raise DomainError(f"crest depth must be between 2 and {MAX_CREST_DEPTH}")
    matrix, b = dirichlet_system(0, n, np.ones(1))
    x, info = solve_dirichlet(matrix, b, tol, max_iter)
    levels = [np.ones(1)]
    for d in range(1, n):
        start = _offset(0, d)
        levels.append(x[start:start + (1 << d)])
    levels.append(np.zeros(1 << n))
    return CrestField(n, levels, tol, info.residual, info.iterations)


def normalize_level(f: CrestField, k: int) -> np.ndarray:
    if not 0 <= k < f.depth:
        raise DomainError(f"level {k} is not inside the crest field of depth {f.depth}")
    values = f.levels[k]
    total = values.sum()
    if total == 0:
        raise DegenerateLevel(f"level {k} of esc_{f.depth} sums to zero")
    return values / total


def dense_crest_oracle(n: int) -> list[np.ndarray]:
    """esc_n by a dense direct solve built from the neighbor oracle alone (small n only)."""
    if not 2 <= n <= 10:
        raise DomainError("the dense oracle is limited to 2 <= n <= 10")
    words = [w for d in range(1, n) for w in words_at_depth(d)]
    index = {w: i for i, w in enumerate(words)}
    a = np.zeros((len(words), len(words)))
    b = np.zeros(len(words))
    for w, i in index.items():
        edges = neighbors_wrapped(w)
        a[i, i] = len(edges)
        for u, _ in edges:
            if u == EMPTY:
                b[i] += 1.0
            elif u.depth < n:
                a[i, index[u]] -= 1.0
    x = np.linalg.solve(a, b)
    levels = [np.ones(1)]
    for d in range(1, n):
        levels.append(np.array([x[index[w]] for w in words_at_depth(d)]))
    levels.append(np.zeros(1 << n))
    return levels


# ---------------------------------------------------------------------
# Extrapolation
# ---------------------------------------------------------------------

@dataclass
class Extrapolation:
    """Fit s_n = limit − slope · 2^{-n} over the trailing window."""

    limit: float
    slope: float
    residual: float
    window: tuple[int, int]
    monotone: bool = True

    def to_dict(self):
        return {
            "limit": self.limit,
            "slope": self.slope,
            "residual": self.residual,
            "window": list(self.window),
            "monotone": self.monotone,
        }


def extrapolate_ratio2(sequence, start: int = 2, window: int | None = None) -> Extrapolation:
    """
    `sequence[i]` is s_{start+i}. Least squares over the last `window` terms
    (DYADLAB_EXTRAPOLATION_WINDOW by default).
    """
    s = np.asarray(sequence, dtype=np.float64)
    if len(s) < 4:
        raise DomainError("extrapolation needs at least 4 terms")
    window = min(window or settings.DYADLAB_EXTRAPOLATION_WINDOW, len(s))
    n = np.arange(start, start + len(s))[-window:]
    tail = s[-window:]
    design = np.column_stack([np.ones(window), -np.exp2(-n.astype(np.float64))])
    (limit, slope), *_ = np.linalg.lstsq(design, tail, rcond=None)
    residual = float(np.max(np.abs(design @ np.array([limit, slope]) - tail)))
    steps = np.diff(tail)
    monotone = bool((steps >= 0).all() or (steps <= 0).all())
    if not monotone:
        warnings.warn(f"non-monotone terms in the window n={n[0]}..{n[-1]}", FitWarning, stacklevel=2)
    return Extrapolation(float(limit), float(slope), residual, (int(n[0]), int(n[-1])), monotone)


def esc_p3_convert(x, direction: str = "esc_to_p3"):
    """esc(0) = 3(1 − p₃)/(3 + p₃); the map is its own inverse. Exact on Fractions."""
    if not 0 < x < 1:
        raise DomainError("the conversion is defined on (0, 1)")
    if direction not in ("esc_to_p3", "p3_to_esc"):
        raise DomainError(f"unknown direction {direction!r}")
    return 3 * (1 - x) / (3 + x)


# ---------------------------------------------------------------------
# Series over n
# ---------------------------------------------------------------------

LEVEL2 = ("00", "01", "10", "11")


@dataclass
class CrestSeries:
    depths: list[int]
    level1: np.ndarray
    level2: np.ndarray
    raw_sum: np.ndarray
    limits: dict[str, Extrapolation] = field(default_factory=dict)
    residuals: list[float] = field(default_factory=list)

    @property
    def esc0(self) -> float:
        return self.limits["0"].limit

    @property
    def p3(self) -> float:
        return esc_p3_convert(self.esc0)

    def relations(self) -> dict[str, float]:
        """Gaps in the exact relations between the level-1 and level-2 crest values."""
        e = {k: v.limit for k, v in self.limits.items()}
        return {
            "esc0_plus_esc1": abs(e["0"] + e["1"] - 1.0),
            "esc00": abs(e["00"] - (6 * e["0"] - 3)),
            "esc10": abs(e["10"] - (3 - 5 * e["0"])),
            "esc01": abs(e["01"] - e["1"] / 2),
            "esc11": abs(e["11"] - e["1"] / 2),
        }

    def raw_sum_limit(self) -> Extrapolation:
        return extrapolate_ratio2(self.raw_sum, start=self.depths[0])

    def csv_header(self):
        return ["n", "esc_0", "esc_1", *(f"esc_{w}" for w in LEVEL2), "raw_esc_0_plus_esc_1"]

    def csv_rows(self):
        for i, n in enumerate(self.depths):
            level2 = self.level2[i] if n > 2 else [None] * 4
            yield (n, *self.level1[i], *level2, self.raw_sum[i])

    def csv_preamble(self):
        lines = [f"esc_{k}_limit={v.limit:.17g} fit_residual={v.residual:.3g}" for k, v in self.limits.items()]
        return [*lines, f"p3={self.p3:.17g}"]

    def to_dict(self):
        return {
            "depths": self.depths,
            "limits": {k: v.to_dict() for k, v in self.limits.items()},
            "relations": self.relations(),
            "p3": self.p3,
            "raw_sum_limit": self.raw_sum_limit().to_dict(),
            "solver_residuals": self.residuals,
        }


def crest_series(max_depth: int, tol: float = 1e-12, min_depth: int = 2, window: int | None = None) -> CrestSeries:
    """Solve esc_n for min_depth ≤ n ≤ max_depth, normalize levels 1 and 2 and extrapolate each value."""
    if max_depth - max(min_depth, 3) < 3:
        raise DomainError("need at least 4 depths with a nonzero level 2 to extrapolate")
    depths = list(range(min_depth, max_depth + 1))
    level1 = np.zeros((len(depths), 2))
    level2 = np.zeros((len(depths), 4))
    raw = np.zeros(len(depths))
    residuals = []
    for i, n in enumerate(depths):
        f = solve_crest(n, tol)
        level1[i] = normalize_level(f, 1)
        raw[i] = f.level(1).sum()
        if n > 2:
            level2[i] = normalize_level(f, 2)
        residuals.append(f.residual)
        logger.info("esc_%d(0) normalized = %.12f", n, level1[i, 0])

    series = CrestSeries(depths, level1, level2, raw, residuals=residuals)
    series.limits["0"] = extrapolate_ratio2(level1[:, 0], min_depth, window)
    series.limits["1"] = extrapolate_ratio2(level1[:, 1], min_depth, window)
    # esc_2 vanishes on level 2
    first2 = 1 if depths[0] == 2 else 0
    for j, w in enumerate(LEVEL2):
        series.limits[w] = extrapolate_ratio2(level2[first2:, j], depths[first2], window)
    return series

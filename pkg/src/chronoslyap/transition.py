"""Transition matrices for x^delta = A(t) x on a time-scale window.

The transition matrix solves the matrix initial value problem
X^delta = A(t) X, X(t0) = I.  Across a scattered point s the exact update
is X <- (I + mu(s) A(s)) X; across dense sub-segments the classical RK4
scheme advances X' = A(t) X with a fixed step.  A forward sweep caches the
matrix at every grid point (plus dense-interval midpoints, which the
Lyapunov solvers use for Simpson quadrature); inverses are computed lazily
by LU solve with a condition-number estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    InvalidParameter,
    NotInTimeScale,
    NotRegressive,
    SingularTransition,
)
from .timescale import Grid, TimeScaleWindow, build_grid
from .tscalc import TOL_REG, RegressivityClass

#: Condition number above which inverse transitions trigger a warning.
COND_WARN = 1e12


@dataclass(frozen=True)
class SystemMatrix:
    """A(t) for the linear system, constant or piecewise constant.

    ``schedule`` entries (t_i, A_i) mean A(t) = A_i for t in [t_i, t_{i+1});
    tabulated samples use the same hold-last convention.  The recursive view
    A_R(t) = A(t) + I is available through :meth:`recursive_at`.
    """

    n: int
    constant: np.ndarray | None = None
    schedule_times: np.ndarray | None = None
    schedule_mats: np.ndarray | None = None  # (k, n, n)

    def __post_init__(self):
        if (self.constant is None) == (self.schedule_mats is None):
            raise InvalidParameter(
                "SystemMatrix needs exactly one of constant or schedule"
            )
        if self.constant is not None:
            mat = np.asarray(self.constant, dtype=float)
            if mat.shape != (self.n, self.n):
                raise InvalidParameter(f"A must be {self.n}x{self.n}")
            if not np.all(np.isfinite(mat)):
                raise InvalidParameter("A has non-finite entries")
            object.__setattr__(self, "constant", mat)
        else:
            ts = np.asarray(self.schedule_times, dtype=float)
            mats = np.asarray(self.schedule_mats, dtype=float)
            if ts.ndim != 1 or mats.shape != (len(ts), self.n, self.n):
                raise InvalidParameter("schedule shapes inconsistent")
            if len(ts) == 0:
                raise InvalidParameter("schedule must be nonempty")
            if np.any(np.diff(ts) <= 0):
                raise InvalidParameter("schedule times must increase")
            if not np.all(np.isfinite(mats)):
                raise InvalidParameter("schedule has non-finite entries")
            object.__setattr__(self, "schedule_times", ts)
            object.__setattr__(self, "schedule_mats", mats)

    @classmethod
    def from_constant(cls, A) -> "SystemMatrix":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(n=A.shape[0], constant=A)

    @classmethod
    def from_schedule(cls, times: Sequence[float], mats) -> "SystemMatrix":
        mats = np.asarray(mats, dtype=float)
        return cls(n=mats.shape[1], schedule_times=np.asarray(times, float),
                   schedule_mats=mats)

    # tabulated samples share the hold-last semantics of a schedule
    from_table = from_schedule

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def piece_index(self, t: float) -> int:
        """Index of the hold-last piece ruling t (0 for a constant A)."""
        if self.constant is not None:
            return 0
        i = int(np.searchsorted(self.schedule_times, t, side="right")) - 1
        return max(i, 0)

    def at(self, t: float) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        return self.schedule_mats[self.piece_index(t)]

    def recursive_at(self, t: float) -> np.ndarray:
        return self.at(t) + np.eye(self.n)

    def breakpoints_in(self, lo: float, hi: float) -> list[float]:
        if self.constant is not None:
            return []
        ts = self.schedule_times
        return [float(t) for t in ts if lo < t < hi]


@dataclass
class TransitionMatrix:
    """Cached transition sweep Phi(t, t0) on a grid.

    ``stack[i]`` holds Phi(times[i], t0) for i >= base_index; ``mids`` maps
    a dense interval's left grid index to Phi at the interval midpoint.
    The object is immutable after the sweep apart from the lazily filled
    inverse cache.
    """

    grid: Grid
    base_index: int
    stack: np.ndarray               # (G, n, n); NaN before base_index
    mids: dict[int, np.ndarray]
    step_target: float
    _inv_cache: dict[int, tuple[np.ndarray, float]] = field(default_factory=dict)

    @property
    def base(self) -> float:
        return float(self.grid.times[self.base_index])

    def at_index(self, i: int) -> np.ndarray:
        if i < self.base_index:
            raise InvalidParameter(
                "transition cache covers t >= t0 only; use transition() for "
                "backward evaluation"
            )
        return self.stack[i]

    def at(self, t: float) -> np.ndarray:
        return self.at_index(self.grid.index_of(t))

    def inverse_at_index(self, i: int) -> np.ndarray:
        if i not in self._inv_cache:
            phi = self.at_index(i)
            n = phi.shape[0]
            try:
                inv = np.linalg.solve(phi, np.eye(n))
            except np.linalg.LinAlgError as exc:
                raise SingularTransition(
                    f"transition matrix at t = {self.grid.times[i]} is "
                    "singular (regressivity violated)"
                ) from exc
            if not np.all(np.isfinite(inv)):
                raise SingularTransition(
                    f"transition matrix at t = {self.grid.times[i]} is "
                    "numerically singular"
                )
            cond = float(np.linalg.cond(phi))
            if cond > COND_WARN:
                warnings.warn(
                    f"transition matrix at t = {self.grid.times[i]} has "
                    f"condition number {cond:.3e}",
                    RuntimeWarning,
                    stacklevel=2,
                )
            self._inv_cache[i] = (inv, cond)
        return self._inv_cache[i][0]

    def condition_at(self, t: float) -> float:
        i = self.grid.index_of(t)
        self.inverse_at_index(i)
        return self._inv_cache[i][1]


def _rk4_propagator(A: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of X' = A X as a matrix map.

    For a constant coefficient the four stages collapse to the degree-4
    Taylor polynomial of expm(h A); applying it is bit-for-bit the RK4
    update up to rounding, at a quarter of the multiplications.
    """
    hA = h * A
    n = A.shape[0]
    R = np.eye(n) + hA / 4.0
    R = np.eye(n) + (hA / 3.0) @ R
    R = np.eye(n) + (hA / 2.0) @ R
    return np.eye(n) + hA @ R


def _advance_dense(A: SystemMatrix, X: np.ndarray, lo: float, hi: float,
                   step_target: float,
                   cache: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Integrate X' = A(t) X from lo to hi; also return X at the midpoint.

    Integration is split at schedule breakpoints so each RK4 step sees a
    constant A; the per-step propagator is cached across the uniform
    interior steps of a sweep.
    """
    if cache is None:
        cache = {}
    mid = 0.5 * (lo + hi)
    cuts = sorted({mid, *A.breakpoints_in(lo, hi)})
    x_mid = None
    t = lo
    for cut in [*cuts, hi]:
        if cut <= t:
            continue
        span = cut - t
        n_steps = max(1, math.ceil(span / step_target - 1e-12))
        h = span / n_steps
        key = (h, A.piece_index(t))
        R = cache.get(key)
        if R is None:
            R = _rk4_propagator(A.at(t), h)
            cache[key] = R
        for _ in range(n_steps):
            X = R @ X
        t = cut
        if abs(t - mid) <= 1e-14 * max(1.0, abs(mid)):
            x_mid = X.copy()
    if x_mid is None:  # mid coincided with lo numerically
        x_mid = X.copy()
    return X, x_mid


def sweep_transition(A: SystemMatrix, grid: Grid, base_index: int = 0,
                     step_scale: float = 1.0) -> TransitionMatrix:
    """Forward sweep caching Phi(t, t_base) at every grid point >= base.

    The dense RK4 step is min(dense_step, segment_length / 8) * step_scale.
    Forward sweeping never inverts anything, so non-regressive systems are
    handled (the sweep simply passes through a singular factor).
    """
    G = len(grid)
    n = A.n
    stack = np.full((G, n, n), np.nan)
    mids: dict[int, np.ndarray] = {}
    stack[base_index] = np.eye(n)
    X = np.eye(n)
    step_used = grid.dense_step
    cache: dict = {}
    for i in range(base_index, G - 1):
        t_i = float(grid.times[i])
        m_i = float(grid.mus[i])
        if m_i > 0.0:
            X = (np.eye(n) + m_i * A.at(t_i)) @ X
        else:
            seg_len = float(grid.seg_hi[i] - grid.seg_lo[i])
            step_target = step_scale * min(grid.dense_step, seg_len / 8.0)
            step_used = min(step_used, step_target)
            X, x_mid = _advance_dense(
                A, X, t_i, float(grid.times[i + 1]), step_target, cache
            )
            mids[i] = x_mid
        stack[i + 1] = X
    return TransitionMatrix(
        grid=grid, base_index=base_index, stack=stack, mids=mids,
        step_target=step_used,
    )


def check_matrix_regressive(A: SystemMatrix, w: TimeScaleWindow,
                            grid: Grid | None = None,
                            tol_reg: float = TOL_REG) -> RegressivityClass:
    """Scan invertibility of I + mu(t) A(t) at the scattered grid points.

    The verdict for a matrix system is either ``regressive`` or
    ``not_regressive`` (positive regressivity is a scalar notion);
    witnesses record (t, det(I + mu A)) at near-singular points.
    A window without scattered points is vacuously regressive.
    """
    if grid is None:
        grid = build_grid(w, dense_step=max((w.t_end - w.t0) / 64.0, 1e-6))
    eye = np.eye(A.n)
    bad = []
    for t, m in zip(grid.times, grid.mus):
        if m <= 0.0:
            continue
        B = eye + float(m) * A.at(float(t))
        det = float(np.linalg.det(B))
        scale = float(np.linalg.norm(B, "fro")) ** A.n
        if abs(det) <= tol_reg * max(scale, 1e-300):
            bad.append((float(t), det))
    if bad:
        return RegressivityClass("not_regressive", tuple(bad))
    return RegressivityClass("regressive")


def transition(A: SystemMatrix, w: TimeScaleWindow, t0: float, t: float,
               dense_step: float = 0.01,
               grid: Grid | None = None) -> np.ndarray:
    """Phi_A(t, t0) for t and t0 in the window.

    Forward values (t >= t0) come from a cached sweep; t is allowed to lie
    between grid points inside a dense segment, in which case the sweep is
    extended by a partial RK4 step.  Backward values (t < t0) are the
    matrix inverse of the forward transition from t to t0, which requires
    regressivity on [t, t0].
    """
    if grid is None:
        grid = build_grid(w, dense_step)
    if not (w.contains(t0) and w.contains(t)):
        raise NotInTimeScale("transition endpoints must lie in the window")

    if t >= t0:
        tm = sweep_transition(A, grid, base_index=grid.index_of(t0))
        return _value_at(tm, A, t)
    tm = sweep_transition(A, grid, base_index=grid.index_of(t))
    phi_fwd = _value_at(tm, A, t0)
    try:
        inv = np.linalg.solve(phi_fwd, np.eye(A.n))
    except np.linalg.LinAlgError as exc:
        raise NotRegressive(
            f"system is not regressive on [{t}, {t0}]; backward transition "
            "undefined"
        ) from exc
    if not np.all(np.isfinite(inv)):
        raise NotRegressive(
            f"system is not regressive on [{t}, {t0}]; backward transition "
            "undefined"
        )
    return inv


def _value_at(tm: TransitionMatrix, A: SystemMatrix, t: float) -> np.ndarray:
    grid = tm.grid
    try:
        return tm.at_index(grid.index_of(t))
    except NotInTimeScale:
        pass
    # t lies strictly inside a dense segment between grid points
    i = int(np.searchsorted(grid.times, t)) - 1
    if i < tm.base_index or grid.mus[i] > 0:
        raise NotInTimeScale(f"t = {t} not reachable on this grid")
    seg_len = float(grid.seg_hi[i] - grid.seg_lo[i])
    step_target = min(grid.dense_step, seg_len / 8.0)
    X, _ = _advance_dense(A, tm.stack[i].copy(), float(grid.times[i]), t,
                          step_target)
    return X


def transition_inverse(tm: TransitionMatrix, t: float) -> np.ndarray:
    """Phi_A(t, t0)^{-1} by LU solve, with a cached condition estimate."""
    return tm.inverse_at_index(tm.grid.index_of(t))

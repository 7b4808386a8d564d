"""Algebraic and dynamic Lyapunov equation solvers on time-scale windows.

The algebraic family, for constant graininess mu:

    A^T P + P A + mu A^T P A = -M

solved pointwise by a convergent series (mu > 0) or a dense Kronecker
solve (mu = 0), with independent Kronecker/Stein oracles for verification.

The dynamic family, on an arbitrary window:

    A^T P + P A + mu A^T P A + (I + mu A^T) P^delta (I + mu A) = -M

solved in closed form by transporting the initial matrix with the cached
transition sweep, plus a stationary variant whose initial matrix is the
truncated improper integral of Phi^T M Phi.  The stationary solve is
evaluated by a backward sweep that never inverts a transition matrix, so
it tolerates non-regressive systems (whose forward flow may be singular).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import (
    InvalidParameter,
    NoDecayDetected,
    NonSymmetricInput,
    NonSymmetricM,
    NotRegressive,
    PositiveDefinitenessLost,
    SeriesNotConverged,
    SingularKroneckerSystem,
    SpectralRadiusNotLessThanOne,
    SpotCheckFailed,
    SymmetryDriftExceeded,
    UnstableSpectrum,
    WindowTooShort,
)
from .timescale import Grid, TimeScaleWindow, build_grid, make_canonical
from .tscalc import stack_delta
from .transition import (
    SystemMatrix,
    TransitionMatrix,
    check_matrix_regressive,
    sweep_transition,
)

#: Relative truncation tolerance of the algebraic series.
SERIES_TOL = 1e-10

#: Relative tail tolerance of windowed improper delta-integrals.
TAIL_TOL = 1e-8

#: Asymmetry above this fraction of the solution norm aborts a solve.
SYM_DRIFT = 1e-9

#: Kronecker oracles are dense O(n^6); refuse beyond this dimension.
MAX_DENSE_DIM = 12


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric weight matrix M(t), constant or given by a rule."""

    n: int
    constant: np.ndarray | None = None
    rule: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if (self.constant is None) == (self.rule is None):
            raise InvalidParameter("CostMatrix needs a constant or a rule")
        if self.constant is not None:
            mat = np.asarray(self.constant, dtype=float)
            if mat.shape != (self.n, self.n):
                raise InvalidParameter(f"M must be {self.n}x{self.n}")
            _require_symmetric(mat, NonSymmetricM, what="M")
            object.__setattr__(self, "constant", mat)

    @classmethod
    def from_constant(cls, M) -> "CostMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(n=M.shape[0], constant=M)

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def at(self, t: float) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        return np.asarray(self.rule(t), dtype=float)


@dataclass(frozen=True)
class SeedDomain:
    """Integration domain of one pointwise algebraic solve: the uniform
    step lattice of width mu when mu > 0, the continuous half-line when
    mu = 0.  ``horizon`` records the truncation actually used (series
    terms, or None for the exact continuous solve)."""

    mu: float
    horizon: int | None = None

    @property
    def kind(self) -> str:
        return "continuous" if self.mu == 0.0 else "uniform-discrete"


@dataclass
class GramianSolution:
    """Per-grid-point solution P(t) of a dynamic Lyapunov equation.

    ``values[i]`` is P(times[i]); ``residuals[i]`` is the Frobenius norm of
    the dynamic equation evaluated with the numerically differentiated
    P^delta (NaN where no difference estimate exists).  ``meta`` records
    the equation name, horizons and the residual/tail diagnostics that were
    actually measured.
    """

    times: np.ndarray
    values: np.ndarray          # (G, n, n)
    initial: np.ndarray
    residuals: np.ndarray       # (G,)
    meta: dict
    grid: Grid

    def value_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > self.grid.window.tol:
            raise InvalidParameter(f"t = {t} is not a reported grid point")
        return self.values[i]

    def min_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values)[:, 0]


# -- small shared helpers -----------------------------------------------------


def _require_symmetric(M: np.ndarray, err, tol: float = 1e-12, what: str = "matrix"):
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > tol * scale:
        raise err(f"{what} is not symmetric within {tol:g}")


def _symmetrize_checked(P: np.ndarray, what: str = "solution") -> np.ndarray:
    scale = max(float(np.linalg.norm(P, "fro")), 1e-300)
    drift = float(np.linalg.norm(P - P.T, "fro"))
    if drift > SYM_DRIFT * scale:
        raise SymmetryDriftExceeded(
            f"{what} asymmetry {drift:.3e} exceeds {SYM_DRIFT:g} * norm"
        )
    return 0.5 * (P + P.T)


def _as_system(A) -> SystemMatrix:
    if isinstance(A, SystemMatrix):
        return A
    return SystemMatrix.from_constant(A)


def _as_cost(M) -> CostMatrix:
    if isinstance(M, CostMatrix):
        return M
    return CostMatrix.from_constant(M)


def spectrum_in_hilger(A: np.ndarray, mu: float) -> bool:
    """Whether every eigenvalue of A lies in the open Hilger disk for mu
    (the open left half-plane when mu = 0)."""
    lam = np.linalg.eigvals(A)
    if mu == 0.0:
        return bool(np.all(lam.real < 0.0))
    return bool(np.all(np.abs(1.0 + mu * lam) < 1.0))


def tsale_residual(A: np.ndarray, P: np.ndarray, M: np.ndarray,
                   mu: float) -> float:
    """Frobenius norm of A^T P + P A + mu A^T P A + M."""
    R = A.T @ P + P @ A + mu * (A.T @ P @ A) + M
    return float(np.linalg.norm(R, "fro"))


# -- algebraic solvers --------------------------------------------------------


def solve_tsale_pointwise(A, M, mu: float, horizon_tol: float = SERIES_TOL,
                          max_terms: int = 200_000,
                          meta: dict | None = None) -> np.ndarray:
    """Solve A^T P + P A + mu A^T P A = -M for one graininess value.

    mu > 0: the convergent series P = mu * sum_j (B^T)^j M B^j with
    B = I + mu A, truncated when the term norm falls below
    ``horizon_tol * ||M||`` (the geometric tail bound goes into ``meta``).
    mu = 0: the dense Kronecker solve of A^T P + P A = -M.

    Raises UnstableSpectrum when an eigenvalue of A lies outside the open
    Hilger disk for mu, NonSymmetricM for an asymmetric M.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise InvalidParameter("A and M must be square of equal size")
    if mu < 0:
        raise InvalidParameter("mu must be >= 0")
    _require_symmetric(M, NonSymmetricM, what="M")
    if not spectrum_in_hilger(A, mu):
        raise UnstableSpectrum(
            f"spectrum of A is not inside the Hilger region for mu = {mu}"
        )

    if mu == 0.0:
        P = _kronecker_cale(A, M)
        if meta is not None:
            meta.update({"method": "kronecker", "terms": None, "tail": 0.0,
                         "domain": SeedDomain(mu=0.0)})
        return _symmetrize_checked(P)

    B = np.eye(n) + mu * A
    Bt = B.T
    norm_m = float(np.linalg.norm(M, "fro"))
    term = M.copy()
    P = mu * M.copy()
    tail = 0.0
    prev_norm = norm_m
    for j in range(1, max_terms + 1):
        term = Bt @ term @ B
        P += mu * term
        tn = float(np.linalg.norm(term, "fro"))
        if tn <= horizon_tol * norm_m:
            ratio = tn / prev_norm if prev_norm > 0 else 0.0
            tail = mu * tn * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
            break
        prev_norm = tn
    else:
        raise SeriesNotConverged(
            f"series did not reach {horizon_tol:g} * ||M|| within "
            f"{max_terms} terms"
        )
    if meta is not None:
        meta.update({"method": "series", "terms": j + 1, "tail": tail,
                     "domain": SeedDomain(mu=mu, horizon=j + 1)})
    return _symmetrize_checked(P)


def _kronecker_cale(A: np.ndarray, M: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n > MAX_DENSE_DIM:
        raise InvalidParameter(
            f"dense Kronecker solve capped at n <= {MAX_DENSE_DIM}"
        )
    eye = np.eye(n)
    L = np.kron(eye, A.T) + np.kron(A.T, eye)
    try:
        vec = np.linalg.solve(L, -M.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularKroneckerSystem(
            "Kronecker system of the algebraic solve is singular"
        ) from exc
    return vec.reshape((n, n), order="F")


def solve_cale_oracle(A, M) -> np.ndarray:
    """Dense Kronecker oracle for A^T P + P A = -M.

    Exists for verification of the series/integral paths, not production;
    O(n^6) and capped at n <= 12.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _require_symmetric(M, NonSymmetricM, what="M")
    lam = np.linalg.eigvals(A)
    if np.any(np.abs(lam[:, None] + lam[None, :].conj()) < 1e-12):
        raise SingularKroneckerSystem(
            "spectra of A and -A^T intersect; the Kronecker system is "
            "singular"
        )
    return _symmetrize_checked(_kronecker_cale(A, M))


def solve_dale_oracle(A, M) -> np.ndarray:
    """Dense Kronecker/Stein oracle for A_R^T P A_R - P = -M, A_R = A + I.

    Requires the spectral radius of A_R to be strictly below one; equals
    the series sum_j (A_R^T)^j M A_R^j.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _require_symmetric(M, NonSymmetricM, what="M")
    n = A.shape[0]
    if n > MAX_DENSE_DIM:
        raise InvalidParameter(
            f"dense Kronecker solve capped at n <= {MAX_DENSE_DIM}"
        )
    Ar = A + np.eye(n)
    rho = float(np.max(np.abs(np.linalg.eigvals(Ar))))
    if rho >= 1.0 - 1e-12:
        raise SpectralRadiusNotLessThanOne(
            f"spectral radius of A + I is {rho:.6f} >= 1"
        )
    L = np.eye(n * n) - np.kron(Ar.T, Ar.T)
    try:
        vec = np.linalg.solve(L, M.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularKroneckerSystem("Stein system is singular") from exc
    return _symmetrize_checked(vec.reshape((n, n), order="F"))


# -- shared dynamic machinery -------------------------------------------------


def _cumulative_gramian(A: SystemMatrix, M: CostMatrix, grid: Grid,
                        tm: TransitionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative K(t_i) = integral over [t0, t_i) of Phi^T M Phi, plus the
    integrand-norm envelope at every grid point.

    Scattered points contribute mu * Phi^T M Phi exactly; dense intervals
    use a Simpson panel on the cached sweep (endpoint, midpoint, endpoint).
    """
    G = len(grid)
    n = A.n
    K = np.zeros((G, n, n))
    env = np.zeros(G)
    acc = np.zeros((n, n))

    def integrand(i: int) -> np.ndarray:
        phi = tm.stack[i]
        return phi.T @ M.at(float(grid.times[i])) @ phi

    g_i = integrand(tm.base_index)
    env[tm.base_index] = np.linalg.norm(g_i, "fro")
    for i in range(tm.base_index, G - 1):
        t_i, t_n = float(grid.times[i]), float(grid.times[i + 1])
        g_next = integrand(i + 1)
        if grid.mus[i] > 0.0:
            acc = acc + float(grid.mus[i]) * g_i
        else:
            phi_mid = tm.mids[i]
            t_mid = 0.5 * (t_i + t_n)
            g_mid = phi_mid.T @ M.at(t_mid) @ phi_mid
            acc = acc + (t_n - t_i) / 6.0 * (g_i + 4.0 * g_mid + g_next)
        env[i + 1] = np.linalg.norm(g_next, "fro")
        K[i + 1] = acc
        g_i = g_next
    return K, env


def _residual_stack(grid: Grid, A: SystemMatrix, M: CostMatrix,
                    P_stack: np.ndarray) -> np.ndarray:
    """Per-point Frobenius residual of the dynamic equation with numeric
    P^delta; NaN where the difference estimate does not exist."""
    G, n, _ = P_stack.shape
    ts = grid.times
    if A.is_constant:
        A_stack = np.broadcast_to(A.constant, (G, n, n))
    else:
        A_stack = np.stack([A.at(float(t)) for t in ts])
    if M.is_constant:
        M_stack = np.broadcast_to(M.constant, (G, n, n))
    else:
        M_stack = np.stack([M.at(float(t)) for t in ts])
    Pd, valid = stack_delta(grid, P_stack)
    mus = grid.mus[:, None, None]
    At = np.transpose(A_stack, (0, 2, 1))
    L = np.eye(n) + mus * A_stack
    Lt = np.transpose(L, (0, 2, 1))
    R = (
        At @ P_stack + P_stack @ A_stack + mus * (At @ P_stack @ A_stack)
        + Lt @ Pd @ L + M_stack
    )
    norms = np.linalg.norm(R, axis=(1, 2))
    norms[~valid] = np.nan
    return norms


def _finite_max(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    return float(finite.max()) if len(finite) else float("nan")


# -- dynamic solvers ----------------------------------------------------------


def solve_tsdle(A, M, P0, w: TimeScaleWindow, t0: float,
                dense_step: float = 0.01,
                grid: Grid | None = None) -> GramianSolution:
    """Dynamic Lyapunov solve with initial matrix P0 at the window start.

    P(t) transports P0 with the cached transition sweep:

        P(t) = (Phi^T)^{-1} [P0 - K(t)] Phi^{-1},
        K(t) = integral over [t0, t) of Phi^T(s, t0) M(s) Phi(s, t0).

    The transport inverts Phi, so the system must be regressive on the
    window.  Residual norms of the dynamic equation (with numeric P^delta)
    are recorded per grid point.
    """
    A = _as_system(A)
    M = _as_cost(M)
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    _require_symmetric(P0, NonSymmetricInput, what="P0")
    _require_symmetric(M.at(t0), NonSymmetricInput, what="M(t0)")
    if abs(t0 - w.t0) > w.tol:
        raise InvalidParameter("t0 must be the window start")
    if grid is None:
        grid = build_grid(w, dense_step)

    reg = check_matrix_regressive(A, w, grid=grid)
    if not reg.is_regressive:
        raise NotRegressive(
            "I + mu A is singular at "
            f"t = {[t for t, _ in reg.witnesses]}; the transported solution "
            "needs a regressive system"
        )

    tm = sweep_transition(A, grid)
    K, _ = _cumulative_gramian(A, M, grid, tm)
    G, n = len(grid), A.n
    P_stack = np.empty((G, n, n))
    P_stack[0] = _symmetrize_checked(P0)
    for i in range(1, G):
        inv = tm.inverse_at_index(i)
        P_stack[i] = _symmetrize_checked(inv.T @ (P0 - K[i]) @ inv)
    residuals = _residual_stack(grid, A, M, P_stack)
    meta = {
        "equation": "TSDLE",
        "horizon": w.t_end,
        "tail_bound": None,
        "max_residual": _finite_max(residuals),
        "dense_step": grid.dense_step,
    }
    return GramianSolution(
        times=grid.times.copy(), values=P_stack, initial=P_stack[0].copy(),
        residuals=residuals, meta=meta, grid=grid,
    )


def _stationary_ic_with_info(A: SystemMatrix, M: CostMatrix,
                             w: TimeScaleWindow, t0: float,
                             tail_tol: float,
                             grid: Grid) -> tuple[np.ndarray, dict, np.ndarray]:
    tm = sweep_transition(A, grid)
    K, env = _cumulative_gramian(A, M, grid, tm)
    K_end = K[-1]
    norm_k = float(np.linalg.norm(K_end, "fro"))
    info: dict = {"tail_estimate": 0.0, "decay_slope": None}

    if float(env.max()) == 0.0:  # identically zero integrand (M = 0)
        return _symmetrize_checked(K_end), info, K

    ts = grid.times
    span = float(ts[-1] - ts[0])
    # decay certificate: slope of log-envelope over the trailing half window
    tail_mask = ts >= ts[0] + 0.5 * span
    if tail_mask.sum() < 4:
        tail_mask = np.ones_like(tail_mask)
    pos = tail_mask & (env > 0.0)
    if pos.sum() < 2:
        # envelope died inside the window: nothing left to integrate
        info["tail_estimate"] = 0.0
        return _symmetrize_checked(K_end), info, K
    slope = float(np.polyfit(ts[pos], np.log(env[pos]), 1)[0])
    info["decay_slope"] = slope
    if slope >= -1e-12:
        raise NoDecayDetected(
            f"integrand envelope does not decay on the window "
            f"(fitted rate {slope:.3e}); the spectrum is not stable for "
            "this time scale"
        )
    late = ts >= ts[-1] - 0.1 * span
    env_late = float(env[late].max())
    tail = 2.0 * env_late / abs(slope)
    info["tail_estimate"] = tail
    if tail > tail_tol * max(norm_k, 1e-300):
        raise WindowTooShort(
            f"estimated truncation tail {tail:.3e} exceeds "
            f"{tail_tol:g} * ||P0|| = {tail_tol * norm_k:.3e}; extend the "
            "window"
        )
    return _symmetrize_checked(K_end), info, K


def stationary_initial_condition(A, M, w: TimeScaleWindow, t0: float,
                                 tail_tol: float = TAIL_TOL,
                                 dense_step: float = 0.01,
                                 grid: Grid | None = None) -> np.ndarray:
    """Truncated improper integral P0 = integral over [t0, t_end) of
    Phi^T(s, t0) M(s) Phi(s, t0).

    The integrand-norm envelope must decay on the window (fitted log-slope
    < 0, else NoDecayDetected) and the extrapolated tail must stay below
    ``tail_tol`` times the accumulated value (else WindowTooShort).
    """
    A = _as_system(A)
    M = _as_cost(M)
    if abs(t0 - w.t0) > w.tol:
        raise InvalidParameter("t0 must be the window start")
    if grid is None:
        grid = build_grid(w, dense_step)
    P0, _, _ = _stationary_ic_with_info(A, M, w, t0, tail_tol, grid)
    return P0


def _backward_gramian_sweep(A: SystemMatrix, M: CostMatrix,
                            grid: Grid) -> np.ndarray:
    """P(t_i) = integral over [t_i, t_end) of Phi^T(s, t_i) M(s) Phi(s, t_i),
    by the backward recursion that never inverts a transition matrix:

        scattered: P(t) = (I + mu A)^T P(sigma(t)) (I + mu A) + mu M(t)
        dense:     P(t - h) = E^T P(t) E + K_h with E = expm(h A) and
                   K_h the one-step weighted Gramian (exact for the
                   piecewise-constant coefficients; K_h from one block
                   matrix exponential, cached across uniform steps).
    """
    G, n = len(grid), A.n
    P = np.zeros((G, n, n))
    eye = np.eye(n)
    cache: dict = {}
    for i in range(G - 2, -1, -1):
        t_i, t_n = float(grid.times[i]), float(grid.times[i + 1])
        m_i = float(grid.mus[i])
        if m_i > 0.0:
            B = eye + m_i * A.at(t_i)
            P[i] = B.T @ P[i + 1] @ B + m_i * M.at(t_i)
        else:
            P[i] = _backward_dense_step(A, M, P[i + 1], t_n, t_i, cache)
        P[i] = 0.5 * (P[i] + P[i].T)
    return P


def _gramian_step_pair(A_mat: np.ndarray, M_mat: np.ndarray,
                       h: float) -> tuple[np.ndarray, np.ndarray]:
    """(expm(h A), integral_0^h expm(s A^T) M expm(s A) ds) via one block
    matrix exponential."""
    n = A_mat.shape[0]
    H = np.block([[-A_mat.T, M_mat], [np.zeros((n, n)), A_mat]])
    E = expm(H * h)
    phi = E[n:, n:]
    K = phi.T @ E[:n, n:]
    return phi, 0.5 * (K + K.T)


def _backward_dense_step(A: SystemMatrix, M: CostMatrix, P: np.ndarray,
                         t_hi: float, t_lo: float, cache: dict) -> np.ndarray:
    """Pull the weighted Gramian back across a dense interval."""
    cuts = sorted({t_lo, *A.breakpoints_in(t_lo, t_hi)}, reverse=True)
    t = t_hi
    for cut in cuts:
        if cut >= t:
            continue
        h = t - cut
        A_here = A.at(cut)  # hold-last value rules [cut, t)
        M_here = M.at(cut) if M.is_constant else M.at(0.5 * (cut + t))
        key = (h, A.piece_index(cut))
        pair = cache.get(key) if M.is_constant else None
        if pair is None:
            pair = _gramian_step_pair(A_here, M_here, h)
            if M.is_constant:
                cache[key] = pair
        E, Kh = pair
        P = E.T @ P @ E + Kh
        t = cut
    return P


def solve_tsdle_stationary(A, M, w: TimeScaleWindow, t0: float,
                           tail_tol: float = TAIL_TOL,
                           dense_step: float = 0.01,
                           spot_tol: float = 1e-6,
                           grid: Grid | None = None) -> GramianSolution:
    """Dynamic Lyapunov solve seeded with the stationary initial matrix.

    Composes :func:`stationary_initial_condition` (which certifies decay
    and the truncation tail) with the dynamic solve; the combined solution
    equals the truncated improper integral based at each grid point and is
    evaluated by the inversion-free backward sweep, so non-regressive
    systems are handled.

    The result is recomputed directly from its integral form at three
    interior grid points with an independent clipped-window sweep and must
    agree within ``spot_tol`` relative.  When M is positive definite, every
    reported P(t) is checked positive definite (PositiveDefinitenessLost
    otherwise).  The terminal grid point is not reported: the windowed
    tail based there is empty and carries no information.
    """
    A = _as_system(A)
    M = _as_cost(M)
    if abs(t0 - w.t0) > w.tol:
        raise InvalidParameter("t0 must be the window start")
    if grid is None:
        grid = build_grid(w, dense_step)
    if len(grid) < 2:
        raise InvalidParameter("window too small for a stationary solve")

    P0_forward, info, K_cum = _stationary_ic_with_info(A, M, w, t0, tail_tol,
                                                       grid)
    P_stack = _backward_gramian_sweep(A, M, grid)

    # two-path agreement: backward sweep vs direct forward integrals
    scale0 = max(float(np.linalg.norm(P0_forward, "fro")), 1e-300)
    diffs = [float(np.linalg.norm(P_stack[0] - P0_forward, "fro")) / scale0]
    G = len(grid)
    for frac in (0.25, 0.5, 0.75):
        k = min(int(frac * (G - 1)), G - 2)
        if k <= 0:
            continue
        t_k = float(grid.times[k])
        sub_w = w.clip(t_k, w.t_end)
        sub_grid = build_grid(sub_w, grid.dense_step)
        sub_tm = sweep_transition(A, sub_grid)
        K_sub, _ = _cumulative_gramian(A, M, sub_grid, sub_tm)
        direct = K_sub[-1]
        scale = max(float(np.linalg.norm(direct, "fro")), 1e-300)
        diffs.append(
            float(np.linalg.norm(P_stack[k] - direct, "fro")) / scale
        )
    spot_max = max(diffs)
    if spot_max > spot_tol:
        raise SpotCheckFailed(
            f"stationary solution disagrees with its direct integral form "
            f"by {spot_max:.3e} relative (tolerance {spot_tol:g})"
        )

    residuals = _residual_stack(grid, A, M, P_stack)

    m_eigs = np.linalg.eigvalsh(M.at(t0))
    if m_eigs[0] > 0.0:
        mins = np.linalg.eigvalsh(P_stack[: G - 1])[:, 0]
        if float(mins.min()) <= 0.0:
            raise PositiveDefinitenessLost(
                "stationary solution lost positive definiteness "
                f"(min eigenvalue {float(mins.min()):.3e}); truncation too "
                "coarse"
            )

    # the absolute truncation tail contaminates every point; relative to
    # the remaining mass it grows toward the horizon (certified_through is
    # the last grid time where the estimated relative error stays below
    # spot_tol)
    remaining = np.linalg.norm(K_cum[-1] - K_cum[: G - 1], axis=(1, 2))
    ok = info["tail_estimate"] <= spot_tol * remaining
    if info["tail_estimate"] == 0.0:
        certified_through = float(grid.times[G - 2])
    elif not ok[0]:
        certified_through = float(grid.times[0])
    else:
        first_bad = int(np.argmin(ok)) if not ok.all() else G - 1
        certified_through = float(grid.times[first_bad - 1])

    meta = {
        "equation": "TSDLE-stationary",
        "horizon": w.t_end,
        "reported_through": float(grid.times[G - 2]),
        "certified_through": certified_through,
        "tail_bound": info["tail_estimate"],
        "decay_slope": info["decay_slope"],
        "spot_check_max": spot_max,
        "max_residual": _finite_max(residuals[: G - 1]),
        "dense_step": grid.dense_step,
    }
    return GramianSolution(
        times=grid.times[: G - 1].copy(),
        values=P_stack[: G - 1],
        initial=P_stack[0].copy(),
        residuals=residuals[: G - 1],
        meta=meta,
        grid=grid,
    )


# -- continuous / discrete adapters ------------------------------------------


def solve_cdle(A, M, P0, interval: tuple[float, float],
               dense_step: float = 0.005) -> GramianSolution:
    """Continuous specialization: the dynamic solve on a real interval."""
    w = make_canonical("reals", interval)
    sol = solve_tsdle(A, M, P0, w, w.t0, dense_step=dense_step)
    sol.meta["equation"] = "CDLE"
    return sol


def solve_ddle(A, M, P0, trange: tuple[int, int]) -> GramianSolution:
    """Discrete specialization on consecutive integers, cross-checked
    against the exact recursion P(t+1) = A_R^{-T} (P(t) - M(t)) A_R^{-1}."""
    w = make_canonical("integers", (float(trange[0]), float(trange[1])))
    sol = solve_tsdle(A, M, P0, w, w.t0, dense_step=1.0)
    sol.meta["equation"] = "DDLE"
    rec = ddle_recursion_solution(_as_system(A), _as_cost(M), sol.initial,
                                  sol.times)
    scale = max(float(np.abs(rec).max()), 1.0)
    diff = float(np.max(np.abs(sol.values - rec))) / scale
    sol.meta["recursion_check"] = diff
    if diff > 1e-8:
        raise SpotCheckFailed(
            f"transported solution differs from the exact recursion by "
            f"{diff:.3e} relative"
        )
    return sol


def ddle_recursion_solution(A: SystemMatrix, M: CostMatrix, P0: np.ndarray,
                            times: Sequence[float]) -> np.ndarray:
    """Exact step-by-step recursion for the discrete dynamic equation."""
    n = A.n
    out = np.empty((len(times), n, n))
    out[0] = P0
    for k in range(len(times) - 1):
        t = float(times[k])
        Ar = A.recursive_at(t)
        Q = out[k] - M.at(t)
        Y = np.linalg.solve(Ar.T, Q)
        out[k + 1] = np.linalg.solve(Ar.T, Y.T).T
    return out


def cdle_direct_solution(A: np.ndarray, M: np.ndarray, P0: np.ndarray,
                         t: float, t0: float = 0.0) -> np.ndarray:
    """Direct evaluation of the continuous closed form for constant A, M.

    Uses one block matrix exponential for the weighted Gramian integral
    (Van Loan's construction), entirely independent of the RK4/Simpson
    path:

        expm([[-A^T, M], [0, A]] s)[0:n, n:2n]  ->  F,
        K(s) = expm(A^T s) F = integral_0^s expm(A^T u) M expm(A u) du.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    n = A.shape[0]
    s = t - t0
    H = np.block([[-A.T, M], [np.zeros((n, n)), A]])
    E = expm(H * s)
    K = expm(A.T * s) @ E[:n, n:]
    phi = E[n:, n:]  # expm(A s)
    Y = np.linalg.solve(phi.T, P0 - K)
    return np.linalg.solve(phi.T, Y.T).T

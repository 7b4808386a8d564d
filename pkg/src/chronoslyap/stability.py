"""Spectral stability analysis on time-scale windows.

Membership in the (open) Hilger disk per graininess value, the conservative
static region attached to the maximal graininess, the averaged-logarithm
functional whose sign characterizes exponential stability of scalar modes,
and detection of degenerate-regressivity points 1 + mu(t) lambda = 0.

A finite window cannot evaluate a limsup: the functional is reported as the
windowed average together with a convergence diagnostic (the averages at
trailing window fractions and their spread).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EigenSolverFailure,
    InvalidParameter,
    ZeroRegressivityPoint,
)
from .timescale import Grid, TimeScaleWindow, build_grid
from .tscalc import TOL_REG
from .transition import SystemMatrix

#: Margin on strict disk membership so verdicts do not flip under rounding.
TOL_REGION = 1e-9

#: Trailing window fractions sampled by the convergence diagnostic.
DIAG_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class StabilityRegion:
    """Hilger disk parameters per grid point, plus the window maximum."""

    mu_max: float
    per_point: tuple[tuple[float, float], ...]  # (t, mu(t))

    @staticmethod
    def disk_params(mu: float) -> tuple[float, float] | None:
        """(center, radius) of the open disk; None means the open left
        half-plane (mu = 0)."""
        if mu == 0.0:
            return None
        return (-1.0 / mu, 1.0 / mu)


def stability_region(w: TimeScaleWindow, grid: Grid | None = None,
                     dense_step: float = 0.01) -> StabilityRegion:
    if grid is None:
        grid = build_grid(w, dense_step)
    return StabilityRegion(
        mu_max=float(grid.mus.max()),
        per_point=tuple(
            (float(t), float(m)) for t, m in zip(grid.times, grid.mus)
        ),
    )


def hilger_contains(lam: complex, mu: float) -> bool:
    """Strict membership of lam in the open Hilger disk for graininess mu.

    mu > 0: |lam + 1/mu| < 1/mu.  mu = 0: Re(lam) < 0 (the disk opens up
    into the left half-plane).
    """
    if mu < 0:
        raise InvalidParameter("mu must be >= 0")
    if mu == 0.0:
        return complex(lam).real < 0.0
    return abs(complex(lam) + 1.0 / mu) < 1.0 / mu


def hilger_boundary(mu: float, samples: int = 256) -> np.ndarray:
    """Sample points of the disk boundary (plot data)."""
    if mu <= 0:
        raise InvalidParameter("boundary sampling needs mu > 0")
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    return -1.0 / mu + np.exp(1j * theta) / mu


@dataclass(frozen=True)
class HminVerdict:
    """Membership of a spectrum in the static region of the maximal
    graininess; sufficient for stability, never necessary."""

    mu_max: float
    in_region: tuple[bool, ...]
    verdict: str  # all-in | partial | none


def hmin_verdict(A, w: TimeScaleWindow, grid: Grid | None = None,
                 dense_step: float = 0.01) -> HminVerdict:
    """Test every eigenvalue of A against the disk of the window's maximal
    graininess, with a margin of ``TOL_REGION`` on the strict inequality."""
    A_mat = A.constant if isinstance(A, SystemMatrix) else np.atleast_2d(
        np.asarray(A, dtype=float)
    )
    if A_mat is None:
        raise InvalidParameter("hmin verdict needs a constant system matrix")
    if grid is None:
        grid = build_grid(w, dense_step)
    mu_max = float(grid.mus.max())
    try:
        lam = np.linalg.eigvals(A_mat)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure("eigenvalue computation failed") from exc
    flags = []
    for z in lam:
        if mu_max == 0.0:
            flags.append(bool(-z.real > TOL_REGION))
        else:
            margin = 1.0 / mu_max - abs(z + 1.0 / mu_max)
            flags.append(bool(margin > TOL_REGION))
    n_in = sum(flags)
    verdict = "all-in" if n_in == len(flags) else (
        "none" if n_in == 0 else "partial"
    )
    return HminVerdict(mu_max=mu_max, in_region=tuple(flags), verdict=verdict)


@dataclass(frozen=True)
class GammaDiagnostic:
    """Windowed averages at trailing fractions of the window and their
    spread; ``converged`` means the spread is below 1e-3 of the value."""

    fraction_values: tuple[tuple[float, float], ...]
    spread: float
    converged: bool


def _gamma_increments(grid: Grid, lam: complex,
                      tol_reg: float = TOL_REG) -> np.ndarray:
    """Delta-integral increments of the averaged-logarithm integrand per
    grid interval: Re(lam) dt on dense intervals, log|1 + mu lam| across
    scattered points."""
    mus = grid.mus[:-1]
    dts = np.diff(grid.times)
    scat = mus > 0.0
    vals = 1.0 + mus[scat] * lam
    if np.any(np.abs(vals) <= tol_reg):
        raise ZeroRegressivityPoint(
            f"1 + mu*lambda vanishes on the grid for lambda = {lam}"
        )
    inc = np.where(scat, 0.0, complex(lam).real * dts)
    inc[scat] = np.log(np.abs(vals))
    return inc


def gamma_functional(lam: complex, w: TimeScaleWindow, t0: float | None = None,
                     grid: Grid | None = None,
                     dense_step: float = 0.01) -> tuple[float, GammaDiagnostic]:
    """Windowed estimate of the averaged-logarithm stability functional.

    The integrand is Re(lambda) where mu(t) = 0 and log|1 + mu(t) lambda| /
    mu(t) where mu(t) > 0; the returned value is the average of its delta
    integral over [t0, t_end].  Only this windowed estimate is claimed, not
    the limit; the diagnostic shows the averages over the trailing window
    fractions so callers can judge convergence.

    Raises ZeroRegressivityPoint when 1 + mu(t) lambda = 0 somewhere (the
    integrand is -infinity there by the log 0 convention).
    """
    if grid is None:
        grid = build_grid(w, dense_step)
    if t0 is None:
        t0 = w.t0
    i0 = grid.index_of(t0)
    span = float(grid.times[-1]) - float(grid.times[i0])
    if span <= 0:
        raise InvalidParameter("gamma functional needs t_end > t0")
    inc = _gamma_increments(grid, lam)
    cum = np.concatenate([[0.0], np.cumsum(inc)])  # aligned with grid points

    fraction_values = []
    for f in DIAG_FRACTIONS:
        target = float(grid.times[i0]) + f * span
        j = int(np.searchsorted(grid.times, target + w.tol)) - 1
        j = max(j, i0 + 1)
        avg = (cum[j] - cum[i0]) / (float(grid.times[j]) - float(grid.times[i0]))
        fraction_values.append((f, float(avg)))
    value = fraction_values[-1][1]
    vals = [v for _, v in fraction_values]
    spread = max(vals) - min(vals)
    converged = spread <= 1e-3 * max(abs(value), 1e-300)
    return value, GammaDiagnostic(tuple(fraction_values), float(spread),
                                  bool(converged))


def s_r_detect(lam: float, w: TimeScaleWindow, grid: Grid | None = None,
               dense_step: float = 0.01,
               tol_reg: float = TOL_REG) -> list[float]:
    """Grid points where 1 + mu(t) lambda = 0 within tolerance.

    Degenerate regressivity kills scalar modes in finite time, which is a
    stability mechanism in its own right; a finite window can only evidence
    the required infinitude of such points, not prove it.
    """
    if grid is None:
        grid = build_grid(w, dense_step)
    hits = []
    for t, m in zip(grid.times, grid.mus):
        if m > 0.0 and abs(1.0 + m * lam) <= tol_reg:
            hits.append(float(t))
    return hits


@dataclass(frozen=True)
class EigenEntry:
    """Per-eigenvalue findings of a stability report."""

    lam: complex
    in_hmin: bool
    gamma: float | None          # None when hits make the functional -inf
    diagnostic: GammaDiagnostic | None
    s_r_hits: tuple[float, ...]
    reg_min: float               # min over grid of |1 + mu lam|
    reg_max: float
    mechanism: str               # negative-average | degenerate | none


@dataclass(frozen=True)
class StabilityReport:
    """Aggregated spectral stability findings for a constant system."""

    spectrum: np.ndarray
    hmin: HminVerdict
    entries: tuple[EigenEntry, ...]
    verdict: str
    notes: tuple[str, ...]

    @property
    def s_r_hits(self) -> list[tuple[float, complex]]:
        return [(t, e.lam) for e in self.entries for t in e.s_r_hits]


def stability_report(A, w: TimeScaleWindow, grid: Grid | None = None,
                     dense_step: float = 0.01,
                     t0: float | None = None) -> StabilityReport:
    """Spectrum, static-region membership, averaged-logarithm estimates,
    degenerate-regressivity hits and a combined verdict.

    The verdict reads "exponential stability indicated" when the whole
    spectrum sits in the static region, or when every eigenvalue either has
    a converged negative windowed average or hits degenerate regressivity
    throughout the window.  It is an indication, not a certificate.
    """
    A = A if isinstance(A, SystemMatrix) else SystemMatrix.from_constant(A)
    if not A.is_constant:
        raise InvalidParameter("stability report requires constant A")
    if grid is None:
        grid = build_grid(w, dense_step)
    try:
        spectrum = np.linalg.eigvals(A.constant)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure("eigenvalue computation failed") from exc
    hmin = hmin_verdict(A, w, grid=grid)

    entries = []
    for k, lam in enumerate(spectrum):
        lam_c = complex(lam)
        hits: tuple[float, ...] = ()
        if abs(lam_c.imag) <= 1e-14:
            hits = tuple(s_r_detect(lam_c.real, w, grid=grid))
        reg_vals = np.abs(1.0 + grid.mus[:-1] * lam_c)
        reg_min = float(reg_vals.min()) if len(reg_vals) else 1.0
        reg_max = float(reg_vals.max()) if len(reg_vals) else 1.0
        if hits:
            gamma, diag = None, None
            mechanism = "degenerate"
        else:
            gamma, diag = gamma_functional(lam_c, w, t0=t0, grid=grid)
            mechanism = (
                "negative-average" if gamma < 0 and diag.converged else "none"
            )
        entries.append(EigenEntry(
            lam=lam_c, in_hmin=hmin.in_region[k], gamma=gamma,
            diagnostic=diag, s_r_hits=hits, reg_min=reg_min,
            reg_max=reg_max, mechanism=mechanism,
        ))

    covered = all(e.mechanism != "none" for e in entries)
    indicated = hmin.verdict == "all-in" or covered
    verdict = (
        "exponential stability indicated" if indicated
        else "exponential stability not indicated"
    )
    notes = [
        "static-region membership is sufficient, never necessary",
        "averaged-logarithm values are windowed estimates, not limits",
    ]
    if any(e.s_r_hits for e in entries):
        notes.append(
            "degenerate-regressivity membership needs infinitely many "
            "hits; a finite window can only evidence it"
        )
    return StabilityReport(
        spectrum=spectrum, hmin=hmin, entries=tuple(entries),
        verdict=verdict, notes=tuple(notes),
    )

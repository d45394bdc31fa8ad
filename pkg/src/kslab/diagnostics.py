"""Norms, coupled functionals, Lyapunov monitoring, and decay-rate fits.

All quadrature is the midpoint rule on cell-centered fields; gradients of
the signal are reconstructed from face differences so the monitored
functionals see exactly the discrete fields the solver evolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .params import Grid, Parameters, SourceFunction, State
from .thresholds import CoefficientSet3D, CoefficientSet45D, ThresholdReport

__all__ = [
    "lp_norm",
    "grad_magnitude_squared",
    "functional_z3",
    "functional_z45",
    "lyapunov_H",
    "DiagnosticsSeries",
    "CSV_COLUMNS",
    "MassBoundResult",
    "mass_bound_check",
    "DecayFit",
    "fit_decay",
    "h_monotonicity_check",
    "AuditResult",
    "convergence_audit",
]

SUPPORTED_P = (1, 2, 3, 4, 6, math.inf)


def lp_norm(fld: np.ndarray, p, grid: Grid) -> float:
    """Midpoint-rule L^p norm; max norm for p = inf."""
    if p not in SUPPORTED_P:
        raise ValueError(f"unsupported norm order p = {p}")
    fld = np.asarray(fld, dtype=float)
    if p == math.inf:
        return float(np.max(np.abs(fld)))
    return float(
        (np.sum(np.abs(fld) ** p) * grid.cell_volume) ** (1.0 / p)
    )


def grad_magnitude_squared(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell-centered |grad v|^2 from averaged face differences.

    Boundary faces carry zero difference, matching the no-flux closure of
    the solver, so the reconstruction is consistent with the dynamics.
    """
    v = np.asarray(v, dtype=float)
    total = np.zeros_like(v)
    for axis in range(grid.dim):
        faces = np.diff(v, axis=axis) / grid.spacing[axis]
        padded = np.zeros(
            tuple(c + 1 if k == axis else c for k, c in enumerate(v.shape))
        )
        inner = tuple(
            slice(1, -1) if k == axis else slice(None) for k in range(v.ndim)
        )
        padded[inner] = faces
        lo = tuple(
            slice(None, -1) if k == axis else slice(None) for k in range(v.ndim)
        )
        hi = tuple(
            slice(1, None) if k == axis else slice(None) for k in range(v.ndim)
        )
        total += (0.5 * (padded[lo] + padded[hi])) ** 2
    return total


def functional_z3(state: State, grid: Grid, c: CoefficientSet3D) -> float:
    """delta1 int u^2 + delta2 int u |grad v|^2 + delta3 int |grad v|^4."""
    g2 = grad_magnitude_squared(state.v, grid)
    u = state.u
    integrand = c.delta1 * u * u + c.delta2 * u * g2 + c.delta3 * g2 * g2
    return float(np.sum(integrand) * grid.cell_volume)


def functional_z45(state: State, grid: Grid, c: CoefficientSet45D) -> float:
    """Four-term coupled functional with cubic leading weight."""
    g2 = grad_magnitude_squared(state.v, grid)
    u = state.u
    integrand = (
        c.delta1 * u**3
        + c.delta2 * u * u * g2
        + c.delta3 * u * g2 * g2
        + c.delta4 * g2**3
    )
    return float(np.sum(integrand) * grid.cell_volume)


def lyapunov_H(state: State, params: Parameters, grid: Grid) -> float:
    """Entropy-like distance to the positive equilibrium.

    H = int (u - c - c ln(u/c)) + delta int (v - alpha kappa/(beta mu))^2
    with c = kappa/mu and delta = kappa chi^2 / (8 d1 d2 mu); nonnegative,
    zero exactly at the equilibrium.  Requires kappa > 0 and u > 0.
    """
    if params.kappa <= 0.0:
        raise ValueError("H is defined only for kappa > 0")
    u = state.u
    if np.min(u) <= 0.0:
        raise ValueError("H undefined at vacuum")
    c = params.kappa / params.mu
    v_eq = params.alpha * params.kappa / (params.beta * params.mu)
    delta = params.kappa * params.chi**2 / (
        8.0 * params.d1 * params.d2 * params.mu
    )
    entropy = u - c - c * np.log(u / c)
    quad = (state.v - v_eq) ** 2
    return float((np.sum(entropy) + delta * np.sum(quad)) * grid.cell_volume)


CSV_COLUMNS = (
    "t", "mass_u", "L2_u", "L3_u", "Linf_u", "L2_gradv", "L4_gradv",
    "L6_gradv", "z3", "z45", "H", "clamp_count",
)

# Below this pointwise floor on u the entropy term is treated as undefined
# (vacuum) rather than evaluated into the log divergence.
VACUUM_FLOOR = 1e-12


@dataclass
class DiagnosticsSeries:
    """Time-indexed record of norms and functionals along one run.

    The deviation norms from the positive equilibrium are carried as
    supplementary arrays for the convergence audit; they are not part of
    the CSV table.
    """

    times: List[float] = field(default_factory=list)
    mass_u: List[float] = field(default_factory=list)
    l2_u: List[float] = field(default_factory=list)
    l3_u: List[float] = field(default_factory=list)
    linf_u: List[float] = field(default_factory=list)
    l2_gradv: List[float] = field(default_factory=list)
    l4_gradv: List[float] = field(default_factory=list)
    l6_gradv: List[float] = field(default_factory=list)
    z3: List[float] = field(default_factory=list)
    z45: List[float] = field(default_factory=list)
    H: List[float] = field(default_factory=list)
    clamp_count: List[int] = field(default_factory=list)
    linf_v: List[float] = field(default_factory=list)
    dev_linf_u: List[float] = field(default_factory=list)
    dev_linf_v: List[float] = field(default_factory=list)

    def sample(
        self,
        state: State,
        grid: Grid,
        params: Parameters,
        clamp_total: int,
        coeffs3: Optional[CoefficientSet3D] = None,
        coeffs45: Optional[CoefficientSet45D] = None,
    ) -> None:
        u, v = state.u, state.v
        self.times.append(float(state.t))
        self.mass_u.append(float(np.sum(u) * grid.cell_volume))
        self.l2_u.append(lp_norm(u, 2, grid))
        self.l3_u.append(lp_norm(u, 3, grid))
        self.linf_u.append(lp_norm(u, math.inf, grid))
        g2 = grad_magnitude_squared(v, grid)
        gmag = np.sqrt(g2)
        self.l2_gradv.append(lp_norm(gmag, 2, grid))
        self.l4_gradv.append(lp_norm(gmag, 4, grid))
        self.l6_gradv.append(lp_norm(gmag, 6, grid))
        self.z3.append(
            functional_z3(state, grid, coeffs3) if coeffs3 else math.nan
        )
        self.z45.append(
            functional_z45(state, grid, coeffs45) if coeffs45 else math.nan
        )
        if params.kappa > 0.0 and np.min(u) > VACUUM_FLOOR:
            self.H.append(lyapunov_H(state, params, grid))
        else:
            self.H.append(math.nan)
        self.clamp_count.append(int(clamp_total))
        self.linf_v.append(lp_norm(v, math.inf, grid))
        if params.kappa > 0.0:
            u_eq = params.kappa / params.mu
            v_eq = params.alpha * params.kappa / (params.beta * params.mu)
            self.dev_linf_u.append(float(np.max(np.abs(u - u_eq))))
            self.dev_linf_v.append(float(np.max(np.abs(v - v_eq))))
        else:
            self.dev_linf_u.append(math.nan)
            self.dev_linf_v.append(math.nan)

    def column(self, name: str) -> np.ndarray:
        key = {
            "t": "times", "mass_u": "mass_u", "L2_u": "l2_u", "L3_u": "l3_u",
            "Linf_u": "linf_u", "L2_gradv": "l2_gradv", "L4_gradv": "l4_gradv",
            "L6_gradv": "l6_gradv", "z3": "z3", "z45": "z45", "H": "H",
            "clamp_count": "clamp_count", "Linf_v": "linf_v",
            "dev_linf_u": "dev_linf_u", "dev_linf_v": "dev_linf_v",
        }.get(name)
        if key is None:
            raise KeyError(f"unknown diagnostics column {name!r}")
        return np.asarray(getattr(self, key), dtype=float)

    def to_csv(self) -> str:
        """Render the specified diagnostic table; empty cells for undefined
        functionals, full double precision otherwise."""
        lines = [",".join(CSV_COLUMNS)]
        for i in range(len(self.times)):
            row = []
            for name in CSV_COLUMNS:
                if name == "clamp_count":
                    row.append(str(self.clamp_count[i]))
                    continue
                value = self.column(name)[i]
                row.append("" if math.isnan(value) else "%.17e" % value)
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MassBoundResult:
    passed: bool
    bound: float
    worst_margin: float
    first_violation: Optional[int]


def mass_bound_check(
    series: DiagnosticsSeries,
    source: SourceFunction,
    u0_mass: float,
    volume: float,
    tol: float = 1e-6,
) -> MassBoundResult:
    """Check the integrated-density ceiling from the damping certificate.

    The total mass may never exceed ||u0||_1 + (a + 1/(4 mu)) |Omega| for
    any certificate pair (a, mu) of the source.
    """
    if source.kind == "zero":
        raise ValueError("mass bound needs a damping certificate; f == 0 has none")
    bound = u0_mass + (source.a_cert + 1.0 / (4.0 * source.mu_cert)) * volume + tol
    masses = np.asarray(series.mass_u, dtype=float)
    margins = bound - masses
    worst = float(np.min(margins)) if margins.size else math.inf
    bad = np.nonzero(margins < 0.0)[0]
    return MassBoundResult(
        passed=bad.size == 0,
        bound=bound,
        worst_margin=worst,
        first_violation=int(bad[0]) if bad.size else None,
    )


@dataclass(frozen=True)
class DecayFit:
    model: str  # "exponential", "algebraic", or "none"
    rate: float
    goodness: float
    window: Tuple[float, float]


def _line_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope and R^2; zero-variance targets score 0."""
    sxx = np.sum((x - x.mean()) ** 2)
    syy = np.sum((y - y.mean()) ** 2)
    if syy == 0.0 or sxx == 0.0:
        return 0.0, 0.0
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    resid = y - (y.mean() + slope * (x - x.mean()))
    r2 = 1.0 - float(np.sum(resid**2) / syy)
    return slope, max(0.0, min(1.0, r2))


def fit_decay(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> DecayFit:
    """Fit exponential (ln y vs t) and algebraic (ln y vs ln(1+t)) decay.

    The model with the higher coefficient of determination wins; both
    below 0.9 means no credible decay model ("none").
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t[0]), float(t[-1])) if t.size else (0.0, 0.0)
    mask = (t >= window[0]) & (t <= window[1])
    t, y = t[mask], y[mask]
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in window, got {t.size}")
    if np.any(y <= 0.0):
        raise ValueError("decay fitting requires strictly positive values")
    log_y = np.log(y)
    slope_exp, r2_exp = _line_fit(t, log_y)
    slope_alg, r2_alg = _line_fit(np.log1p(t), log_y)
    if r2_exp < 0.9 and r2_alg < 0.9:
        return DecayFit(model="none", rate=0.0, goodness=0.0, window=window)
    if r2_exp >= r2_alg:
        return DecayFit(
            model="exponential", rate=-slope_exp, goodness=r2_exp, window=window
        )
    return DecayFit(
        model="algebraic", rate=-slope_alg, goodness=r2_alg, window=window
    )


def h_monotonicity_check(
    series: DiagnosticsSeries, tol_factor: float = 1e-8
) -> Tuple[bool, float]:
    """Sampled H(t) may only increase by discretization noise.

    Allows tol_factor * H(0) of increase per elapsed step between samples;
    returns (ok, worst increase observed).
    """
    h = np.asarray(series.H, dtype=float)
    valid = ~np.isnan(h)
    h = h[valid]
    if h.size < 2:
        return True, 0.0
    increments = np.diff(h)
    worst = float(np.max(increments))
    return bool(worst <= tol_factor * h[0]), worst


@dataclass(frozen=True)
class AuditResult:
    regime: str
    passed: bool
    details: dict


def convergence_audit(
    series: DiagnosticsSeries,
    params: Parameters,
    threshold_report: Optional[ThresholdReport],
    dim: int,
    window: Optional[Tuple[float, float]] = None,
    tolerance: float = 0.0,
) -> AuditResult:
    """Check fitted decay rates against the regime's guaranteed rates.

    kappa > 0: exponential rate of the equilibrium deviation must reach
    gamma (a conservative lower bound, so fits normally clear it widely).
    kappa = 0: algebraic exponents of the sup norms must reach 1/(dim+1).
    kappa < 0: exponential rates must reach -kappa/(dim+1) for u and
    min(beta, -kappa)/(2 (dim+1)) for v.
    """
    t = np.asarray(series.times, dtype=float)
    if window is None:
        window = (float(t[-1]) / 2.0, float(t[-1]))
    details: dict = {"window": window}
    if params.kappa > 0.0:
        if threshold_report is None or threshold_report.gamma is None:
            raise ValueError("kappa > 0 audit needs a report carrying gamma")
        dev = series.column("dev_linf_u") + series.column("dev_linf_v")
        fit = fit_decay(t, dev, window)
        details["fit"] = fit
        details["gamma"] = threshold_report.gamma
        ok = (
            fit.model == "exponential"
            and fit.rate >= threshold_report.gamma - tolerance
        )
        return AuditResult(regime="kappa>0", passed=ok, details=details)
    if params.kappa == 0.0:
        target = 1.0 / (dim + 1.0)
        fit_u = fit_decay(t, series.column("Linf_u"), window)
        fit_v = fit_decay(t, series.column("Linf_v"), window)
        details.update(fit_u=fit_u, fit_v=fit_v, target=target)
        ok = (
            fit_u.model == "algebraic"
            and fit_u.rate >= target - tolerance
            and fit_v.model == "algebraic"
            and fit_v.rate >= target - tolerance
        )
        return AuditResult(regime="kappa=0", passed=ok, details=details)
    target_u = -params.kappa / (dim + 1.0)
    target_v = min(params.beta, -params.kappa) / (2.0 * (dim + 1.0))
    fit_u = fit_decay(t, series.column("Linf_u"), window)
    fit_v = fit_decay(t, series.column("Linf_v"), window)
    details.update(fit_u=fit_u, fit_v=fit_v, target_u=target_u, target_v=target_v)
    ok = (
        fit_u.model == "exponential"
        and fit_u.rate >= target_u - tolerance
        and fit_v.model == "exponential"
        and fit_v.rate >= target_v - tolerance
    )
    return AuditResult(regime="kappa<0", passed=ok, details=details)

"""Shared domain types: physical parameters, growth sources, grids, and states.

Everything here is an immutable value object; the rest of the package treats
these as plain data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "Parameters",
    "SourceFunction",
    "Grid",
    "State",
    "validate",
    "source_eval",
    "CERT_SAMPLE_GRID",
]


@dataclass(frozen=True)
class Parameters:
    """Physical constants of the chemotaxis-growth system.

    d1, d2   cell / signal diffusion rates (> 0)
    chi      chemotactic sensitivity (any sign; chi < 0 is repulsion)
    alpha    signal production rate (> 0)
    beta     signal degradation rate (> 0)
    kappa    linear birth rate (any sign)
    mu       quadratic damping rate (> 0)
    a        source ceiling constant (>= 0)
    n        spatial dimension (>= 1)
    """

    d1: float
    d2: float
    chi: float
    alpha: float
    beta: float
    kappa: float
    mu: float
    a: float = 0.0
    n: int = 3


def validate(params: Parameters) -> Parameters:
    """Check positivity invariants; returns the parameters unchanged.

    Idempotent by construction: validation never rewrites values.
    """
    for name in ("d1", "d2", "alpha", "beta", "mu"):
        value = getattr(params, name)
        if not np.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be positive, got {value}")
    if not np.isfinite(params.a) or params.a < 0.0:
        raise ValueError(f"a must be nonnegative, got {params.a}")
    if int(params.n) != params.n or params.n < 1:
        raise ValueError(f"n must be a positive integer, got {params.n}")
    for name in ("chi", "kappa"):
        if not np.isfinite(getattr(params, name)):
            raise ValueError(f"{name} must be finite")
    return params


# Sample grid for the (a, mu) certificate check: s = 0 plus a geometric
# ladder from 1e-3 to 1e6 (31 points total).  Decidable and cheap; a false
# certificate only weakens guarantees the caller opted into.
CERT_SAMPLE_GRID: np.ndarray = np.concatenate(
    [[0.0], np.geomspace(1e-3, 1e6, 30)]
)


@dataclass(frozen=True)
class SourceFunction:
    """Growth source f(u) together with its quadratic-damping certificate.

    The certificate (a_cert, mu_cert) asserts f(s) <= a_cert - mu_cert * s^2
    for all s >= 0; downstream bounds consume the certificate, not f itself.

    kind is one of:
      "standard-logistic"  f(s) = kappa*s - mu*s^2
      "custom"             user-supplied map with a declared certificate
      "zero"               f == 0, no certificate (discretization validation
                           only; f == 0 admits no quadratic-damping ceiling)
    """

    kind: str
    kappa: float = 0.0
    mu: float = 0.0
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    a_cert: float = 0.0
    mu_cert: float = 0.0

    @staticmethod
    def standard_logistic(kappa: float, mu: float) -> "SourceFunction":
        """Logistic source kappa*s - mu*s^2 with its tight vertex certificate.

        For kappa > 0 the sharpest pair keeping half the damping is
        (a, mu/2) with a = kappa^2/(2 mu): equality holds at s = kappa/mu.
        For kappa <= 0 the full damping survives with a = 0.
        """
        if mu <= 0.0:
            raise ValueError(f"mu must be positive, got {mu}")
        if kappa > 0.0:
            a_cert, mu_cert = kappa * kappa / (2.0 * mu), mu / 2.0
        else:
            a_cert, mu_cert = 0.0, mu
        return SourceFunction(
            kind="standard-logistic",
            kappa=kappa,
            mu=mu,
            a_cert=a_cert,
            mu_cert=mu_cert,
        )

    @staticmethod
    def custom(
        fn: Callable[[np.ndarray], np.ndarray], a_cert: float, mu_cert: float
    ) -> "SourceFunction":
        if a_cert < 0.0 or mu_cert <= 0.0:
            raise ValueError("certificate requires a >= 0 and mu > 0")
        src = SourceFunction(
            kind="custom", fn=fn, a_cert=a_cert, mu_cert=mu_cert
        )
        src.check_certificate()
        return src

    @staticmethod
    def zero() -> "SourceFunction":
        return SourceFunction(kind="zero")

    def __call__(self, s):
        if self.kind == "standard-logistic":
            return self.kappa * s - self.mu * s * s
        if self.kind == "zero":
            return np.zeros_like(np.asarray(s, dtype=float))
        return self.fn(s)

    def check_certificate(self, samples: np.ndarray = None) -> None:
        """Confirm f(0) >= 0 and f(s) <= a - mu_cert s^2 on the sample grid."""
        if self.kind == "zero":
            return
        s = CERT_SAMPLE_GRID if samples is None else np.asarray(samples, float)
        fs = np.asarray(self(s), dtype=float)
        f0 = float(np.asarray(self(np.asarray([0.0]))).ravel()[0])
        if f0 < 0.0:
            raise ValueError(f"source must satisfy f(0) >= 0, got f(0) = {f0}")
        ceiling = self.a_cert - self.mu_cert * s * s
        scale = np.maximum(np.abs(fs), np.abs(ceiling)) + 1.0
        bad = fs > ceiling + 1e-12 * scale
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValueError(
                "certificate violated at s = %g: f(s) = %g > %g"
                % (s[k], fs[k], ceiling[k])
            )

    def lipschitz_bound(self, u: np.ndarray) -> float:
        """Local Lipschitz estimate of f on the values of u (for dt control)."""
        if self.kind == "standard-logistic":
            return float(np.max(np.abs(self.kappa - 2.0 * self.mu * u)))
        if self.kind == "zero":
            return 0.0
        du = 1e-6 * (1.0 + np.abs(u))
        deriv = (self(u + du) - self(np.maximum(u - du, 0.0))) / (2.0 * du)
        return float(np.max(np.abs(deriv)))


def source_eval(f: SourceFunction, s: float) -> float:
    """Evaluate the source at a nonnegative density."""
    if s < 0.0:
        raise ValueError(f"source argument must be nonnegative, got {s}")
    return float(f(s))


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular/box grid with cell-centered fields.

    extents  side lengths per axis
    cells    cell counts per axis (>= 4 each)
    """

    dim: int
    extents: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if len(self.extents) != self.dim or len(self.cells) != self.dim:
            raise ValueError("extents and cells must have one entry per axis")
        if any(e <= 0 for e in self.extents):
            raise ValueError("extents must be positive")
        if any(int(c) != c or c < 4 for c in self.cells):
            raise ValueError("need at least 4 cells per axis")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extents, self.cells))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self):
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass(frozen=True)
class State:
    """Cell density u, signal v, and the current time."""

    u: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must live on the same grid")

    def check(self, grid: Grid) -> "State":
        if self.u.shape != grid.cells:
            raise ValueError(
                f"field shape {self.u.shape} does not match grid {grid.cells}"
            )
        if np.min(self.u) < 0.0 or np.min(self.v) < 0.0:
            raise ValueError("u and v must be nonnegative")
        return self

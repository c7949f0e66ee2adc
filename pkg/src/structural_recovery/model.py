"""Closed-form structural recovery model.

In the Merton setting with a one-factor correlated diffusion, the expected
recovery rate of a homogeneous portfolio depends on its default probability
only through a single compound parameter ``B = sqrt((1 - c) sigma**2 T)``:

    RR(PD) = exp(-B q + B**2/2) * Phi(q - B) / PD,   q = Phi^{-1}(PD)

and the expected loss is ``L(PD) = PD * (1 - RR(PD))``.  Everything here is
evaluated in log space, so PD values down to 1e-12 keep full relative
accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigError, DomainError
from .numerics import log_norm_cdf, norm_cdf, norm_cdf_inv

__all__ = [
    "ModelParams",
    "CurvePoint",
    "compound_b",
    "structural_rr",
    "log_structural_rr",
    "expected_loss",
    "sample_curves",
    "default_pd_grid",
    "CURVE_FAMILY_B",
]

#: B values of the reference curve family (bottom to top in the loss panel)
CURVE_FAMILY_B = (0.2, 0.6, 1.0, 1.4)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the correlated asset-value diffusion.

    One instance describes a whole homogeneous portfolio: every firm shares
    the same drift, volatility, market correlation, initial asset value and
    face value of debt.

    Attributes
    ----------
    mu : float
        Drift per unit time.
    sigma : float
        Volatility per sqrt(time), > 0.
    c : float
        Correlation with the market factor, in [0, 1).
    T : float
        Model-maturity in years, > 0.
    V0 : float
        Initial asset value, > 0.
    F : float
        Face value of the zero-coupon debt, > 0.
    """

    mu: float = 0.0
    sigma: float = 0.2
    c: float = 0.0
    T: float = 1.0
    V0: float = 1.0
    F: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if not self.T > 0:
            raise ConfigError(f"T must be > 0, got {self.T}")
        if not self.V0 > 0 or not self.F > 0:
            raise ConfigError(f"V0 and F must be > 0, got V0={self.V0}, F={self.F}")
        if not 0.0 <= self.c < 1.0:
            raise ConfigError(f"c must lie in [0, 1), got {self.c}")
        if not math.isfinite(self.mu):
            raise ConfigError(f"mu must be finite, got {self.mu}")

    @property
    def log_drift(self) -> float:
        """Mean of ln(V(T)/V0): (mu - sigma**2/2) T."""
        return (self.mu - 0.5 * self.sigma**2) * self.T

    @property
    def market_scale(self) -> float:
        """Std. dev. of the market part of ln V(T): sqrt(c) sigma sqrt(T)."""
        return math.sqrt(self.c) * self.sigma * math.sqrt(self.T)

    @property
    def idio_scale(self) -> float:
        """Std. dev. of the idiosyncratic part of ln V(T); equals B."""
        return math.sqrt(1.0 - self.c) * self.sigma * math.sqrt(self.T)

    def unconditional_pd(self) -> float:
        """P(V(T) < F) with the market factor integrated out."""
        z = (math.log(self.F / self.V0) - self.log_drift) / (self.sigma * math.sqrt(self.T))
        return norm_cdf(z)

    def conditional_pd(self, z_market):
        """Default probability given the standardized market shock."""
        z = np.asarray(z_market, dtype=float)
        x = (math.log(self.F / self.V0) - self.log_drift - self.market_scale * z) / self.idio_scale
        return norm_cdf(x)


@dataclass(frozen=True)
class CurvePoint:
    pd: float
    rr: float
    loss: float


def compound_b(params: ModelParams) -> float:
    """Compound parameter ``sqrt((1 - c) sigma**2 T)``."""
    return math.sqrt((1.0 - params.c) * params.sigma**2 * params.T)


def _check_b(b):
    b = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(b)) or np.any(b < 0):
        raise DomainError(f"B must be finite and >= 0, got {np.ravel(b)[:5].tolist()}")
    return b


def log_structural_rr(pd, b):
    """Natural log of the structural recovery rate; always <= 0.

    Raises
    ------
    DomainError
        If ``pd`` is outside (0, 1) or ``b`` is negative.
    """
    scalar = np.ndim(pd) == 0 and np.ndim(b) == 0
    q = np.asarray(norm_cdf_inv(pd), dtype=float)
    b = _check_b(b)
    pd = np.asarray(pd, dtype=float)
    q, b, pd = np.broadcast_arrays(q, b, pd)
    out = -b * q + 0.5 * b * b + log_norm_cdf(q - b) - np.log(pd)
    # rr <= 1 holds exactly; rounding may push log rr a few ulps above zero
    out = np.minimum(out, 0.0)
    out = np.where(b == 0.0, 0.0, out)
    return float(out) if scalar else out


def structural_rr(pd, b):
    """Expected recovery rate of a portfolio with default probability ``pd``.

    Parameters
    ----------
    pd : float or array_like
        Default probability, strictly inside (0, 1).
    b : float or array_like
        Compound parameter B >= 0.  ``b = 0`` returns the analytic limit 1.

    Returns
    -------
    float or ndarray
        Recovery rate in (0, 1].
    """
    log_rr = log_structural_rr(pd, b)
    return math.exp(log_rr) if isinstance(log_rr, float) else np.exp(log_rr)


def expected_loss(pd, b):
    """Expected portfolio loss ``pd * (1 - RR(pd))``, in [0, pd).

    ``expm1`` keeps the loss accurate when the recovery rate is close to 1
    (small ``b`` or small ``pd``).
    """
    log_rr = log_structural_rr(pd, b)
    loss = -np.asarray(pd, dtype=float) * np.expm1(log_rr) + 0.0  # drop -0.0
    return float(loss) if isinstance(log_rr, float) else loss


def default_pd_grid(n: int = 99, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    """Equally spaced PD grid avoiding the endpoint singularities."""
    return np.linspace(lo, hi, n)


def sample_curves(
    b_values: Iterable[float], grid: Sequence[float] | None = None
) -> list[tuple[float, list[CurvePoint]]]:
    """Recovery and loss curves for a family of B values.

    Parameters
    ----------
    b_values : iterable of float
        Compound parameters, each >= 0.
    grid : sequence of float, optional
        Strictly increasing PD values in (0, 1); defaults to
        :func:`default_pd_grid`.

    Returns
    -------
    list of (b, list of CurvePoint)
    """
    grid = default_pd_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    curves = []
    for b in b_values:
        b = float(b)
        rr = np.atleast_1d(structural_rr(grid, b))
        loss = np.atleast_1d(expected_loss(grid, b))
        points = [CurvePoint(float(p), float(r), float(l)) for p, r, l in zip(grid, rr, loss)]
        curves.append((b, points))
    return curves

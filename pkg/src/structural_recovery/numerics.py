"""Normal-distribution special functions and seeded random substreams.

Phi is evaluated as ``erfc(-x/sqrt 2)/2`` with the C library ``erfc``.  That
route keeps full relative accuracy in the lower tail and, unlike
``scipy.special.ndtr``, shows no ordering inversions between adjacent
floating-point inputs.  log Phi goes through the scaled function ``erfcx`` in
the left tail, and the quantile function is ``scipy.special.ndtri``.

Random numbers come from counter-based Philox generators keyed by
``(master_seed, stream_index)``, so any realization can be regenerated on
its own and parallel runs reproduce serial ones bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError

__all__ = [
    "SeedSpec",
    "norm_cdf",
    "norm_cdf_inv",
    "log_norm_cdf",
    "norm_pdf",
    "substream",
]

_UINT64_MAX = 2**64 - 1
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_LOG_TAIL_SWITCH = -1.0

_erfc = np.frompyfunc(math.erfc, 1, 1)


def _return(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def norm_cdf(x):
    """Standard normal CDF.

    Parameters
    ----------
    x : float or array_like
        Finite evaluation points.

    Returns
    -------
    float or ndarray
        Phi(x), same shape as ``x``.
    """
    arr = np.asarray(x, dtype=float)
    # multiplying by a positive constant preserves ordering under rounding
    values = 0.5 * np.asarray(_erfc(-arr * _INV_SQRT2), dtype=float)
    return _return(values, arr.ndim == 0)


def log_norm_cdf(x):
    """Natural log of the standard normal CDF, accurate in the far left tail.

    Left of -1 it uses ``log Phi(x) = log(erfcx(t)/2) - t**2`` with
    ``t = -x/sqrt 2``; ``erfcx`` switches to its asymptotic continued
    fraction for large ``t``, so nothing underflows even far below -37.
    Elsewhere ``log1p(-Phi(-x))`` keeps the tiny values near ``x = 8``.
    """
    arr = np.asarray(x, dtype=float)
    t = -arr * _INV_SQRT2
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.log(0.5 * special.erfcx(t)) - t * t
        body = np.log1p(-0.5 * special.erfc(-t))
    values = np.where(arr < _LOG_TAIL_SWITCH, tail, body)
    return _return(values, arr.ndim == 0)


def norm_pdf(x):
    """Standard normal density."""
    arr = np.asarray(x, dtype=float)
    return _return(np.exp(-0.5 * arr * arr) / np.sqrt(2.0 * np.pi), arr.ndim == 0)


def norm_cdf_inv(p):
    """Inverse of the standard normal CDF.

    Parameters
    ----------
    p : float or array_like
        Probabilities strictly inside (0, 1).

    Raises
    ------
    DomainError
        If any ``p`` is <= 0, >= 1 or NaN.  A default probability of exactly
        0 or 1 has no finite quantile and must be handled by the caller.
    """
    arr = np.asarray(p, dtype=float)
    bad = ~((arr > 0.0) & (arr < 1.0))
    if np.any(bad):
        offending = arr[bad] if arr.ndim else arr
        raise DomainError(
            f"norm_cdf_inv requires 0 < p < 1, got {np.ravel(offending)[:5].tolist()}"
        )
    return _return(special.ndtri(arr), arr.ndim == 0)


@dataclass(frozen=True)
class SeedSpec:
    """Key of one random substream.

    Attributes
    ----------
    master_seed : int
        Unsigned 64-bit master seed shared by a whole run.
    stream_index : int
        Non-negative index selecting an independent substream.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _UINT64_MAX:
            raise DomainError(f"master_seed must fit in uint64, got {self.master_seed}")
        if int(self.stream_index) < 0:
            raise DomainError(f"stream_index must be >= 0, got {self.stream_index}")

    def child(self, stream_index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_index)


def substream(seed: SeedSpec) -> np.random.Generator:
    """Deterministic generator for the substream named by ``seed``.

    The stream index enters the ``SeedSequence`` spawn key, which makes the
    mapping injective; Philox is counter based, so generation cost does not
    depend on the index.  The returned generator must not be shared between
    threads.
    """
    ss = np.random.SeedSequence(int(seed.master_seed), spawn_key=(int(seed.stream_index),))
    return np.random.Generator(np.random.Philox(ss))

"""Standardized statistic and one-sided level-alpha decision."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .ustat import as_data_matrix, t_statistic
from .variance import sigma_hat_null


class DegenerateScaleError(ArithmeticError):
    """The plug-in null scale is not positive, so T_n cannot be standardized."""


# Acklam's rational approximation coefficients.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x: float) -> float:
    """Upper tail 1 - Phi(x), accurate for large x."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF.

    A rational approximation (relative error about 1e-9) followed by one
    Halley step against ``erfc``, which brings the absolute error below 1e-14
    on the bulk of (0, 1).
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if q < _P_LOW:
        r = math.sqrt(-2.0 * math.log(q))
        x = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    elif q <= 1.0 - _P_LOW:
        s = q - 0.5
        r = s * s
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        r = math.sqrt(-2.0 * math.log1p(-q))
        x = -(((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    # Halley refinement; use the tail the point lies in to keep precision.
    if x > 0:
        err = (1.0 - q) - normal_sf(x)
    else:
        err = normal_cdf(x) - q
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass(frozen=True)
class TestOutcome:
    t: float
    sigma_hat: float
    statistic: float
    p_value: float
    reject: bool
    alpha: float
    n1: int
    n2: int
    p: int

    __test__ = False  # not a pytest class

    def as_record(self) -> dict:
        return asdict(self)


FIELDS = ("t", "sigma_hat", "statistic", "p_value", "reject", "alpha", "n1", "n2", "p")


def run_test(sample1, sample2, alpha: float = 0.05) -> TestOutcome:
    """Reject equality of covariances when T_n / sigma_hat exceeds z_{1-alpha}.

    Parameters
    ----------
    sample1, sample2 : array_like
        Observation matrices with rows as observations and equal column
        counts; at least 4 rows each.
    alpha : float
        Nominal level in (0, 1).

    Returns
    -------
    TestOutcome
        ``p_value`` is the upper-tail normal probability of the statistic.

    Raises
    ------
    DegenerateScaleError
        If the plug-in scale ``2 U1/n1 + 2 U2/n2`` is not positive.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    x1 = as_data_matrix(sample1, "sample1")
    x2 = as_data_matrix(sample2, "sample2")
    est = t_statistic(x1, x2)
    n1, n2 = x1.shape[0], x2.shape[0]
    scale = 2.0 * est.u1 / n1 + 2.0 * est.u2 / n2
    if not scale > 0:
        raise DegenerateScaleError(f"degenerate null-scale estimate {scale!r}")
    scale = sigma_hat_null(est.u1, est.u2, n1, n2)
    stat = est.t / scale
    return TestOutcome(
        t=est.t,
        sigma_hat=scale,
        statistic=stat,
        p_value=normal_sf(stat),
        reject=bool(stat > normal_quantile(1.0 - alpha)),
        alpha=alpha,
        n1=n1,
        n2=n2,
        p=x1.shape[1],
    )

"""Asymptotic variance formulas for T_n = U1 + U2 - 2V.

``sigma_n_squared`` is the elliptical-model variance, ``gamma_n_squared``
the independent-component variance it is compared against.  Both take
population covariances, so they are only usable where those are known
(simulation and verification).  The test itself relies on
:func:`sigma_hat_null` alone.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np


def _sym(a, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    """tr(AB) for symmetric-or-not A, B as a Frobenius inner product."""
    return float(np.sum(a * b.T))


@dataclass(frozen=True)
class PopulationPair:
    sigma1: np.ndarray
    sigma2: np.ndarray
    n1: int
    n2: int

    def __post_init__(self):
        s1 = _sym(self.sigma1, "sigma1")
        s2 = _sym(self.sigma2, "sigma2")
        if s1.shape != s2.shape:
            raise ValueError(
                f"dimension mismatch: sigma1 {s1.shape} vs sigma2 {s2.shape}"
            )
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("sample sizes must be positive")
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)

    @property
    def p(self) -> int:
        return self.sigma1.shape[0]

    @property
    def diff(self) -> np.ndarray:
        return self.sigma1 - self.sigma2

    def frobenius_signal(self) -> float:
        """||Sigma1 - Sigma2||_F^2, the quantity T_n estimates."""
        d = self.diff
        return float(np.sum(d * d))


@dataclass(frozen=True)
class RadialMoments:
    """tau_i = lim Var(xi_i^2 / sqrt(p)); nu3_i = E y^4 for the ICM comparison."""

    tau1: float = 2.0
    tau2: float = 2.0
    nu3_1: float = 3.0
    nu3_2: float = 3.0

    def __post_init__(self):
        if self.tau1 < 0 or self.tau2 < 0:
            raise ValueError("tau must be nonnegative")
        if self.nu3_1 < 1 or self.nu3_2 < 1:
            raise ValueError("nu3 must be >= 1")


@dataclass(frozen=True)
class VarianceReport:
    sigma_sq: float
    sigma0_sq: float
    gamma_sq: float
    components: dict = field(default_factory=dict)


def _sigma_components(pop: PopulationPair, mom: RadialMoments) -> dict:
    d = pop.diff
    p = pop.p
    out = {}
    for i, (s, n, tau) in enumerate(
        ((pop.sigma1, pop.n1, mom.tau1), (pop.sigma2, pop.n2, mom.tau2)), start=1
    ):
        sd = s @ d
        out[f"self_{i}"] = 4.0 / n**2 * _tr_prod(s, s) ** 2
        out[f"linear_{i}"] = 8.0 / n * _tr_prod(sd, sd)
        out[f"radial_{i}"] = 4.0 * (tau - 2.0) / (p * n) * float(np.trace(sd)) ** 2
    out["cross"] = 8.0 / (pop.n1 * pop.n2) * _tr_prod(pop.sigma1, pop.sigma2) ** 2
    return out


def sigma_n_squared(pop: PopulationPair, mom: RadialMoments) -> float:
    """Leading-order variance of T_n under the elliptical model."""
    return float(sum(_sigma_components(pop, mom).values()))


def sigma_null_squared(pop: PopulationPair) -> float:
    """Null variance 4 (1/n1 + 1/n2)^2 tr^2(Sigma0^2), with Sigma0 = sigma1."""
    s = pop.sigma1
    return 4.0 * (1.0 / pop.n1 + 1.0 / pop.n2) ** 2 * _tr_prod(s, s) ** 2


def sigma_hat_null(u1: float, u2: float, n1: int, n2: int) -> float:
    """Plug-in null scale 2 U1 / n1 + 2 U2 / n2.

    This estimates sigma_{n,0} itself (a standard deviation), so no square
    root is taken.  A nonpositive value is returned unchanged with a
    ``RuntimeWarning``.
    """
    s = 2.0 * u1 / n1 + 2.0 * u2 / n2
    if not s > 0:
        warnings.warn(
            f"nonpositive null-scale estimate {float(s)!r}", RuntimeWarning, stacklevel=2
        )
    return s


def sigma_tilde(pop: PopulationPair) -> float:
    """Deterministic counterpart 2 tr(S1^2)/n1 + 2 tr(S2^2)/n2 of sigma_hat_null."""
    return 2.0 * _tr_prod(pop.sigma1, pop.sigma1) / pop.n1 + 2.0 * _tr_prod(
        pop.sigma2, pop.sigma2
    ) / pop.n2


def symmetric_sqrt(s: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clamping tiny negatives."""
    w, v = np.linalg.eigh(s)
    norm = float(np.linalg.norm(s, 2)) if s.size else 0.0
    if w.size and w.min() < -1e-8 * max(norm, 1e-300):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def gamma_n_squared(pop: PopulationPair, mom: RadialMoments) -> float:
    """Independent-component variance of T_n.

    Differs from :func:`sigma_n_squared` only in the per-sample kurtosis
    term, which here is ``4 (nu3 - 3) / n * tr(K o K)`` with
    ``K = S^{1/2} (S1 - S2) S^{1/2}`` and ``o`` the Hadamard product.
    """
    comps = _sigma_components(pop, mom)
    d = pop.diff
    total = comps["cross"]
    for i, (s, n, nu3) in enumerate(
        ((pop.sigma1, pop.n1, mom.nu3_1), (pop.sigma2, pop.n2, mom.nu3_2)), start=1
    ):
        root = symmetric_sqrt(s)
        k = root @ d @ root
        hadamard = float(np.sum(np.diag(k) ** 2))  # tr(K o K)
        total += comps[f"self_{i}"] + comps[f"linear_{i}"]
        total += 4.0 * (nu3 - 3.0) / n * hadamard
    return float(total)


def variance_report(pop: PopulationPair, mom: RadialMoments) -> VarianceReport:
    comps = _sigma_components(pop, mom)
    return VarianceReport(
        sigma_sq=float(sum(comps.values())),
        sigma0_sq=sigma_null_squared(pop),
        gamma_sq=gamma_n_squared(pop, mom),
        components=comps,
    )


def assumption_a3_ratio(pop: PopulationPair) -> float:
    """max over i,j,k,l in {1,2} of tr(Si Sj Sk Sl) / (tr(Si Sj) tr(Sk Sl)).

    Small values suggest the trace condition on the covariances is
    plausible; a rank-one pair gives 1.
    """
    mats = (pop.sigma1, pop.sigma2)
    prods = {(i, j): mats[i] @ mats[j] for i in range(2) for j in range(2)}
    best = -np.inf
    for i, j, k, l in itertools.product(range(2), repeat=4):
        denom = float(np.trace(prods[i, j])) * float(np.trace(prods[k, l]))
        if denom == 0.0:
            raise ValueError("zero trace product in assumption diagnostic")
        num = _tr_prod(prods[i, j], prods[k, l])
        best = max(best, num / denom)
    return float(best)

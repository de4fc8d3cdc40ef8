"""Radial laws for xi^2 in the elliptical representation x = xi A u + mu.

Every law is normalised so that E[xi^2] = p.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class RadialTag(str, enum.Enum):
    CHISQ = "chisq"  # (i)   chi^2_p
    BETA_PRIME = "betaprime"  # (ii)  BetaPrime(p(p+4)/3, (p+7)/3)
    SCALED_BETA = "scaledbeta"  # (iii) (p+4) Beta(p/2, 2)
    GAMMA = "gamma"  # (iv)  Gamma(shape p/5, rate 1/5)
    SCALED_GAMMA_SQ = "scaledgammasq"  # (v)   Gamma(p, 1)^2 / (p+1)
    FIXED = "fixed"  # xi^2 = p, used by tests only


# Roman-numeral aliases used in configuration files.
ROMAN = {
    "i": RadialTag.CHISQ,
    "ii": RadialTag.BETA_PRIME,
    "iii": RadialTag.SCALED_BETA,
    "iv": RadialTag.GAMMA,
    "v": RadialTag.SCALED_GAMMA_SQ,
}

STUDY_LAWS = tuple(ROMAN.values())


def parse_radial(name: str) -> RadialTag:
    if isinstance(name, RadialTag):
        return name
    key = str(name).strip().lower()
    if key in ROMAN:
        return ROMAN[key]
    try:
        return RadialTag(key)
    except ValueError:
        raise ValueError(f"unknown radial law {name!r}") from None


@dataclass(frozen=True)
class RadialLaw:
    tag: RadialTag
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        object.__setattr__(self, "tag", parse_radial(self.tag))

    def sample_sq(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw xi^2."""
        p = self.p
        tag = self.tag
        if tag is RadialTag.CHISQ:
            return rng.chisquare(p, size=size)
        if tag is RadialTag.BETA_PRIME:
            a = p * (p + 4) / 3.0
            b = (p + 7) / 3.0
            return rng.standard_gamma(a, size=size) / rng.standard_gamma(b, size=size)
        if tag is RadialTag.SCALED_BETA:
            return (p + 4) * rng.beta(p / 2.0, 2.0, size=size)
        if tag is RadialTag.GAMMA:
            # numpy takes a scale; rate 1/5 means scale 5
            return rng.gamma(p / 5.0, 5.0, size=size)
        if tag is RadialTag.SCALED_GAMMA_SQ:
            g = rng.standard_gamma(float(p), size=size)
            return g * g / (p + 1)
        if tag is RadialTag.FIXED:
            return np.full(size if size is not None else (), float(p))
        raise ValueError(f"unsupported radial law {tag}")

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw the radius xi itself."""
        return np.sqrt(self.sample_sq(rng, size))

    def variance_sq(self) -> float:
        """Exact Var(xi^2) for this p."""
        p = float(self.p)
        tag = self.tag
        if tag is RadialTag.CHISQ:
            return 2.0 * p
        if tag is RadialTag.BETA_PRIME:
            # a(a+b-1) / ((b-2)(b-1)^2) with a = p(p+4)/3, b = (p+7)/3
            return 3.0 * p
        if tag is RadialTag.SCALED_BETA:
            # (p+4)^2 * ab / ((a+b)^2 (a+b+1)) with a = p/2, b = 2
            return 4.0 * p / (p / 2.0 + 3.0)
        if tag is RadialTag.GAMMA:
            return 5.0 * p
        if tag is RadialTag.SCALED_GAMMA_SQ:
            # E G^4 = p(p+1)(p+2)(p+3), E G^2 = p(p+1)
            return p * (4.0 * p + 6.0) / (p + 1.0)
        if tag is RadialTag.FIXED:
            return 0.0
        raise ValueError(f"unsupported radial law {tag}")

    def fourth_moment(self) -> float:
        """E[xi^4] = Var(xi^2) + p^2."""
        return self.variance_sq() + float(self.p) ** 2


def radial_tau(law: RadialLaw | RadialTag | str, p: int | None = None) -> float:
    """Finite-p value of Var(xi^2 / sqrt(p)) = Var(xi^2) / p.

    ============  ===============================
    law           tau
    ============  ===============================
    chisq         2
    betaprime     3
    scaledbeta    4 / (p/2 + 3)
    gamma         5
    scaledgammasq (4p + 6) / (p + 1)
    ============  ===============================
    """
    if not isinstance(law, RadialLaw):
        if p is None:
            raise ValueError("p is required when law is given by name")
        law = RadialLaw(parse_radial(law), p)
    return law.variance_sq() / law.p

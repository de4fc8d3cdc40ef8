"""Elliptical sample generation and Monte Carlo campaigns.

Observations are drawn as ``x = xi * A u + mu`` with ``u`` uniform on the
unit sphere, ``xi`` an independent radius and ``A A^T = Sigma``.  Since the
law of ``u`` is invariant under rotations, any factor ``A`` gives the same
distribution as the symmetric root, so the Cholesky factor is used.
"""
from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .laws import RadialLaw, RadialTag, parse_radial, radial_tau
from .procedure import normal_quantile
from .ustat import t_statistic
from .variance import (
    PopulationPair,
    RadialMoments,
    gamma_n_squared,
    sigma_n_squared,
    symmetric_sqrt,
)

logger = logging.getLogger(__name__)

# Spawn-key namespaces under the master seed.
_COV_KEY = 0
_REP_KEY = 1


class CovCase(str, enum.Enum):
    BULK = "a"  # Q diag(2,..,2,1,..,1) Q^T
    TOEPLITZ = "b"  # rho^|i-j|
    SPIKED = "c"  # Q diag(5,4,3,1,..,1) Q^T
    IDENTITY = "identity"


_CASE_ALIASES = {
    "a": CovCase.BULK,
    "bulk": CovCase.BULK,
    "b": CovCase.TOEPLITZ,
    "toeplitz": CovCase.TOEPLITZ,
    "c": CovCase.SPIKED,
    "spiked": CovCase.SPIKED,
    "identity": CovCase.IDENTITY,
}

STUDY_CASES = (CovCase.BULK, CovCase.TOEPLITZ, CovCase.SPIKED)


def parse_case(name) -> CovCase:
    if isinstance(name, CovCase):
        return name
    try:
        return _CASE_ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ValueError(f"unknown covariance case {name!r}") from None


def random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    z = rng.standard_normal((p, p))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def banded(p: int, delta: float) -> np.ndarray:
    """B(delta): delta^2 on the diagonal, delta on the first off-diagonals."""
    b = np.diag(np.full(p, delta * delta))
    if p > 1:
        off = np.full(p - 1, float(delta))
        b += np.diag(off, 1) + np.diag(off, -1)
    return b


def toeplitz(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :]))


@dataclass(frozen=True)
class CovarianceSpec:
    case: CovCase
    p: int
    rho: float = 0.2
    delta: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "case", parse_case(self.case))
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.case is CovCase.BULK and self.p % 2:
            raise ValueError("case (a) needs an even dimension")


def base_covariance(case, p: int, rng: np.random.Generator, rho: float = 0.2) -> np.ndarray:
    case = parse_case(case)
    if case is CovCase.BULK:
        eig = np.concatenate([np.full(p // 2, 2.0), np.ones(p - p // 2)])
        q = random_orthogonal(p, rng)
        s = (q * eig) @ q.T
    elif case is CovCase.TOEPLITZ:
        s = toeplitz(p, rho)
    elif case is CovCase.SPIKED:
        eig = np.ones(p)
        eig[: min(3, p)] = (5.0, 4.0, 3.0)[: min(3, p)]
        q = random_orthogonal(p, rng)
        s = (q * eig) @ q.T
    else:
        s = np.eye(p)
    return 0.5 * (s + s.T)


def covariance_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, or a clamped symmetric root if that fails."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return symmetric_sqrt(sigma)


def build_covariance(spec: CovarianceSpec, rng: np.random.Generator):
    """Return ``(sigma, factor)`` with ``factor @ factor.T == sigma``.

    ``sigma = scale * base + B(delta)``.
    """
    base = base_covariance(spec.case, spec.p, rng, spec.rho)
    sigma = spec.scale * base
    if spec.delta:
        sigma = sigma + banded(spec.p, spec.delta)
    return sigma, covariance_factor(sigma)


def sample_radial(law: RadialLaw, rng: np.random.Generator, size=None):
    """Draw xi (not xi^2) from ``law``."""
    return law.sample(rng, size)


def sample_sphere(p: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draws from the unit sphere in R^p (rows if ``size`` is given)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    m = 1 if size is None else int(size)
    z = rng.standard_normal((m, p))
    norms = np.linalg.norm(z, axis=1)
    bad = norms < 1e-12
    while np.any(bad):
        z[bad] = rng.standard_normal((int(bad.sum()), p))
        norms[bad] = np.linalg.norm(z[bad], axis=1)
        bad = norms < 1e-12
    u = z / norms[:, None]
    return u[0] if size is None else u


@dataclass(frozen=True)
class EllipticalSpec:
    radial: RadialLaw
    factor: np.ndarray
    n: int
    mean: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.factor, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != self.radial.p:
            raise ValueError("factor must be p x p with p matching the radial law")
        if self.mean is not None and np.shape(self.mean) != (a.shape[0],):
            raise ValueError("mean must be a p-vector")
        object.__setattr__(self, "factor", a)


def sample_elliptical(spec: EllipticalSpec, rng: np.random.Generator) -> np.ndarray:
    """n x p matrix with rows xi_j A u_j + mu."""
    p = spec.factor.shape[0]
    xi = np.atleast_1d(spec.radial.sample(rng, spec.n))
    u = sample_sphere(p, rng, spec.n)
    x = xi[:, None] * (u @ spec.factor.T)
    if spec.mean is not None:
        x = x + np.asarray(spec.mean, dtype=np.float64)
    return x


@dataclass(frozen=True)
class ScenarioConfig:
    """One Monte Carlo cell.

    Sigma1 is built from ``case``; Sigma2 = ``scale2 * Sigma1 + B(delta)``.
    ``delta == 0`` and ``scale2 == 1`` is the null hypothesis.
    """

    n1: int
    n2: int
    p: int
    radial1: RadialTag = RadialTag.CHISQ
    radial2: RadialTag | None = None
    case: CovCase = CovCase.BULK
    delta: float = 0.0
    replicates: int = 500
    alpha: float = 0.05
    seed: int = 20250101
    rho: float = 0.2
    scale2: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "radial1", parse_radial(self.radial1))
        r2 = self.radial1 if self.radial2 is None else parse_radial(self.radial2)
        object.__setattr__(self, "radial2", r2)
        object.__setattr__(self, "case", parse_case(self.case))
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n1 < 4 or self.n2 < 4:
            raise ValueError("n1 and n2 must be >= 4")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.case is CovCase.BULK and self.p % 2:
            raise ValueError("case (a) needs an even dimension")

    def as_record(self) -> dict:
        rec = asdict(self)
        rec["radial1"] = self.radial1.value
        rec["radial2"] = self.radial2.value
        rec["case"] = self.case.value
        return rec


@dataclass(frozen=True)
class RejectionReport:
    scenario: ScenarioConfig
    rejections: int
    rejection_rate: float
    monte_carlo_se: float
    statistics: np.ndarray | None = field(default=None, repr=False)

    def as_record(self) -> dict:
        rec = self.scenario.as_record()
        rec.update(
            rejections=self.rejections,
            rejection_rate=self.rejection_rate,
            monte_carlo_se=self.monte_carlo_se,
        )
        return rec


def populations(config: ScenarioConfig):
    """Sigma1, Sigma2 and their factors for a scenario (seeded by the master seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(_COV_KEY,)))
    s1 = base_covariance(config.case, config.p, rng, config.rho)
    s2 = config.scale2 * s1
    if config.delta:
        s2 = s2 + banded(config.p, config.delta)
    return s1, s2, covariance_factor(s1), covariance_factor(s2)


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_REP_KEY, index)))


def worker_count() -> int:
    env = os.environ.get("ELLCOV_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            logger.warning("ignoring malformed ELLCOV_THREADS=%r", env)
    return cpus


def _map_replicates(fn, count: int, workers: int | None):
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def simulate_estimates(config: ScenarioConfig, workers: int | None = None) -> np.ndarray:
    """Per-replicate ``(u1, u2, v, t)`` rows, shape (replicates, 4)."""
    _, _, a1, a2 = populations(config)
    spec1 = EllipticalSpec(RadialLaw(config.radial1, config.p), a1, config.n1)
    spec2 = EllipticalSpec(RadialLaw(config.radial2, config.p), a2, config.n2)

    def one(i: int):
        rng = replicate_rng(config.seed, i)
        x1 = sample_elliptical(spec1, rng)
        x2 = sample_elliptical(spec2, rng)
        est = t_statistic(x1, x2)
        return est.u1, est.u2, est.v, est.t

    return np.array(_map_replicates(one, config.replicates, workers), dtype=np.float64)


def run_scenario(
    config: ScenarioConfig, workers: int | None = None, keep_statistics: bool = False
) -> RejectionReport:
    """Empirical rejection rate of the level-alpha test over independent replicates."""
    est = simulate_estimates(config, workers)
    u1, u2, _, t = est.T
    scale = 2.0 * u1 / config.n1 + 2.0 * u2 / config.n2
    with np.errstate(divide="ignore", invalid="ignore"):
        stats = np.where(scale > 0, t / scale, np.nan)
    if np.any(~np.isfinite(stats)):
        logger.warning("%d replicates with degenerate null scale", int(np.sum(~np.isfinite(stats))))
    z = normal_quantile(1.0 - config.alpha)
    count = int(np.sum(stats > z))
    rate = count / config.replicates
    return RejectionReport(
        scenario=config,
        rejections=count,
        rejection_rate=rate,
        monte_carlo_se=math.sqrt(rate * (1.0 - rate) / config.replicates),
        statistics=stats if keep_statistics else None,
    )


class Standardizer(str, enum.Enum):
    SIGMA_N = "sigma"
    GAMMA_N = "gamma"


def parse_standardizer(name) -> Standardizer:
    key = str(getattr(name, "value", name)).strip().lower()
    aliases = {"sigma": Standardizer.SIGMA_N, "sigman": Standardizer.SIGMA_N,
               "gamma": Standardizer.GAMMA_N, "gamman": Standardizer.GAMMA_N}
    try:
        return aliases[key]
    except KeyError:
        raise ValueError(f"unknown standardizer {name!r}") from None


def scenario_variances(config: ScenarioConfig, nu3=(3.0, 3.0)):
    """(signal, sigma_n^2, gamma_n^2) for the scenario's populations."""
    s1, s2, _, _ = populations(config)
    pop = PopulationPair(s1, s2, config.n1, config.n2)
    mom = RadialMoments(
        tau1=radial_tau(RadialLaw(config.radial1, config.p)),
        tau2=radial_tau(RadialLaw(config.radial2, config.p)),
        nu3_1=nu3[0],
        nu3_2=nu3[1],
    )
    return pop.frobenius_signal(), sigma_n_squared(pop, mom), gamma_n_squared(pop, mom)


def clt_histogram(
    config: ScenarioConfig, standardizer=Standardizer.SIGMA_N, nu3=(3.0, 3.0),
    workers: int | None = None,
) -> np.ndarray:
    """Replicates of (T_n - ||S1 - S2||_F^2) / scale, scale in {sigma_n, gamma_n}.

    tau comes from the finite-p radial moments; ``nu3`` only affects gamma_n.
    """
    which = parse_standardizer(standardizer)
    signal, sig2, gam2 = scenario_variances(config, nu3)
    scale = math.sqrt(sig2 if which is Standardizer.SIGMA_N else gam2)
    t = simulate_estimates(config, workers)[:, 3]
    return (t - signal) / scale


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    estimate: float
    se: float
    expected: float

    @property
    def z(self) -> float:
        if self.se == 0:
            return 0.0 if self.estimate == self.expected else math.inf
        return (self.estimate - self.expected) / self.se

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0


def moment_identities_expected(sigma: np.ndarray, xi4: float) -> dict:
    """Closed forms of the bilinear-form moment identities for C1 = C2 = Sigma."""
    p = sigma.shape[0]
    s2 = sigma @ sigma
    tr2 = float(np.trace(s2))
    tr4 = float(np.sum(s2 * s2))
    kappa = xi4 / (p * (p + 2))
    return {
        "a": kappa * (tr2 * tr2 + 2 * tr4) - tr2 * tr2,
        "b": kappa * (tr2 * tr2 + 2 * tr4),
        "c": tr2,
        "d": tr2 * tr2,
        "e": 3 * kappa * kappa * (tr2 * tr2 + 2 * tr4),
    }


def moment_identity_suite(
    rng: np.random.Generator,
    sigma: np.ndarray | None = None,
    law: RadialTag | str = RadialTag.SCALED_GAMMA_SQ,
    replicates: int = 100_000,
) -> list[IdentityCheck]:
    """Monte Carlo check of five mixed-moment identities for centred elliptical vectors.

    (a) E (x'Sx - tr S^2)^2       (b) E (x1'x2 x2'x3)^2
    (c) E (x1'x2)^2               (d) E (x1'x2 x3'x4)^2
    (e) E (x1'x2)^4
    """
    if sigma is None:
        sigma = toeplitz(5, 0.5)
    sigma = np.asarray(sigma, dtype=np.float64)
    p = sigma.shape[0]
    radial = RadialLaw(parse_radial(law), p)
    a = covariance_factor(sigma)
    spec = EllipticalSpec(radial, a, replicates)
    x1, x2, x3, x4 = (sample_elliptical(spec, rng) for _ in range(4))

    def dot(u, v):
        return np.einsum("ij,ij->i", u, v)

    tr2 = float(np.trace(sigma @ sigma))
    q = dot(x1 @ sigma, x1) - tr2
    d12 = dot(x1, x2)
    d23 = dot(x2, x3)
    d34 = dot(x3, x4)
    draws = {
        "a": q * q,
        "b": (d12 * d23) ** 2,
        "c": d12**2,
        "d": (d12 * d34) ** 2,
        "e": d12**4,
    }
    expected = moment_identities_expected(sigma, radial.fourth_moment())
    out = []
    for key in "abcde":
        v = draws[key]
        out.append(
            IdentityCheck(
                name=key,
                estimate=float(v.mean()),
                se=float(v.std(ddof=1) / math.sqrt(v.size)),
                expected=expected[key],
            )
        )
    return out

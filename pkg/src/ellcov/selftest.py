"""Reduced-size verification suites run by ``ellcov selftest``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ustat
from .simulation import moment_identity_suite


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _faulty_t_statistic(x1, x2):
    # Negative control: the 4-index term with an extra "+4 * path" summand.
    real = ustat._u_from_gram

    def broken(g, diag, rowsum):
        n = g.shape[0]
        off = rowsum - diag
        sq = ustat._fsum(g * g) - ustat._fsum(diag * diag)
        path = ustat._fsum(off * off) - sq
        return real(g, diag, rowsum) + 4.0 * path / ustat.falling_factorial(n, 4)

    blk = ustat.gram(x1, x2)
    u1 = broken(blk.self1, blk.diag1, blk.rowsum1)
    u2 = broken(blk.self2, blk.diag2, blk.rowsum2)
    v = ustat._v_from_cross(blk.cross, blk.cross_rowsum, blk.cross_colsum)
    return ustat.TraceEstimates.assemble(u1, u2, v)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def oracle_equivalence(
    instances: int = 200, seed: int = 0, rtol: float = 1e-10, fast=None, max_rows: int = 12
) -> list[CheckResult]:
    """Compare the Gram-based estimators with literal enumeration on random inputs."""
    fast = ustat.t_statistic if fast is None else fast
    rng = np.random.default_rng(seed)
    worst = 0.0
    where = ""
    for k in range(instances):
        n1, n2 = rng.integers(4, max_rows + 1, size=2)
        p = int(rng.integers(1, 9))
        shift = rng.normal(size=p)
        x1 = rng.normal(size=(n1, p)) + shift
        x2 = 1.5 * rng.normal(size=(n2, p))
        a, b = fast(x1, x2), ustat.brute_force_estimates(x1, x2)
        for field in ("u1", "u2", "v", "t"):
            err = relative_error(getattr(a, field), getattr(b, field))
            if err > worst:
                worst, where = err, f"instance {k} field {field}"
    return [
        CheckResult(
            "oracle",
            f"fast vs brute force ({instances} instances)",
            worst <= rtol,
            f"max relative error {worst:.2e} ({where})",
        )
    ]


def moment_suite(replicates: int = 20_000, seed: int = 1) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for chk in moment_identity_suite(rng, replicates=replicates):
        out.append(
            CheckResult(
                "moments",
                f"identity ({chk.name})",
                chk.passed,
                f"estimate {chk.estimate:.6g} expected {chk.expected:.6g} z={chk.z:+.2f}",
            )
        )
    return out


def run_selftest(inject_fault: bool = False) -> list[CheckResult]:
    fast = _faulty_t_statistic if inject_fault else None
    return oracle_equivalence(instances=60, fast=fast) + moment_suite()

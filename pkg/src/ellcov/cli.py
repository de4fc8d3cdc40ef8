"""Command-line interface.

Subcommands::

    ellcov test A.csv B.csv [--alpha 0.05]
    ellcov simulate scenarios.ini
    ellcov histogram figure1.ini --standardizer gamma
    ellcov ingest prices.csv --boundary 2017Q2 --out1 a.csv --out2 b.csv
    ellcov grid table2 --out table2.ini
    ellcov selftest
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import sys
import time

import numpy as np

from .ingest import IngestError, load_prices, split_periods, to_quarterly_log_returns
from .laws import STUDY_LAWS
from .procedure import FIELDS as TEST_FIELDS
from .procedure import DegenerateScaleError, run_test
from .selftest import run_selftest
from .simulation import (
    STUDY_CASES,
    ScenarioConfig,
    clt_histogram,
    run_scenario,
)
from .ustat import ShapeError

logger = logging.getLogger("ellcov")

SIMULATE_FIELDS = (
    "name", "n1", "n2", "p", "radial1", "radial2", "case", "delta", "rho",
    "scale2", "alpha", "replicates", "seed", "rejections", "rejection_rate",
    "monte_carlo_se", "wall_seconds",
)

_INT_KEYS = {"n1", "n2", "p", "replicates", "seed"}
_FLOAT_KEYS = {"delta", "alpha", "rho", "scale2"}

# (n1, n2, p, delta under the alternative) for the three reference grids
GRIDS = {
    "table2": (300, 300, 100, 0.2),
    "table3": (200, 200, 100, 0.2),
    "table4": (50, 100, 300, 0.3),
}


class UsageError(Exception):
    pass


def read_matrix(path, header: bool = False) -> np.ndarray:
    try:
        m = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read matrix {path}: {exc}") from exc
    return m


def _emit(records, fields, fmt: str, out) -> None:
    if fmt == "jsonl":
        for rec in records:
            out.write(json.dumps({k: rec[k] for k in fields}) + "\n")
        return
    w = csv.DictWriter(out, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def parse_scenarios(path, overrides: dict | None = None) -> list[ScenarioConfig]:
    """One scenario per INI section; ``[DEFAULT]`` values are shared."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    if not cp.sections():
        raise UsageError(f"{path}: no scenario sections")
    out = []
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for sec in cp.sections():
        kwargs: dict = {"name": sec}
        for key, raw in cp.items(sec):
            if key not in known:
                raise UsageError(f"{path} [{sec}]: unknown key {key!r}")
            try:
                if key in _INT_KEYS:
                    kwargs[key] = int(raw)
                elif key in _FLOAT_KEYS:
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw.strip()
            except ValueError as exc:
                raise UsageError(f"{path} [{sec}]: bad value for {key}: {raw!r}") from exc
        kwargs.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            out.append(ScenarioConfig(**kwargs))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{path} [{sec}]: {exc}") from exc
    return out


def grid_config(name: str, replicates: int = 500, seed: int = 20250101, rho: float = 0.2) -> str:
    """INI text for a (case x law x {H0, H1}) grid."""
    n1, n2, p, delta = GRIDS[name]
    cp = configparser.ConfigParser()
    cp["DEFAULT"] = {"n1": n1, "n2": n2, "p": p, "replicates": replicates,
                     "alpha": 0.05, "seed": seed, "rho": rho}
    roman = ("i", "ii", "iii", "iv", "v")
    for hyp, d in (("H0", 0.0), ("H1", delta)):
        for case in STUDY_CASES:
            for r, law in zip(roman, STUDY_LAWS):
                cp[f"{hyp}-{case.value}-{r}"] = {"case": case.value, "radial1": r, "delta": d}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def cmd_test(args) -> int:
    x1 = read_matrix(args.sample1, args.header)
    x2 = read_matrix(args.sample2, args.header)
    outcome = run_test(x1, x2, args.alpha)
    out, close = _open_out(args.out)
    try:
        _emit([outcome.as_record()], TEST_FIELDS, args.format, out)
    finally:
        if close:
            out.close()
    return 0


def _overrides(args) -> dict:
    return {
        "seed": args.seed, "replicates": args.replicates, "alpha": args.alpha,
        "rho": args.rho, "delta": args.delta,
    }


def cmd_simulate(args) -> int:
    scenarios = parse_scenarios(args.config, _overrides(args))
    out, close = _open_out(args.out)
    try:
        w_records = []
        for k, cfg in enumerate(scenarios, start=1):
            t0 = time.perf_counter()
            rep = run_scenario(cfg)
            rec = rep.as_record()
            rec["wall_seconds"] = round(time.perf_counter() - t0, 3)
            print(
                f"[{k}/{len(scenarios)}] {cfg.name}: rate={rep.rejection_rate:.3f} "
                f"se={rep.monte_carlo_se:.3f} seed={cfg.seed} ({rec['wall_seconds']}s)",
                file=sys.stderr,
            )
            w_records.append(rec)
        _emit(w_records, SIMULATE_FIELDS, args.format, out)
    finally:
        if close:
            out.close()
    return 0


def cmd_histogram(args) -> int:
    scenarios = parse_scenarios(args.config, _overrides(args))
    if len(scenarios) != 1:
        raise UsageError("histogram expects exactly one scenario section")
    values = clt_histogram(scenarios[0], args.standardizer, nu3=(args.nu3, args.nu3))
    out, close = _open_out(args.out)
    try:
        for v in values:
            out.write(f"{float(v)!r}\n")
    finally:
        if close:
            out.close()
    print(
        f"{values.size} values, mean={values.mean():.4f} var={values.var(ddof=1) if values.size > 1 else float('nan'):.4f}",
        file=sys.stderr,
    )
    return 0


def _write_sample(path, tickers, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(tickers)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def cmd_ingest(args) -> int:
    panel = load_prices(args.prices, date_column=args.date_column)
    diag = panel.diagnostics
    returns = to_quarterly_log_returns(panel)
    print(
        f"{len(panel.dates)} dates, {len(panel.tickers)} tickers; kept {len(returns.tickers)}, "
        f"dropped rows {diag.dropped_rows}, duplicate dates {diag.duplicate_dates}, "
        f"bad cells {len(diag.bad_cells)}, excluded {diag.excluded_tickers}",
        file=sys.stderr,
    )
    if args.out:
        returns.to_csv(args.out)
    if args.boundary:
        if not (args.out1 and args.out2):
            raise UsageError("--boundary needs --out1 and --out2")
        s1, s2 = split_periods(returns, args.boundary, args.start, args.end)
        _write_sample(args.out1, returns.tickers, s1)
        _write_sample(args.out2, returns.tickers, s2)
        print(f"n1={s1.shape[0]} n2={s2.shape[0]} p={s1.shape[1]}", file=sys.stderr)
    return 0


def cmd_grid(args) -> int:
    text = grid_config(args.table, args.replicates or 500, args.seed or 20250101, args.rho or 0.2)
    out, close = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if close:
            out.close()
    return 0


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    results = run_selftest(inject_fault=args.inject_fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} [{r.suite}] {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed in {time.perf_counter() - t0:.1f}s")
    return 1 if failed else 0


def _alpha(text: str) -> float:
    a = float(text)
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ellcov", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def out_opts(p, fmt=True):
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if fmt:
            p.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    def scenario_opts(p):
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--alpha", type=_alpha)
        p.add_argument("--rho", type=float, help="Toeplitz correlation")
        p.add_argument("--delta", type=float, help="banded perturbation size")

    p = sub.add_parser("test", help="run the two-sample test on two CSV matrices")
    p.add_argument("sample1")
    p.add_argument("sample2")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--header", action="store_true", help="skip a header row in each file")
    out_opts(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rates for scenario configs")
    scenario_opts(p)
    out_opts(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("histogram", help="standardized T_n replicates, one per line")
    scenario_opts(p)
    p.add_argument("--standardizer", choices=("sigma", "gamma"), default="sigma")
    p.add_argument("--nu3", type=float, default=3.0)
    out_opts(p, fmt=False)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("ingest", help="price CSV to quarterly log returns and period split")
    p.add_argument("prices")
    p.add_argument("--date-column", default="date")
    p.add_argument("--out", help="write the return panel here")
    p.add_argument("--boundary", help="last quarter of the first period, e.g. 2017Q2")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--out1")
    p.add_argument("--out2")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("grid", help="write a reference scenario grid as a config file")
    p.add_argument("table", choices=sorted(GRIDS))
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--rho", type=float)
    out_opts(p, fmt=False)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("selftest", help="oracle-equivalence and moment-identity suites")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ShapeError, IngestError, DegenerateScaleError, ValueError) as exc:
        print(f"ellcov {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

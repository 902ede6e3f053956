"""Command-line front end: load map specs, run analyses, emit CSV reports.

Four subcommands cover the library surface: `rate` (surjection-rate schedule
at a point), `critical` (critical-value scan plus dimension, porosity, and
component analytics), `asymptotic` (shell scan for asymptotically critical
values), and `calculus` (the sum/chain/scaling inequality battery).  Every
CSV starts with a header row, floats are written with '.' decimals via repr,
and each summary file embeds the fully resolved configuration so a report is
reproducible from its own text.  Exit codes: 0 success (findings are data,
not failure), 2 usage or parse problems, 3 data diagnostics (sparse graphs,
undersampled analytics, isolated points).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import importlib.util
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .catalog import SCAN_BUDGETS, get as catalog_get
from .asymptotic import (
    DEFAULT_SHELLS,
    asymptotic_scan,
    check_prop7_bound,
    default_compactification,
    linear_eta,
)
from .critical import (
    box_counting_dimension,
    component_constancy,
    porosity_scan,
    scan_critical_values,
)
from .errors import (
    CostGuardError,
    InputError,
    IsolatedPointError,
    SparseGraphError,
    UndersampledError,
)
from .oracle import dense_modulus
from .regularity import (
    ModulusQuery,
    check_chain_rule,
    check_sum_rule,
    default_resolution,
    modulus_of_surjection,
    surjection_rate,
)
from .semialg import (
    GraphPoint,
    MapSpec,
    PolyMap,
    Polynomial,
    load_mapspec,
    sample_graph,
)

__all__ = [
    "RunConfig",
    "build_parser",
    "cmd_rate",
    "cmd_critical",
    "cmd_asymptotic",
    "cmd_calculus",
    "main",
    "entry",
]


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters; embedded verbatim in every summary report."""

    command: str
    spec: str
    seed: int = 0
    tau: float = 0.05
    tol_eq: float = 1e-9
    delta0: float = 0.5
    levels: int = 6
    resolution: float | None = None
    budget: int | None = None
    shells: tuple[tuple[float, float], ...] = DEFAULT_SHELLS
    eta: str = "phi-default"
    out: str = "reports"
    at: str | None = None
    oracle: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise InputError("seed must be nonnegative")
        if self.tau <= 0.0 or self.tol_eq <= 0.0 or self.delta0 <= 0.0:
            raise InputError("tau, tol_eq, and delta0 must be positive")
        if self.levels <= 0:
            raise InputError("levels must be positive")
        if self.resolution is not None and not 0.0 < self.resolution < 1.0:
            raise InputError("resolution must be a fraction in (0, 1)")
        if self.budget is not None and self.budget <= 0:
            raise InputError("budget must be positive")

    def schedule(self) -> tuple[float, ...]:
        return tuple(self.delta0 * 2.0**-k for k in range(self.levels))

    def resolution_rule(self) -> Callable | None:
        if self.resolution is None:
            return None
        frac = self.resolution
        return lambda spec, delta: delta * frac


# ---------------------------------------------------------------------------
# parsing helpers

def load_spec(ref: str) -> MapSpec:
    """A spec reference is either `catalog:NAME` or a path to a JSON file."""
    if ref.startswith("catalog:"):
        return catalog_get(ref[len("catalog:") :])
    path = Path(ref)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"spec file not found: {ref}") from None
    except OSError as err:
        raise InputError(f"cannot read spec file {ref}: {err}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(
            f"{ref}: parse error at line {err.lineno} column {err.colno}: {err.msg}"
        ) from None
    return load_mapspec(data)


def _parse_point(text: str | None, n: int, m: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if text is None:
        return (0.0,) * n, (0.0,) * m
    try:
        vals = [float(p) for p in text.split(",")]
    except ValueError:
        raise InputError(f"--at must be comma-separated numbers, got {text!r}") from None
    if len(vals) != n + m:
        raise InputError(
            f"--at needs {n + m} coordinates (n={n} domain + m={m} range), got {len(vals)}"
        )
    return tuple(vals[:n]), tuple(vals[n:])


def _parse_shells(text: str) -> tuple[tuple[float, float], ...]:
    shells = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) != 2:
            raise InputError(f'shells must look like "lo:hi,lo:hi", got {text!r}')
        try:
            shells.append((float(pieces[0]), float(pieces[1])))
        except ValueError:
            raise InputError(f"bad shell bounds {part!r}") from None
    return tuple(shells)


def _load_eta(selector: str) -> tuple[Callable, str]:
    if selector == "linear":
        return linear_eta, "linear"
    if selector == "phi-default":
        return default_compactification().eta, "phi-default"
    if selector.startswith("custom:"):
        path = selector[len("custom:") :]
        if not Path(path).is_file():
            raise InputError(f"eta module not found: {path}")
        module_spec = importlib.util.spec_from_file_location("regvar_custom_eta", path)
        if module_spec is None or module_spec.loader is None:
            raise InputError(f"cannot load eta module {path}")
        mod = importlib.util.module_from_spec(module_spec)
        module_spec.loader.exec_module(mod)
        fn = getattr(mod, "eta", None)
        if not callable(fn):
            raise InputError(f"eta module {path} must define a callable `eta`")
        return fn, selector
    raise InputError(
        f"unknown eta selector {selector!r} (use linear, phi-default, or custom:PATH)"
    )


# ---------------------------------------------------------------------------
# report writing

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _config_lines(cfg: RunConfig) -> list[str]:
    d = dataclasses.asdict(cfg)
    lines = ["", "resolved config:"]
    lines.extend(f"  {key} = {d[key]!r}" for key in sorted(d))
    return lines


def _write_summary(path: Path, lines: list[str], cfg: RunConfig) -> None:
    path.write_text("\n".join(lines + _config_lines(cfg)) + "\n")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _point_header(n: int, m: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [f"y{j + 1}" for j in range(m)]


# ---------------------------------------------------------------------------
# subcommands

def cmd_rate(
    spec: MapSpec,
    xbar: Sequence[float],
    ybar: Sequence[float],
    cfg: RunConfig,
) -> int:
    out = _outdir(cfg)
    kwargs = {}
    rule = cfg.resolution_rule()
    if rule is not None:
        kwargs["resolution_rule"] = rule
    est = surjection_rate(
        spec,
        xbar,
        ybar,
        schedule=cfg.schedule(),
        seed=cfg.seed,
        sample_tol=cfg.tol_eq,
        **kwargs,
    )
    _write_csv(out / "rate.csv", ["delta", "sur_estimate"], zip(est.deltas, est.values))
    lines = [
        f"map: {spec.name}",
        f"point: x={tuple(xbar)} y={tuple(ybar)}",
        f"sur_estimate = {_fmt(est.sur_estimate)}",
        f"reg_estimate = {_fmt(est.reg_estimate)}",
    ]
    if cfg.oracle:
        lines.extend(_oracle_lines(spec, xbar, ybar, cfg, est.deltas[-1]))
    _write_summary(out / "rate_summary.txt", lines, cfg)
    return 0


def _oracle_lines(spec, xbar, ybar, cfg, delta: float) -> list[str]:
    rule = cfg.resolution_rule()
    h = rule(spec, delta) if rule is not None else default_resolution(spec, delta)
    q = ModulusQuery(tuple(xbar), tuple(ybar), delta)
    try:
        dense = dense_modulus(spec, q, pitch=h)
    except CostGuardError as err:
        return [f"oracle: skipped ({err})"]
    br = modulus_of_surjection(spec, q, h)
    return [
        f"oracle: dense Sur at lambda={_fmt(delta)} -> {_fmt(dense)}; "
        f"bracket [{_fmt(br.r_lo)}, {_fmt(br.r_hi)}]"
    ]


def cmd_critical(spec: MapSpec, cfg: RunConfig) -> int:
    out = _outdir(cfg)
    budget = cfg.budget
    if budget is None:
        budget = SCAN_BUDGETS.get(spec.name, 20_000)
    scan = scan_critical_values(
        spec, tau=cfg.tau, budget=budget, seed=cfg.seed, tol_eq=cfg.tol_eq
    )
    header = _point_header(spec.n, spec.m) + ["rate", "strict"]
    rows = [
        gp.x + gp.y + (rate, strict)
        for (gp, rate), strict in zip(scan.flagged, scan.strict_flags)
    ]
    _write_csv(out / "values.csv", header, rows)
    lines = [
        f"map: {spec.name}",
        f"flagged {len(scan.flagged)} of {scan.total_sampled} sampled points "
        f"at tau={_fmt(scan.threshold)}",
    ]
    if len(scan.values) >= 10:
        lines.extend(_critical_analytics(spec, scan, cfg, out))
    else:
        lines.append("analytics: skipped (fewer than 10 flagged values)")
    _write_summary(out / "critical_summary.txt", lines, cfg)
    return 0


def _critical_analytics(spec, scan, cfg: RunConfig, out: Path) -> list[str]:
    lines: list[str] = []
    vals = np.asarray(scan.values, dtype=float)
    span = float(np.max(vals.max(axis=0) - vals.min(axis=0)))
    if span <= 0.0:
        lines.append("dimension: skipped (all values identical)")
    else:
        scales = tuple(span * 2.0**-k for k in range(2, 8))
        try:
            fit = box_counting_dimension(vals, scales)
        except UndersampledError as err:
            lines.append(f"dimension: skipped ({err})")
        else:
            _write_csv(
                out / "dimension.csv",
                ["eps", "count"],
                zip(fit.scales, fit.counts),
            )
            lines.append(
                f"dimension = {_fmt(fit.dimension)} (r2 = {_fmt(fit.r2)})"
            )
        radii = (span / 8.0, span / 4.0)
        pitch = min(radii) / 12.0
        porosity_rows = []
        for r in radii:
            rep = porosity_scan(vals, (r,), pitch)
            porosity_rows.append((r, rep.lambda_max, len(rep.witness_failures)))
        _write_csv(
            out / "porosity.csv",
            ["radius", "lambda_max", "witness_failures"],
            porosity_rows,
        )
        lines.append(
            "porosity lambda_max = "
            + ", ".join(f"{_fmt(r)}: {_fmt(lm)}" for r, lm, _ in porosity_rows)
        )
    if spec.polymap is not None and spec.m == 1:
        comp = component_constancy(
            spec.polymap, cfg.tau, spec.box[: spec.n], seed=cfg.seed
        )
        _write_csv(
            out / "components.csv",
            ["component", "size", "value", "spread"],
            [
                (i, len(members), comp.values[i], comp.spreads[i])
                for i, members in enumerate(comp.components)
            ],
        )
        lines.append(
            f"components: {len(comp.components)} "
            f"(linking radius {_fmt(comp.linking_radius)})"
        )
    return lines


def cmd_asymptotic(spec: MapSpec, cfg: RunConfig) -> int:
    out = _outdir(cfg)
    eta_fn, eta_name = _load_eta(cfg.eta)
    budget = cfg.budget if cfg.budget is not None else 48
    res = asymptotic_scan(
        spec,
        eta_fn,
        shells=cfg.shells,
        per_shell_budget=budget,
        threshold=cfg.tau,
        seed=cfg.seed,
        eta_name=eta_name,
    )
    if len(res.skipped) == len(res.shells):
        raise UndersampledError(
            "no shell produced graph samples; widen the domain box or shells"
        )
    _write_csv(
        out / "shells.csv",
        ["shell_lo", "shell_hi", "min_score"],
        [
            (lo, hi, res.shell_minima[k])
            for k, (lo, hi) in enumerate(res.shells)
        ],
    )
    cand_header = [f"y{j + 1}" for j in range(spec.m)] + [
        f"score_shell{k + 1}" for k in range(len(res.shells))
    ]
    _write_csv(
        out / "candidates.csv",
        cand_header,
        [y + trace for y, trace in res.candidates],
    )
    lines = [
        f"map: {spec.name}",
        f"eta: {res.eta_name}  threshold: {_fmt(res.threshold)}",
        f"candidates: {len(res.candidates)}",
    ]
    for y, trace in res.candidates:
        finite = [s for s in trace if not math.isnan(s)]
        lines.append(f"  y={y} final_score={_fmt(finite[-1])}")
    if res.skipped:
        lines.append(f"skipped shells: {list(res.skipped)}")
    _write_summary(out / "asymptotic_summary.txt", lines, cfg)
    return 0


def cmd_calculus(spec: MapSpec, cfg: RunConfig) -> int:
    out = _outdir(cfg)
    if spec.n != 1 or spec.m != 1:
        raise InputError("the calculus battery needs a one-dimensional spec (n = m = 1)")
    points = sample_graph(spec, 3, seed=cfg.seed, tol_eq=cfg.tol_eq)
    kwargs: dict = {
        "schedule": cfg.schedule(),
        "samples_per_level": 0,
        "seed": cfg.seed,
    }
    rule = cfg.resolution_rule()
    if rule is not None:
        kwargs["resolution_rule"] = rule

    checks = list(check_sum_rule(spec, [[-0.5]], points, **kwargs))
    gx = PolyMap(1, (2.0 * Polynomial.variable(1, 0),))
    half_box = [(spec.box[0][0] / 2.0, spec.box[0][1] / 2.0)]
    chain_points = [GraphPoint((gp.x[0] / 2.0,), gp.y) for gp in points]
    checks.extend(check_chain_rule(spec, gx, chain_points, half_box, **kwargs))
    rho_one = Polynomial.constant(1, 1.0)
    checks.extend(
        check_prop7_bound(spec, rho_one, points, spec.box[:1], **kwargs)
    )

    _write_csv(
        out / "calculus.csv",
        ["kind", "x", "y", "lhs", "rhs", "tol", "passed"],
        [
            (c.kind, c.point[0], c.point[1], c.lhs, c.rhs, c.tol, c.passed)
            for c in checks
        ],
    )
    n_pass = sum(1 for c in checks if c.passed)
    lines = [
        f"map: {spec.name}",
        f"checks passed: {n_pass}/{len(checks)}",
    ]
    for c in checks:
        verdict = "pass" if c.passed else "FAIL"
        lines.append(
            f"  {c.kind} at {c.point}: lhs={_fmt(c.lhs)} rhs={_fmt(c.rhs)} -> {verdict}"
        )
    _write_summary(out / "calculus_summary.txt", lines, cfg)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regvar",
        description="Surjection-rate estimation and critical-value scans "
        "for semialgebraic set-valued maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, tau_default: float) -> None:
        sp.add_argument(
            "--spec",
            required=True,
            help="path to a map-spec JSON file, or catalog:NAME",
        )
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tau", type=float, default=tau_default)
        sp.add_argument("--tol-eq", type=float, default=1e-9, dest="tol_eq")
        sp.add_argument("--delta0", type=float, default=0.5)
        sp.add_argument("--levels", type=int, default=6)
        sp.add_argument(
            "--resolution",
            type=float,
            default=None,
            help="lattice pitch as a fraction of delta (default: per-dimension rule)",
        )
        sp.add_argument("--budget", type=int, default=None)
        sp.add_argument(
            "--shells", type=str, default=None, help='shells as "lo:hi,lo:hi,..."'
        )
        sp.add_argument(
            "--eta",
            type=str,
            default="phi-default",
            help="weight selector: linear | phi-default | custom:PATH",
        )
        sp.add_argument("--out", type=str, default="reports")
        sp.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)

    sp_rate = sub.add_parser("rate", help="surjection-rate schedule at a point")
    common(sp_rate, 0.05)
    sp_rate.add_argument(
        "--at",
        type=str,
        default=None,
        help="graph point as n+m comma-separated coordinates (default: origin)",
    )
    common(sub.add_parser("critical", help="scan for critical values"), 0.05)
    common(
        sub.add_parser("asymptotic", help="shell scan for asymptotic criticality"),
        0.02,
    )
    common(sub.add_parser("calculus", help="sum/chain/scaling inequality battery"), 0.05)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=ns.command,
            spec=ns.spec,
            seed=ns.seed,
            tau=ns.tau,
            tol_eq=ns.tol_eq,
            delta0=ns.delta0,
            levels=ns.levels,
            resolution=ns.resolution,
            budget=ns.budget,
            shells=_parse_shells(ns.shells) if ns.shells else DEFAULT_SHELLS,
            eta=ns.eta,
            out=ns.out,
            at=getattr(ns, "at", None),
            oracle=ns.oracle,
        )
        spec = load_spec(cfg.spec)
        if cfg.command == "rate":
            xbar, ybar = _parse_point(cfg.at, spec.n, spec.m)
            return cmd_rate(spec, xbar, ybar, cfg)
        if cfg.command == "critical":
            return cmd_critical(spec, cfg)
        if cfg.command == "asymptotic":
            return cmd_asymptotic(spec, cfg)
        return cmd_calculus(spec, cfg)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SparseGraphError as err:
        print(f"error: sparse-graph: {err}", file=sys.stderr)
        return 3
    except (UndersampledError, IsolatedPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every subcommand prints (or writes) one JSON document carrying
``schema_version`` and the tolerance it used, and exits with status 1 when
one of its checks fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID = 0, 1, 2


@dataclass
class RunConfig:
    subcommand: str
    n: int = 2
    k: int = 1
    L: int = 8
    C: int = 4
    mode_max: int | None = None
    t: list[float] = field(default_factory=lambda: [1.0, 4.0, 16.0])
    grid: int = 256
    variant: str = "odd"
    rank: int = 1
    fmt: str = "json"
    output: str | None = None
    seed: int = 0
    count: int = 10
    max_terms: int = 20
    lines: list[list[int]] = field(default_factory=list)
    phi: list[float] = field(default_factory=lambda: [0.5, 1.5, 3.0, 5.0])
    s_points: int = 64
    start: float = 0.0

    def truncation(self):
        from .fock_rep import TruncationParams

        return TruncationParams(self.L, self.C, self.mode_max)


class InvalidConfig(ValueError):
    pass


def _float_list(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return values


def _line(text):
    """``i,j[:c]`` → ``[i, j, c]`` for the Chern class ``c·dθi ^ dθj``."""
    pair, _, coeff = text.partition(":")
    try:
        i, j = (int(x) for x in pair.split(","))
        c = int(coeff) if coeff else 1
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad line bundle {text!r}; expected i,j[:c]") from None
    return [i, j, c]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twistk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, trunc=False):
        p.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
        p.add_argument("--output", "-o", help="output file (json) or directory (csv); stdout if omitted")
        p.add_argument("--seed", type=int, default=0)
        if trunc:
            p.add_argument("--L", type=int, default=8, help="energy cutoff")
            p.add_argument("--C", type=int, default=4, help="charge cutoff")
            p.add_argument("--mode-max", dest="mode_max", type=int, default=None)

    p = sub.add_parser("kgroup", help="twisted K-groups of the torus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    common(p)

    p = sub.add_parser("flow", help="spectral flow of a supercharge family")
    p.add_argument("--variant", choices=["odd", "odd-negative", "constant"], default="odd")
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--start", type=float, default=0.0)
    common(p, trunc=True)

    p = sub.add_parser("heat", help="heat-kernel densities")
    p.add_argument("--variant", choices=["odd", "suspended", "even"], default="odd")
    p.add_argument("--t", type=_float_list, default=[1.0, 4.0, 16.0])
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--rank", type=int, default=1)
    common(p, trunc=True)

    p = sub.add_parser("primitive", help="randomized twisted primitives")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--max-terms", dest="max_terms", type=int, default=20)
    common(p)

    p = sub.add_parser("character", help="character class, torsion coset and factorization")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rank", type=int, default=1, help="rank of the trivial summand")
    p.add_argument("--line", dest="lines", type=_line, action="append", default=[], help="i,j[:c]")
    p.add_argument("--variant", choices=["odd", "even"], default="odd")
    common(p)

    p = sub.add_parser("suspend-check", help="suspension defect identity")
    p.add_argument("--phi", type=_float_list, default=[0.5, 1.5, 3.0, 5.0])
    p.add_argument("--s-points", dest="s_points", type=int, default=64)
    common(p, trunc=True)
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(**{k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__})


# ---------------------------------------------------------------------------
# runners: each returns (ok, payload, csv_tables)


def run_kgroup(cfg: RunConfig):
    from .torus_ktheory import TwistSpec, twisted_k_group

    try:
        spec = TwistSpec(cfg.n, cfg.k)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    groups = {f"K{d}": twisted_k_group(spec, d) for d in (0, 1)}
    ok = all(r.routes_agree for r in groups.values())
    payload = {
        "n": cfg.n,
        "k": cfg.k,
        "tolerance": 0,
        **{name: {"group": str(r.group), **r.to_json()} for name, r in groups.items()},
    }
    rows = [["degree", "free_rank", "invariant_factors"]] + [
        [name, r.group.free_rank, " ".join(map(str, r.group.invariant_factors))] for name, r in groups.items()
    ]
    return ok, payload, {"kgroup": rows}


def run_flow(cfg: RunConfig):
    from .spectral import (
        SeamError,
        UnresolvedCrossingError,
        constant_family,
        odd_family,
        spectral_flow,
        trivial_rank_family,
    )

    if cfg.rank < 1 or cfg.grid < 2:
        raise InvalidConfig("rank must be >= 1 and grid >= 2")
    trunc = cfg.truncation()
    if cfg.variant == "constant":
        family, expected = constant_family(trunc), 0
    else:
        sign = 1 if cfg.variant == "odd" else -1
        family = odd_family(trunc, sign) if cfg.rank == 1 else trivial_rank_family(trunc, cfg.rank, sign)
        expected = sign * cfg.rank
    seam_tol = 1e-9
    payload = {"variant": cfg.variant, "rank": cfg.rank, "L": cfg.L, "C": cfg.C, "tolerance": seam_tol}
    try:
        result = spectral_flow(family, grid=cfg.grid, start=cfg.start, seam_tol=seam_tol)
    except (SeamError, UnresolvedCrossingError) as exc:
        payload["error"] = str(exc)
        return False, payload, {}
    payload.update(result.to_json())
    payload["expected_flow"] = expected
    rows = [["parameter", "eigenvalue_index", "value"]]
    for x, spectrum in zip(result.params, result.spectrum):
        rows += [[repr(float(x)), i, repr(float(v))] for i, v in enumerate(spectrum) if abs(v) <= 3.0]
    return result.net_flow == expected, payload, {"flow_spectrum": rows}


def run_heat(cfg: RunConfig):
    from . import heat_character as hc

    if any(t <= 0 for t in cfg.t):
        raise InvalidConfig("every t must be positive")
    trunc = cfg.truncation()
    tol = 1e-6
    summaries, tables, ok = [], {}, True
    for t in cfg.t:
        if cfg.variant == "odd":
            d = hc.odd_density(t, cfg.grid, trunc, cfg.rank)
            deviation = float(np.abs(d.values - hc.odd_density_oracle(t, d.grid[0], cfg.rank)).max())
            target = float(cfg.rank)
        elif cfg.variant == "suspended":
            d = hc.suspended_density(t, (cfg.grid, cfg.grid), trunc, cfg.rank)
            deviation = None
            target = hc.suspended_total_oracle(t, cfg.rank)
        else:
            d = hc.even_density(t, (cfg.grid, cfg.grid), trunc, cfg.rank)
            oracle = cfg.rank * hc.even_density_oracle(t, d.grid[0], d.grid[1])
            deviation = float(np.abs(d.values - oracle).max())
            target = float(cfg.rank)
        summary = d.summary()
        summary["target_total"] = target
        summary["oracle_deviation"] = deviation
        passed = abs(d.total - target) < tol and (deviation is None or deviation < tol)
        summary["passed"] = passed
        ok &= passed
        summaries.append(summary)
        names = ["phi"] if len(d.grid) == 1 else ["s", "phi"]
        rows = [names + ["value"]]
        for idx in np.ndindex(d.values.shape):
            rows.append([repr(float(a[i])) for a, i in zip(d.grid, idx)] + [repr(float(d.values[idx]))])
        tables[f"heat_{cfg.variant}_t{t:g}"] = rows
    if cfg.variant == "odd" and len(summaries) > 1:
        moments = [s["second_moment"] for s in sorted(summaries, key=lambda s: s["t"])]
        decreasing = all(a > b for a, b in zip(moments, moments[1:]))
        ok &= decreasing
    else:
        decreasing = None
    payload = {
        "variant": cfg.variant,
        "tolerance": tol,
        "samples": summaries,
        "second_moment_decreasing": decreasing,
        "calibration": {k: str(v["value"]) for k, v in hc.CONSTANTS.items()},
    }
    return ok, payload, tables


def run_primitive(cfg: RunConfig):
    from .form_calculus import exterior_d, twisted_d, twisted_primitive_steps
    from .sampling import random_admissible_form, standard_twist

    if cfg.n < 1 or cfg.k == 0 or cfg.count < 0:
        raise InvalidConfig("need n >= 1, k != 0, count >= 0")
    rng = np.random.default_rng(cfg.seed)
    H = standard_twist(cfg.n, cfg.k)
    bound = (cfg.n + 3) // 2 + 1
    records, ok = [], True
    for _ in range(cfg.count):
        phi = random_admissible_form(rng, cfg.n, cfg.max_terms)
        result = twisted_primitive_steps(phi, H)
        exact = twisted_d(result.omega, H) == exterior_d(phi)
        within = result.iterations <= bound
        ok &= exact and within
        records.append(
            {"phi": phi.to_json(), "omega": result.omega.to_json(), "iterations": result.iterations, "exact": exact}
        )
    payload = {"n": cfg.n, "k": cfg.k, "seed": cfg.seed, "tolerance": 0, "iteration_bound": bound, "cases": records}
    rows = [["case", "iterations", "exact"]] + [[i, r["iterations"], r["exact"]] for i, r in enumerate(records)]
    return ok, payload, {"primitive": rows}


def run_character(cfg: RunConfig):
    from .form_calculus import CurvatureData, chern_character
    from .heat_character import assemble_character, factorization_check
    from .lattice_algebra import ExtElement
    from .torus_ktheory import TwistSpec, classify_supercharge

    try:
        spec = TwistSpec(cfg.n, cfg.k)
        lines = tuple(ExtElement.monomial([i, j], cfg.n, c) for i, j, c in cfg.lines)
        xi = CurvatureData(cfg.n, lines, trivial_rank=cfg.rank)
    except (ValueError, IndexError) as exc:
        raise InvalidConfig(str(exc)) from None
    if xi.rank == 0:
        raise InvalidConfig("the bundle has rank 0")
    ch = chern_character(xi)
    character = assemble_character([xi.rank], xi, cfg.variant)
    payload = {"n": cfg.n, "k": cfg.k, "tolerance": 0, "character": character.to_json()}
    ok = factorization_check(xi, spec)
    payload["factorization"] = ok
    if ch.is_integral():
        payload["coset"] = classify_supercharge(ch.to_integral(), 1, spec).to_json()
    else:
        payload["coset"] = None
    rows = [["theta", "coeff"]] + [[" ".join(map(str, e["theta"])), e["coeff"]] for e in ch.to_json()]
    return ok, payload, {"character": rows}


def run_suspend_check(cfg: RunConfig):
    from .fock_rep import build_supercharge_odd
    from .spectral import approximate_sign, suspension_profile

    if cfg.s_points < 2:
        raise InvalidConfig("s-points must be >= 2")
    trunc = cfg.truncation()
    tol = 1e-12
    lower = np.linspace(0.0, math.pi, cfg.s_points)
    upper = np.linspace(math.pi, 2 * math.pi, cfg.s_points)[1:]
    results, ok, rows = [], True, [["phi", "s", "residual"]]
    for phi in cfg.phi:
        F = approximate_sign(build_supercharge_odd(phi, trunc))
        lo, hi = suspension_profile(F, lower), suspension_profile(F, upper)
        passed = bool(lo.max() < tol and (hi == 0).all())
        ok &= passed
        results.append(
            {"phi": phi, "max_residual_lower": float(lo.max()), "max_residual_upper": float(hi.max()), "passed": passed}
        )
        rows += [[phi, repr(float(s)), repr(float(r))] for s, r in zip(np.r_[lower, upper], np.r_[lo, hi])]
    payload = {"L": cfg.L, "C": cfg.C, "tolerance": tol, "upper_arc_tolerance": 0, "results": results}
    return ok, payload, {"suspend_check": rows}


RUNNERS = {
    "kgroup": run_kgroup,
    "flow": run_flow,
    "heat": run_heat,
    "primitive": run_primitive,
    "character": run_character,
    "suspend-check": run_suspend_check,
}


def _emit(cfg: RunConfig, ok: bool, payload: dict, tables: dict, stdout) -> None:
    document = {"schema_version": SCHEMA_VERSION, "subcommand": cfg.subcommand, "ok": ok, **payload}
    text = json.dumps(document, indent=2, sort_keys=True, default=str) + "\n"
    if cfg.fmt == "json":
        if cfg.output:
            Path(cfg.output).write_text(text)
        else:
            stdout.write(text)
        return
    import csv

    out_dir = Path(cfg.output or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, rows in tables.items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["schema_version", SCHEMA_VERSION])
            writer.writerows(rows)
    (out_dir / f"{cfg.subcommand}_summary.json").write_text(text)


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = config_from_args(args)
    try:
        if cfg.subcommand in ("flow", "heat", "suspend-check"):
            cfg.truncation()
        ok, payload, tables = RUNNERS[cfg.subcommand](cfg)
    except (InvalidConfig, ValueError) as exc:
        print(f"twistk {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(cfg, ok, payload, tables, stdout)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())

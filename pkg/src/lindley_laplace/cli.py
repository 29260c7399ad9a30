"""Command-line tables for densities, exit times, oracle comparisons and CUSUM run lengths.

Data go to stdout (or ``--out``); diagnostics go to stderr.  Exit codes:
0 success, 2 invalid input, 3 numerical invariant violated, 4 comparison failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import cusum, density, fet, oracle
from .core import LaplaceParams, ProcessConfig, RegimeTag, dispatch_fet_regime

SCHEMA_VERSION = "1.0.0"
EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_FAIL = 0, 2, 3, 4
MASS_TOL = 1e-6
NEG_TOL = 1e-12


class UsageError(Exception):
    code = EXIT_USAGE


class InvariantError(Exception):
    code = EXIT_INVARIANT


@dataclass
class Record:
    metadata: dict
    columns: list
    rows: list
    diagnostics: dict = field(default_factory=dict)
    atom: float | None = None


# ---------------------------------------------------------------------------
# parsing


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` with both ends included; an empty grid is an error."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--grid must be lo:hi:step, got {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise UsageError("--grid bounds must be finite")
    if lo < 0:
        raise UsageError("--grid must start at u >= 0")
    if step <= 0 or hi <= lo:
        raise UsageError(f"--grid {text!r} is empty (need hi > lo and step > 0)")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _params(mu: float, sigma: float) -> LaplaceParams:
    try:
        return LaplaceParams(mu, sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(params: LaplaceParams, x: float, h: float | None = None) -> ProcessConfig:
    try:
        return ProcessConfig(params, x, h)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _single_sweep(ns: list, sigmas: list):
    if len(ns) > 1 and len(sigmas) > 1:
        raise UsageError("sweep either --n or --sigma in one run, not both")


# ---------------------------------------------------------------------------
# labels and output


def position_case(cfg: ProcessConfig, n: int, regime: RegimeTag) -> str:
    if regime is RegimeTag.PosMuNegSmall:
        sign = ">" if cfg.x + n * cfg.mu > 0 else "<="
        return f"{regime.value}/case-x+nmu{sign}0"
    if n == 1:
        return f"{regime.value}/one-step"
    return regime.value


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _flatten(prefix: str, d: dict) -> list[str]:
    out = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _flatten(key + ".", v)
        else:
            out.append(f"{key}={_fmt(v)}")
    return out


def render_csv(command: str, records: list[Record], verdict: str | None = None) -> str:
    lines = [f"# schema_version={SCHEMA_VERSION} command={command}"]
    for rec in records:
        meta = _flatten("", rec.metadata)
        if rec.atom is not None:
            meta.append(f"atom={_fmt(rec.atom)}")
        meta += _flatten("", rec.diagnostics)
        lines.append("# " + " ".join(meta))
        lines.append(",".join(rec.columns))
        lines += [",".join(_fmt(v) for v in row) for row in rec.rows]
    if verdict is not None:
        lines.append(f"# verdict={verdict}")
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def load_schema() -> dict:
    text = resources.files("lindley_laplace").joinpath("schema/output.schema.json").read_text()
    return json.loads(text)


def render_json(command: str, records: list[Record], verdict: str | None = None) -> str:
    import jsonschema

    doc = {"schema_version": SCHEMA_VERSION, "command": command, "records": []}
    for rec in records:
        item = {"metadata": rec.metadata, "columns": rec.columns, "rows": rec.rows,
                "diagnostics": rec.diagnostics}
        if rec.atom is not None:
            item["atom"] = rec.atom
        doc["records"].append(item)
    if verdict is not None:
        doc["verdict"] = verdict
    doc = _jsonable(doc)
    jsonschema.validate(doc, load_schema())
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _check_rows(values: np.ndarray, what: str) -> np.ndarray:
    if np.any(~np.isfinite(values)):
        raise InvariantError(f"non-finite {what} value produced")
    if np.any(values < -NEG_TOL):
        raise InvariantError(f"negative {what} value {values.min():.3g} produced")
    return np.maximum(values, 0.0)


# ---------------------------------------------------------------------------
# commands


def cmd_density(args) -> tuple[list[Record], str | None]:
    grid = parse_grid(args.grid)
    if any(n < 1 for n in args.n):
        raise UsageError("--n values must be >= 1")
    _single_sweep(args.n, args.sigma)
    records = []
    for sigma in args.sigma:
        cfg = _config(_params(args.mu, sigma), args.x)
        for n in args.n:
            d = density.density_at(cfg, n)
            defect = abs(density.total_mass(d) - 1.0)
            if defect > MASS_TOL:
                raise InvariantError(f"mass defect {defect:.3g} at n={n}, sigma={sigma}")
            vals = _check_rows(np.asarray(d(grid), dtype=float), "density")
            records.append(Record(
                metadata={"params": {"mu": args.mu, "sigma": sigma, "x": args.x},
                          "regime": d.regime.value, "case": position_case(cfg, n, d.regime),
                          "n": n},
                columns=["u", f"f_{n}(u)"],
                rows=[[float(u), float(v)] for u, v in zip(grid, vals)],
                diagnostics={"mass_defect": defect, "c_n": d.atom},
                atom=d.atom,
            ))
    return records, None


def cmd_fet(args) -> tuple[list[Record], str | None]:
    if args.nmax < 1:
        raise UsageError("--nmax must be >= 1")
    records = []
    for sigma in args.sigma:
        cfg = _config(_params(args.mu, sigma), args.x, args.h)
        regime = dispatch_fet_regime(cfg)
        p = _check_rows(fet.fet_values(cfg, args.x, args.nmax), "probability")
        cum = np.cumsum(p)
        if cum[-1] > 1.0 + 1e-10:
            raise InvariantError(f"exit probabilities sum to {cum[-1]!r} > 1")
        columns = ["n", "P(n|x)"] + (["P(N<=n|x)"] if args.cdf else [])
        rows = [[n, float(v)] + ([float(c)] if args.cdf else [])
                for n, (v, c) in enumerate(zip(p, cum), 1)]
        diag = {"partial_sum": float(cum[-1])}
        if args.mean:
            m = fet.mean_fet(cfg, args.x)
            diag.update(mean=m.mean, mean_tail_bound=float(m.tail_bound), mean_terms=m.n_terms,
                        tail_ratio=m.ratio)
        records.append(Record(
            metadata={"params": {"mu": args.mu, "sigma": sigma, "x": args.x, "h": args.h},
                      "regime": regime.value, "case": regime.value},
            columns=columns, rows=rows, diagnostics=diag,
        ))
    return records, None


def _row(quantity, n, closed, ref, tol):
    disc = abs(closed - ref)
    return [quantity, n, float(closed), float(ref), float(disc), float(tol),
            "ok" if disc <= tol else "FAIL"]


COMPARE_COLUMNS = ["quantity", "n", "closed_form", "oracle", "discrepancy", "tolerance", "status"]


def cmd_compare(args) -> tuple[list[Record], str | None]:
    if args.oracle not in ("mc", "quad"):
        raise UsageError(f"unknown oracle {args.oracle!r}; choose mc or quad")
    if len(args.sigma) != 1:
        raise UsageError("compare takes a single --sigma")
    params = _params(args.mu, args.sigma[0])
    if args.trajectories < 1:
        raise UsageError("--trajectories must be >= 1")
    rows = []
    if args.kind == "density":
        cfg = _config(params, args.x)
        ns = args.n
        if any(n < 1 for n in ns):
            raise UsageError("--n values must be >= 1")
        n_max = max(ns)
        regime = density.density_at(cfg, 1).regime
        case = regime.value
        if args.oracle == "quad":
            chain = oracle.ck_chain(cfg, n_max, delta=args.delta)
            for n in ns:
                d, g = density.density_at(cfg, n), chain[n - 1]
                rows.append(_row("atom", n, d.atom, g.atom, 1e-4))
                diff = np.abs(d(g.knots) - g.values)
                i = int(np.argmax(diff))
                rows.append(_row("density_sup", n, float(d(g.knots[i])), g.values[i], 1e-4))
        else:
            hi = args.x + n_max * (abs(args.mu) + 8 * args.sigma[0])
            mc = oracle.McConfig(args.trajectories, args.seed, n_max, bins=200, domain_hi=hi,
                                 threads=args.threads)
            res = oracle.simulate(cfg, mc)
            edges = res.edges[:-1]
            for n in ns:
                d = density.density_at(cfg, n)
                se = math.sqrt(d.atom * (1 - d.atom) / res.trajectories)
                rows.append(_row("atom", n, d.atom, res.atom_freq_by_n[n - 1], 4 * se))
                closed = np.array([density.cdf(d, e) for e in edges])
                emp = res.cdf_at_edges(n)
                i = int(np.argmax(np.abs(closed - emp)))
                q = np.clip(closed, 0.0, 1.0)  # rounding can push the far tail past 1
                se_max = float(np.max(np.sqrt(q * (1 - q) / res.trajectories)))
                rows.append(_row("cdf_sup", n, closed[i], emp[i], 4 * se_max))
        meta_params = {"mu": args.mu, "sigma": args.sigma[0], "x": args.x}
    else:
        if args.h is None:
            raise UsageError("fet comparison needs --h")
        if args.nmax < 1:
            raise UsageError("--nmax must be >= 1")
        cfg = _config(params, args.x, args.h)
        regime = dispatch_fet_regime(cfg)
        case = regime.value
        closed = fet.fet_values(cfg, args.x, args.nmax)
        if args.oracle == "quad":
            chain = oracle.exit_chain(cfg, args.nmax, points=args.points)
            dist = fet.fet_distribution(cfg, args.nmax)
            for n, g in enumerate(chain, 1):
                xs = g.nodes[:-1]
                diff = np.abs(dist.pmf(n)(xs) - g.values[:-1])
                i = int(np.argmax(diff))
                rows.append(_row("pmf_sup", n, float(dist.pmf(n)(xs[i])), g.values[i], 1e-6))
        else:
            mc = oracle.McConfig(args.trajectories, args.seed, args.nmax, bins=10,
                                 domain_hi=args.h, threads=args.threads)
            res = oracle.simulate(cfg, mc)
            for n in range(1, args.nmax + 1):
                p = closed[n - 1]
                se = math.sqrt(p * (1 - p) / res.trajectories)
                rows.append(_row("pmf", n, p, res.fet_freq[n - 1], 4 * se))
        meta_params = {"mu": args.mu, "sigma": args.sigma[0], "x": args.x, "h": args.h}
    verdict = "PASS" if all(r[-1] == "ok" for r in rows) else "FAIL"
    meta = {"params": meta_params, "regime": regime.value, "case": case,
            "target": args.kind, "oracle": args.oracle}
    if args.oracle == "mc":
        meta.update(trajectories=args.trajectories, seed=args.seed)
    rec = Record(meta, COMPARE_COLUMNS, rows,
                 {"max_discrepancy": max(r[4] for r in rows)})
    return [rec], verdict


def cmd_cusum(args) -> tuple[list[Record], str | None]:
    if args.nmax < 1:
        raise UsageError("--nmax must be >= 1")
    try:
        spec = cusum.CusumSpec(_params(args.mu, args.sigma), args.theta, args.h)
        llr = cusum.llr_params(spec)
        cfg = cusum.detector_config(spec, args.x0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    regime = dispatch_fet_regime(cfg)
    p = _check_rows(cusum.run_length_distribution(spec, args.x0, args.nmax), "probability")
    cum = np.cumsum(p)
    diag = {"pmf_sum": float(cum[-1])}
    if args.arl:
        m = cusum.average_run_length(spec, args.x0)
        diag.update(arl=m.mean, arl_tail_bound=float(m.tail_bound), arl_terms=m.n_terms)
    rec = Record(
        metadata={"params": {"mu": llr.mu, "sigma": llr.sigma, "x": args.x0, "h": args.h},
                  "regime": regime.value, "case": regime.value,
                  "base": {"mu": args.mu, "sigma": args.sigma}, "theta": args.theta,
                  "log_mgf": cusum.log_mgf(spec), "llr_location": llr.mu,
                  "llr_scale": llr.sigma, "post_change_mean": cusum.post_change_mean(spec)},
        columns=["n", "P(RL=n)", "P(RL<=n)"],
        rows=[[n, float(v), float(c)] for n, (v, c) in enumerate(zip(p, cum), 1)],
        diagnostics=diag,
    )
    return [rec], None


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lindley-laplace", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, sigma_list=True):
        sp.add_argument("--mu", type=float, required=True, help="increment location")
        sp.add_argument("--sigma", type=_float_list if sigma_list else float, required=True,
                        help="increment scale" + (" (comma-separated list allowed)" if sigma_list else ""))
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")

    d = sub.add_parser("density", help="law of W_n on a grid")
    common(d)
    d.add_argument("--x", type=float, default=0.0, help="starting point W_0")
    d.add_argument("--n", type=_int_list, required=True, help="time index (comma-separated list allowed)")
    d.add_argument("--grid", default="0:10:0.01", help="lo:hi:step, both ends included")

    f = sub.add_parser("fet", help="first-exit-time pmf")
    common(f)
    f.add_argument("--x", type=float, default=0.0)
    f.add_argument("--h", type=float, required=True, help="upper boundary")
    f.add_argument("--nmax", type=int, default=50)
    f.add_argument("--cdf", action="store_true", help="add the cumulative column")
    f.add_argument("--mean", action="store_true", help="report the mean exit time")

    c = sub.add_parser("compare", help="closed form against an independent oracle")
    c.add_argument("kind", choices=("density", "fet"))
    common(c)
    c.add_argument("--oracle", required=True, help="mc or quad")
    c.add_argument("--x", type=float, default=0.0)
    c.add_argument("--h", type=float)
    c.add_argument("--n", type=_int_list, default=[1, 2, 3, 4, 5])
    c.add_argument("--nmax", type=int, default=10)
    c.add_argument("--trajectories", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${oracle.THREADS_ENV} or CPU count)")
    c.add_argument("--delta", type=float, default=1e-3, help="density quadrature cell width")
    c.add_argument("--points", type=int, default=4001, help="exit quadrature nodes")

    u = sub.add_parser("cusum", help="in-control CUSUM run-length pmf")
    common(u, sigma_list=False)
    u.add_argument("--theta", type=float, required=True, help="tilt of the post-change law")
    u.add_argument("--h", type=float, default=3.0, help="detector threshold")
    u.add_argument("--x0", type=float, default=0.0, help="initial statistic")
    u.add_argument("--nmax", type=int, default=100)
    u.add_argument("--arl", action="store_true", help="report the average run length")
    return p


COMMANDS = {"density": cmd_density, "fet": cmd_fet, "compare": cmd_compare, "cusum": cmd_cusum}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        records, verdict = COMMANDS[args.command](args)
        render = render_json if args.format == "json" else render_csv
        text = render(args.command, records, verdict)
    except (UsageError, InvariantError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if verdict == "FAIL":
        print("comparison FAILED", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

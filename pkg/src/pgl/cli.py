"""Command-line entry point: ``pgl <subcommand> ...``.

Every output carries the run configuration (a ``# config:`` comment line for
CSV and text, a ``config`` key for JSON). Exit codes: 0 success, 1 a
verification failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import kernels, polynomials, pushforward, regimes, simulator, weights
from .core import ParameterError, SeedSpec, as_fraction, make_bond_params, make_gen_params, sample_invariant_measures

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
# flags that change where or how fast output is produced, never what it says
_NON_CONFIG = {"threads", "out", "figure", "func", "list"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in sorted(vars(args).items()) if k not in _NON_CONFIG and k != "subcommand"}
        return cls(args.subcommand, opts)

    def to_json(self) -> str:
        return json.dumps({"subcommand": self.subcommand, **self.options}, sort_keys=True, default=str)


def rational(x) -> dict:
    x = as_fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def emit_report(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _figure(path: str | None, draw) -> None:
    if not path:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    try:
        fig.savefig(path, metadata={"Software": None})
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


# ------------------------------------------------------------ parameters


def _add_model(sp: argparse.ArgumentParser, default: str | None = None) -> None:
    sp.add_argument("--model", choices=("generalized", "bond"), default=default, required=default is None)
    for name in ("p", "q", "r", "rp", "sp"):
        sp.add_argument(f"--{name}", default=None, help="decimal or a/b rational")


def _params(args):
    gen_flags = [n for n in ("p", "q", "r") if getattr(args, n) is not None]
    bond_flags = [n for n in ("rp", "sp") if getattr(args, n) is not None]
    if args.model == "generalized":
        if bond_flags:
            raise UsageError(f"--{bond_flags[0]} conflicts with --model generalized")
        vals = [getattr(args, n) or "0" for n in ("p", "q", "r")]
        return make_gen_params(*map(as_fraction, vals))
    if gen_flags:
        raise UsageError(f"--{gen_flags[0]} conflicts with --model bond")
    vals = [getattr(args, n) or "0" for n in ("rp", "sp")]
    return make_bond_params(*map(as_fraction, vals))


def _params_json(params) -> dict:
    return {k: rational(v) for k, v in params.as_dict().items()}


# ------------------------------------------------------------ subcommands


def cmd_kernel(args, cfg: RunConfig) -> int:
    params = _params(args)
    k = kernels.generalized_envelope_kernel(params) if args.model == "generalized" else kernels.bond_envelope_kernel(params)
    body = json.loads(k.to_json())
    emit_report(dumps({"config": json.loads(cfg.to_json()), "kernel": body}), args.out)
    return EXIT_OK


def cmd_draw_prob(args, cfg: RunConfig) -> int:
    params = _params(args)
    est = simulator.estimate_draw_probability(params, args.horizon, args.replicas, SeedSpec(args.seed),
                                              args.threads)
    d = est.as_dict()
    if args.format == "json":
        text = dumps({"config": json.loads(cfg.to_json()), "params": _params_json(params), "estimate": d})
    else:
        cols = ["point_estimate", "draws", "replicas", "wilson_lo", "wilson_hi", "horizon"]
        text = f"# config: {cfg.to_json()}\n" + ",".join(cols) + "\n" + ",".join(repr(d[c]) for c in cols) + "\n"
    emit_report(text, args.out)
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig) -> int:
    params = _params(args)
    traj = simulator.run_envelope_pca(params, args.init, args.steps, SeedSpec(args.seed), args.driver, args.size)
    buf = io.StringIO()
    buf.write(f"# config: {cfg.to_json()}\n")
    buf.write("step,densW,densL,densD\n")
    for t, w, l, d in traj.rows():
        buf.write(f"{t},{w!r},{l!r},{d!r}\n")
    emit_report(buf.getvalue(), args.out)

    def draw(ax):
        for col, name in enumerate("WLD"):
            ax.plot(traj.densities[:, col], label=f"density {name}")
        ax.set_xlabel("step")
        ax.set_ylabel("density")
        ax.legend()
    _figure(args.figure, draw)
    return EXIT_OK


def cmd_regime(args, cfg: RunConfig) -> int:
    params = _params(args)
    if args.model == "generalized":
        verdict = regimes.check_generalized(params, strict=False).as_dict()
        verdict.update(regimes.check_simplified(params))
    else:
        verdict = regimes.check_bond(params).as_dict()
    emit_report(dumps({"config": json.loads(cfg.to_json()), "params": _params_json(params), "verdict": verdict}),
                args.out)
    return EXIT_OK


def _dec12(x) -> str:
    return format(float(x), ".12g")


def _parse_assign(items, what: str) -> dict:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"{what} expects name=value, got {item!r}")
        out[name.strip()] = val.strip()
    return out


def cmd_region(args, cfg: RunConfig) -> int:
    fixed = {k: as_fraction(v) for k, v in _parse_assign(args.fix, "--fix").items()}
    grid = {}
    for k, v in _parse_assign(args.grid, "--grid").items():
        parts = v.split(":")
        if len(parts) != 3:
            raise UsageError(f"--grid {k} expects lo:hi:n")
        try:
            grid[k] = (as_fraction(parts[0]), as_fraction(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise UsageError(f"--grid {k}: {exc}") from exc
    try:
        pts = regimes.sample_region(fixed, grid, args.predicate, as_fraction(args.smallness))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    buf = io.StringIO()
    buf.write(f"# config: {cfg.to_json()}\n")
    buf.write(",".join(pts.columns) + "\n")
    n_coord = 3 if args.predicate != "bond" else 2
    for row in pts.rows:
        coords = [_dec12(x) for x in row[:n_coord]]
        flags = [str(int(x)) for x in row[n_coord:]]
        buf.write(",".join(coords + flags) + "\n")
    emit_report(buf.getvalue(), args.out)

    def draw(ax):
        gridded = [c for c in pts.columns[:n_coord] if c in grid]
        if len(gridded) != 2:
            ax.text(0.5, 0.5, "figure needs exactly two gridded axes", ha="center")
            return
        ix, iy = pts.columns.index(gridded[0]), pts.columns.index(gridded[1])
        colour_col = pts.columns.index("cond") if "cond" in pts.columns else pts.columns.index("member")
        xs = [float(r[ix]) for r in pts.rows]
        ys = [float(r[iy]) for r in pts.rows]
        member_col = pts.columns.index("member")
        cs = [int(r[colour_col]) * int(r[member_col]) for r in pts.rows]
        sc = ax.scatter(xs, ys, c=cs, s=4, cmap="viridis")
        ax.set_xlabel(gridded[0])
        ax.set_ylabel(gridded[1])
        ax.figure.colorbar(sc, ax=ax, label=f"{pts.columns[colour_col]} (0 outside the regime)")
    _figure(args.figure, draw)
    return EXIT_OK


def cmd_roots(args, cfg: RunConfig) -> int:
    checks = polynomials.reproduce_thresholds()
    lines = [f"# config: {cfg.to_json()}",
             f"{'polynomial_id':<22} {'constant':>10} {'bracket_lo':>14} {'bracket_hi':>14} {'error':>10}  result"]
    for c in checks:
        lines.append(f"{c.poly_id:<22} {str(float(c.constant)):>10} {float(c.bracket.lo):>14.9f} "
                     f"{float(c.bracket.hi):>14.9f} {float(c.error):>10.2e}  {'PASS' if c.passed else 'FAIL'}")
    n_pass = sum(c.passed for c in checks)
    lines.append(f"# {n_pass}/{len(checks)} pass")
    emit_report("\n".join(lines) + "\n", args.out)
    return EXIT_OK if n_pass == len(checks) else EXIT_FAIL


def _lemma_row(res) -> dict:
    return {"lemma_id": res.lemma_id, "params": _params_json(res.params), "measure_id": res.measure_id,
            "kind": res.kind, "residual_or_margin": rational(res.value), "pass": res.passed}


def cmd_verify_lemmas(args, cfg: RunConfig) -> int:
    measures = sample_invariant_measures(args.measure_samples, args.seed, args.depth)
    rows = []
    if args.which in ("identity", "all"):
        for params in pushforward.sample_gen_points(args.param_samples, args.seed):
            for m in measures:
                rows.extend(_lemma_row(r) for r in pushforward.verify_identity_lemmas(params, m))
    if args.which in ("bound", "all"):
        for params in pushforward.sample_gen_points(args.param_samples, args.seed, pushforward.SMALL_BOX):
            for m in measures:
                rows.extend(_lemma_row(r) for r in pushforward.verify_bound_lemmas(params, m))
    failures = sum(not r["pass"] for r in rows)
    emit_report(dumps({"config": json.loads(cfg.to_json()), "results": rows,
                       "summary": {"checked": len(rows), "failures": failures}}), args.out)
    return EXIT_FAIL if failures else EXIT_OK


def cmd_verify_weights(args, cfg: RunConfig) -> int:
    variants = weights.VARIANTS if args.variant == "all" else (args.variant,)
    rows, failures = [], 0
    for v in variants:
        rhs = weights.perturbed_rhs(v) if args.negative_control else None
        res = weights.verify_sweep(v, args.param_samples, args.measure_samples, args.seed, rhs_override=rhs)
        failures += len(res.failures)
        rows.extend(rep.as_dict() for rep in res.reports)
    emit_report(dumps({"config": json.loads(cfg.to_json()), "results": rows,
                       "summary": {"checked": len(rows), "failures": failures}}), args.out)
    return EXIT_FAIL if failures else EXIT_OK


# ------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pgl", description="Percolation games, envelope automata and their verification.")
    ap.add_argument("--threads", type=int, default=None, help="worker cap (fallback: PGL_THREADS)")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def out_flag(p):
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("kernel", help="dump an envelope kernel as JSON")
    _add_model(p)
    out_flag(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("draw-prob", help="Monte Carlo draw probability on triangle(N)")
    _add_model(p)
    p.add_argument("--horizon", type=int, default=simulator.DEFAULT_HORIZON)
    p.add_argument("--replicas", type=int, default=simulator.DEFAULT_REPLICAS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    out_flag(p)
    p.set_defaults(func=cmd_draw_prob)

    p = sub.add_parser("simulate", help="envelope automaton on a ring; writes densities")
    _add_model(p)
    p.add_argument("--geometry", choices=("ring",), default="ring")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--init", choices=tuple(simulator.INITS), default="allD")
    p.add_argument("--driver", choices=("labels", "kernel"), default="labels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figure", default=None, help="optional PNG of the density trajectory")
    out_flag(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regime", help="regime verdict at one parameter point")
    _add_model(p)
    out_flag(p)
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("region", help="export a regime classification grid as CSV")
    p.add_argument("--predicate", choices=regimes.PREDICATES, default="generalized")
    p.add_argument("--fix", action="append", help="name=value, repeatable")
    p.add_argument("--grid", action="append", help="name=lo:hi:n, repeatable")
    p.add_argument("--smallness", default=str(regimes.SMALLNESS))
    p.add_argument("--figure", default=None, help="optional PNG scatter of the grid")
    out_flag(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("roots", help="reproduce the threshold constants")
    p.add_argument("--list", action="store_true", required=True)
    out_flag(p)
    p.set_defaults(func=cmd_roots)

    pv = sub.add_parser("verify", help="exact verification sweeps")
    vsub = pv.add_subparsers(dest="target", required=True, parser_class=_Parser)
    p = vsub.add_parser("lemmas", help="pushforward identities and bound lemmas")
    p.add_argument("--which", choices=("identity", "bound", "all"), default="all")
    p.add_argument("--param-samples", type=int, default=20)
    p.add_argument("--measure-samples", type=int, default=10)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    out_flag(p)
    p.set_defaults(func=cmd_verify_lemmas)
    p = vsub.add_parser("weights", help="final weight-function inequalities")
    p.add_argument("--variant", choices=weights.VARIANTS + ("bond_B1_printed", "all"), required=True)
    p.add_argument("--param-samples", type=int, default=20)
    p.add_argument("--measure-samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-control", action="store_true",
                   help="shift the key right-hand coefficient by -1; failures are expected")
    out_flag(p)
    p.set_defaults(func=cmd_verify_weights)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if getattr(args, "target", None):
            args.subcommand = f"verify {args.target}"
        cfg = RunConfig.from_args(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

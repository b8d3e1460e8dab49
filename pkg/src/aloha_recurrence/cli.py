"""Command line: ``python -m aloha_recurrence <subcommand> [flags]``.

Each subcommand prints one JSON document on stdout and, with ``--out``,
writes a CSV (or, for ``oracle``, a sparse triplet file).  Exit status is 0
on success, 2 for invalid input and 1 for runtime failures.
"""
import argparse
import json
import sys
import warnings

from . import chain, harness, oracle, recurrence, region
from .errors import AlohaError, SchemaError, TruncationDominated, ValidationError

COMMANDS = ("classify", "witness", "simulate", "return-times", "lyapunov", "escape",
            "oracle", "region-scan")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(message, "argv")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _grid(text):
    return [_floats(axis) for axis in text.split(";")]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--replications", type=int)
    common.add_argument("--grid", type=_grid, metavar="SPEC",
                        help="axes separated by ';', values by ','")
    common.add_argument("--truncation", type=int)
    common.add_argument("--tolerance", type=float)

    parser = _Parser(prog="aloha-recurrence")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("classify", "oracle"):
        sub.add_parser(name, parents=[common])
    for name in ("witness", "region-scan"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--grid-points", type=int)
        p.add_argument("--starts", type=int)
        p.add_argument("--max-iter", type=int)
        if name == "witness":
            p.add_argument("--lambda", dest="lam", type=_floats)
        else:
            p.add_argument("--dim", type=int)
            p.add_argument("--diagonal", action="store_true")
            p.add_argument("--mc", help="'none', 'auto' or comma-separated point indices")
    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--init", type=_ints)
    p.add_argument("--stride", type=int)
    p = sub.add_parser("return-times", parents=[common])
    p.add_argument("--tail", type=_ints)
    p = sub.add_parser("lyapunov", parents=[common])
    p.add_argument("--n-max", type=int)
    p = sub.add_parser("escape", parents=[common])
    p.add_argument("--init", type=_ints)
    p.add_argument("--K", type=int)
    return parser


def _load(args, required=True):
    if args.config is None:
        if required:
            raise SchemaError("--config is required for this subcommand", "argv")
        return None
    try:
        with open(args.config, "rb") as fh:
            return harness.parse_config(fh.read())
    except OSError as exc:
        raise SchemaError(f"cannot read config: {exc}", "argv.--config") from exc


def _pick(flag, value, default):
    if flag is not None:
        return flag
    return default if value is None else value


def _witness_opts(args, cfg):
    base = (cfg.witness if cfg is not None and cfg.witness is not None
            else region.WitnessOptions())
    return region.WitnessOptions(
        grid_points=_pick(args.grid_points, None, base.grid_points),
        n_starts=_pick(args.starts, None, base.n_starts),
        tolerance=_pick(args.tolerance, None, base.tolerance),
        max_iter=_pick(args.max_iter, None, base.max_iter),
        seed=base.seed)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _base(cfg, seed):
    return {"config_digest": harness.config_digest(cfg), "seed": seed}


def cmd_classify(args, out):
    cfg = _load(args)
    seed = _pick(args.seed, cfg.seed, 0)
    rec = _base(cfg, seed)
    rec.update(region.classify(cfg.network).to_dict())
    return rec


def cmd_witness(args, out):
    cfg = _load(args, required=args.lam is None)
    lam = args.lam if args.lam is not None else [float(x) for x in cfg.network.lambdas]
    opts = _witness_opts(args, cfg)
    res = region.find_c1_witness(lam, opts)
    inputs = {"lambda": lam, "witness": opts.__dict__}
    rec = {"config_digest": harness.config_digest(cfg if cfg is not None else inputs),
           "seed": _pick(args.seed, cfg.seed if cfg else None, 0), "lambda": lam}
    rec.update(res.to_dict())
    return rec


def cmd_simulate(args, out):
    cfg = _load(args)
    seed = _pick(args.seed, cfg.seed, 0)
    horizon = _pick(args.horizon, cfg.horizon, 1000)
    init = args.init if args.init is not None else cfg.init
    rec = chain.simulate_trajectory(cfg.network, init, horizon, seed, args.stride)
    if args.out:
        _write(args.out, rec.to_csv())
    res = _base(cfg, seed)
    res.update(rec.summary())
    return res


def cmd_return_times(args, out):
    cfg = _load(args)
    seed = _pick(args.seed, cfg.seed, 0)
    horizon = _pick(args.horizon, cfg.horizon, recurrence.DEFAULT_RETURN_HORIZON)
    reps = _pick(args.replications, cfg.replications, 1000)
    tail = _pick(args.tail, cfg.tail, ())
    outs = recurrence.sample_return_times(cfg.network, reps, horizon, seed)
    st = recurrence.return_time_stats(outs, tail)
    if args.out:
        lines = ["replication,value,censored"]
        lines += [f"{r},{o.lower_bound},{int(o.censored)}" for r, o in enumerate(outs)]
        _write(args.out, "\n".join(lines) + "\n")
    return harness.return_time_record(cfg, st, seed, horizon, reps)


def cmd_lyapunov(args, out):
    cfg = _load(args)
    seed = _pick(args.seed, cfg.seed, 0)
    reps = _pick(args.replications, cfg.replications, 1000)
    n_max = _pick(args.n_max, cfg.n_max, 50)
    tr = recurrence.lyapunov_trace(cfg.network, reps, n_max, seed)
    if args.out:
        lines = ["n,y,y_se,tail,tail_se,gap,gap_se"]
        for k in range(n_max):
            g = "" if tr.gap is None or k >= len(tr.gap) else repr(float(tr.gap[k]))
            gs = "" if tr.gap_se is None or k >= len(tr.gap_se) else repr(float(tr.gap_se[k]))
            lines.append(f"{k + 1},{float(tr.y[k])!r},{float(tr.y_se[k])!r},"
                         f"{float(tr.tail[k])!r},{float(tr.tail_se[k])!r},{g},{gs}")
        _write(args.out, "\n".join(lines) + "\n")
    rec = _base(cfg, seed)
    rec.update(tr.to_dict())
    return rec


def cmd_escape(args, out):
    cfg = _load(args)
    seed = _pick(args.seed, cfg.seed, 0)
    horizon = _pick(args.horizon, cfg.horizon, recurrence.DEFAULT_ESCAPE_HORIZON)
    reps = _pick(args.replications, cfg.replications, 1000)
    init = args.init if args.init is not None else cfg.init
    K = _pick(args.K, cfg.K, recurrence.DEFAULT_K)
    est = recurrence.escape_probability(cfg.network, init, horizon, reps, seed, K)
    rec = _base(cfg, seed)
    rec.update(est.to_dict())
    return rec


def cmd_oracle(args, out):
    cfg = _load(args)
    n = _pick(args.truncation, cfg.truncation, 60)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ch = oracle.build_truncated_chain(cfg.network, n)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            ch.to_triplets(fh)
    rec = _base(cfg, _pick(args.seed, cfg.seed, 0))
    rec.update({"truncation": n, "states": ch.size, "boundary_mass": ch.boundary_mass,
                "saturated_drift": oracle.saturated_drift(cfg.network)})
    try:
        res = oracle.exact_return_time(ch)
        rec.update({"status": "ok"})
        rec.update(res.to_dict())
    except TruncationDominated as exc:
        rec.update({"status": "TruncationDominated", "expected_return_time": None,
                    "boundary_occupancy": exc.boundary_occupancy,
                    "sensitivity": exc.sensitivity})
    return rec


def cmd_region_scan(args, out):
    cfg = _load(args, required=False)
    sweep = cfg.sweep if cfg is not None else None
    if args.grid is not None:
        mc = args.mc or "none"
        if mc not in ("none", "auto"):
            mc = tuple(_ints(mc))
        sweep = harness.SweepSpec(axes=tuple(tuple(a) for a in args.grid), dim=args.dim,
                                  diagonal=args.diagonal, mc=mc)
    if sweep is None:
        raise SchemaError("region-scan needs --grid or a config with a sweep block", "argv")
    opts = _witness_opts(args, cfg)
    seed = _pick(args.seed, cfg.seed if cfg else None, 0)
    horizon = _pick(args.horizon, cfg.horizon if cfg else None, 10_000)
    reps = _pick(args.replications, cfg.replications if cfg else None, 1000)
    table = harness.region_scan(sweep, opts, seed, horizon, reps)
    csv_text = table.to_csv()
    if args.out:
        _write(args.out, csv_text)
    inputs = {"sweep": sweep.to_dict(), "witness": opts.__dict__}
    return {"config_digest": harness.config_digest(cfg if cfg is not None else inputs),
            "seed": seed, "points": len(table.rows),
            "witnesses": sum(r.witness_found for r in table.rows),
            "columns": table.columns,
            "rows": [[*r.lam, r.witness_found, r.best_f, r.verdict, r.load_sum,
                      r.mc_mean, r.mc_censored, *r.p] for r in table.rows]}


HANDLERS = {
    "classify": cmd_classify, "witness": cmd_witness, "simulate": cmd_simulate,
    "return-times": cmd_return_times, "lyapunov": cmd_lyapunov, "escape": cmd_escape,
    "oracle": cmd_oracle, "region-scan": cmd_region_scan,
}


def run_command(argv, stdout=None, stderr=None):
    """Run one subcommand; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        result = HANDLERS[args.command](args, stdout)
        stdout.write(harness.dumps(result))
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except (AlohaError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return 1


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))

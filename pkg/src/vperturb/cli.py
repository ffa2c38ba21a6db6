"""Command-line front end.

Results go to ``--out`` or standard output; logs go to standard error, with
the level taken from the ``LP_LOG`` environment variable (default WARNING).

Exit codes: 0 success, 2 bad configuration, 3 numerical failure (more than
1% of channel draws had to be redrawn, or a kernel failed), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import complexity as cx
from .errors import ConfigInvalid, VPerturbError
from .sim import EncoderSpec, SimConfig, SimReport, emit_report, retained_metric_stats, run_point, sweep

log = logging.getLogger("vperturb")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
REDRAW_LIMIT = 0.01


class _NumericFailure(Exception):
    pass


def _setup_logging(quiet: bool):
    level = os.environ.get("LP_LOG", "WARNING").upper()
    if quiet:
        level = "ERROR"
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("vperturb")
    root.handlers[:] = [handler]
    try:
        root.setLevel(level)
    except ValueError:
        root.setLevel(logging.WARNING)
        log.warning("ignoring unknown LP_LOG level %r", level)


def load_config(path, seed=None) -> SimConfig:
    """Read a JSON config file; ``seed`` overrides the file's seed."""
    d = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"{path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigInvalid(f"{path}: top level must be an object")
    if seed is not None:
        d["seed"] = seed
    return SimConfig.from_dict(d)


def _redraw_check(report: SimReport, cfg: SimConfig):
    per_vec = cfg.k * cfg.modem.bits_per_real_dim
    for r in report.rows:
        channels = math.ceil(r.bits / per_vec / cfg.n_f) if r.bits else 0
        if channels and r.redraws / (channels + r.redraws) > REDRAW_LIMIT:
            raise _NumericFailure(f"{r.encoder} at {r.snr_db} dB redrew {r.redraws} of "
                                  f"{channels + r.redraws} channels")


def _write_text(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _write_table(rows: list[dict], fmt: str, path):
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        text = buf.getvalue()
    _write_text(text, path)


def _emit(report, args):
    text = emit_report(report, args.format)
    _write_text(text, args.out)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.seed)
    if not cfg.encoders:
        raise ConfigInvalid("config lists no encoders")
    if not 0 <= args.encoder < len(cfg.encoders):
        raise ConfigInvalid(f"--encoder must be in [0, {len(cfg.encoders) - 1}]")
    snr = cfg.snr_db_list[0] if args.snr is None else args.snr
    cfg = SimConfig.from_dict(cfg.to_dict() | {"snr_db_list": [snr]})
    row = run_point(cfg, cfg.encoders[args.encoder], snr, args.encoder, 0)
    report = SimReport([row], cfg.to_dict())
    _redraw_check(report, cfg)
    _emit(report, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    if not cfg.encoders:
        raise ConfigInvalid("config lists no encoders")
    report = sweep(cfg, threads=args.threads)
    _redraw_check(report, cfg)
    _emit(report, args)
    return EXIT_OK


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_complexity(args) -> int:
    if args.node_table:
        _write_table(cx.node_count_table(), args.format, args.out)
        return EXIT_OK
    rows = []
    for k in args.k:
        for t in args.t:
            for p in args.p:
                if p > k:
                    continue
                try:
                    se = cx.se_worst_case_nodes(k, t) if t > 1 else None
                except VPerturbError:
                    se = None
                mul, add = cx.arithmetic_totals(k, t, args.d, args.n_f)
                rows.append({
                    "K": k, "T": t, "p": p,
                    "se_worst_nodes": se,
                    "qrdme_nodes": cx.qrdme_nodes(k, t),
                    "fse_nodes": cx.fse_nodes(k, t, p),
                    "rho": float(cx.rho(k, t)),
                    "total_mults_p1": float(mul),
                    "total_adds_p1": float(add),
                })
    _write_table(rows, args.format, args.out)
    return EXIT_OK


def cmd_csi_bound(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rows = []
    for i, n in enumerate(args.n):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        rows.append(cx.csi_bound_sweep(n, args.pairs, rng, args.zeta_db))
    _write_table(rows, args.format, args.out)
    return EXIT_OK


def cmd_metric_stats(args) -> int:
    base = load_config(args.config, args.seed)
    specs = [EncoderSpec("fse", t_count=9, p=1), EncoderSpec("fse", t_count=3, p=2)]
    rows = []
    for n in args.n:
        cfg = SimConfig.from_dict(base.to_dict() | {"n_antennas": n})
        for spec in specs:
            mean, std = retained_metric_stats(cfg, spec, args.realizations, args.snr_db)
            rows.append({"system": f"{n}x{n}", "encoder": spec.label, "mean": mean, "std": std,
                         "realizations": args.realizations, "snr_db": args.snr_db, "seed": cfg.seed})
    _write_table(rows, args.format, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with SimConfig fields")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="write results here instead of standard output")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    common.add_argument("--quiet", action="store_true", help="only log errors")

    ap = argparse.ArgumentParser(prog="vperturb", description="Vector-perturbation precoding simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one encoder at one SNR")
    p.add_argument("--encoder", type=int, default=0, help="index into the config's encoder list")
    p.add_argument("--snr", type=float, help="SNR in dB (default: first of snr_db_list)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="every encoder at every SNR")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("complexity", parents=[common], help="closed-form complexity tables")
    p.add_argument("--k", type=_int_list, default=[8, 16], help="real dimensions, e.g. 8,16")
    p.add_argument("--t", type=_int_list, default=[3, 5, 7, 9])
    p.add_argument("--p", type=_int_list, default=[1, 2])
    p.add_argument("--d", type=int, default=2, help="levels per real dimension")
    p.add_argument("--n-f", type=int, default=1, dest="n_f")
    p.add_argument("--node-table", dest="node_table", action="store_true", help="print the visited-node table only")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("csi-bound", parents=[common], help="precoder error bound under CSI error")
    p.add_argument("--n", type=_int_list, default=[4, 8], help="antenna counts")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--zeta-db", type=float, default=25.0, dest="zeta_db")
    p.set_defaults(func=cmd_csi_bound)

    p = sub.add_parser("metric-stats", parents=[common], help="retained leaf metric statistics")
    p.add_argument("--n", type=_int_list, default=[4, 8], help="antenna counts")
    p.add_argument("--realizations", type=int, default=100_000)
    p.add_argument("--snr-db", type=float, default=0.0, dest="snr_db",
                   help="SNR that sets the MMSE regularization")
    p.set_defaults(func=cmd_metric_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    if args.threads < 0:
        log.error("--threads must be >= 0")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (_NumericFailure, VPerturbError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

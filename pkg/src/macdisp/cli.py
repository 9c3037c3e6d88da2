"""Command-line front end: ``macdisp <command> --channel FILE ...``.

Numbers are written with 12 significant digits so that identical runs give
identical bytes. Failures print a JSON record on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import boundary, pi_set, snap_to_boundary
from .channel import JointInput, joint_type_project, load_channel, load_input
from .fbl_sim import (CodebookSpec, build_codebook, gaussian_approx_rates, message_counts,
                      simulate_error, verdu_han_bound)
from .infogeom import DispersionMatrix, dispersion_matrix, mean_vector
from .mvnorm import psi_inverse
from .secondorder import Theorem1Config, theorem1_region

FMT = ".12g"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message)


def _fail(kind: str, message: str, code: int = 2):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    raise SystemExit(code)


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return float(format(x, FMT))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, int, np.floating, np.integer, np.bool_, bool)):
        return _num(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else format(float(v), FMT) if isinstance(v, float)
                              or isinstance(v, np.floating) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def _emit(args, name: str, text: str, written: list):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        written.append(name)
    else:
        sys.stdout.write(text)


def _read_channel(path: str):
    with open(path, "rb") as fh:
        return load_channel(fh)


def _read_input(path: str | None, ch):
    if path is None:
        return JointInput.uniform(ch.x1_size, ch.x2_size)
    with open(path, "rb") as fh:
        return load_input(fh)


def _check_eps(eps: float):
    if not 0.0 < eps < 1.0:
        raise CliError(f"--eps must lie in (0, 1), got {eps}")


def _positive(name: str, value):
    if value is not None and not value > 0:
        raise CliError(f"{name} must be positive, got {value}")


# ---------------------------------------------------------------------------
# commands

def cmd_info(args, written):
    ch = _read_channel(args.channel)
    p = _read_input(args.input, ch)
    iv, v = mean_vector(p, ch), dispersion_matrix(p, ch)
    doc = {"i1": iv.i1, "i12": iv.i12, "v1": v.v1, "v12": v.v12, "v1_12": v.v1_12, "units": "nats"}
    _emit(args, "info.json", dumps(doc), written)


def cmd_psi_region(args, written):
    _check_eps(args.eps)
    v = DispersionMatrix.from_array(args.v)
    reg = psi_inverse(v, args.eps, args.extent, args.resolution)
    pts = reg.boundary_samples() if reg.is_quadrant else reg.boundary
    _emit(args, "psi_region.csv", csv_text(["z1_nats", "z2_nats"], pts), written)


def _boundary_outputs(bd):
    rows = [(float(r1), float(r2), k) for k, (r1, r2) in enumerate(bd.points)]
    csv = csv_text(["R1_nats", "R2_nats", "achiever_id"], rows)
    side = {"sum_capacity": bd.sum_capacity, "r1_capacity": bd.r1_capacity, "units": "nats",
            "achievers": [{"id": k, "p": a.p} for k, a in enumerate(bd.achievers)]}
    return csv, dumps(side)


def cmd_boundary(args, written):
    ch = _read_channel(args.channel)
    bd = boundary(ch, args.resolution)
    csv, side = _boundary_outputs(bd)
    _emit(args, "boundary.csv", csv, written)
    if args.out:
        _emit(args, "boundary_achievers.json", side, written)
    else:
        sys.stdout.write(side)


def _region_outputs(ch, r1, r2, eps, args, bd=None):
    cfg = Theorem1Config(snap_tol=args.tol)
    bd = bd or boundary(ch, args.resolution)
    (s1, s2), _ = snap_to_boundary(bd, r1, r2, args.tol)
    s1, s2 = max(float(s1), 0.0), max(float(s2), 0.0)
    reg = theorem1_region(ch, s1, s2, eps, cfg, bd)
    poly = reg.export((args.l1_min, args.l1_max), args.count, (args.l2_min, args.l2_max))
    csv = csv_text(["L1_nats", "L2_nats"], poly)
    tp = reg.tangents
    meta = {
        "point": [s1, s2], "requested_point": [r1, r2], "epsilon": eps, "units": "nats",
        "inputs": [{"id": k, "p": p.p, "case": t.case.value, "slacks": list(t.slacks),
                    "neighborhood_achieved": nb}
                   for k, (p, t, nb) in enumerate(zip(reg.inputs, reg.tags,
                                                      reg.diagnostics["neighborhood_achieved"]))],
        "pieces": [{"kind": pc.kind, "source": pc.source} for pc in reg.pieces],
        "tangents": {
            "t_minus": None if tp.t_minus is None else tp.t_minus,
            "t_plus": None if tp.t_plus is None else tp.t_plus,
            "T_minus": None if tp.T_minus is None else tp.T_minus,
            "T_plus": None if tp.T_plus is None else tp.T_plus,
            "corner": tp.is_corner,
        },
    }
    return reg, csv, dumps(meta)


def cmd_region(args, written):
    _check_eps(args.eps)
    ch = _read_channel(args.channel)
    _, csv, meta = _region_outputs(ch, args.r1, args.r2, args.eps, args)
    _emit(args, "region.csv", csv, written)
    if args.out:
        _emit(args, "region.json", meta, written)
    else:
        sys.stdout.write(meta)


def cmd_simulate(args, written):
    ch = _read_channel(args.channel)
    p = _read_input(args.input, ch)
    pp = None if args.input_prime is None else _read_input(args.input_prime, ch)
    spec = CodebookSpec.time_sharing(args.n, args.m1, args.m2, p, pp, args.beta, args.seed)
    cb = build_codebook(spec, ch)
    rep = simulate_error(cb, ch, args.trials, args.decoder, args.gamma_a)
    _emit(args, "simulation.json", dumps(rep.to_dict(timing=not args.out)), written)


def cmd_converse(args, written):
    ch = _read_channel(args.channel)
    p = joint_type_project(_read_input(args.input, ch), args.n)
    res = verdu_han_bound(p, ch, args.n, args.r1, args.r2, args.gamma, args.samples, args.seed)
    _emit(args, "converse.json", dumps(res.to_dict()), written)


def cmd_report(args, written):
    if not args.out:
        raise CliError("report needs --out")
    _check_eps(args.eps)
    ch = _read_channel(args.channel)
    bd = boundary(ch, args.resolution)
    csv, side = _boundary_outputs(bd)
    _emit(args, "boundary.csv", csv, written)
    _emit(args, "boundary_achievers.json", side, written)
    if args.r1 is None or args.r2 is None:
        r1, r2 = (float(x) for x in bd.points[len(bd.points) // 2])
    else:
        r1, r2 = args.r1, args.r2
    reg, rcsv, rmeta = _region_outputs(ch, r1, r2, args.eps, args, bd)
    _emit(args, "region.csv", rcsv, written)
    _emit(args, "region.json", rmeta, written)
    p = reg.inputs[0]
    g = gaussian_approx_rates(ch, p, args.n, args.eps)
    m1, m2 = message_counts(args.n, *g.achievable)
    spec = CodebookSpec.time_sharing(args.n, m1, m2, p, None, 0.0, args.seed)
    rep = simulate_error(build_codebook(spec, ch), ch, args.trials)
    pn = joint_type_project(p, args.n)
    vh = verdu_han_bound(pn, ch, args.n, *g.achievable, samples=args.samples, seed=args.seed)
    overlay = {
        "n": args.n, "epsilon": args.eps, "input": p.p,
        "gaussian_rates": {"achievable": g.achievable, "converse": g.converse, "z": g.z},
        "message_counts_log": [math.log(m1), math.log(m2)],
        "simulation": rep.to_dict(timing=False),
        "converse": vh.to_dict(),
    }
    _emit(args, "overlay.json", dumps(overlay), written)
    files = {}
    for name in sorted(written):
        files[name] = hashlib.sha256((Path(args.out) / name).read_bytes()).hexdigest()
    manifest = {"version": __version__, "channel": Path(args.channel).name, "seed": args.seed,
                "point": [r1, r2], "files": files}
    _emit(args, "manifest.json", dumps(manifest), written)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="macdisp", description="Second-order rate regions for multiple-access "
                                             "channels with degraded message sets.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, channel=True):
        if channel:
            p.add_argument("--channel", required=True, help="channel JSON file")
        p.add_argument("--out", help="write artifacts to this directory instead of stdout")

    p = sub.add_parser("info", help="information vector and dispersion matrix")
    common(p)
    p.add_argument("--input", help="joint input JSON (default: uniform)")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("psi-region", help="boundary of the Gaussian quantile set")
    common(p, channel=False)
    p.add_argument("--v", type=float, nargs=4, required=True, metavar="V", help="2x2 matrix, row major")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--extent", type=float, default=6.0)
    p.add_argument("--resolution", type=int, default=512)
    p.set_defaults(func=cmd_psi_region)

    p = sub.add_parser("boundary", help="capacity region boundary")
    common(p)
    p.add_argument("--resolution", type=int, default=128)
    p.set_defaults(func=cmd_boundary)

    def region_opts(p):
        p.add_argument("--eps", type=float, required=True)
        p.add_argument("--resolution", type=int, default=128, help="boundary resolution")
        p.add_argument("--tol", type=float, default=1e-6, help="snap tolerance to the boundary")
        p.add_argument("--l1-min", type=float, default=-5.0)
        p.add_argument("--l1-max", type=float, default=5.0)
        p.add_argument("--l2-min", type=float, default=-50.0)
        p.add_argument("--l2-max", type=float, default=50.0)
        p.add_argument("--count", type=int, default=101)

    p = sub.add_parser("region", help="second-order region at a boundary point")
    common(p)
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    region_opts(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate", help="Monte Carlo error rate of a random superposition code")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m1", type=int, required=True)
    p.add_argument("--m2", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help="first-section joint input JSON (default: uniform)")
    p.add_argument("--input-prime", help="second-section joint input JSON")
    p.add_argument("--decoder", choices=["threshold", "ml"], default="threshold")
    p.add_argument("--gamma-a", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converse", help="sampled converse bound")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help="joint input JSON, projected to an n-type (default: uniform)")
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("report", help="boundary, region, simulation and converse in one run")
    common(p)
    p.add_argument("--r1", type=float, default=None)
    p.add_argument("--r2", type=float, default=None)
    region_opts(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return ap


def _validate(args):
    for name in ("resolution", "trials", "samples", "n", "count", "tol", "extent", "gamma"):
        _positive(f"--{name}", getattr(args, name, None))
    if getattr(args, "resolution", 2) < 2:
        raise CliError("--resolution must be at least 2")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    written: list = []
    try:
        _validate(args)
        args.func(args, written)
    except (CliError, ValueError, RuntimeError, OSError) as exc:
        _fail(type(exc).__name__, str(exc), 1)
    if args.out:
        print(f"wrote {len(written)} file(s) to {args.out}: {', '.join(written)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

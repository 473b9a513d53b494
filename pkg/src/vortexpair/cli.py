"""Command-line entry point.

    vortexpair solve --config run.cfg --out run
    vortexpair lamb --mu 0.02 --lam 50 --out lamb
    vortexpair evolve --record run --out run_trace.csv
    vortexpair stability --record run --delta 0.01 --out run_d1e-2.csv
    vortexpair distance a.csv b.csv
    vortexpair verify-kernel --s 0.5
    vortexpair rescale --in run.csv --s 0.5 --lam 4 --out run_norm

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
The scipy FFT worker count is read from VORTEXPAIR_THREADS.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from scipy import fft as sfft

from . import evolution as ev
from .functionals import rescale, unnormalize_multipliers
from .grid import Field, Multipliers, make_grid
from .io import (
    RunConfig,
    load_config,
    load_field,
    load_metadata,
    load_record,
    save_field,
    save_record,
    save_trace,
    sibling,
    write_json,
)
from .lamb import LambParams, lamb_field, lamb_stream_field
from .solver import CapActiveError, ConvergenceError, solve_dipole

log = logging.getLogger("vortexpair")

THREADS_ENV = "VORTEXPAIR_THREADS"
METRIC_NOTE = (
    "orbital distance (L2 + x2-weighted L1, infimum over x1-translates) evaluated along "
    "pseudo-spectral periodic-box trajectories in place of the continuum regular solutions"
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vortexpair", description="Travelling gSQG vortex pairs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", help="compute a dipole from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", help="output prefix (default: config name)")
    sp.add_argument("--resume", help="prefix of a checkpoint or record to continue from")
    sp.add_argument("--checkpoint-every", type=int, default=0, help="write <out>.ckpt every N iterations")

    sp = sub.add_parser("lamb", help="sample the analytic Lamb dipole")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--W", type=float, help="travelling speed")
    grp.add_argument("--mu", type=float, help="half-plane impulse")
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--L", type=float, default=6.0)
    sp.add_argument("--H", type=float, default=6.0)
    sp.add_argument("--nx", type=int, default=256)
    sp.add_argument("--ny", type=int, default=128)
    sp.add_argument("--out", required=True)

    for name, helptext in (("evolve", "evolve a solved dipole"), ("stability", "perturbed stability run")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--record", required=True, help="prefix written by solve")
        sp.add_argument("--config", help="config file whose [evolution] section is used")
        sp.add_argument("--out", required=True, help="trace CSV path")
        sp.add_argument("--n", type=int)
        sp.add_argument("--box-factor", type=float)
        sp.add_argument("--turnovers", type=float)
        sp.add_argument("--sample-every", type=int)
        if name == "stability":
            sp.add_argument("--delta", type=float, required=True, help="perturbation L2 size relative to the dipole")

    sp = sub.add_parser("distance", help="orbital distance between two saved fields")
    sp.add_argument("a")
    sp.add_argument("b")

    sp = sub.add_parser("verify-kernel", help="kernel invariant suite")
    sp.add_argument("--s", type=float, required=True)

    sp = sub.add_parser("rescale", help="map a field to the lambda = nu = 1 problem")
    sp.add_argument("--in", dest="src", required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--nu", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    return p


# -- subcommands -----------------------------------------------------------------------------

def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    prefix = sibling(args.out, "") if args.out else Path(args.config).with_suffix("")
    grid = cfg.grid()
    p = cfg.params()
    override = {}
    if args.resume:
        meta = load_metadata(args.resume)
        init = load_field(sibling(args.resume, ".csv"), "vorticity", grid)
        m = meta.get("multipliers") or {}
        override = {"init": init, "mult": Multipliers(m.get("W", 0.0), m.get("gamma", 0.0))}
        # a resumed iterate keeps its original cap
        cap = (meta.get("diagnostics") or {}).get("cap")
        if cap is not None and p.cap is None:
            override["cap"] = cap
        log.info("resuming from %s", args.resume)
    solver_cfg = cfg.solver_config(**override)

    callback = None
    if args.checkpoint_every > 0:
        amp = p.lam ** (-1.0 / p.s) / p.nu
        ckpt = sibling(prefix, "_ckpt")

        def checkpoint(it, omega, mult, res):
            if it % args.checkpoint_every:
                return
            W, gam = unnormalize_multipliers(mult.W, mult.gamma, p.lam, p.nu, p.s)
            save_field(Field(grid, omega.values / amp), sibling(ckpt, ".csv"))
            write_json(
                {"checkpoint": True, "iteration": it, "residual": res, "config_hash": cfg.digest(),
                 "multipliers": {"W": W, "gamma": gam}},
                sibling(ckpt, ".json"),
            )

        callback = checkpoint

    try:
        record = solve_dipole(p, grid, solver_cfg, callback)
    except (ConvergenceError, CapActiveError) as exc:
        if exc.record is not None:
            save_record(exc.record, sibling(prefix, "_partial"), cfg, failed=str(exc))
        raise
    csv_path, json_path = save_record(record, prefix, cfg)
    print(f"W = {record.mult.W:.12g}  gamma = {record.mult.gamma:.6g}  energy = {record.energy:.12g}")
    print(f"residual = {record.residual:.3e} after {record.iterations} iterations")
    print(f"wrote {csv_path} {json_path}")
    return 0


def _cmd_lamb(args) -> int:
    grid = make_grid(args.L, args.H, args.nx, args.ny)
    lp = LambParams(args.W, args.lam) if args.W is not None else LambParams.from_impulse(args.mu, args.lam)
    out = args.out
    save_field(lamb_field(grid, lp), sibling(out, ".csv"))
    save_field(lamb_stream_field(grid, lp), sibling(out, "_stream.csv"))
    write_json(
        {"model": "lamb", "W": lp.W, "lam": lp.lam, "radius": lp.radius,
         "impulse": math.pi * lp.radius**2 * lp.W,
         "grid": {"L": grid.L, "H": grid.H, "nx": grid.nx, "ny": grid.ny}},
        sibling(out, ".json"),
    )
    print(f"W = {lp.W:.12g}  radius = {lp.radius:.12g}")
    return 0


def _evolution_settings(args) -> RunConfig:
    from dataclasses import replace

    base = load_config(args.config) if args.config else None
    kw = {}
    for key in ("n", "box_factor", "turnovers", "sample_every"):
        val = getattr(args, key)
        if val is not None:
            kw[key] = val
    if base is None:
        meta = load_metadata(args.record)
        base = RunConfig(s=meta["params"]["s"], mu=meta["params"]["mu"])
    return replace(base, **kw)


def _cmd_evolve(args, delta: float = 0.0) -> int:
    settings = _evolution_settings(args)
    record = load_record(args.record)
    T = settings.turnovers * ev.turnover_time(record)
    Lb = ev.default_box(record, settings.box_factor)
    pert = ev.bump_perturbation(record, delta) if delta > 0 else None
    probe = ev.embed_periodic(record.omega, Lb, settings.n, record.params.s)
    dt = settings.cfl_fraction * ev.max_dt(probe)
    trace = ev.run_stability(record, pert, T, dt=dt, Lb=Lb, n=settings.n, sample_every=settings.sample_every)
    path, side = save_trace(
        trace, args.out, delta=delta, metric=METRIC_NOTE, config_hash=settings.digest(),
        speed=ev.centroid_speed(trace), W=record.mult.W,
    )
    print(f"centroid speed / W - 1 = {ev.centroid_speed(trace) / record.mult.W - 1:+.3e}")
    print(f"max distance = {max(trace.distance):.6g}")
    for k, v in trace.conserved_drifts().items():
        print(f"drift {k:10s} {v:.3e}")
    print(f"wrote {path} {side}")
    return 0


def _cmd_distance(args) -> int:
    a = load_field(args.a, "scalar")
    b = load_field(args.b, "scalar", a.grid)
    print(f"{ev.shift_distance(a, b):.17g}")
    return 0


def _cmd_verify_kernel(args) -> int:
    from .kernel import verify_kernel

    rows = verify_kernel(args.s)
    width = max(len(r[0]) for r in rows)
    for name, err, ok in rows:
        print(f"{name:<{width}}  {err:10.3e}  {'PASS' if ok else 'FAIL'}")
    return 0 if all(r[2] for r in rows) else 2


def _cmd_rescale(args) -> int:
    f = load_field(args.src, "vorticity")
    out = rescale(f, args.lam, args.nu, args.s)
    path = save_field(out, sibling(args.out, ".csv"))
    print(f"wrote {path} (length factor {args.lam ** (1.0 / (2.0 * args.s)):.12g})")
    return 0


COMMANDS = {
    "solve": _cmd_solve,
    "lamb": _cmd_lamb,
    "evolve": _cmd_evolve,
    "stability": lambda a: _cmd_evolve(a, a.delta),
    "distance": _cmd_distance,
    "verify-kernel": _cmd_verify_kernel,
    "rescale": _cmd_rescale,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    try:
        with sfft.set_workers(workers):
            return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

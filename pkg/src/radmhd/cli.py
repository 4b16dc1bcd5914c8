"""Command-line entry point: ``radmhd {run,bound,picard,verify,u0}``.

Exit codes: 0 success or horizon reached, 2 breakdown detected, 3 step
underflow, 4 invariant violation, 64 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from radmhd.bound import DegenerateBoundError, bound_table, lifespan_bound, optimize_alpha
from radmhd.config import RunConfig, emit_records, load_config
from radmhd.core import ConfigurationError, FluidParams, build_compatible_u0, build_initial_state
from radmhd.diagnostics import energy, magnetic_charge
from radmhd.solver import TerminationKind, simulate

logger = logging.getLogger("radmhd")

EXIT_OK = 0
EXIT_CONFIG = 64
EXIT_CODES = {
    TerminationKind.REACHED_T_END: 0,
    TerminationKind.BLOWUP_DETECTED: 2,
    TerminationKind.DT_UNDERFLOW: 3,
    TerminationKind.INVARIANT_VIOLATION: 4,
}


@contextmanager
def _sink(path: Optional[Path]):
    if path is None:
        yield sys.stdout
        return
    try:
        with open(path, "w") as fh:
            yield fh
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from None


def _output(args, cfg: Optional[RunConfig]) -> Optional[Path]:
    if args.output:
        return Path(args.output)
    return cfg.output_path if cfg is not None else None


def _with_alpha(cfg: RunConfig, alpha: Optional[float]) -> RunConfig:
    if alpha is None:
        return cfg
    from dataclasses import replace

    if not 1 < alpha < 2:
        raise ConfigurationError(f"--alpha must lie in (1, 2), got {alpha}")
    return replace(cfg, scenario=replace(cfg.scenario, alpha=alpha), alpha=alpha)


def cmd_run(args) -> int:
    cfg = _with_alpha(load_config(args.config), args.alpha)
    result = simulate(cfg.scenario)
    with _sink(_output(args, cfg)) as fh:
        emit_records(result.records, fh, result.termination, echo=cfg.echo)
    s = result.summary
    print(f"termination={result.termination.kind.value} T_obs={s.T_obs:.6g} "
          f"steps={s.steps} min_dt={s.min_dt:.3g} max|div u|={s.max_divu:.4g}", file=sys.stderr)
    if s.C0 > 0 and s.E0 > 0:
        best = optimize_alpha(cfg.scenario.params, s.C0, s.E0)
        print(f"T_max(alpha*={best.alpha:.8f})={best.T_max:.6g} T_obs/T_max={s.T_obs / best.T_max:.3g} "
              f"int||div u||^2 dt / E0={s.divu_sq_integral / s.E0:.4g} "
              f"chain_violations={s.chain_violations}", file=sys.stderr)
    return EXIT_CODES[result.termination.kind]


def cmd_bound(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        sc = cfg.scenario
        if sc.r0 is None:
            raise ConfigurationError("bound needs a vacuum scenario (r0) to define C0")
        state = build_initial_state(sc)
        params = sc.params
        C0 = abs(magnetic_charge(state, sc.r0, sc.grid))
        E0 = energy(state, params, sc.grid)
    else:
        nu = args.nu
        params = FluidParams(mu=nu / 3.0, lam=nu / 3.0, R0=args.R0)
        C0, E0 = args.C0, args.E0
    try:
        rows = bound_table(params, C0, E0)
        if args.alpha is not None:
            rows.append(lifespan_bound(params, C0, E0, args.alpha))
        best = optimize_alpha(params, C0, E0)
    except DegenerateBoundError as exc:
        raise ConfigurationError(str(exc)) from None
    with _sink(Path(args.output) if args.output else None) as fh:
        fh.write(f"# C0={C0:.17g} E0={E0:.17g} nu={params.nu:.17g} R0={params.R0:.17g}\n")
        fh.write("alpha,K,divu_lower,T_max,T_max_disc\n")
        for row in rows:
            fh.write(",".join(format(v, ".10g") for v in row.as_row().values()) + "\n")
        fh.write("# optimum\n")
        fh.write(",".join(format(v, ".12g") for v in best.as_row().values()) + "\n")
    return EXIT_OK


def cmd_picard(args) -> int:
    from radmhd.picard import iterate

    cfg = load_config(args.config)
    result = iterate(cfg.scenario, cfg.picard_delta, cfg.picard_iters, cfg.picard_T, cfg.picard_dt)
    with _sink(_output(args, cfg)) as fh:
        for line in cfg.echo:
            fh.write(f"# {line}\n")
        fh.write(f"# picard delta={result.delta!r} T={result.T!r} dt={result.dt!r}\n")
        fh.write("index,psi,grad_diff,ratio\n")
        for it in result.iterates[1:]:
            ratio = it.ratio if it.ratio is not None else math.nan
            fh.write(f"{it.index},{it.psi:.17g},{it.grad_diff:.17g},{ratio:.17g}\n")
        fh.write(f"# converged={result.converged} diverged={result.diverged}\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from radmhd.manufactured import verify

    params = None
    levels = (32, 64, 128, 256)
    t_end = 0.05
    if args.config:
        cfg = load_config(args.config)
        params, levels, t_end = cfg.scenario.params, cfg.verify_levels, cfg.verify_t_end
    if args.levels:
        try:
            levels = tuple(int(x) for x in args.levels.split(","))
        except ValueError:
            raise ConfigurationError(f"--levels must be comma-separated integers, got {args.levels!r}") from None
    study = verify(levels, t_end, params)
    with _sink(Path(args.output) if args.output else None) as fh:
        fh.write("n,l2_error,order\n")
        for n, err, order in study.rows():
            fh.write(f"{n},{err:.17g},{order:.6g}\n")
    return EXIT_OK


def cmd_u0(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    grid = sc.grid
    state = build_initial_state(sc)
    u0 = build_compatible_u0(sc.params, state.rho, state.B, grid)
    with _sink(_output(args, cfg)) as fh:
        fh.write("r,u0\n")
        np.savetxt(fh, np.column_stack([grid.nodes, u0]), delimiter=",", fmt="%.17g")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radmhd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write the diagnostics CSV")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bound", help="tabulate the lifespan bound over alpha")
    p.add_argument("config", nargs="?")
    p.add_argument("--alpha", type=float)
    p.add_argument("--nu", type=float, default=3.0, help="2mu+lambda when no config is given")
    p.add_argument("--R0", type=float, default=1.0)
    p.add_argument("--C0", type=float, default=1.0)
    p.add_argument("--E0", type=float, default=1.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("picard", help="linearized iteration with contraction diagnostics")
    p.add_argument("config")
    p.add_argument("--output")
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("verify", help="manufactured-solution convergence study")
    p.add_argument("config", nargs="?")
    p.add_argument("--levels")
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("u0", help="print the compatible initial velocity")
    p.add_argument("config")
    p.add_argument("--output")
    p.set_defaults(func=cmd_u0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

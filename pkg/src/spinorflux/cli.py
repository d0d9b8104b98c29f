"""Command-line entry points: simulate, verify, snapshot.

Exit codes: 0 success / t_end reached; 1 configuration or format error;
2 divergence or stiffness failure during time stepping.
"""

import argparse
import os
import sys

import numpy as np

from . import clifford, diagnostics, exterior, flow, grid, scenarios, snapshot, verify
from .errors import (
    ConfigError,
    DivergenceError,
    GeometryError,
    SnapshotFormatError,
    SpinorFluxError,
    StiffnessError,
)


def _fail(message, code):
    print(f"error: {message}", file=sys.stderr)
    return code


def _apply_threads(threads):
    # honored before heavy kernels; the flag wins over the environment
    if threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def _scenario_from_extras(extras, config, seed_override=None):
    name = extras.get("scenario", "custom")
    n = int(extras.get("n", 2))
    k = int(extras.get("k", 1))
    sizes = extras.get("sizes", "32")
    sizes = tuple(int(s) for s in str(sizes).split(","))
    if len(sizes) == 1:
        sizes = sizes * n
    lengths = extras.get("lengths")
    if lengths is not None:
        lengths = tuple(float(x) for x in lengths.split(","))
    G = grid.Grid(sizes, lengths, order=config.stencil_order)
    generator = extras.get("generator", "flat-stationary")
    seed = int(extras.get("seed", 0)) if seed_override is None else seed_override
    amplitude = float(extras.get("amplitude", 0.02))
    basis = clifford.build_gamma(n)
    state = scenarios.make_state(
        G, k, basis.dim_s, generator, seed=seed, amplitude=amplitude,
        snapshot_path=extras.get("snapshot_in"),
    )
    return name, state


def cmd_simulate(args):
    try:
        config, extras = flow.read_config(args.config)
        _name, state = _scenario_from_extras(extras, config, args.seed)
        config.validate(state.n, state.k)
    except (ConfigError, GeometryError, OSError, ValueError) as exc:
        return _fail(str(exc), 1)

    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    def snapshot_fn(st, tag):
        snapshot.write_state(os.path.join(out_dir, f"{tag}.snap"), st)

    try:
        records, final = flow.run(state, config, snapshot_fn=snapshot_fn)
    except (DivergenceError, StiffnessError) as exc:
        node = getattr(exc, "node", None)
        suffix = f" (node {node})" if node is not None else ""
        return _fail(f"{exc}{suffix}", 2)
    except SpinorFluxError as exc:
        return _fail(str(exc), 2)

    diagnostics.write_csv(records, os.path.join(out_dir, "diagnostics.csv"))
    last = records[-1]
    print(
        f"reached t={final.t:.6g} in {len(records)} records; "
        f"normalization residual {last.norm_residual:.3e}; "
        f"outputs in {out_dir}"
    )
    return 0


def cmd_verify(args):
    grids = tuple(int(s) for s in args.grids.split(","))
    if len(grids) < 2:
        return _fail("--grids needs at least two sizes for order estimates", 1)
    try:
        results = verify.run_suite(args.suite, grids=grids, seed=args.seed)
    except ConfigError as exc:
        return _fail(str(exc), 1)
    for row in results:
        print(row.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def cmd_snapshot(args):
    try:
        _state, text = snapshot.describe(args.path)
    except SnapshotFormatError as exc:
        offset = f" at byte offset {exc.offset}" if exc.offset is not None else ""
        return _fail(f"{exc}{offset}", 1)
    except (OSError, SpinorFluxError, ValueError) as exc:
        return _fail(str(exc), 1)
    print(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spinorflux",
        description="Spinor flow with flux on flat periodic tori",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="thread count for BLAS kernels (flag wins over env)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a flow from a config file")
    p_sim.add_argument("--config", required=True, help="flat key: value config file")
    p_sim.add_argument("--out-dir", default=None, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run a module invariant suite")
    p_ver.add_argument("suite", choices=verify.SUITES)
    p_ver.add_argument("--grids", default="16,32,64",
                       help="comma list of grid sizes for order estimates")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)

    p_snap = sub.add_parser("snapshot", help="inspect a snapshot container")
    p_snap.add_argument("path")
    p_snap.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

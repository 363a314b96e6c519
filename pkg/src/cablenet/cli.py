"""Command-line interface.

Subcommands: generate, formfind, prestress, modal, deploy.  Models travel as
JSON files; deployment histories are written as CSV plus a run manifest.
Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
4 control divergence.  Set CABLENET_LOG=DEBUG (or INFO/WARNING) to adjust
logging verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__, assembly, fixtures, io
from .deployment import (
    ErrorModel,
    design_trajectory,
    closed_loop_deploy,
    open_loop_deploy,
    redesign_plan_prestress,
)
from .errors import CableNetError, ValidationError
from .geometry import CableNetParams, build_topology
from .model import Model
from .statics import form_find, modal_analysis

log = logging.getLogger(__name__)


def _parse_design(pairs: list[str]) -> tuple[list[str], list[float]]:
    """Parse repeated NAME=VALUE prestress targets, e.g. --design ODC=1e4."""
    names, values = [], []
    for pair in pairs:
        name, eq, value = pair.partition("=")
        if not eq or not name:
            raise ValidationError(
                f"--design expects CLUSTER=TENSION, got {pair!r}")
        try:
            values.append(float(value))
        except ValueError:
            raise ValidationError(
                f"--design {pair!r}: {value!r} is not a number") from None
        names.append(name)
    return names, values


def _parse_error(text: str | None) -> ErrorModel:
    """Parse --error 'bias=0.01,noise=0.001,offset=0.002' into an ErrorModel."""
    if not text:
        return ErrorModel()
    kwargs = {}
    mapping = {"bias": "rest_length_bias", "noise": "rest_length_noise",
               "offset": "initial_offset"}
    for item in text.split(","):
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq or key not in mapping:
            raise ValidationError(
                f"--error expects comma-separated bias=/noise=/offset= terms, "
                f"got {item!r}")
        try:
            kwargs[mapping[key]] = float(value)
        except ValueError:
            raise ValidationError(
                f"--error {item!r}: {value!r} is not a number") from None
    return ErrorModel(**kwargs)


def _load(path: str) -> Model:
    return io.load_model(path)


def cmd_generate(args) -> int:
    if args.fixture:
        model = {"saddle-lab": fixtures.saddle_lab,
                 "saddle-paper": fixtures.saddle_paper}[args.fixture]()
    else:
        required = ("p", "q", "rx", "ry", "a", "b", "c")
        missing = [n for n in required if getattr(args, n) is None]
        if missing:
            raise ValidationError(
                "generate needs either --fixture or all of "
                + ", ".join(f"--{n}" for n in required)
                + f" (missing: {', '.join(missing)})")
        params = CableNetParams(p=args.p, q=args.q, rx=args.rx, ry=args.ry,
                                a=args.a, b=args.b, c=args.c)
        topo, config = build_topology(params)
        _, l_c, _ = assembly.member_lengths(topo, config.coords)
        spec = assembly.MemberSpec(
            density=np.full(topo.member_count, args.density),
            area=np.full(topo.member_count, args.area),
            modulus=np.full(topo.cluster_count, args.modulus),
            cluster_area=np.full(topo.cluster_count, args.area),
            rest_length=l_c.copy(),
            damping_coeff=args.damping,
            gravity=np.array([0.0, 0.0, -args.gravity]),
        )
        model = Model(topology=topo, coords=config.coords, spec=spec,
                      params=params)
    io.save_model(model, args.output)
    print(f"wrote {args.output}: {model.topology.node_count} nodes, "
          f"{model.topology.member_count} members, "
          f"clusters {model.topology.cluster_names}")
    return 0


def cmd_formfind(args) -> int:
    model = _load(args.model)
    result = form_find(model)
    equilibrated = model.with_coords(result.coords)
    io.save_model(equilibrated, args.output)
    names = model.topology.cluster_names
    print(f"converged in {result.iterations} iterations, "
          f"residual {result.residual:.3e} N")
    for name, t in zip(names, result.tensions):
        print(f"  tension {name} = {t:.6g} N")
    print(f"wrote {args.output}")
    return 0


def cmd_prestress(args) -> int:
    model = _load(args.model)
    names, targets = _parse_design(args.design)
    equilibrated, result = fixtures.initialize_prestress(model, names, targets)
    io.save_model(equilibrated, args.output)
    print(f"prestress designed ({', '.join(args.design)}); "
          f"residual {result.residual:.3e} N")
    for name, t, l0 in zip(model.topology.cluster_names, result.tensions,
                           equilibrated.spec.rest_length):
        print(f"  {name}: tension {t:.6g} N, rest length {l0:.6g} m")
    print(f"wrote {args.output}")
    return 0


def cmd_modal(args) -> int:
    model = _load(args.model)
    result = modal_analysis(model, k=args.modes)
    for i, f in enumerate(result.frequencies, start=1):
        print(f"mode {i}: {f:.6g} Hz")
    print(f"smallest stiffness eigenvalue: "
          f"{result.stiffness_eigenvalues[0]:.6g} N/m")
    if args.csv:
        idx = np.arange(1, len(result.frequencies) + 1)
        with open(args.csv, "w") as fh:
            fh.write("# cablenet-modal/1\n")
            fh.write("mode,frequency_Hz,stiffness_eigenvalue_N_per_m\n")
            for i, f, lam in zip(idx, result.frequencies,
                                 result.stiffness_eigenvalues):
                fh.write(f"{i},{f!r},{lam!r}\n")
        print(f"wrote {args.csv}")
    return 0


def cmd_deploy(args) -> int:
    model = _load(args.model)
    topo = model.topology
    clusters = [c.strip() for c in args.clusters.split(",") if c.strip()]
    if not clusters:
        raise ValidationError("--clusters must name at least one cluster")

    start = form_find(model)  # plan starts from the model's equilibrium
    plan = design_trajectory(model, start, clusters, args.delta, args.substeps)
    if args.design:
        names, targets = _parse_design(args.design)
        plan = redesign_plan_prestress(model, plan, names, targets)

    error_model = _parse_error(args.error)
    if args.mode == "closed":
        history = closed_loop_deploy(model, plan, args.feedback,
                                     error_model=error_model, seed=args.seed)
    elif args.dynamics is not None:
        history = open_loop_deploy(model, plan, mode="dynamic",
                                   duration=args.dynamics, dt=args.dt,
                                   error_model=error_model, seed=args.seed)
    else:
        history = open_loop_deploy(model, plan, error_model=error_model,
                                   seed=args.seed)

    os.makedirs(args.outdir, exist_ok=True)
    n = len(history.tensions)
    steps = np.arange(n)
    if args.dynamics is not None:
        times = args.dynamics * steps / max(n - 1, 1)
    else:
        times = np.zeros(n)
    trajectory = os.path.join(args.outdir, "trajectory.csv")
    tensions = os.path.join(args.outdir, "tensions.csv")
    restlengths = os.path.join(args.outdir, "restlengths.csv")
    io.write_trajectory_csv(trajectory, steps, times, history.coords)
    io.write_tensions_csv(tensions, steps, times, topo.cluster_names,
                          history.tensions, residuals=history.residuals)
    io.write_rest_lengths_csv(restlengths, steps, times, topo.cluster_names,
                              history.commanded, applied=history.applied)
    manifest = os.path.join(args.outdir, "manifest.json")
    io.write_manifest(
        manifest, "deploy",
        {
            "model": os.path.basename(args.model),
            "clusters": clusters, "delta": args.delta,
            "substeps": args.substeps, "mode": args.mode,
            "dynamics": args.dynamics, "dt": args.dt,
            "design": args.design, "error": args.error,
            "feedback": args.feedback,
        },
        inputs=[args.model],
        outputs=[trajectory, tensions, restlengths],
        seed=args.seed,
    )
    final = history.tensions[-1]
    print(f"deployed {args.substeps} substeps ({args.mode} loop); "
          f"final tensions: "
          + ", ".join(f"{n_}={t:.6g} N"
                      for n_, t in zip(topo.cluster_names, final)))
    if args.mode == "closed":
        print(f"feedback corrections per substep: "
              f"{history.corrections.tolist()}")
    print(f"wrote {trajectory}, {tensions}, {restlengths}, {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cablenet",
        description="Clustered-cable saddle net: statics, dynamics, deployment.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a model JSON file")
    gen.add_argument("--fixture", choices=["saddle-lab", "saddle-paper"],
                     help="use a shipped example instead of raw parameters")
    for name, kind in (("p", int), ("q", int), ("rx", float), ("ry", float),
                       ("a", float), ("b", float), ("c", float)):
        gen.add_argument(f"--{name}", type=kind)
    gen.add_argument("--density", type=float, default=7850.0,
                     help="cable density, kg/m^3")
    gen.add_argument("--area", type=float, default=1e-4,
                     help="cable cross-section, m^2")
    gen.add_argument("--modulus", type=float, default=2e11,
                     help="cable Young's modulus, Pa")
    gen.add_argument("--damping", type=float, default=0.02,
                     help="damping coefficient xi")
    gen.add_argument("--gravity", type=float, default=0.0,
                     help="gravitational acceleration magnitude, m/s^2")
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(func=cmd_generate)

    ff = sub.add_parser("formfind", help="solve static equilibrium")
    ff.add_argument("model")
    ff.add_argument("-o", "--output", required=True)
    ff.set_defaults(func=cmd_formfind)

    ps = sub.add_parser("prestress",
                        help="design prestress and equilibrate the model")
    ps.add_argument("model")
    ps.add_argument("--design", action="append", required=True,
                    metavar="CLUSTER=TENSION",
                    help="designed cluster tension, e.g. ODC=1e4 (repeatable)")
    ps.add_argument("-o", "--output", required=True)
    ps.set_defaults(func=cmd_prestress)

    mo = sub.add_parser("modal", help="natural frequencies and mode shapes")
    mo.add_argument("model")
    mo.add_argument("-k", "--modes", type=int, default=6)
    mo.add_argument("--csv", help="optional CSV output path")
    mo.set_defaults(func=cmd_modal)

    dp = sub.add_parser("deploy", help="design and simulate a deployment")
    dp.add_argument("model", help="prestressed equilibrium model JSON")
    dp.add_argument("--clusters", required=True,
                    help="comma-separated actuated clusters, e.g. ODC,IDC")
    dp.add_argument("--delta", type=float, required=True,
                    help="total rest-length decrement per actuated cluster, m")
    dp.add_argument("--substeps", type=int, required=True)
    dp.add_argument("--mode", choices=["open", "closed"], default="open")
    dp.add_argument("--dynamics", type=float, metavar="DURATION",
                    help="open-loop dynamic replay over DURATION seconds")
    dp.add_argument("--dt", type=float, help="integration time step, s")
    dp.add_argument("--design", action="append", metavar="CLUSTER=TENSION",
                    help="redesign plan prestress, e.g. --design ODC=1e4")
    dp.add_argument("--error", metavar="SPEC",
                    help="actuation error, e.g. bias=0.01,noise=0.001")
    dp.add_argument("--seed", type=int, help="error-model RNG seed")
    dp.add_argument("--feedback", default="HC",
                    help="feedback cluster for closed-loop mode")
    dp.add_argument("--outdir", required=True)
    dp.set_defaults(func=cmd_deploy)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CABLENET_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CableNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

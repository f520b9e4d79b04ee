"""Command line interface: meshing, data generation, training, evaluation,
prediction, beam scenarios, and grid sweeps.

Outputs are plain CSV tables with a comment header recording the tool
version, command line, and seed, ready for external plotting. Exit codes:
0 on success, 2 on usage errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import shlex
import sys

import numpy as np

import beampot
from beampot.beamsim import (
    BeamBVP,
    BeamConvergenceError,
    LemConstitutive,
    PannConstitutive,
    element_strains,
    solve_bvp,
)
from beampot.continuum import ImpenetrabilityError
from beampot.core import MaterialParams, SectionGeometry
from beampot.data import Dataset, compute_weights, read_csv, split, write_csv
from beampot.generate import generate_dataset
from beampot.mesh import mesh_section, save_mesh
from beampot.pann import load_model, new_model, pann_evaluate, save_model, scaled_eval
from beampot.sampling import SamplingConfig
from beampot.training import TrainConfig, sobolev_loss, train
from beampot.warping import WarpingConvergenceError

EXIT_NUMERICAL = 3


def _header_lines(args, seed) -> list:
    return [
        f"beampot {beampot.__version__}",
        "command: " + " ".join(shlex.quote(a) for a in sys.argv[1:]),
        f"seed: {seed}",
    ]


def _write_table(path, header_comments, columns, rows):
    with open(path, "w") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def _parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v != ""]


def _parse_amplitudes(text: str) -> np.ndarray:
    """Amplitude ladder 'min:max:count' or an explicit comma list."""
    if ":" in text:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    return np.array(_parse_floats(text))


def cmd_mesh(args) -> int:
    geom = SectionGeometry(args.radius, args.inner_radius)
    mesh = mesh_section(geom, args.elements)
    save_mesh(mesh, args.out)
    print(f"wrote {mesh.n_triangles} triangles, {mesh.n_nodes} nodes to {args.out}")
    return 0


def cmd_gendata(args) -> int:
    mat = MaterialParams(args.youngs, args.poisson)
    amplitudes = _parse_amplitudes(args.amplitudes)
    ds = Dataset()
    truncated = 0
    offset = 0
    for radius in _parse_floats(args.radius):
        for ratio in _parse_floats(args.ratio):
            geom = SectionGeometry(radius, ratio * radius)
            cfg = SamplingConfig(
                n_directions=args.paths,
                amplitudes=amplitudes,
                perturbation=args.perturb,
                seed=args.seed,
            )
            part, trunc = generate_dataset(
                geom, mat, cfg, elements=args.elements, jobs=args.jobs, path_id_offset=offset
            )
            offset += args.paths
            truncated += trunc
            ds.rows.extend(part.rows)
    write_csv(ds, args.out, comments=_header_lines(args, args.seed))
    print(f"wrote {len(ds)} rows to {args.out} ({truncated} truncated paths)")
    return 0


def _parse_hidden(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v)


def cmd_train(args) -> int:
    ds = read_csv(args.data)
    if args.val_data:
        train_ds, val_ds = ds, read_csv(args.val_data)
    elif args.val_frac > 0.0:
        train_ds, val_ds, _ = split(ds, frac_val=args.val_frac, frac_test=0.0, seed=args.seed)
    else:
        train_ds, val_ds = ds, None
    model = new_model(
        variant=args.variant,
        hidden=_parse_hidden(args.hidden),
        parameterized=args.param_ring,
        seed=args.seed,
        r_ref=args.radius_ref,
        p_value=0.0 if args.param_ring else train_ds.rows[0].ratio,
    )
    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )
    fitted, report = train(model, train_ds, val_ds, cfg)
    save_model(fitted, args.out_model)
    if args.report:
        rows = [
            (e, float(tl), float(report.val_loss[e]) if e < len(report.val_loss) else float("nan"))
            for e, tl in enumerate(report.train_loss)
        ]
        _write_table(args.report, _header_lines(args, args.seed), ["epoch", "train_loss", "val_loss"], rows)
    if args.metrics:
        import json

        with open(args.metrics, "w") as fh:
            json.dump(
                {
                    "final_train_loss": report.final_train_loss,
                    "final_val_loss": None if val_ds is None else report.final_val_loss,
                    "best_epoch": report.best_epoch,
                    "epochs_run": len(report.train_loss),
                    "wall_time": report.wall_time,
                    "seed": args.seed,
                },
                fh,
                indent=1,
            )
            fh.write("\n")
    print(
        f"trained {args.variant} model: final train loss {report.final_train_loss:.6e}, "
        f"best epoch {report.best_epoch}, wall time {report.wall_time:.1f}s"
    )
    return 0


def cmd_eval(args) -> int:
    ds = read_csv(args.data)
    weights = compute_weights(ds)
    models = [load_model(path) for path in args.model]
    losses = np.array([sobolev_loss(m, ds, weights) for m in models])

    rows = []
    for key in ds.path_keys():
        radius, ratio, path_id = key
        sub = Dataset(rows=[r for r in ds.rows if (r.radius, r.ratio, r.path_id) == key])
        path_losses = [sobolev_loss(m, sub, weights) for m in models]
        rows.append((path_id, radius, ratio, min(path_losses), max(path_losses)))
    rows.append((-1, 0.0, 0.0, float(losses.min()), float(losses.max())))
    if args.out:
        _write_table(
            args.out,
            _header_lines(args, 0),
            ["path_id", "R", "P", "loss_min", "loss_max"],
            rows,
        )
    print(f"aggregate loss: min {losses.min():.6e} max {losses.max():.6e} over {len(models)} model(s)")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    p = np.array(_parse_floats(args.strain))
    if p.size != 6:
        raise SystemExit("--strain needs six comma-separated values")
    ratio = args.ratio
    if args.scale != 1.0:
        psi, q, c = scaled_eval(model, p, args.scale, ratio)
    else:
        psi, q, c = pann_evaluate(model, p, ratio)
    print(f"psi = {psi:.17g}")
    print("q =", " ".join(f"{v:.17g}" for v in q))
    print("C =")
    for row in c:
        print("   ", " ".join(f"{v: .10e}" for v in row))
    return 0


def _scenario_bvp(args) -> BeamBVP:
    geom = SectionGeometry(args.radius)
    mat = MaterialParams(args.youngs, args.poisson)
    if args.scenario == "bend":
        from beampot.core import section_properties

        _, i1, _, _ = section_properties(geom)
        moment = args.youngs * i1 * np.pi / args.length
        return BeamBVP(
            length=args.length,
            n_elements=args.elements,
            tip_moment=np.array([moment, 0.0, 0.0]),
            load_steps=args.steps,
        )
    return BeamBVP(
        length=args.length,
        n_elements=args.elements,
        tip_displacement=np.array([0.0, 0.0, -0.3 * args.length]),
        pre_curvature=np.array([1e-3 * np.pi / args.length, 0.0, 0.0]),
        load_steps=args.steps,
    )


def cmd_simulate(args) -> int:
    geom = SectionGeometry(args.radius)
    mat = MaterialParams(args.youngs, args.poisson)
    if args.constitutive == "lem":
        constitutive = LemConstitutive(geom, mat)
    else:
        constitutive = PannConstitutive(load_model(args.constitutive))
    bvp = _scenario_bvp(args)
    result = solve_bvp(bvp, constitutive)

    state = result.final
    state_rows = []
    for node in range(len(state.grid)):
        e = min(node, len(state.grid) - 2)
        strains = element_strains(state, e)
        state_rows.append(
            (
                float(state.grid[node]),
                *[float(v) for v in state.positions[node]],
                *[float(v) for v in state.quaternions[node]],
                *[float(v) for v in strains],
            )
        )
    _write_table(
        args.out,
        _header_lines(args, 0),
        ["s", "r1", "r2", "r3", "qw", "qx", "qy", "qz",
         "eps1", "eps2", "eps3", "kappa1", "kappa2", "kappa3"],
        state_rows,
    )
    if args.reactions:
        rows = [
            (
                s.load_factor,
                *[float(v) for v in s.reaction_force],
                *[float(v) for v in s.reaction_moment],
                s.internal_energy,
                s.external_work,
            )
            for s in result.steps
        ]
        _write_table(
            args.reactions,
            _header_lines(args, 0),
            ["load_factor", "f1", "f2", "f3", "m1", "m2", "m3", "energy", "work"],
            rows,
        )
    tip = state.positions[-1]
    print(f"completed {len(result.steps)} steps; tip at ({tip[0]:.4f}, {tip[1]:.4f}, {tip[2]:.4f})")
    return 0


def cmd_sweep(args) -> int:
    ds = read_csv(args.data)
    train_ds, val_ds, test_ds = split(ds, frac_val=0.1, frac_test=0.2, seed=args.seed)
    weights = compute_weights(train_ds)
    rows = []
    for value in args.grid.split(","):
        if args.axis == "nodes":
            hidden = _parse_hidden(value)
            sub_train = train_ds
        else:
            count = int(value)
            keys = set(train_ds.path_keys()[:count])
            sub_train = Dataset(
                rows=[r for r in train_ds.rows if (r.radius, r.ratio, r.path_id) in keys]
            )
            hidden = _parse_hidden(args.hidden)
        model = new_model(args.variant, hidden=hidden, seed=args.seed)
        cfg = TrainConfig(max_epochs=args.epochs, seed=args.seed)
        fitted, report = train(model, sub_train, val_ds, cfg, weights=weights)
        test_loss = sobolev_loss(fitted, test_ds, weights)
        rows.append((value, report.final_train_loss, test_loss))
        print(f"{args.axis} = {value}: calibration {report.final_train_loss:.6e}, test {test_loss:.6e}")
    _write_table(args.out, _header_lines(args, args.seed), [args.axis, "calibration_loss", "test_loss"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beampot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="triangulate a circular or ring section")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--inner-radius", type=float, default=0.0)
    p.add_argument("--elements", type=int, default=800)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("gendata", help="generate stress-resultant data with the warping solver")
    p.add_argument("--radius", default="1.0", help="comma list of outer radii")
    p.add_argument("--ratio", default="0.0", help="comma list of inner/outer ratios")
    p.add_argument("--paths", type=int, default=64)
    p.add_argument("--perturb", type=float, default=0.1)
    p.add_argument("--amplitudes", default="0.02:0.6:31", help="'min:max:count' or comma list")
    p.add_argument("--elements", type=int, default=800)
    p.add_argument("--youngs", type=float, default=70.0)
    p.add_argument("--poisson", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("train", help="calibrate a neural beam potential")
    p.add_argument("--data", required=True)
    p.add_argument("--val-data", default=None)
    p.add_argument("--val-frac", type=float, default=0.0)
    p.add_argument("--variant", choices=("plain", "sym", "ti"), default="sym")
    p.add_argument("--param-ring", action="store_true")
    p.add_argument("--hidden", default="32")
    p.add_argument("--radius-ref", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=10000)
    p.add_argument("--patience", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--metrics", default=None, help="final metrics as JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="weighted losses of trained models on a dataset")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="energy, stresses, and stiffness at one strain state")
    p.add_argument("--model", required=True)
    p.add_argument("--strain", required=True, help="'e1,e2,e3,k1,k2,k3'")
    p.add_argument("--ratio", type=float, default=None, help="ring parameter P")
    p.add_argument("--scale", type=float, default=1.0, help="geometric scaling factor")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="cantilever bending or compression buckling")
    p.add_argument("--scenario", choices=("bend", "compress"), required=True)
    p.add_argument("--constitutive", default="lem", help="'lem' or a model file path")
    p.add_argument("--length", type=float, default=10.0)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--youngs", type=float, default=70.0)
    p.add_argument("--poisson", type=float, default=0.4)
    p.add_argument("--elements", type=int, default=16)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--reactions", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="architecture or data-size study")
    p.add_argument("--axis", choices=("nodes", "paths"), required=True)
    p.add_argument("--grid", required=True, help="comma list of grid values")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=("plain", "sym", "ti"), default="sym")
    p.add_argument("--hidden", default="32")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "steps", None) is None and args.command == "simulate":
        args.steps = 50 if args.scenario == "compress" else 20
    try:
        return args.func(args)
    except (WarpingConvergenceError, BeamConvergenceError, ImpenetrabilityError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

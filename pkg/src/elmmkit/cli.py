"""Command line pipeline: generate -> idest -> extract -> unmix -> eval.

Exit status: 0 on success, 1 on usage errors (bad flags, missing or malformed
files), 2 on numerical failures.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import io
from ._accel import set_threads
from .core import DimensionError, DomainError, SpectralCube
from .extract import ExtractionError, spherical_kmeans, vca
from .metrics import evaluate
from .simgen import LibraryError, SceneSpec, generate_scene
from .solvers import NumericalError, SolverConfig, elmm, fclsu, relmm, sclsu
from .subspace import estimate_id

log = logging.getLogger("elmmkit")

# per-method regularisation used when --lambda-s / --lambda-s0 are omitted
DEFAULT_LAMBDAS = {
    "elmm": (0.01, 0.0),
    "relmm": (0.1, 0.5),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _cube_path(path):
    p = Path(path)
    if p.is_dir():
        p = p / "cube.json"
    return p


def _truth_dir(path):
    p = Path(path)
    return p / "truth" if (p / "truth").is_dir() else p


def _write_stack(outdir, prefix, stack, lines, samples):
    for j in range(stack.shape[2]):
        io.write_cube(outdir / f"{prefix}_p{j}", SpectralCube(stack[:, :, j].T, lines, samples))


def _read_stack(indir, prefix, p):
    cubes = [io.read_cube(indir / f"{prefix}_p{j}") for j in range(p)]
    return np.stack([c.data.T for c in cubes], axis=2)


def cmd_generate(args):
    spec = SceneSpec(
        bands=args.bands, lines=args.lines, samples=args.samples, classes=args.p,
        variants_per_class=args.variants, seed=args.seed,
        shadow_fraction=args.shadow_fraction, snr_db=args.snr_db,
    )
    cube, truth = generate_scene(spec)
    out = Path(args.output_dir)
    io.write_cube(out / "cube", cube)
    t = out / "truth"
    io.write_matrix(t / "abundances.csv", truth.abundances.data)
    io.write_matrix(t / "scalings.csv", truth.scalings.data)
    io.write_matrix(t / "references.csv", truth.references.data)
    _write_stack(t, "locals", truth.locals.data, cube.lines, cube.samples)
    io.write_report(t / "scene.txt", {
        "seed": args.seed, "classes": args.p, "variants": args.variants,
        "snr_db": float(args.snr_db), "shadow_fraction": float(args.shadow_fraction),
        "noise_variance": float(truth.noise_variance),
    })
    return 0


def cmd_idest(args):
    cube = io.read_cube(_cube_path(args.input))
    est = estimate_id(cube)
    out = Path(args.output_dir)
    io.write_report(out / "idest.txt", {"dimension": est.dimension})
    io.write_matrix(out / "noise.csv", est.noise_band_power[:, None])
    print(f"dimension={est.dimension}")
    return 0


def _extract(cube, args):
    if args.extract == "vca":
        return vca(cube, args.p, seed=args.seed)
    return spherical_kmeans(cube, args.p, seed=args.seed)


def cmd_extract(args):
    cube = io.read_cube(_cube_path(args.input))
    res = _extract(cube, args)
    out = Path(args.output_dir)
    io.write_matrix(out / "endmembers.csv", res.endmembers.data)
    if res.pixel_indices is not None:
        io.write_matrix(out / "pixel_indices.csv", np.asarray(res.pixel_indices)[None, :])
    if res.labels is not None:
        io.write_matrix(out / "labels.csv", res.labels.reshape(cube.lines, cube.samples))
    return 0


def _config(args):
    ls, ls0 = DEFAULT_LAMBDAS.get(args.method, (0.1, 0.0))
    kw = {
        "lambda_s": ls if args.lambda_s is None else args.lambda_s,
        "lambda_s0": ls0 if args.lambda_s0 is None else args.lambda_s0,
        "seed": args.seed,
    }
    if args.epsilon is not None:
        kw["epsilon"] = args.epsilon
    if args.max_iter is not None:
        kw["max_outer_iter"] = args.max_iter
    try:
        return SolverConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_unmix(args):
    cfg = _config(args)
    cube = io.read_cube(_cube_path(args.input))
    if args.endmembers:
        S0 = io.read_matrix(args.endmembers)
        if S0.shape[0] != cube.bands:
            raise UsageError(f"{args.endmembers}: {S0.shape[0]} rows, cube has {cube.bands} bands")
    else:
        S0 = _extract(cube, args).endmembers.data
    if args.method == "fclsu":
        res = fclsu(cube, S0, cfg)
    elif args.method == "sclsu":
        res = sclsu(cube, S0, cfg)
    elif args.method == "elmm":
        res = elmm(cube, S0, cfg)
    else:
        res = relmm(cube, S0, cfg)

    out = Path(args.output_dir)
    A = res.abundances.data
    Psi = res.scalings.data
    io.write_matrix(out / "abundances.csv", A)
    io.write_matrix(out / "scalings.csv", Psi)
    io.write_matrix(out / "references.csv", res.references.data)
    trace = np.asarray(res.objective_trace, dtype=float)
    io.write_matrix(out / "objective.csv", np.column_stack([np.arange(trace.size), trace]))
    _write_stack(out, "locals", res.locals.data, cube.lines, cube.samples)
    vmax = float(np.percentile(Psi, 99))
    for j in range(A.shape[0]):
        io.write_pgm(out / f"abundance_p{j}.pgm",
                     io.to_gray(A[j].reshape(cube.lines, cube.samples), 1.0))
        io.write_pgm(out / f"scaling_p{j}.pgm",
                     io.to_gray(Psi[j].reshape(cube.lines, cube.samples), vmax))
    io.write_report(out / "result.txt", {
        "method": args.method,
        "lambda_s": cfg.lambda_s,
        "lambda_s0": cfg.lambda_s0,
        "iterations": res.iterations,
        "converged": str(res.converged).lower(),
        "reconstruction_rmse": res.reconstruction_rmse,
        "flagged_pixels": int(np.sum(res.flagged)) if res.flagged is not None else 0,
    })
    return 0


def cmd_eval(args):
    if not args.truth:
        raise UsageError("eval needs --truth (a generate output directory)")
    res_dir = Path(args.input)
    tdir = _truth_dir(args.truth)
    cube = io.read_cube(_cube_path(Path(args.truth)))
    A = io.read_matrix(res_dir / "abundances.csv")
    S0 = io.read_matrix(res_dir / "references.csv")
    p = A.shape[0]
    stack = _read_stack(res_dir, "locals", p)
    A_true = io.read_matrix(tdir / "abundances.csv")
    S_true = io.read_matrix(tdir / "references.csv")
    if A.shape != A_true.shape or S0.shape != S_true.shape:
        raise UsageError(f"{res_dir}: result shapes do not match the ground truth in {tdir}")

    result = SimpleNamespace(abundances=A, references=S0, locals=stack)
    truth = SimpleNamespace(abundances=A_true, references=S_true,
                            locals=_read_stack(tdir, "locals", p))
    report = evaluate(result, truth, cube)
    out = Path(args.output_dir) if args.output_dir else res_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())
    if args.csv:
        method = io.read_report(res_dir / "result.txt").get("method", "") \
            if (res_dir / "result.txt").is_file() else ""
        csv = Path(args.csv)
        new = not csv.exists()
        with open(csv, "a") as fh:
            if new:
                fh.write("method,seed,armse,mean_sam_deg,recon_rmse\n")
            fh.write(f"{method},{args.seed},{report.armse:.10g},"
                     f"{report.mean_sam_deg:.10g},{report.recon_rmse:.10g}\n")
    return 0


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--input", help="cube header (or a directory holding cube.json)")
    common.add_argument("--output-dir", help="defaults to . (eval: the --input directory)")
    common.add_argument("--p", type=int, default=3, help="number of endmembers")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="elmmkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="synthetic scene with ground truth")
    g.add_argument("--shadow-fraction", type=float, default=0.0)
    g.add_argument("--snr-db", type=float, default=30.0)
    g.add_argument("--bands", type=int, default=200)
    g.add_argument("--lines", type=int, default=100)
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--variants", type=int, default=10)
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("idest", parents=[common], help="intrinsic dimension")
    i.set_defaults(func=cmd_idest)

    e = sub.add_parser("extract", parents=[common], help="reference endmembers")
    e.add_argument("--extract", choices=("vca", "kmeans"), default="kmeans")
    e.set_defaults(func=cmd_extract)

    u = sub.add_parser("unmix", parents=[common], help="abundances, scalings, local endmembers")
    u.add_argument("--method", choices=("fclsu", "sclsu", "elmm", "relmm"), default="relmm")
    u.add_argument("--extract", choices=("vca", "kmeans"), default="kmeans")
    u.add_argument("--endmembers", help="endmember CSV (skips extraction)")
    u.add_argument("--lambda-s", type=float)
    u.add_argument("--lambda-s0", type=float)
    u.add_argument("--epsilon", type=float)
    u.add_argument("--max-iter", type=int)
    u.set_defaults(func=cmd_unmix)

    v = sub.add_parser("eval", parents=[common], help="score an unmix output directory")
    v.add_argument("--truth", help="generate output directory")
    v.add_argument("--csv", help="append a summary row to this CSV")
    v.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "generate" and not args.input:
        print(f"elmmkit {args.command}: error: --input is required", file=sys.stderr)
        return 1
    if args.p < 1:
        print("elmmkit: error: --p must be positive", file=sys.stderr)
        return 1
    if args.output_dir is None and args.command != "eval":
        args.output_dir = "."
    set_threads(args.threads)
    try:
        return args.func(args)
    except (UsageError, io.FormatError, DimensionError, LibraryError) as e:
        print(f"elmmkit {args.command}: error: {e}", file=sys.stderr)
        return 1
    except (NumericalError, ExtractionError, DomainError, np.linalg.LinAlgError) as e:
        print(f"elmmkit {args.command}: numerical failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"elmmkit {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

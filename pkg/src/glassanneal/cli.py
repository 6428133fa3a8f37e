"""Command-line front end.

Exit codes: 0 success, 2 usage/config error, 3 resource bound, 4 numerical
failure.  Every command writes its CSVs and a ``manifest.txt`` into ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
import typing
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, glass, rft, trainer
from .config import RunManifest, read_key_values, train_config_from
from .errors import NumericalError, ResourceBoundError, UsageError
from .parallel import derive_seed, ordered_map
from .svgplot import render_svg

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_NUMERIC = 0, 2, 3, 4

TABLES = ("semicircle", "index-vs-mean", "index-vs-energy", "complexity")


# --------------------------------------------------------------------------- helpers


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v) + 0.0)  # folds -0.0 into 0.0


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


class _Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, command: str, argv: list[str], out: Path):
        self.command = command
        self.out = out
        self.manifest = RunManifest(command=command, argv=list(argv), version=__version__)
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows) -> Path:
        path = write_csv(self.out / name, header, rows)
        self.manifest.outputs.append(name)
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.out / name
        path.write_text(body, encoding="utf-8")
        self.manifest.outputs.append(name)
        return path

    def finish(self) -> None:
        self.manifest.duration_s = time.perf_counter() - self.t0
        self.manifest.write(self.out / "manifest.txt")


def _with_out(argv: list[str], out: str) -> list[str]:
    cleaned, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        cleaned.append(a)
    return cleaned + ["--out", out]


# --------------------------------------------------------------------------- theory


def cmd_theory(args, argv) -> int:
    cov = rft.parse_mixture(args.mixture)
    consts = rft.landscape_constants(cov, args.n)
    run = _Run("theory", argv, Path(args.out))
    run.manifest.config = {"mixture": args.mixture, "points": args.points, "n": args.n}
    report = {
        "f0": cov.f0,
        "f1": cov.f1,
        "f2": cov.f2,
        "P": consts.P,
        "Q": consts.Q,
        "P_N": consts.P_N,
        "Q_N": consts.Q_N,
        "eps_c": consts.eps_c,
        "C1": consts.C1,
        "C2": consts.C2,
        "M00": consts.M[0, 0],
        "M01": consts.M[0, 1],
        "M11": consts.M[1, 1],
        "effective_lr_factor": rft.effective_lr_factor(cov),
    }
    body = "".join(f"{k}={'' if v is None else repr(float(v))}\n" for k, v in report.items())
    run.text("constants.txt", body)
    if args.constants:
        sys.stdout.write(body)
    run.manifest.extra["eps_c"] = repr(consts.eps_c)

    if args.points < 3:
        raise UsageError("--points must be at least 3")
    half = (args.points - 1) / 2
    # symmetric grid on [-1, 1] with an exact zero in the middle for odd counts
    t = (np.arange(args.points) - half) / half
    edge = 2 * math.sqrt(cov.f2)
    tables = TABLES if args.table == "all" else ((args.table,) if args.table else ())
    for name in tables:
        if name == "semicircle":
            lam = 1.1 * edge * t
            run.csv("semicircle.csv", ["lambda", "density"], zip(lam, rft.semicircle_density(lam, cov.f2)))
        elif name == "index-vs-mean":
            lam = edge * t
            run.csv("index_vs_mean.csv", ["lambda_bar", "alpha"], zip(lam, rft.index_from_mean_eigenvalue(lam, cov.f2)))
        elif name == "index-vs-energy":
            eps = -consts.eps_c * t
            eps[0], eps[-1] = consts.eps_c, -consts.eps_c
            alpha = rft.index_from_energy(eps, consts)
            lbar = rft.most_likely_mean_eigenvalue(eps, consts, cov)
            run.csv("index_vs_energy.csv", ["eps", "alpha", "lambda_bar"], zip(eps, alpha, lbar))
        elif name == "complexity":
            eps = -consts.eps_c * t
            lam = edge * t
            rows = (
                (e, l, rft.complexity((e, l), consts)) for e in eps for l in lam
            )
            run.csv("complexity.csv", ["eps", "lambda_bar", "sigma"], rows)
    run.finish()
    return EXIT_OK


# --------------------------------------------------------------------------- glass


def cmd_glass(args, argv) -> int:
    run = _Run(f"glass {args.glass_cmd}", argv, Path(args.out or f"out/glass/{args.glass_cmd}"))
    run.manifest.seeds = [args.seed]
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "glass_cmd", "command")}
    run.manifest.config = cfg
    extra = run.manifest.extra

    if args.glass_cmd == "sample":
        J = glass.sample_couplings(args.n, args.p, derive_seed(args.seed, "couplings"))
        run.csv("couplings.csv", ["index", "value"], enumerate(J.values.ravel()))

    elif args.glass_cmd == "descend":
        J, sigma0 = glass.seeded_instance(args.n, args.p, args.seed)
        traj = glass.spherical_descent(
            J, sigma0, args.steps, args.lr, args.l2, gradient=args.gradient, keep_sigmas=False
        )
        run.csv("descent.csv", ["step", "eps", "grad_norm"], zip(traj.steps, traj.eps, traj.grad_norm))
        if traj.eps.size:
            extra["initial_eps"] = repr(float(traj.eps[0]))
            extra["final_eps"] = repr(float(traj.eps[-1]))

    elif args.glass_cmd == "goe":
        if args.seeds < 1:
            raise UsageError("--seeds must be at least 1")
        eig = glass.spectrum(glass.sample_goe(args.n, derive_seed(args.seed, "goe")))
        run.csv("goe.csv", ["idx", "eigenvalue"], enumerate(eig))
        extra["ks_statistic"] = repr(glass.semicircle_ks(eig))
        extra["negative_fraction"] = repr(float(np.mean(eig < 0)))
        if args.seeds > 1:
            # disorder average over seed, seed+1, ...; the CSV keeps the root seed only
            def ks_of(s):
                return glass.semicircle_ks(glass.spectrum(glass.sample_goe(args.n, derive_seed(s, "goe"))))

            ks = np.array(ordered_map(ks_of, range(args.seed, args.seed + args.seeds)))
            extra["ks_mean"] = repr(float(ks.mean()))
            extra["ks_stderr"] = repr(float(ks.std(ddof=1) / math.sqrt(ks.size)))
            run.manifest.seeds = list(range(args.seed, args.seed + args.seeds))

    elif args.glass_cmd == "enumerate":
        J = glass.sample_couplings(args.n, 2, derive_seed(args.seed, "couplings"))
        rows = []
        for beta in args.beta:
            res = glass.enumerate_gibbs(glass.GibbsEnsemble(beta, J))
            ground = res.ground_energy / args.n
            rows.append((beta, res.log_z, res.free_energy, ground))
            extra[f"free_energy_gap@{beta:g}"] = repr(res.free_energy + ground)
        run.csv("enumerate.csv", ["beta", "log_z", "free_energy", "ground_energy_per_site"], rows)

    elif args.glass_cmd == "covcheck":
        rows = glass.covariance_check(args.n, args.p, args.samples, derive_seed(args.seed, "covcheck"))
        run.csv("covcheck.csv", ["overlap", "empirical", "theory", "z"], ((r.overlap, r.empirical, r.theory, r.z) for r in rows))
        extra["max_abs_z"] = repr(max(abs(r.z) for r in rows))

    elif args.glass_cmd == "indexscan":
        J = glass.sample_couplings(args.n, args.p, derive_seed(args.seed, "couplings"))
        cov = rft.covariance_from_mixture([(args.p, 1.0)])
        consts = rft.landscape_constants(cov)
        rows, devs = [], []
        for k in range(args.points):
            s = glass.random_sphere_point(args.n, derive_seed(args.seed, f"point{k}"))
            if args.minimize:
                s = glass.converge_to_minimum(J, s)
            r = glass.empirical_index_energy(J, s, tangent=not args.ambient)
            a_th = rft.index_from_energy(r.eps, consts) if abs(r.eps) <= -consts.eps_c else None
            l_th = rft.most_likely_mean_eigenvalue(r.eps, consts, cov)
            rows.append((k, r.eps, r.alpha_hat, r.lambda_bar_hat, a_th, l_th))
            devs.append(abs(r.alpha_hat - 0.5))
        run.csv(
            "indexscan.csv",
            ["point", "eps", "alpha_hat", "lambda_bar_hat", "alpha_theory", "lambda_bar_theory"],
            rows,
        )
        extra["mean_abs_alpha_minus_half"] = repr(float(np.mean(devs)))
    run.finish()
    return EXIT_OK


# --------------------------------------------------------------------------- train


def _train_argv(cfg: trainer.TrainConfig, svg: bool) -> list[str]:
    argv = ["train"]
    for k, v in cfg.as_dict().items():
        if v is None:
            continue
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            argv.append(flag if v else "--no-" + k.replace("_", "-"))
        else:
            argv += [flag, str(v)]
    if svg:
        argv.append("--svg")
    return argv


def cmd_train(args, argv) -> int:
    file_values = read_key_values(args.config) if args.config else {}
    overrides = {name: getattr(args, name, None) for name in trainer.TrainConfig.field_names()}
    cfg = train_config_from(file_values, overrides)
    run = _Run("train", _train_argv(cfg, args.svg) + ["--out", args.out], Path(args.out))
    run.manifest.config = cfg.as_dict()
    run.manifest.seeds = [cfg.seed]
    header = ["epoch", "loss", "lambda", "trace_estimate", "grad_norm"]

    def rows_of(records):
        return ((r.epoch, r.loss, r.lam, r.trace_estimate, r.grad_norm) for r in records)

    try:
        records = trainer.run_algorithm(cfg)
    except NumericalError as exc:
        run.csv("train.csv", header, rows_of(getattr(exc, "records", [])))
        run.manifest.extra["status"] = type(exc).__name__
        run.manifest.extra["diverged"] = 1
        run.finish()
        raise
    run.csv("train.csv", header, rows_of(records))
    if cfg.target == "glass" and cfg.index_every:
        grecs = trainer.glass_descent_experiment(cfg)
        run.csv(
            "glass_index.csv",
            ["epoch", "eps", "lambda", "alpha_hat"],
            ((g.epoch, g.eps, g.lam, g.alpha_hat) for g in grecs),
        )
    if args.svg:
        epochs = [r.epoch for r in records]
        run.text("loss.svg", render_svg(epochs, {"loss": [r.loss for r in records]}, title="loss", xlabel="epoch"))
        run.text("lambda.svg", render_svg(epochs, {"lambda": [r.lam for r in records]}, title="lambda", xlabel="epoch"))
    run.manifest.extra["status"] = "ok"
    run.manifest.extra["initial_loss"] = repr(records[0].loss)
    run.manifest.extra["final_loss"] = repr(records[-1].loss)
    run.finish()
    return EXIT_OK


# --------------------------------------------------------------------------- plot


def cmd_plot(args, argv) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if len(rows) < 2:
        raise UsageError(f"{path} has no data rows")
    header, data = rows[0], rows[1:]
    if any(len(r) != len(header) for r in data):
        raise UsageError(f"{path}: rows do not match the header width")
    xcol = args.x or header[0]
    ycols = args.y.split(",") if args.y else [h for h in header if h != xcol]
    for col in [xcol, *ycols]:
        if col not in header:
            raise UsageError(f"column {col!r} not in CSV header {header}")

    def column(name):
        j = header.index(name)
        out = []
        for r in data:
            if r[j] == "":
                out.append(None)
                continue
            try:
                out.append(float(r[j]))
            except ValueError:
                raise UsageError(f"column {name!r} has non-numeric value {r[j]!r}") from None
        return out

    xs = column(xcol)
    if any(v is None for v in xs):
        raise UsageError(f"x column {xcol!r} has empty cells")
    series = {c: column(c) for c in ycols}
    svg = render_svg(xs, series, vlines=args.vline or (), title=args.title or path.stem, xlabel=xcol)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg, encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------- replay


def cmd_replay(args, argv) -> int:
    m = RunManifest.read(args.manifest)
    if not m.argv:
        raise UsageError(f"{args.manifest} records no command line")
    return main(_with_out(m.argv, args.out))


# --------------------------------------------------------------------------- parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(trainer.TrainConfig)
    choices = {
        "target": ("glass", "mlp"),
        "algo": ("matched", "cosine", "two-step", "fixed"),
        "smoothing": ("identity", "moving-average", "exponential"),
        "schedule": ("constant", "cosine", "power"),
    }
    for name in trainer.TrainConfig.field_names():
        flag = "--" + name.replace("_", "-")
        tp = hints[name]
        inner = [a for a in typing.get_args(tp) if a is not type(None)]
        base = inner[0] if inner else tp
        if name in choices:
            p.add_argument(flag, dest=name, choices=choices[name], default=None)
        elif base is bool:
            p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        elif base in (int, float):
            p.add_argument(flag, dest=name, type=base, default=None)
        else:
            p.add_argument(flag, dest=name, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glassanneal", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    th = sub.add_parser("theory", help="closed-form constants and index/complexity tables")
    th.add_argument("--mixture", default="3:1.0", help="p:weight terms, comma separated")
    th.add_argument("--constants", action="store_true", help="print the constants report")
    th.add_argument("--table", choices=(*TABLES, "all"), default=None)
    th.add_argument("--points", type=int, default=101)
    th.add_argument("--n", type=int, default=None, help="finite size for P_N, Q_N")
    th.add_argument("--out", default="out/theory")
    th.set_defaults(func=cmd_theory)

    gl = sub.add_parser("glass", help="spin-glass simulations")
    gsub = gl.add_subparsers(dest="glass_cmd", required=True)

    def common(p, n=32, p_default=3, with_p=True):
        p.add_argument("--n", type=int, default=n)
        if with_p:
            p.add_argument("--p", type=int, default=p_default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory (default out/glass/<command>)")
        p.set_defaults(func=cmd_glass)

    common(gsub.add_parser("sample", help="write a coupling tensor"), n=8)
    d = gsub.add_parser("descend", help="spherical gradient descent trajectory")
    common(d, n=64)
    d.add_argument("--steps", type=int, default=1000)
    d.add_argument("--lr", type=float, default=1e-3)
    d.add_argument("--l2", type=float, default=0.0)
    d.add_argument("--gradient", choices=("riemannian", "euclidean"), default="riemannian")
    g = gsub.add_parser("goe", help="GOE spectrum and semicircle KS distance")
    common(g, n=512, with_p=False)
    g.add_argument("--seeds", type=int, default=16, help="seeds averaged for the KS summary")
    e = gsub.add_parser("enumerate", help="exact SK Gibbs enumeration")
    common(e, n=10, with_p=False)
    e.add_argument("--beta", type=float, nargs="+", default=[1.0])
    c = gsub.add_parser("covcheck", help="Monte Carlo covariance check")
    common(c, n=32)
    c.add_argument("--samples", type=int, default=10_000)
    s = gsub.add_parser("indexscan", help="empirical index at random points or minima")
    common(s, n=128)
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--minimize", action="store_true", help="descend to a minimum first")
    s.add_argument("--ambient", action="store_true", help="use the ambient Hessian")

    tr = sub.add_parser("train", help="run an annealing algorithm")
    tr.add_argument("--config", default=None, help="key=value config file; flags override it")
    tr.add_argument("--svg", action="store_true", help="render loss and lambda curves")
    tr.add_argument("--out", default="out/train")
    _add_train_flags(tr)
    tr.set_defaults(func=cmd_train)

    pl = sub.add_parser("plot", help="render a CSV as SVG")
    pl.add_argument("csv")
    pl.add_argument("--out", required=True)
    pl.add_argument("--x", default=None)
    pl.add_argument("--y", default=None, help="comma-separated columns")
    pl.add_argument("--vline", type=float, action="append", help="dashed vertical marker")
    pl.add_argument("--title", default=None)
    pl.set_defaults(func=cmd_plot)

    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_replay)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceBoundError as exc:
        print(f"error: resource bound '{exc.bound}' exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

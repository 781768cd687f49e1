"""Command-line driver.

Every command writes its CSV outputs, the generated dataset, a config echo
and a ``run.json`` manifest into ``--out``.  Exit status is 0 on success,
2 for invalid input or configuration and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import RandomStream, TemperingGrid, make_grid
from .deviance import build_ensemble, deviance_curve, mgf
from .errors import ModelError, NumericError, PowerPostError
from .examples import build_problem, example1, example3
from .posterior import grid_density, grid_inverse_cdf_sample, marginal, sir_sample, write_field
from .spectral import state_from_ensemble, write_csv as write_spectral_csv

log = logging.getLogger("powerpost")

COMMANDS = ("deviance", "density", "sample", "spectral", "mgf", "example1", "example2", "example3")
SWEEP_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


class ConfigError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="powerpost", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "deviance": "expected-deviance curve from N prior samples",
        "density": "power-posterior density on a lattice at --alpha",
        "sample": "draws from the power posterior at --alpha",
        "spectral": "kernel-trace (spectral) deviance curve",
        "mgf": "moment generating function on an (alpha, beta) grid",
        "example1": "full linear-Gaussian case study with analytic comparison",
        "example2": "wave-equation source inversion case study",
        "example3": "bivariate multimodal case study",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n-samples", type=int, default=1000,
                        help="prior ensemble size N (forward evaluations)")
        sp.add_argument("--n-alpha", type=int, default=10, help="number of tempering intervals")
        sp.add_argument("--sub-quad", type=int, default=11, help="Simpson nodes per interval (odd)")
        sp.add_argument("--alpha", type=float, default=1.0, help="tempering value for density/sample/mgf")
        sp.add_argument("--grid", default=None,
                        help="lattice as 'lo,hi[,lo,hi]:n[,n]', or tempering points for mgf "
                             "as a comma list starting at 0 and ending at 1")
        sp.add_argument("--config", default=None, help="JSON file overriding example defaults")
        sp.add_argument("--out", default="./out", help="output directory")
        if not name.startswith("example"):
            sp.add_argument("--example", type=int, default=1, choices=(1, 2, 3))
        if name == "sample":
            sp.add_argument("--method", choices=("sir", "grid"), default="sir")
            sp.add_argument("--n-out", type=int, default=1000)
        if name == "mgf":
            sp.add_argument("--betas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
                            help="comma list of beta values in [0, 1]")
    return p


def _parse_lattice(text: str):
    try:
        box_s, res_s = text.split(":")
        b = [float(x) for x in box_s.split(",")]
        r = [int(x) for x in res_s.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --grid {text!r}: expected 'lo,hi[,lo,hi]:n[,n]'") from exc
    if len(b) not in (2, 4):
        raise ConfigError("--grid box needs 2 or 4 numbers")
    box = [(b[i], b[i + 1]) for i in range(0, len(b), 2)]
    if len(r) == 1:
        r = r * len(box)
    if len(r) != len(box):
        raise ConfigError("--grid resolution count does not match the box dimension")
    return box, tuple(r)


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _alpha_tag(a: float) -> str:
    return ("%.4f" % a).rstrip("0").rstrip(".") if a else "0"


class Run:
    """Collects outputs and forward-evaluation counts for the manifest."""

    def __init__(self, args, out: Path):
        self.args = args
        self.out = out
        self.outputs = []
        self.evals_ensemble = 0
        self.evals_grid = 0
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def manifest(self) -> dict:
        a = self.args
        return {
            "command": a.command,
            "seed": a.seed,
            "n_samples": a.n_samples,
            "n_alpha": a.n_alpha,
            "sub_quad": a.sub_quad,
            "forward_evals_ensemble": int(self.evals_ensemble),
            "forward_evals_grid": int(self.evals_grid),
            "wall_ms": round((time.perf_counter() - self.start) * 1000.0, 3),
            "outputs": sorted(self.outputs + ["run.json"]),
            "version": __version__,
        }


def _tempering_grid(args) -> TemperingGrid:
    return make_grid(args.n_alpha, args.sub_quad)


def _setup(args, run: Run, example: int, keep_outputs: bool = False):
    overrides = {}
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read --config: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ConfigError("--config must hold a JSON object")
    root = RandomStream(args.seed)
    prob = build_problem(example, root.spawn(0), overrides)
    grid = _tempering_grid(args)
    before = prob.model.forward_evals
    ens = build_ensemble(prob.prior_sampler, prob.model, prob.data, args.n_samples, root.spawn(1),
                         keep_outputs=keep_outputs)
    run.evals_ensemble = prob.model.forward_evals - before
    curve = deviance_curve(ens, grid, log_domain_fallback=prob.log_domain_fallback)
    prob.write_dataset(run.path("data.csv"))
    echo = {"example": example, "config": prob.config_dict(),
            "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}}
    run.write_json("config.json", echo)
    curve.to_csv(run.path("deviance.csv"))
    return root, prob, ens, curve


def _density(run: Run, prob, curve, alpha: float, lattice=None):
    box, res = lattice if lattice else (prob.box(alpha), prob.resolution)
    before = prob.model.forward_evals
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fld = grid_density(prob.model, prob.data, prob.lattice_logpdf, curve, box, res, alpha,
                           log_tilt=prob.log_tilt)
    n = prob.model.forward_evals - before
    run.evals_grid += n
    tag = _alpha_tag(alpha)
    write_field(fld, run.path(f"density_{tag}.csv"), run.path(f"density_{tag}.json"),
                {"forward_evals_ensemble": run.evals_ensemble})
    return fld


def _lattice(args):
    return _parse_lattice(args.grid) if args.grid else None


def cmd_deviance(args, run):
    _setup(args, run, args.example)


def cmd_density(args, run):
    _, prob, _, curve = _setup(args, run, args.example)
    _density(run, prob, curve, args.alpha, _lattice(args))


def cmd_sample(args, run):
    root, prob, ens, curve = _setup(args, run, args.example)
    stream = root.spawn(2)
    if args.method == "sir":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = sir_sample(ens, args.alpha, args.n_out, stream)
        thetas = res.thetas
        run.write_json("samples.json", {"method": "sir", "alpha": args.alpha, "ess": res.ess,
                                        "warning": res.warning})
    else:
        fld = _density(run, prob, curve, args.alpha, _lattice(args))
        thetas = grid_inverse_cdf_sample(fld, args.n_out, stream)
    header = ["theta%d" % (i + 1) for i in range(thetas.shape[1])]
    run.write_csv("samples.csv", header, thetas.tolist())


def cmd_spectral(args, run):
    _, prob, ens, curve = _setup(args, run, args.example, keep_outputs=True)
    if not getattr(prob.model.distance, "has_inner_product", False) or prob.example == 3:
        raise ConfigError("the spectral pathway needs a likelihood built on an inner-product distance "
                          "(example 1)")
    state = state_from_ensemble(ens, prob.model, prob.data)
    write_spectral_csv(run.path("spectral.csv"), state, curve.alphas)
    run.write_json("spectral.json", {"s": state.s, "log_C": state.log_C, "L1_0": state.L1_0,
                                     "L2_0": state.L2_0, "L3_0": state.L3_0, "c": state.c})


def cmd_mgf(args, run):
    _, prob, ens, curve = _setup(args, run, args.example)
    try:
        betas = [float(b) for b in args.betas.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --betas: {exc}") from exc
    if args.grid:
        try:
            alphas = [float(a) for a in args.grid.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse --grid as alpha list: {exc}") from exc
    else:
        alphas = list(curve.alphas)
    rows = [(a, b, mgf(curve, a, b, ens)) for a in alphas for b in betas]
    run.write_csv("mgf.csv", ["alpha", "beta", "m"], rows)


def cmd_example1(args, run):
    _, prob, ens, curve = _setup(args, run, 1)
    cfg, y = prob.config, prob.data.values[0][0]
    exact = example1.analytic_deviance(cfg, y, curve.alphas)
    run.write_csv("deviance_exact.csv", ["alpha", "phi1_exact", "phi1", "abs_error"],
                  zip(curve.alphas, exact, curve.phi1, np.abs(curve.phi1 - exact)))
    rows = []
    for a in SWEEP_ALPHAS:
        fld = _density(run, prob, curve, a)
        dens = fld.to_density()
        mu, var = example1.conjugate_transition(cfg, y, a)
        rows.append((a, fld.metadata["normalization"], dens.mean()[0], mu, dens.variance()[0], var))
    run.write_csv("transition_moments.csv",
                  ["alpha", "normalization", "mean", "mean_exact", "variance", "variance_exact"], rows)


def cmd_example2(args, run):
    root, prob, ens, curve = _setup(args, run, 2)
    header = ["alpha", "axis", "theta", "density"]
    rows, summary = [], []
    for a in SWEEP_ALPHAS:
        fld = _density(run, prob, curve, a)
        means = []
        for axis, name in ((0, "x0"), (1, "a")):
            m = marginal(fld, axis)
            means.append(float(m.mean()[0]))
            rows.extend((a, name, t, v) for t, v in zip(m.axes[0], m.values))
        summary.append((a, means[0], means[1], fld.metadata["normalization"]))
    run.write_csv("marginals.csv", header, rows)
    run.write_csv("marginal_means.csv", ["alpha", "mean_x0", "mean_a", "normalization"], summary)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = sir_sample(ens, 1.0, args.n_samples, root.spawn(2))
    run.write_csv("sir_samples.csv", ["x0", "a", "s"], res.thetas.tolist())
    run.write_json("sir_samples.json", {"alpha": 1.0, "ess": res.ess, "warning": res.warning})


def cmd_example3(args, run):
    _, prob, _, curve = _setup(args, run, 3)
    rows, counts = [], []
    for a in SWEEP_ALPHAS:
        fld = _density(run, prob, curve, a, _lattice(args))
        peaks = example3.local_maxima(fld)
        rows.extend((a, p[0], p[1]) for p in peaks)
        counts.append((a, len(peaks), example3.captured_modes(prob.config, peaks)))
    run.write_csv("peaks.csv", ["alpha", "theta1", "theta2"], rows)
    run.write_csv("mode_capture.csv", ["alpha", "n_peaks", "captured"], counts)


HANDLERS = {name: globals()["cmd_" + name] for name in COMMANDS}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    rec = Run(args, out)
    try:
        HANDLERS[args.command](args, rec)
    except (NumericError, ModelError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, PowerPostError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(out / "run.json", "w") as fh:
        json.dump(rec.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

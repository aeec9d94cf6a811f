"""Command-line front end.

    lorentzgas <command> [options] --out DIR
    lorentzgas run --experiment <command> [options] --out DIR

Options can also come from a JSON file given with ``--config``; flags take
precedence over the file.  Exit codes: 0 success, 2 configuration error,
3 runtime error, 4 statistical guard triggered.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from . import cells, corridors, experiments
from .errors import InsufficientTrials, InvalidConfig, LorentzGasError, UnknownExperiment
from .experiments import ExperimentConfig
from .io import OutputSet, RunManifest, jsonable, read_report, write_manifest
from .parallel import ENV_THREADS
from .plots import KINDS, render
from .rng import StreamFactory

log = logging.getLogger("lorentzgas")

EXPERIMENTS = ("clt", "llt", "wip", "correlation")
COMMANDS = ("corridors", "cellmeasure", "angles", "sums", *EXPERIMENTS,
            "invariance", "charincrement", "plot")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_GUARD = 0, 2, 3, 4

_EXP_DEFAULTS = {f.name: f.default for f in dataclasses.fields(ExperimentConfig)}

DEFAULTS = {
    "corridors": {"sigma": 0.2},
    "cellmeasure": {"sigma": 0.1, "seed": 0, "xi": (1, 0), "side": 0, "N": [10], "samples": 10**6,
                    "stratified": False, "tail_H": [], "threads": None},
    "angles": {"sigma": 0.1, "xi": (1, 0), "M": [100, 1000, 10000]},
    "sums": {"sigma": 0.01, "a": [0.0, 1.0, -1.0, -3.0], "N": 1000},
    "invariance": {"sigma": 0.1, "seed": 0, "samples": 10**6, "steps": 1, "threads": None},
    "charincrement": {"sigma": 0.1, "seed": 0, "t": [(1e-3, 0.0)], "samples": 10**7, "threads": None},
    "plot": {"report": None, "kind": None},
    **{e: dict(_EXP_DEFAULTS) for e in EXPERIMENTS},
}


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidConfig("arguments", message)


def _count(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _vec(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return tuple(float(p) for p in parts)


def _ivec(text: str):
    a, b = _vec(text)
    if not (a.is_integer() and b.is_integer()):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return int(a), int(b)


def _list(kind):
    def parse(text: str):
        return [kind(p) for p in text.split(",") if p]
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--sigma", type=float)

    parser = _Parser(prog="lorentzgas", description="Periodic Lorentz gas simulator and checks.")
    parser.add_argument("--version", action="version", version=version())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("corridors", parents=[common], help="enumerate open corridors")

    p = sub.add_parser("cellmeasure", parents=[common], help="cell measures and tail probabilities")
    p.add_argument("--xi", type=_ivec)
    p.add_argument("--side", type=int, choices=(0, 1))
    p.add_argument("--N", type=_list(int))
    p.add_argument("--samples", type=_count)
    p.add_argument("--stratified", action="store_true", default=None)
    p.add_argument("--tail-H", dest="tail_H", type=_list(float))
    p.add_argument("--seed", type=_count)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("angles", parents=[common], help="singularity angles along a corridor")
    p.add_argument("--xi", type=_ivec)
    p.add_argument("--M", type=_list(int))

    p = sub.add_parser("sums", parents=[common], help="totient and corridor sums")
    p.add_argument("--a", type=_list(float))
    p.add_argument("--N", type=_count)

    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common], help=f"{name} experiment")
        p.add_argument("--n", type=_count)
        p.add_argument("--trials", type=_count)
        p.add_argument("--seed", type=_count)
        p.add_argument("--threads", type=int)
        p.add_argument("--s-grid", dest="s_grid", type=_list(float))
        p.add_argument("--H", type=float)
        p.add_argument("--H-hat", dest="H_hat", type=float)
        p.add_argument("--j-max", dest="j_max", type=int)
        p.add_argument("--targets", type=lambda s: [_ivec(x) for x in s.split(";") if x])

    p = sub.add_parser("invariance", parents=[common], help="pushforward KS test")
    p.add_argument("--samples", type=_count)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=_count)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("charincrement", parents=[common], help="characteristic-function increment")
    p.add_argument("--t", action="append", type=_vec)
    p.add_argument("--samples", type=_count)
    p.add_argument("--seed", type=_count)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("plot", parents=[common], help="SVG figure from a JSON report")
    p.add_argument("--report")
    p.add_argument("--kind", choices=KINDS)
    return parser


def _rewrite_run(argv: list[str]) -> list[str]:
    """Turn ``run --experiment NAME ...`` into ``NAME ...``."""
    if not argv or argv[0] != "run":
        return argv
    rest = argv[1:]
    name = None
    for k, a in enumerate(rest):
        if a == "--experiment" and k + 1 < len(rest):
            name = rest[k + 1]
            rest = rest[:k] + rest[k + 2:]
            break
        if a.startswith("--experiment="):
            name = a.split("=", 1)[1]
            rest = rest[:k] + rest[k + 1:]
            break
    if name is None:
        raise InvalidConfig("experiment", "run needs --experiment NAME")
    if name not in COMMANDS or name == "plot":
        raise UnknownExperiment(f"unknown experiment {name!r}")
    return [name] + rest


def parse_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional JSON file and explicit flags (flags win)."""
    settings = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                filed = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig("config", str(exc)) from None
        if not isinstance(filed, dict):
            raise InvalidConfig("config", "top level must be an object")
        unknown = set(filed) - set(settings)
        if unknown:
            raise InvalidConfig("config", f"unknown keys for {args.command}: {sorted(unknown)}")
        settings.update(filed)
    for key in settings:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    if "threads" in settings:
        env = os.environ.get(ENV_THREADS)
        if env:
            try:
                settings["threads"] = int(env)
            except ValueError:
                raise InvalidConfig(ENV_THREADS, f"{env!r} is not an integer") from None
    if "sigma" in settings and not 0.0 < float(settings["sigma"]) < 0.5:
        raise InvalidConfig("sigma", f"{settings['sigma']!r} is not in (0, 1/2)")
    return settings


def experiment_config(settings: dict) -> ExperimentConfig:
    return ExperimentConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in settings.items()})


def _public(settings: dict) -> dict:
    return {k: v for k, v in jsonable(settings).items() if k != "threads"}


def _corridors(s, out: OutputSet):
    cs = corridors.enumerate_corridors(s["sigma"])
    a = cs.arrays()
    out.csv("corridors.csv", ["p", "q", "p_prime", "q_prime", "width"],
            zip(a["p"], a["q"], a["p_prime"], a["q_prime"], a["width"]))
    out.json("corridors.json", "corridors", {"sigma": s["sigma"], "rows": len(cs),
                                             "directions": len(cs.directions)}, _public(s))


def _cellmeasure(s, out: OutputSet):
    sigma = s["sigma"]
    stream = StreamFactory(s["seed"], "cellmeasure")
    rows = []
    for N in s["N"]:
        cell = cells.CellId.along(s["xi"], N, sigma, s["side"])
        lead = cells.cell_measure_leading(cell, sigma)
        mc = cells.cell_measure_mc(cell, sigma, s["samples"], stream, bool(s["stratified"]), s["threads"])
        rows.append({"N": N, "kappa": list(cell.kappa), "leading": lead.value, "regime": lead.regime,
                     "estimate": mc.estimate, "se": mc.se, "hits": mc.hits, "samples": mc.samples})
    out.csv("cells.csv", ["N", "kappa_x", "kappa_y", "leading", "regime", "estimate", "se", "hits", "samples"],
            [[r["N"], *r["kappa"], r["leading"], r["regime"], r["estimate"], r["se"], r["hits"], r["samples"]]
             for r in rows])
    out.json("cellmeasure.json", "cellmeasure", {"sigma": sigma, "rows": rows}, _public(s))
    if s["tail_H"]:
        rep = cells.tail_sweep(s["tail_H"], sigma, s["samples"], StreamFactory(s["seed"], "tail"), s["threads"])
        out.csv("tail.csv", ["H", "estimate", "se", "hits", "leading"],
                zip(rep.H, rep.estimate, rep.se, rep.hits, rep.leading))
        out.json("tail.json", "tail", rep, _public(s))


def _angles(s, out: OutputSet):
    rows = []
    for M in s["M"]:
        a = cells.singularity_angles(s["xi"], M, s["sigma"])
        rows.append([M, a.theta_minus_xi, a.theta_kappa, a.theta_prime, a.phi_prime_kappa,
                     a.theta_gap, a.predicted_theta_gap, a.theta_rel_error,
                     a.phi_gap, a.predicted_phi_gap, a.phi_rel_error])
    header = ["M", "theta_minus_xi", "theta_kappa", "theta_prime", "phi_prime_kappa", "theta_gap",
              "predicted_theta_gap", "theta_rel_error", "phi_gap", "predicted_phi_gap", "phi_rel_error"]
    out.csv("angles.csv", header, rows)
    out.json("angles.json", "angles", {"rows": [dict(zip(header, r)) for r in rows]}, _public(s))


def _sums(s, out: OutputSet):
    sigma, N = s["sigma"], int(s["N"])
    cs = corridors.enumerate_corridors(sigma)
    tot, csum = [], []
    for a in s["a"]:
        if a > -2:
            exact, asym = corridors.totient_sum(N, a)
            tot.append([N, a, float(exact), asym, float(exact) / asym])
        exact, scale = corridors.corridor_sum(sigma, a, cs)
        csum.append([a, exact, scale, exact / scale])
    m = corridors.abar_matrix(sigma, cs)
    out.csv("totient_sums.csv", ["N", "a", "exact", "asymptotic", "ratio"], tot)
    out.csv("corridor_sums.csv", ["a", "exact", "scale", "ratio"], csum)
    out.csv("abar.csv", ["row", "col0", "col1"], [[0, m[0, 0], m[0, 1]], [1, m[1, 0], m[1, 1]]])
    out.json("sums.json", "sums", {"totient": tot, "corridor": csum, "abar_half_sigma": m.tolist(),
                                   "corridor_rows": len(cs)}, _public(s))


def _clt(s, out: OutputSet):
    cfg = experiment_config(s)
    r = experiments.clt_experiment(cfg)
    out.json("clt.json", "clt", r, cfg.to_dict(with_threads=False))
    out.csv("clt_levels.csv", ["n", "b", "ks_x", "ks_y", "var_x", "var_y"],
            [[l.n, l.b, l.ks_x, l.ks_y, l.var_x, l.var_y] for l in r.levels])
    e, c = r.histogram_edges, r.histogram_counts
    out.csv("clt_histogram.csv", ["left", "right", "count"], zip(e, e[1:], c))


def _llt(s, out: OutputSet):
    cfg = experiment_config(s)
    r = experiments.llt_experiment(cfg)
    out.json("llt.json", "llt", r, cfg.to_dict(with_threads=False))
    rows = [[0, 0, r.hits, r.estimate, r.se, r.target]] + [[*t.cell, t.hits, t.estimate, t.se, t.target]
                                                            for t in r.extra]
    out.csv("llt.csv", ["cell_x", "cell_y", "hits", "estimate", "se", "target"], rows)


def _wip(s, out: OutputSet):
    cfg = experiment_config(s)
    r = experiments.wip_probe(cfg)
    out.json("wip.json", "wip", r, cfg.to_dict(with_threads=False))
    out.csv("wip_levels.csv", ["s", "steps", "cov_xx", "cov_xy", "cov_yy", "ratio_x", "ratio_y"],
            [[l.s, l.steps, l.covariance[0][0], l.covariance[0][1], l.covariance[1][1], *l.ratio_to_linear]
             for l in r.levels])


def _correlation(s, out: OutputSet):
    cfg = experiment_config(s)
    r = experiments.correlation_experiment(cfg)
    out.json("correlation.json", "correlation", r, cfg.to_dict(with_threads=False))
    rows = []
    for j in r.lags:
        a = r.autocovariance[j]
        rows.append([j, r.truncated[j], r.truncated_se[j], r.short_long[j], r.short_long_se[j],
                     r.long_full[j], r.long_full_se[j], a[0][0], a[0][1], a[1][0], a[1][1]])
    out.csv("correlation.csv", ["lag", "truncated", "truncated_se", "short_long", "short_long_se",
                                "long_full", "long_full_se", "auto_xx", "auto_xy", "auto_yx", "auto_yy"], rows)


def _invariance(s, out: OutputSet):
    r = experiments.invariance_test(s["samples"], s["steps"], s["sigma"], s["seed"], s["threads"])
    out.json("invariance.json", "invariance", r, _public(s))
    out.csv("invariance.csv", ["steps", "samples", "ks_theta", "ks_phi", "ks_theta_exact", "ks_phi_exact"],
            [[r.steps, r.samples, r.ks_theta, r.ks_phi, r.ks_theta_exact, r.ks_phi_exact]])


def _charincrement(s, out: OutputSet):
    rows = []
    for t in s["t"]:
        c = cells.char_increment(t, s["sigma"], s["samples"], StreamFactory(s["seed"], "charincrement"),
                                 s["threads"])
        rows.append({**jsonable(c), "ratio_4pi": c.ratio_4pi, "ratio_8pi": c.ratio_8pi,
                     "better_constant": c.better_constant})
    header = ["t_x", "t_y", "real", "real_se", "imag", "imag_se", "prediction_4pi", "prediction_8pi",
              "ratio_4pi", "ratio_8pi", "better_constant"]
    out.csv("charincrement.csv", header,
            [[*r["t"], r["real"], r["real_se"], r["imag"], r["imag_se"], r["prediction_4pi"],
              r["prediction_8pi"], r["ratio_4pi"], r["ratio_8pi"], r["better_constant"]] for r in rows])
    out.json("charincrement.json", "charincrement", {"rows": rows}, _public(s))


def _plot(s, out: OutputSet):
    if not s["report"] or not s["kind"]:
        raise InvalidConfig("plot", "--report and --kind are required")
    doc = read_report(s["report"])
    out.text(f"{s['kind']}.svg", render(doc["report"], s["kind"]))


HANDLERS = {
    "corridors": _corridors, "cellmeasure": _cellmeasure, "angles": _angles, "sums": _sums,
    "clt": _clt, "llt": _llt, "wip": _wip, "correlation": _correlation,
    "invariance": _invariance, "charincrement": _charincrement, "plot": _plot,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _peek(argv: list[str], flag: str, default=None):
    """Value of a flag before full parsing, so early failures still get a manifest."""
    for k, a in enumerate(argv):
        if a == flag and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith(flag + "="):
            return a.split("=", 1)[1]
    return default


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    outdir = None
    manifest = None
    if argv and not argv[0].startswith("-"):
        command = _peek(argv, "--experiment", argv[0]) if argv[0] == "run" else argv[0]
        outdir = Path(_peek(argv, "--out", "results"))
        manifest = RunManifest(command, {}, None, version(), _now())
    try:
        args = build_parser().parse_args(_rewrite_run(argv))
        outdir = Path(args.out)
        manifest = RunManifest(args.command, {}, None, version(), _now())
        settings = parse_config(args)
        manifest.config = _public(settings)
        manifest.seed = settings.get("seed")
        manifest.threads = settings.get("threads")
        out = OutputSet(outdir)
        HANDLERS[args.command](settings, out)
        manifest.outputs = out.commit()
        manifest.status = "ok"
        code = EXIT_OK
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (InvalidConfig, UnknownExperiment) as exc:
        code = _fail(manifest, exc, EXIT_CONFIG)
    except InsufficientTrials as exc:
        code = _fail(manifest, exc, EXIT_GUARD)
    except (LorentzGasError, ArithmeticError, ValueError, OSError) as exc:
        code = _fail(manifest, exc, EXIT_RUNTIME)
    if manifest is not None and outdir is not None:
        manifest.finished = _now()
        outdir.mkdir(parents=True, exist_ok=True)
        write_manifest(outdir, manifest)
    return code


def _fail(manifest, exc, code) -> int:
    log.error("%s: %s", type(exc).__name__, exc)
    if manifest is not None:
        manifest.status = "error"
        manifest.error = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    return code


if __name__ == "__main__":
    sys.exit(main())

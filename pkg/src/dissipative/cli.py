"""Command line front end.

    dissipative <subcommand> --config run.json --out results/ [--threads N] [--seed S]

Subcommands: validate, scan, smatrix, spectrum, propagate, generic, verdict.
Each writes a CSV table and ``summary.json`` under ``--out``. Exit status is
0 on success, 2 for a bad configuration and 3 when a numerical result cannot
be trusted.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dynamics, scattering, singularities
from .errors import (
    BoxTooSmall,
    ClassificationUndetermined,
    InvalidArgument,
    MatchingDegenerate,
    NotFound,
    OrderUndetermined,
    SpectralSingularityError,
    Unsupported,
)
from .model import OpticalModel, PotentialSpec, RadialGrid, validate_hypotheses
from .resolvent import Region, discrete_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_TRUST = 0, 2, 3
SUBCOMMANDS = ("validate", "scan", "smatrix", "spectrum", "propagate", "generic", "verdict")

HEADERS = {
    "scan": ["lambda", "ell", "margin", "trusted"],
    "detected": ["lambda_star", "ell", "margin", "order", "trusted"],
    "smatrix": ["lambda", "ell", "re_S", "im_S", "abs_S", "invertible"],
    "spectrum": ["re_z", "im_z", "residual", "ell"],
    "propagate": ["t", "norm"],
    "generic": ["g", "min_margin", "re_mu", "im_mu", "singular"],
    "validate": ["check", "value", "ok"],
}


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------

_ALLOWED = {
    "model": {"V", "W", "g"},
    "grid": {"r_max", "n"},
    "scan": {"lambda_min", "lambda_max", "n_lambda", "ell_max", "threshold_factor", "step"},
    "dynamics": {"T", "dt", "ell", "initial"},
    "spectrum": {"re", "im", "ell_max"},
    "generic": {"c_shape", "window", "factors", "ell_max_construct", "n_track"},
    "output": {"directory", "formats"},
}
_REQUIRED = {"model", "grid"}


def _num(sec, key, value, lo=None, hi=None, integer=False, lo_open=False):
    name = f"{sec}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer")
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(f"{name} must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(f"{name} must be <= {hi}, got {value}")
    return int(value) if integer else float(value)


def _potential(sec, key, spec):
    name = f"{sec}.{key}"
    if spec is None:
        return PotentialSpec.zero()
    if not isinstance(spec, dict):
        raise ConfigError(f"{name} must be an object")
    extra = set(spec) - {"kind", "radii", "values"}
    if extra:
        raise ConfigError(f"{name}: unknown keys {sorted(extra)}")
    kind = spec.get("kind", "piecewise")
    if kind == "zero":
        return PotentialSpec.zero()
    try:
        return PotentialSpec(kind, tuple(spec.get("radii", ())), tuple(spec.get("values", ())))
    except (InvalidArgument, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(raw)


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(_ALLOWED)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    for sec in _REQUIRED - set(raw):
        raise ConfigError(f"missing section {sec}")
    for sec, body in raw.items():
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec} must be an object")
        extra = set(body) - _ALLOWED[sec]
        if extra:
            raise ConfigError(f"{sec}: unknown keys {sorted(extra)}")

    cfg = {}
    m = raw["model"]
    g = raw["grid"]
    cfg["grid"] = {
        "r_max": _num("grid", "r_max", g.get("r_max"), lo=0, lo_open=True),
        "n": _num("grid", "n", g.get("n"), lo=16, integer=True),
    }
    cfg["model"] = {
        "V": _potential("model", "V", m.get("V")),
        "W": _potential("model", "W", m.get("W")),
        "g": _num("model", "g", m.get("g", 1.0)),
    }

    s = raw.get("scan", {})
    scan = {
        "lambda_min": _num("scan", "lambda_min", s.get("lambda_min", 0.1), lo=0, lo_open=True),
        "lambda_max": _num("scan", "lambda_max", s.get("lambda_max", 10.0), lo=0, lo_open=True),
        "n_lambda": _num("scan", "n_lambda", s.get("n_lambda", 200), lo=32, integer=True),
        "ell_max": None,
        "threshold_factor": _num("scan", "threshold_factor", s.get("threshold_factor", 1e-2),
                                 lo=0, lo_open=True, hi=1),
        "step": _num("scan", "step", s.get("step", scattering.DEFAULT_STEP), lo=0, lo_open=True),
    }
    if scan["lambda_max"] <= scan["lambda_min"]:
        raise ConfigError("scan.lambda_max must exceed scan.lambda_min")
    if s.get("ell_max") is not None:
        scan["ell_max"] = _num("scan", "ell_max", s["ell_max"], lo=0, hi=64, integer=True)
    cfg["scan"] = scan

    d = raw.get("dynamics", {})
    dyn = {
        "T": _num("dynamics", "T", d.get("T", 20.0), lo=0, lo_open=True),
        "dt": _num("dynamics", "dt", d.get("dt", 0.01), lo=0, lo_open=True),
        "ell": _num("dynamics", "ell", d.get("ell", 0), lo=0, hi=64, integer=True),
        "initial": d.get("initial", {"kind": "gaussian", "center": 0.5, "width": 0.2}),
    }
    if dyn["T"] < dyn["dt"]:
        raise ConfigError("dynamics.T must be at least dynamics.dt")
    init = dyn["initial"] = dict(dyn["initial"]) if isinstance(dyn["initial"], dict) else None
    if not isinstance(init, dict) or init.get("kind") not in ("gaussian", "random"):
        raise ConfigError("dynamics.initial.kind must be 'gaussian' or 'random'")
    allowed = {"kind", "center", "width", "momentum"} if init["kind"] == "gaussian" else {"kind"}
    if set(init) - allowed:
        raise ConfigError(f"dynamics.initial: unknown keys {sorted(set(init) - allowed)}")
    if init["kind"] == "gaussian":
        for key, default, lo in (("center", 0.5, None), ("width", 0.2, 0)):
            init[key] = _num("dynamics.initial", key, init.get(key, default), lo=lo,
                             lo_open=lo is not None)
        init["momentum"] = _num("dynamics.initial", "momentum", init.get("momentum", 0.0))
    cfg["dynamics"] = dyn

    sp = raw.get("spectrum", {})
    cfg["spectrum"] = {
        "re": _pair("spectrum", "re", sp.get("re", [-100.0, 0.0])),
        "im": _pair("spectrum", "im", sp.get("im", [-100.0, 0.0])),
        "ell_max": _num("spectrum", "ell_max", sp.get("ell_max", 0), lo=0, hi=64, integer=True),
    }
    if cfg["spectrum"]["im"][1] > 1e-8:
        raise ConfigError("spectrum.im must lie in the closed lower half-plane")

    ge = raw.get("generic", {})
    cfg["generic"] = {
        "c_shape": _potential("generic", "c_shape", ge.get("c_shape")) if "c_shape" in ge else None,
        "window": _pair("generic", "window", ge.get("window", [0.5, 6.0]), positive=True),
        "factors": [
            _num("generic", "factors", f, lo=0, lo_open=True)
            for f in ge.get("factors", [0.9, 0.95, 1.05, 1.1])
        ],
        "ell_max_construct": _num("generic", "ell_max_construct", ge.get("ell_max_construct", 4),
                                  lo=0, hi=64, integer=True),
        "n_track": _num("generic", "n_track", ge.get("n_track", 64), lo=8, integer=True),
    }

    o = raw.get("output", {})
    cfg["output"] = {"directory": o.get("directory"), "formats": o.get("formats", ["csv", "json"])}
    if not set(cfg["output"]["formats"]) <= {"csv", "json"}:
        raise ConfigError("output.formats may only contain 'csv' and 'json'")
    return cfg


def _pair(sec, key, value, positive=False):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{sec}.{key} must be a two-element list")
    lo = _num(sec, key, value[0], lo=0 if positive else None, lo_open=positive)
    hi = _num(sec, key, value[1])
    if hi < lo:
        raise ConfigError(f"{sec}.{key} bounds are reversed")
    return (lo, hi)


def build_model(cfg):
    grid = RadialGrid(cfg["grid"]["r_max"], cfg["grid"]["n"])
    m = cfg["model"]
    try:
        return OpticalModel(m["V"], m["W"], grid, m["g"])
    except InvalidArgument as exc:
        raise ConfigError(f"model: {exc}") from None


# -- output -------------------------------------------------------------------


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, kind, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADERS[kind])
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class Run:
    def __init__(self, out, formats):
        self.out = Path(out)
        self.formats = formats
        self.out.mkdir(parents=True, exist_ok=True)

    def table(self, kind, rows, name=None):
        if "csv" in self.formats:
            write_csv(self.out / f"{name or kind}.csv", kind, rows)

    def summary(self, data):
        if "json" in self.formats:
            with open(self.out / "summary.json", "w") as fh:
                json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
                fh.write("\n")


# -- subcommands ---------------------------------------------------------------


def _workers(threads):
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def cmd_validate(cfg, run, args):
    model = build_model(cfg)
    rep = validate_hypotheses(model)
    run.table("validate", [
        ("w_nonnegative", float(rep.w_nonnegative), rep.w_nonnegative),
        ("compact_support", float(rep.compact_support), rep.compact_support),
        ("zero_energy_margin", rep.zero_energy_margin, rep.zero_energy_regular),
    ])
    status = EXIT_OK if rep.ok else EXIT_TRUST
    return status, {"ok": rep.ok, "zero_energy_margin": rep.zero_energy_margin,
                    "reasons": rep.messages}


def cmd_scan(cfg, run, args):
    model = build_model(cfg)
    s = cfg["scan"]
    J = (s["lambda_min"], s["lambda_max"])
    rep = singularities.scan_singularities(model, J, s["n_lambda"], s["ell_max"],
                                           s["threshold_factor"], workers=_workers(args.threads))
    rows = [
        (lam, ell, rep.margins[i, ell], rep.trusted_grid[i, ell])
        for i, lam in enumerate(rep.lams) for ell in rep.ells
    ]
    run.table("scan", rows)
    run.table("detected", [(d.lam_star, d.ell, d.margin, d.order, d.trusted) for d in rep.detected])
    reasons = []
    if len(rep.untrusted_lams):
        reasons.append(f"{len(rep.untrusted_lams)} energies with ill-conditioned Id + G0 V")
    for d in rep.detected:
        if not d.trusted:
            reasons.append(f"detection at {d.lam_star:.10g} moves under grid refinement")
        if d.order is None:
            reasons.append(f"order undetermined at {d.lam_star:.10g}")
    summary = {
        "J": J, "ell_max": int(rep.ells[-1]), "threshold": rep.threshold,
        "min_margin": rep.min_margin,
        "detected": [{"lambda_star": d.lam_star, "ell": d.ell, "margin": d.margin,
                      "order": d.order, "trusted": d.trusted} for d in rep.detected],
        "reasons": reasons,
    }
    return (EXIT_TRUST if reasons else EXIT_OK), summary


def cmd_smatrix(cfg, run, args):
    model = build_model(cfg)
    s = cfg["scan"]
    J = (s["lambda_min"], s["lambda_max"])
    ell_max = s["ell_max"]
    if ell_max is None:
        ell_max = singularities.choose_ell_max(model, J)
    prof = scattering.scattering_profile(model, J, s["n_lambda"], ell_max, s["step"])
    rows = [
        (lam, ell, prof.S[i, ell].real, prof.S[i, ell].imag, abs(prof.S[i, ell]), prof.invertible[i])
        for i, lam in enumerate(prof.lams) for ell in prof.ells
    ]
    run.table("smatrix", rows)
    return EXIT_OK, {"J": J, "ell_max": ell_max, "min_abs_S": float(prof.modulus.min()),
                     "contraction_violation": prof.contraction_violation(),
                     "non_invertible": [float(x) for x in prof.lams[~prof.invertible]]}


def cmd_spectrum(cfg, run, args):
    model = build_model(cfg)
    sp = cfg["spectrum"]
    region = Region(sp["re"], sp["im"])
    rows = []
    for ell in range(sp["ell_max"] + 1):
        rep = discrete_spectrum(model, ell, region)
        rows += [(z.real, z.imag, r, ell) for z, r in zip(rep.eigenvalues, rep.residuals)]
    run.table("spectrum", rows)
    bad = [r for r in rows if r[2] > 1e-8]
    reasons = [f"{len(bad)} eigenpairs with residual above 1e-8"] if bad else []
    return (EXIT_TRUST if bad else EXIT_OK), {"count": len(rows), "reasons": reasons,
                                               "eigenvalues": [complex(r[0], r[1]) for r in rows]}


def initial_state(cfg, grid, seed):
    init = cfg["dynamics"]["initial"]
    if init["kind"] == "gaussian":
        return dynamics.gaussian_state(grid, init["center"], init["width"], init["momentum"])
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    u[grid.n // 2:] = 0.0  # keep clear of the wall
    return u / dynamics.grid_norm(u, grid.h)


def cmd_propagate(cfg, run, args):
    model = build_model(cfg)
    d = cfg["dynamics"]
    u0 = initial_state(cfg, model.grid, args.seed)
    tr = dynamics.propagate(model, d["ell"], u0, d["T"], d["dt"])
    run.table("propagate", list(zip(tr.times, tr.norms)))
    reasons = []
    if tr.leakage > dynamics.LEAK_LIMIT:
        reasons.append(f"boundary leakage {tr.leakage:.3e} exceeds {dynamics.LEAK_LIMIT}")
    if not tr.monotone:
        reasons.append(f"step growth {tr.max_step_growth:.3e} breaks contraction")
    return (EXIT_TRUST if reasons else EXIT_OK), {
        "p_scatt": tr.p_scatt_estimate, "p_abs": tr.p_abs_estimate, "leakage": tr.leakage,
        "final_norm": tr.norms[-1], "reasons": reasons}


def cmd_generic(cfg, run, args):
    model = build_model(cfg)
    ge = cfg["generic"]
    c_shape = ge["c_shape"]
    if c_shape is None:
        # C0 = sqrt(W) is only available in closed form for piecewise data
        if model.W.kind != "piecewise":
            raise ConfigError("generic.c_shape is required for tabulated W")
        c_shape = PotentialSpec("piecewise", model.W.radii, tuple(np.sqrt(model.W.values)))
    base = singularities.construct_singularity(model.V, c_shape, ge["window"], model.grid,
                                               ge["ell_max_construct"], ge["n_track"])
    s = cfg["scan"]
    gs = [base.g_star * f for f in ge["factors"]]
    sweep = singularities.genericity_sweep(base, gs, n_lam=s["n_lambda"], ell_max=s["ell_max"],
                                           workers=_workers(args.threads))
    run.table("generic", [(r.g, r.min_margin, r.mu.real, r.mu.imag, r.singular) for r in sweep.rows])
    return EXIT_OK, {
        "g_star": base.g_star, "lambda_star": base.lam_star, "ell": base.ell,
        "mu": base.mu, "margin_at_star": base.margin, "J": sweep.J,
        "max_scaling_error": sweep.max_scaling_error,
        "max_projection_angle": sweep.max_projection_angle,
    }


def cmd_verdict(cfg, run, args):
    model = build_model(cfg)
    s = cfg["scan"]
    J = (s["lambda_min"], s["lambda_max"])
    v = singularities.asymptotic_completeness_verdict(model, J, s["n_lambda"], s["ell_max"],
                                                      workers=_workers(args.threads))
    rep = v.report
    rows = [] if rep is None else [
        (lam, ell, rep.margins[i, ell], rep.trusted_grid[i, ell])
        for i, lam in enumerate(rep.lams) for ell in rep.ells
    ]
    run.table("scan", rows)
    failed = v.status == "not-certifiable" or bool(v.untrusted)
    summary = {"verdict": v.status, "J": J, "witnesses": v.witnesses,
               "untrusted": [float(x) for x in v.untrusted], "backing": v.reasons,
               "reasons": v.reasons if v.status == "not-certifiable" else []}
    if v.untrusted:
        summary["reasons"].append(f"{len(v.untrusted)} untrusted energies")
    return (EXIT_TRUST if failed else EXIT_OK), summary


COMMANDS = {
    "validate": cmd_validate, "scan": cmd_scan, "smatrix": cmd_smatrix, "spectrum": cmd_spectrum,
    "propagate": cmd_propagate, "generic": cmd_generic, "verdict": cmd_verdict,
}


def build_parser():
    p = argparse.ArgumentParser(prog="dissipative", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for scans, 0 = auto")
    p.add_argument("--seed", type=int, default=0, help="seed for random initial states")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = args.out or cfg["output"]["directory"]
        if out is None:
            raise ConfigError("no output directory: pass --out or set output.directory")
        run = Run(out, cfg["output"]["formats"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    base = {"subcommand": args.subcommand, "config": str(args.config), "seed": args.seed}
    try:
        status, summary = COMMANDS[args.subcommand](cfg, run, args)
    except ConfigError as exc:
        status, summary = EXIT_CONFIG, {"error": "config", "reasons": [str(exc)]}
    except (InvalidArgument, Unsupported) as exc:
        status, summary = EXIT_CONFIG, {"error": type(exc).__name__, "reasons": [str(exc)]}
    except (SpectralSingularityError, OrderUndetermined, NotFound, MatchingDegenerate,
            BoxTooSmall, ClassificationUndetermined) as exc:
        status, summary = EXIT_TRUST, {"error": type(exc).__name__, "reasons": [str(exc)]}
    summary = {**base, **summary, "exit_status": status}
    run.summary(summary)
    for reason in summary.get("reasons", []):
        print(f"{args.subcommand}: {reason}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

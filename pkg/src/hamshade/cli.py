"""Command-line front end.

Every subcommand resolves an effective configuration (flags override the
``--config`` document, which overrides built-in defaults), runs one analysis
and writes a JSON report with the effective configuration and all
tolerances embedded. Exit codes: 0 verdict holds/success, 1 verdict
fails/failure, 2 input or configuration error, 3 numerical failure.
"""
import argparse
import contextlib
import copy
import json
import math
import os
import sys as _sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from ._jit import backend
from .errors import HamshadeError, InputError, NumericalError

FORMAT_VERSION = 1
OUTPUT_ENV = "HAMSHADE_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

COMMON = {"system": None, "step": 1e-3, "method": "implicit-midpoint", "newton_tol": 1e-12,
          "newton_maxit": 50, "singular_tol": 1e-8, "allow_singular": False, "jobs": 1}

DEFAULTS = {
    "describe": {"system": "builtin:henon-heiles", "x0": None},
    "flow": {"system": "builtin:henon-heiles", "x0": None, "t": 10.0, "samples": 1001,
             "energy": None, "energy_index": None, "defect_tol": 1e-8},
    "lyap": {"system": "builtin:henon-heiles", "x0": None, "T": 1e4, "renorm": 1.0,
             "energy": None, "energy_index": None, "progress_every": None, "full": False,
             "bound": 1e6, "pairing_tol": 5e-3},
    "orbit": {"system": "builtin:henon-heiles", "x0": None, "energy": None,
              "energy_index": None, "section": None, "max_newton": 30, "tol": 1e-10,
              "unit_band": 1e-4, "fd_step": 1e-7, "max_time": 1000.0},
    "splitting": {"system": "builtin:saddle-center", "x0": None, "generator": None,
                  "samples": 5, "spacing": 1.0, "horizon": 20.0, "dims": None,
                  "check": "domination", "i": 1, "j": 0, "ell": None, "ell_res": 0.05,
                  "ell_max": 20.0, "theta": 0.5, "slack": 1e-6, "gap_tol": 1e-8},
    "shadow": {"system": "builtin:harmonic", "pseudo": None, "eps": None, "budget": 2000,
               "rep_eps": None, "radius": None, "per_segment": 20},
    "weakshadow": {"system": "builtin:harmonic", "pseudo": None, "eps": None, "budget": 500,
                   "per_segment": 20},
    "expansive": {"system": "builtin:saddle-center", "x0": None, "delta": 0.1, "window": 10.0,
                  "eps": 0.05, "d0": None, "dt": 0.01},
    "spec": {"system": "builtin:henon-heiles", "p1": None, "p2": None, "i1": [0.0, 1.0],
             "i2": None, "K": 1.0, "eps": 0.05, "budget": 2000, "per_unit": 20},
    "suspend": {"height": 1.0, "state": [0.1, 0.2, 0.3], "s": [1.0], "slab_times": 20},
    "selftest": {"only": None, "break": None},
}

DEFAULT_POINTS = {
    "pedro": [1.0, 0.5],
    "harmonic": [1.0, 0.0, 0.0, 0.5],
    "henon-heiles": [0.0, 0.1, 0.3, 0.0],
    "saddle-center": [0.0, 1.0, 0.0, 0.0],
}

POSITIVE = ("step", "newton_tol", "newton_maxit", "singular_tol", "jobs", "t", "samples", "T",
            "renorm", "bound", "pairing_tol", "defect_tol", "max_newton", "tol", "unit_band",
            "fd_step", "max_time", "spacing", "horizon", "ell", "ell_res", "ell_max", "slack",
            "eps", "budget", "rep_eps", "radius", "per_segment", "delta", "window", "d0", "dt",
            "K", "per_unit", "height", "slab_times", "progress_every")


# ------------------------------------------------------------------ plumbing

def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n"


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename over it on success."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(path, doc):
    with atomic_path(path) as tmp:
        with open(tmp, "w") as fh:
            fh.write(dumps(doc))


def output_dir(args):
    out = args.out or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def effective_config(cmd, args):
    """defaults < config document (top level, then the ``cmd`` section) < flags."""
    cfg = copy.deepcopy(COMMON)
    cfg.update(copy.deepcopy(DEFAULTS[cmd]))
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError("config must be a JSON object")
        if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise InputError(f"unsupported format_version {doc['format_version']!r}")
        for key, val in doc.items():
            if key == "format_version" or key in DEFAULTS and key != cmd:
                continue
            if key == cmd:
                if not isinstance(val, dict):
                    raise InputError(f"config section {cmd!r} must be an object")
                continue
            if key not in cfg:
                raise InputError(f"unknown config key {key!r} for {cmd}")
            cfg[key] = val
        for key, val in doc.get(cmd, {}).items():
            if key not in cfg:
                raise InputError(f"unknown config key {key!r} for {cmd}")
            cfg[key] = val
    explicit = set()
    if getattr(args, "config", None):
        explicit |= {k for k in doc if k in cfg} | set(doc.get(cmd, {}))
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
            explicit.add(key)
    args.explicit = explicit
    for key in POSITIVE:
        v = cfg.get(key)
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise InputError(f"{key} must be a positive number (got {v!r})")
    return cfg


def _policy(cfg):
    from .flow import Policy
    return Policy(step=float(cfg["step"]), method=cfg["method"], tol=float(cfg["newton_tol"]),
                  maxit=int(cfg["newton_maxit"]), allow_singular=bool(cfg["allow_singular"]),
                  singular_tol=float(cfg["singular_tol"]))


def _system(cfg):
    from .hamsys import load_system
    if cfg["system"] is None:
        raise InputError("no system given")
    try:
        return load_system(cfg["system"])
    except OSError as exc:
        raise InputError(f"cannot read system {cfg['system']}: {exc}") from exc


def _points(sys, given):
    """List of starting points: the given ones, else the builtin default."""
    if given is None:
        name = sys.meta.get("builtin")
        if name not in DEFAULT_POINTS:
            raise InputError("--x0 is required for non-builtin systems")
        given = [DEFAULT_POINTS[name]]
    if given and not isinstance(given[0], (list, tuple)):
        given = [given]
    return [[float(v) for v in p] for p in given]


def _place(sys, x, cfg):
    """Move x onto the configured energy level when one is requested."""
    from .hamsys import on_energy_level
    if cfg.get("energy") is None:
        return np.asarray(x, dtype=float)
    idx = cfg.get("energy_index")
    idx = sys.n if idx is None else int(idx)
    return on_energy_level(sys, x, float(cfg["energy"]), idx)


def _fan_out(fn, cfg, items):
    """Run ``fn(cfg, item, k)`` over items; results keep input order."""
    jobs = int(cfg["jobs"])
    if jobs <= 1 or len(items) <= 1:
        return [fn(cfg, it, k) for k, it in enumerate(items)]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        futures = [pool.submit(fn, cfg, it, k) for k, it in enumerate(items)]
        return [f.result() for f in futures]


def _indexed(base, ext, k, count):
    return f"{base}.{ext}" if count == 1 else f"{base}_{k}.{ext}"


def _float_list(v):
    return [float(a) for a in v]


# ------------------------------------------------------------------ commands

def cmd_describe(cfg, out):
    from .hamsys import is_regular
    sys = _system(cfg)
    rows = []
    for x in _points(sys, cfg["x0"]):
        x = np.asarray(x)
        rows.append({"x": x, "energy": sys.energy(x), "gradient": sys.gradient(x),
                     "field": sys.field(x),
                     "regular": is_regular(sys, x, cfg["singular_tol"])})
    result = {"dim": sys.dim, "separable": sys.separable, "polynomial": sys.is_polynomial,
              "points": rows}
    return "success", result, {"singular_tol": cfg["singular_tol"]}, []


def _flow_job(cfg, x0, k):
    from .flow import TrajectorySample, sample_orbit, tangent_flow, write_trajectory_csv
    sys, pol = _system(cfg), _policy(cfg)
    x = _place(sys, x0, cfg)
    times = np.linspace(0.0, float(cfg["t"]), int(cfg["samples"]))
    pts = sample_orbit(sys, x, times, pol)
    e0 = sys.energy(x)
    drift = float(max(abs(sys.energy(p) - e0) for p in pts))
    tf = tangent_flow(sys, x, float(cfg["t"]), pol)
    path = os.path.join(cfg["_out"], _indexed("flow", "csv", k, cfg["_count"]))
    with atomic_path(path) as tmp:
        write_trajectory_csv(tmp, sys, TrajectorySample(times, pts, drift))
    return {"x0": x, "x_final": pts[-1], "energy_drift": drift,
            "symplectic_defect": tf.symplectic_defect,
            "equivariance_defect": tf.equivariance_defect,
            "csv": os.path.basename(path)}


def cmd_flow(cfg, out):
    sys = _system(cfg)
    pts = _points(sys, cfg["x0"])
    rows = _fan_out(_flow_job, dict(cfg, _out=out, _count=len(pts)), pts)
    ok = all(r["symplectic_defect"] <= cfg["defect_tol"] for r in rows)
    files = [r["csv"] for r in rows]
    return ("holds" if ok else "fails"), {"runs": rows}, {"symplectic_defect": cfg["defect_tol"]}, files


def _lyap_job(cfg, x0, k):
    from .spectra import lyapunov_spectrum, write_spectrum_csv
    sys, pol = _system(cfg), _policy(cfg)
    x = _place(sys, x0, cfg)
    T = float(cfg["T"])
    every = cfg["progress_every"] or T / 10
    spec = lyapunov_spectrum(sys, x, T, pol, renorm=float(cfg["renorm"]),
                             bound=float(cfg["bound"]), full=bool(cfg["full"]),
                             progress_every=every)
    path = os.path.join(cfg["_out"], _indexed("lyap", "csv", k, cfg["_count"]))
    with atomic_path(path) as tmp:
        write_spectrum_csv(tmp, spec)
    return {"x0": x, "exponents": spec.exponents, "pairing_defect": spec.pairing_defect,
            "sum_defect": spec.sum_defect, "T": spec.T, "renorm_interval": spec.renorm_interval,
            "full": spec.full, "csv": os.path.basename(path)}


def cmd_lyap(cfg, out):
    sys = _system(cfg)
    pts = _points(sys, cfg["x0"])
    rows = _fan_out(_lyap_job, dict(cfg, _out=out, _count=len(pts)), pts)
    tol = cfg["pairing_tol"]
    ok = all(r["pairing_defect"] <= tol and r["sum_defect"] <= tol for r in rows)
    return ("holds" if ok else "fails"), {"runs": rows}, {"pairing": tol, "sum": tol}, \
        [r["csv"] for r in rows]


def _section(cfg, sys):
    from .poincare import Section
    sec = cfg["section"]
    if sec is None:
        normal = np.zeros(sys.dim)
        normal[0] = 1.0
        return Section(normal=normal, offset=0.0, direction=1)
    if not isinstance(sec, dict) or "normal" not in sec:
        raise InputError("section must be an object with 'normal' (and optional offset, direction)")
    if len(sec["normal"]) != sys.dim:
        raise InputError(f"section normal must have length {sys.dim}")
    return Section.from_config(sec)


def _orbit_job(cfg, x0, k):
    from .orbits import find_periodic
    sys, pol = _system(cfg), _policy(cfg)
    x = _place(sys, x0, cfg)
    orb = find_periodic(sys, x, _section(cfg, sys), pol, max_newton=int(cfg["max_newton"]),
                        tol=float(cfg["tol"]), energy=cfg["energy"],
                        unit_band=float(cfg["unit_band"]), fd_step=float(cfg["fd_step"]),
                        max_time=float(cfg["max_time"]))
    rep = orb.to_report()
    rep["newton_iterations"] = int(orb.newton_iterations)
    rep["seed"] = x
    return rep


def cmd_orbit(cfg, out):
    sys = _system(cfg)
    _section(cfg, sys)
    pts = _points(sys, cfg["x0"])
    rows = _fan_out(_orbit_job, cfg, pts)
    return "success", {"orbits": rows}, {"residual": cfg["tol"], "unit_band": cfg["unit_band"]}, []


def cmd_splitting(cfg, out):
    from .splitting import (LinearCocycle, OrbitCocycle, domination_check, estimate_splitting,
                            hyperbolicity_check, partial_hyperbolicity_check, min_scale)
    if cfg["generator"] is not None:
        A = np.asarray(cfg["generator"], dtype=float)
        coc = LinearCocycle(A)
        source = {"generator": A}
    else:
        sys = _system(cfg)
        x0 = _points(sys, cfg["x0"])[0]
        coc = OrbitCocycle(sys, x0, nsamples=int(cfg["samples"]), spacing=float(cfg["spacing"]),
                           policy=_policy(cfg))
        source = {"x0": x0, "samples": cfg["samples"], "spacing": cfg["spacing"]}
    split = estimate_splitting(coc, float(cfg["horizon"]), cfg["dims"], float(cfg["gap_tol"]))
    theta, slack = float(cfg["theta"]), float(cfg["slack"])
    if not 0 < theta < 1:
        raise InputError("theta must lie in (0, 1)")
    kind = cfg["check"]
    if kind == "domination":
        def check(ell):
            return domination_check(coc, split, int(cfg["i"]), int(cfg["j"]), ell, theta, slack)
    elif kind == "hyperbolic":
        def check(ell):
            return hyperbolicity_check(coc, split, ell, theta, slack)
    elif kind == "partial":
        def check(ell):
            return partial_hyperbolicity_check(coc, split, ell, theta, slack)
    else:
        raise InputError("check must be domination, hyperbolic or partial")
    if cfg["ell"] is not None:
        ell = float(cfg["ell"])
    else:
        res = float(cfg["ell_res"])
        grid = np.round(np.arange(1, int(math.floor(cfg["ell_max"] / res + 1e-9)) + 1) * res, 12)
        ell = min_scale(check, grid)
        if ell is None:
            ell = float(grid[-1])
    rep = check(ell)
    result = {"source": source, "rates": split.rates, "block_dims": split.subbundle_dims,
              "horizon": split.horizon, "report": rep.to_report(),
              "scale_searched": cfg["ell"] is None}
    tol = {"theta": theta, "slack": slack, "gap_tol": cfg["gap_tol"]}
    if cfg["ell"] is None:
        tol.update(ell_res=cfg["ell_res"], ell_max=cfg["ell_max"])
    return rep.verdict, result, tol, []


def _pseudo(cfg, sys):
    """Load the chain; a step recorded in the document replaces the default
    step but not one given by flag or config."""
    from .shades import load_pseudo_orbit
    if cfg["pseudo"] is None:
        raise InputError("--pseudo is required")
    try:
        with open(cfg["pseudo"]) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read pseudo-orbit {cfg['pseudo']}: {exc}") from exc
    if isinstance(doc, dict) and doc.get("step") is not None and "step" not in cfg["_explicit"]:
        cfg["step"] = float(doc["step"])
    return load_pseudo_orbit(sys, doc, _policy(cfg))


def _require_eps(cfg):
    if cfg["eps"] is None:
        raise InputError("--eps is required")
    return float(cfg["eps"])


def cmd_shadow(cfg, out):
    from .shades import shadow_search
    sys = _system(cfg)
    eps = _require_eps(cfg)
    po = _pseudo(cfg, sys)
    rep = shadow_search(po, eps, budget=int(cfg["budget"]), rep_eps=cfg["rep_eps"],
                        radius=cfg["radius"], per_segment=int(cfg["per_segment"]))
    tol = {"eps": eps, "rep_eps": eps if cfg["rep_eps"] is None else cfg["rep_eps"],
           "delta": po.delta, "T": po.T}
    return ("success" if rep.success else "failure"), rep.to_report(), tol, []


def cmd_weakshadow(cfg, out):
    from .shades import weak_shadow_search
    sys = _system(cfg)
    eps = _require_eps(cfg)
    po = _pseudo(cfg, sys)
    rep = weak_shadow_search(po, eps, budget=int(cfg["budget"]),
                             per_segment=int(cfg["per_segment"]))
    return ("success" if rep.success else "failure"), rep.to_report(), \
        {"eps": eps, "delta": po.delta, "T": po.T}, []


def _expansive_job(cfg, x0, k):
    from .shades import expansiveness_probe
    sys, pol = _system(cfg), _policy(cfg)
    v = expansiveness_probe(sys, x0, float(cfg["delta"]), float(cfg["window"]),
                            float(cfg["eps"]), d0=cfg["d0"], dt=float(cfg["dt"]), policy=pol)
    return dict(v.to_report(), x=x0)


def cmd_expansive(cfg, out):
    sys = _system(cfg)
    rows = _fan_out(_expansive_job, cfg, _points(sys, cfg["x0"]))
    ok = all(r["verdict"] == "separated" for r in rows)
    d0 = cfg["d0"] if cfg["d0"] is not None else cfg["delta"] * 1e-3
    return ("holds" if ok else "fails"), {"probes": rows}, \
        {"delta": cfg["delta"], "eps": cfg["eps"], "d0": d0, "dt": cfg["dt"]}, []


def cmd_spec(cfg, out):
    from .shades import weak_spec_check
    sys = _system(cfg)
    default = _points(sys, None)[0] if sys.meta.get("builtin") in DEFAULT_POINTS else None
    p1 = cfg["p1"] if cfg["p1"] is not None else default
    p2 = cfg["p2"] if cfg["p2"] is not None else p1
    if p1 is None:
        raise InputError("--p1 is required for non-builtin systems")
    i1 = _float_list(cfg["i1"])
    K = float(cfg["K"])
    i2 = _float_list(cfg["i2"]) if cfg["i2"] is not None else [i1[1] + K, i1[1] + K + (i1[1] - i1[0])]
    if len(i1) != 2 or len(i2) != 2:
        raise InputError("arc intervals take two numbers")
    rep = weak_spec_check(sys, (p1, tuple(i1)), (p2, tuple(i2)), K, float(cfg["eps"]),
                          budget=int(cfg["budget"]), per_unit=int(cfg["per_unit"]),
                          policy=_policy(cfg))
    result = dict(rep.to_report(), arcs=[{"p": p1, "interval": i1}, {"p": p2, "interval": i2}])
    return ("success" if rep.success else "failure"), result, \
        {"eps": cfg["eps"], "K": K}, []


def cmd_suspend(cfg, out):
    from .hamsys import cat_suspension, slab_witness, suspension_by_formula, suspension_flow
    susp = cat_suspension(float(cfg["height"]))
    st = _float_list(cfg["state"])
    if len(st) != 3:
        raise InputError("state is x y r")
    state = (np.array(st[:2]), st[2])
    rows, worst = [], 0.0
    for s in _float_list(cfg["s"]):
        x, r = suspension_flow(susp, state, s)
        row = {"s": s, "x": x, "r": r}
        if s >= 0:
            fx, fr = suspension_by_formula(susp, state, s)
            d = max(float(np.max(np.abs(fx - x))), abs(fr - r))
            row["formula_defect"] = d
            worst = max(worst, d)
        rows.append(row)
    hits = slab_witness(susp, [state], range(1, int(cfg["slab_times"]) + 1))
    tol = 1e-12
    return ("holds" if worst <= tol else "fails"), \
        {"states": rows, "slab_hits": hits, "formula_defect": worst}, {"formula": tol}, []


# ------------------------------------------------------------------ selftest

def selftest_report(only=None, broken=(), echo=None):
    from .selftest import run_criteria
    report, timings = run_criteria(only=only, broken=broken, echo=echo)
    report = {"format_version": FORMAT_VERSION, "command": "selftest",
              "config": {"only": sorted(only) if only else None, "break": sorted(broken)},
              **report}
    return report, timings


def cmd_selftest(args, out):
    only = set(args.only) if args.only else None
    broken = set(args.break_ids or ())

    def echo(res, elapsed):
        mark = "PASS" if res["passed"] else "FAIL"
        print(f"{res['id']:>3}  {mark}  {elapsed:8.2f}s  (limit {res['runtime_limit_s']}s)  "
              f"{res['name']}", flush=True)

    print(f"hamshade {__version__} selftest ({backend()})")
    report, timings = selftest_report(only, broken, echo)
    path = os.path.join(out, "selftest.json")
    write_json(path, report)
    failed = [f"{r['id']} ({r['name']})" for r in report["criteria"] if not r["passed"]]
    total = sum(timings.values())
    if failed:
        print(f"selftest: FAIL [{', '.join(failed)}] in {total:.1f}s -> {path}")
        return EXIT_FAIL
    print(f"selftest: PASS ({len(report['criteria'])} criteria) in {total:.1f}s -> {path}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

COMMANDS = {"describe": cmd_describe, "flow": cmd_flow, "lyap": cmd_lyap, "orbit": cmd_orbit,
            "splitting": cmd_splitting, "shadow": cmd_shadow, "weakshadow": cmd_weakshadow,
            "expansive": cmd_expansive, "spec": cmd_spec, "suspend": cmd_suspend}

SUCCESS = {"holds", "success"}


def _common(p, system=True):
    p.add_argument("--config", help="JSON config document (flags override it)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    if system:
        p.add_argument("--system", help="builtin:NAME or path to a system JSON document")
        p.add_argument("--step", type=float, help="integrator step")
        p.add_argument("--method", help="implicit-midpoint, leapfrog-if-separable or rk4")
        p.add_argument("--singular-tol", dest="singular_tol", type=float)
        p.add_argument("--allow-singular", dest="allow_singular", action="store_true",
                       default=None)
        p.add_argument("--jobs", type=int, help="worker processes for multiple points")


def _x0(p, name="--x0", help_="starting point (repeat for several)"):
    p.add_argument(name, dest="x0", type=float, nargs="+", action="append", help=help_)


def _energy(p):
    p.add_argument("--energy", type=float, help="move the point onto this energy level")
    p.add_argument("--energy-index", dest="energy_index", type=int,
                   help="coordinate adjusted to reach the energy (default p1)")


def build_parser():
    ap = argparse.ArgumentParser(prog="hamshade", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hamshade {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="system document and pointwise quantities")
    _common(p)
    _x0(p)

    p = sub.add_parser("flow", help="trajectory CSV and tangent-flow diagnostics")
    _common(p)
    _x0(p)
    _energy(p)
    p.add_argument("--t", type=float, help="final time (negative for backward)")
    p.add_argument("--samples", type=int, help="rows in the trajectory CSV")
    p.add_argument("--defect-tol", dest="defect_tol", type=float)

    p = sub.add_parser("lyap", help="transversal Lyapunov spectrum")
    _common(p)
    _x0(p)
    _energy(p)
    p.add_argument("--T", type=float, help="averaging time")
    p.add_argument("--renorm", type=float, help="re-orthonormalization interval")
    p.add_argument("--progress-every", dest="progress_every", type=float)
    p.add_argument("--full", action="store_true", default=None,
                   help="use the whole tangent space")
    p.add_argument("--pairing-tol", dest="pairing_tol", type=float)

    p = sub.add_parser("orbit", help="periodic orbit by Newton on a section")
    _common(p)
    _x0(p, "--seed", "Newton seed (repeat for several)")
    _energy(p)
    p.add_argument("--section-normal", dest="section_normal", type=float, nargs="+")
    p.add_argument("--section-offset", dest="section_offset", type=float)
    p.add_argument("--section-direction", dest="section_direction", type=int, choices=(1, -1))
    p.add_argument("--max-newton", dest="max_newton", type=int)
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--unit-band", dest="unit_band", type=float)

    p = sub.add_parser("splitting", help="dominated / hyperbolic splitting checks")
    _common(p)
    _x0(p)
    p.add_argument("--generator", help="JSON file or inline JSON matrix of a linear cocycle")
    p.add_argument("--samples", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--check", choices=("domination", "hyperbolic", "partial"))
    p.add_argument("--i", type=int, help="dominated block")
    p.add_argument("--j", type=int, help="dominating block")
    p.add_argument("--ell", type=float, help="fixed scale (default: smallest grid scale)")
    p.add_argument("--ell-res", dest="ell_res", type=float)
    p.add_argument("--ell-max", dest="ell_max", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--slack", type=float)

    for name, hlp in (("shadow", "shadowing search for a pseudo-orbit"),
                      ("weakshadow", "weak (set-wise) shadowing search")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--pseudo", help="pseudo-orbit JSON document")
        p.add_argument("--eps", type=float)
        p.add_argument("--budget", type=int)
        p.add_argument("--per-segment", dest="per_segment", type=int)
        if name == "shadow":
            p.add_argument("--rep-eps", dest="rep_eps", type=float)
            p.add_argument("--radius", type=float)

    p = sub.add_parser("expansive", help="expansiveness probe")
    _common(p)
    _x0(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--eps", type=float, help="time tolerance for same-orbit witnesses")
    p.add_argument("--d0", type=float, help="probe offset")
    p.add_argument("--dt", type=float)

    p = sub.add_parser("spec", help="weak specification check for two arcs")
    _common(p)
    p.add_argument("--p1", type=float, nargs="+")
    p.add_argument("--p2", type=float, nargs="+")
    p.add_argument("--i1", type=float, nargs=2)
    p.add_argument("--i2", type=float, nargs=2)
    p.add_argument("--K", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("suspend", help="cat-map suspension flow")
    _common(p, system=False)
    p.add_argument("--height", type=float)
    p.add_argument("--state", type=float, nargs=3, metavar=("X", "Y", "R"))
    p.add_argument("--s", type=float, nargs="+")
    p.add_argument("--slab-times", dest="slab_times", type=int)

    p = sub.add_parser("selftest", help="run the embedded acceptance suite")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--only", type=int, nargs="+", help="criterion ids to run")
    p.add_argument("--break", dest="break_ids", type=int, nargs="+",
                   help="tighten these criteria so that they fail (debug)")
    return ap


def _fold_flags(cmd, args):
    """Translate flags that feed structured config values."""
    if cmd == "orbit" and any(getattr(args, k) is not None for k in
                              ("section_normal", "section_offset", "section_direction")):
        if args.section_normal is None:
            raise InputError("--section-normal is required with other section flags")
        args.section = {"normal": args.section_normal,
                        "offset": args.section_offset or 0.0,
                        "direction": args.section_direction or 1}
    if cmd == "splitting" and args.generator is not None:
        g = args.generator
        try:
            if os.path.exists(g):
                with open(g) as fh:
                    g = fh.read()
            args.generator = json.loads(g)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot parse generator: {exc}") from exc


def run(argv=None):
    """Parse ``argv``, run one subcommand and return its exit code."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    cmd = args.command
    try:
        out = output_dir(args)
        if cmd == "selftest":
            return cmd_selftest(args, out)
        _fold_flags(cmd, args)
        cfg = effective_config(cmd, args)
        cfg["_explicit"] = args.explicit
        verdict, result, tolerances, files = COMMANDS[cmd](cfg, out)
        cfg = {k: v for k, v in cfg.items() if not k.startswith("_")}
        report = {"format_version": FORMAT_VERSION, "command": cmd, "config": cfg,
                  "verdict": verdict, "result": result, "tolerances": tolerances,
                  "files": files}
        if cmd != "suspend":
            report["system"] = _system(cfg).to_document()
        path = os.path.join(out, f"{cmd}.json")
        write_json(path, report)
    except NumericalError as exc:
        print(f"hamshade {cmd}: numerical failure: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except (HamshadeError, OSError) as exc:
        print(f"hamshade {cmd}: error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    print(f"{cmd}: {verdict} -> {path}")
    return EXIT_OK if verdict in SUCCESS else EXIT_FAIL


def main():
    _sys.exit(run())


if __name__ == "__main__":
    main()

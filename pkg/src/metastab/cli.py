"""Command-line front end: model ingestion, analysis subcommands, and
deterministic CSV/JSON emission.

Quantum subcommands: spectrum, distances, changes, detect, project,
verify-bounds, heisenberg; each has a classical-* variant running the same
pipeline on a rate matrix with exact l1 norms. Exit codes: 0 success,
1 analysis-level failure (a bound row failed, no metastable window found
where one was required), 2 usage or input error.
"""
import argparse
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .classical import (ClassicalBackend, rate_matrix_from_edges,
                        rate_matrix_from_json)
from .heisenberg import observable_trajectory
from .models import ModelSpecifier, build_model
from .modes import change_thresholds
from .regimes import (QuantumBackend, TimeGrid, TrivialDynamicsError,
                      change_measure, classify_regime, scan_metastable,
                      timescales)
from .spectral_meta import (SeparationInconsistencyError, bound_battery,
                            detect_separation, spectral_projection_report)
from .superop import DefectiveLiouvillianError, QuantumModel


class UsageError(Exception):
    pass


def _parse_params(pairs):
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError("--param expects name=value, got %r" % item)
        name, value = item.split("=", 1)
        try:
            params[name] = float(value)
        except ValueError:
            raise UsageError("parameter %r is not a number: %r" % (name, value))
    return params


def _load_quantum_model(args):
    spec = args.model
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        ms = ModelSpecifier(name=name, params=_parse_params(args.param),
                            seed=args.seed)
        try:
            model = build_model(ms)
        except ValueError as err:
            raise UsageError(str(err))
        if not isinstance(model, QuantumModel):
            raise UsageError("model %r is classical; use the classical-* "
                             "subcommands" % name)
        return model, _model_payload(ms)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise UsageError("model file not found: %s" % path)
        except json.JSONDecodeError as err:
            raise UsageError("model file %s: invalid JSON at line %d column %d"
                             % (path, err.lineno, err.colno))
        if isinstance(data, dict) and "name" in data:
            # a named-model specifier rather than raw matrices
            ms = ModelSpecifier(name=data["name"],
                                params=data.get("params", {}),
                                seed=data.get("seed", args.seed))
            try:
                model = build_model(ms)
            except ValueError as err:
                raise UsageError("%s: %s" % (path, err))
            if not isinstance(model, QuantumModel):
                raise UsageError("%s: model is classical; use the classical-* "
                                 "subcommands" % path)
            return model, _model_payload(ms)
        return _quantum_model_from_json(data, path), data
    raise UsageError("--model must be builtin:<name> or file:<path>")


def _complex_array(entries, what, path):
    try:
        arr = np.asarray(entries, dtype=float)
    except (TypeError, ValueError):
        raise UsageError("%s: %s must be nested arrays of [re, im] pairs"
                         % (path, what))
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise UsageError("%s: %s must have shape [D][D][2]" % (path, what))
    return arr[..., 0] + 1j * arr[..., 1]


def _quantum_model_from_json(data, path):
    if not isinstance(data, dict) or "hamiltonian" not in data:
        raise UsageError("%s: quantum model JSON needs 'dim', 'hamiltonian' "
                         "and 'jumps'" % path)
    dim = int(data.get("dim", 0))
    H = _complex_array(data["hamiltonian"], "hamiltonian", path)
    if dim and H.shape[0] != dim:
        raise UsageError("%s: hamiltonian dimension %d does not match dim=%d"
                         % (path, H.shape[0], dim))
    jumps = tuple(_complex_array(J, "jump operator", path)
                  for J in data.get("jumps", []))
    try:
        return QuantumModel(hamiltonian=H, jumps=jumps)
    except ValueError as err:
        raise UsageError("%s: %s" % (path, err))


def _load_classical_generator(args):
    spec = args.model
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        ms = ModelSpecifier(name=name, params=_parse_params(args.param),
                            seed=args.seed)
        try:
            gen = build_model(ms)
        except ValueError as err:
            raise UsageError(str(err))
        if isinstance(gen, QuantumModel):
            raise UsageError("model %r is quantum; drop the classical- prefix"
                             % name)
        return gen, _model_payload(ms)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            with open(path) as fh:
                text = fh.read()
        except FileNotFoundError:
            raise UsageError("model file not found: %s" % path)
        try:
            if path.endswith(".json"):
                gen = rate_matrix_from_json(text)
            else:
                gen = rate_matrix_from_edges(text)
        except (ValueError, json.JSONDecodeError) as err:
            raise UsageError("model file %s: %s" % (path, err))
        return gen, {"rates": gen.rates.tolist()}
    raise UsageError("--model must be builtin:<name> or file:<path>")


def _model_payload(ms):
    return {"name": ms.name, "params": dict(sorted(ms.params.items())),
            "seed": ms.seed}


def _model_hash(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _grid_from_args(args):
    return TimeGrid(t_min=args.tmin, t_max=args.tmax, n_points=args.points,
                    spacing=args.spacing)


def _open_out(args):
    if args.out:
        return open(args.out, "w", newline="")
    return sys.stdout


def _emit_csv(fh, header_meta, columns, rows):
    fh.write("# %s\n" % header_meta)
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(row) + "\n")


def _meta_line(payload, seed):
    return "metastab %s model=%s seed=%s" % (__version__, _model_hash(payload),
                                             seed)


def _fmt(x):
    if x is None:
        return "nan"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.12g" % x


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _backend(args, model=None, generator=None):
    if generator is not None:
        return ClassicalBackend(generator)
    return QuantumBackend(model=model, seed=args.seed, threads=args.threads)


# ---------------------------------------------------------------------------
# subcommand implementations (shared by quantum and classical variants)

def _cmd_spectrum(args, dyn, payload):
    lam = dyn.eigenvalues()
    out = {
        "eigenvalues": [[float(v.real), float(v.imag)] for v in lam],
        "m_ss": int(dyn.m_ss),
        "model_hash": _model_hash(payload),
        "seed": args.seed,
    }
    if hasattr(dyn, "spectral"):
        out["eigvec_condition"] = dyn.spectral.eigvec_condition
    fh = _open_out(args)
    json.dump(out, fh, indent=2, default=_json_default)
    fh.write("\n")
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_distances(args, dyn, payload):
    ts = _grid_from_args(args).times()
    rows = [( _fmt(t), _fmt(dyn.distance_to_identity(float(t))),
              _fmt(dyn.distance_to_stationary(float(t))) ) for t in ts]
    fh = _open_out(args)
    _emit_csv(fh, _meta_line(payload, args.seed), ("t", "d_initial", "d_stationary"), rows)
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_changes(args, dyn, payload):
    ts = _grid_from_args(args).times()
    rows = []
    for t in ts:
        c, _ = change_measure(dyn, float(t), args.ratio * float(t))
        if c < 0.25:
            lo, hi = change_thresholds(c)
        else:
            lo = hi = math.nan
        rows.append((_fmt(t), _fmt(c), _fmt(lo), _fmt(hi)))
    fh = _open_out(args)
    _emit_csv(fh, _meta_line(payload, args.seed),
              ("t_start", "c_delta", "threshold_lower", "threshold_upper"), rows)
    if fh is not sys.stdout:
        fh.close()
    return 0


def _verdict_json(v):
    return {
        "t_start": v.t_start, "t_end": v.t_end, "verdict": v.verdict,
        "c_delta": v.c_delta, "c_delta_doubling": v.c_delta2,
        "argmax_t": v.argmax_t,
        "d_initial_at_start": v.d_initial_at_start,
        "d_stationary_at_end": v.d_stationary_at_end,
        "threshold_lower": v.threshold_lower,
        "threshold_upper": v.threshold_upper,
        "validity_flags": v.validity_flags,
    }


def _cmd_detect(args, dyn, payload):
    try:
        scales = timescales(dyn)
        hits = scan_metastable(dyn, c_delta_max=args.cdelta_max,
                               ratio=args.ratio, n_scan=args.scan_points,
                               threads=args.threads)
    except TrivialDynamicsError as err:
        raise UsageError("trivial dynamics: %s" % err)
    gen_norm = dyn.liouvillian_norm()
    if hits:
        from .regimes import CUTOFF_RELAXATION, relaxation_times

        best = min(hits, key=lambda v: (v.c_delta, v.t_start))
        if best.c_delta <= CUTOFF_RELAXATION:
            tau_dp, tau_p = relaxation_times(dyn, best.t_start, best.t_end,
                                             best.c_delta)
            scales = scales.with_relaxation(tau_dp, tau_p)
    windows = []
    for v in hits:
        entry = _verdict_json(v)
        entry["t_start_scaled"] = v.t_start * gen_norm
        entry["t_end_scaled"] = v.t_end * gen_norm
        windows.append(entry)
    out = {
        "model_hash": _model_hash(payload),
        "seed": args.seed,
        "liouvillian_norm": gen_norm,
        "timescales": {
            "tau_0": scales.tau_0, "tau_ss": scales.tau_ss,
            "tau_dprime": scales.tau_dprime, "tau_prime": scales.tau_prime,
            "tau_0_scaled": None if scales.tau_0 is None
            else scales.tau_0 * gen_norm,
            "tau_ss_scaled": None if scales.tau_ss is None
            else scales.tau_ss * gen_norm,
            "tau_0_residual": scales.tau_0_residual,
            "tau_ss_residual": scales.tau_ss_residual,
            "absent": scales.absent,
        },
        "metastable_windows": windows,
    }
    # restart spread of the generator-norm optimization: a heuristic
    # confidence indicator for the reported lower bounds (zero for exact
    # classical norms)
    res = dyn.norm_result(dyn.generator_matrix())
    out["norm_restart_dispersion"] = getattr(res, "restart_dispersion", 0.0)
    fh = _open_out(args)
    json.dump(out, fh, indent=2, default=_json_default)
    fh.write("\n")
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_project(args, dyn, payload):
    if args.window:
        t_start, t_end = args.window
    else:
        hits = scan_metastable(dyn, c_delta_max=args.cdelta_max,
                               ratio=args.ratio, n_scan=args.scan_points,
                               threads=args.threads)
        if not hits:
            print("no metastable window found; pass --window", file=sys.stderr)
            return 1
        best = min(hits, key=lambda v: (v.c_delta, v.t_start))
        t_start, t_end = best.t_start, best.t_end
    c, _ = change_measure(dyn, t_start, t_end)
    try:
        sep = detect_separation(dyn, t_start, t_end, c)
    except SeparationInconsistencyError as err:
        print("separation inconsistency: %s" % err, file=sys.stderr)
        return 1
    m = args.m if args.m is not None else sep.m
    report = spectral_projection_report(dyn, m, t_start, t_end)
    out = {
        "model_hash": _model_hash(payload), "seed": args.seed,
        "window": [t_start, t_end], "extended_end": report.extended_end,
        "m": report.m, "c_delta": report.c_delta,
        "c_delta_rebound": report.c_delta_rebound,
        "c_p": report.c_p, "p_norm": report.p_norm,
        "complement_norm": report.complement_norm,
        "projected_generator_norm": report.projected_generator_norm,
        "slow_drift_sup": report.slow_drift_sup,
        "fast_residual_sup": report.fast_residual_sup,
        "condition_checks": {k: {"value": v[0], "bound": v[1], "holds": v[2]}
                             for k, v in report.condition_checks.items()},
        "bound_slacks": report.bound_slacks(),
        "contradiction": report.contradiction,
        "separation": {
            "m": sep.m, "classification": list(sep.classification),
            "ratio_real": sep.ratio_real,
            "ratio_real_bound": sep.ratio_real_bound,
            "ratio_imag": sep.ratio_imag,
            "ratio_imag_bound": sep.ratio_imag_bound,
        },
        "curves": {
            "t": report.times, "proj_distance": report.proj_distance,
            "slow_drift": report.slow_drift,
            "fast_residual": report.fast_residual,
        },
    }
    fh = _open_out(args)
    json.dump(out, fh, indent=2, default=_json_default)
    fh.write("\n")
    if fh is not sys.stdout:
        fh.close()
    return 0


def _cmd_verify_bounds(args, dyn, payload):
    grid = _grid_from_args(args).times() if args.tmin is not None else None
    try:
        report = bound_battery(dyn, grid=grid, tol=args.tol, seed=args.seed,
                               threads=args.threads)
    except TrivialDynamicsError as err:
        raise UsageError("trivial dynamics: %s" % err)
    fh = _open_out(args)
    if args.format == "json":
        ctx = {k: v for k, v in report.context.items() if k != "projection"}
        json.dump({
            "model_hash": _model_hash(payload), "seed": args.seed,
            "tol": report.tol, "all_pass": report.all_pass,
            "failed_ids": report.failed_ids(),
            "context": ctx,
            "rows": [{"id": r.id, "t": r.t, "lhs": r.lhs, "rhs": r.rhs,
                      "slack": r.slack, "pass": r.passed(report.tol),
                      "applicable": r.applicable, "note": r.note}
                     for r in report.rows],
        }, fh, indent=2, default=_json_default)
        fh.write("\n")
    else:
        rows = report.csv_rows()
        columns = next(rows)
        _emit_csv(fh, _meta_line(payload, args.seed), columns, rows)
    if fh is not sys.stdout:
        fh.close()
    if not report.all_pass:
        print("FAILED bounds: %s" % ", ".join(report.failed_ids()),
              file=sys.stderr)
        return 1
    return 0


def _cmd_heisenberg(args, dyn, payload):
    ts = _grid_from_args(args).times()
    if hasattr(dyn, "spectral"):
        spec = dyn.spectral
        dim = spec.dim
        if args.observable == "basis":
            obs = np.zeros((dim, dim), dtype=complex)
            obs[0, 0] = 1.0
        else:
            from .models import SPIN_X, SPIN_Y, SPIN_Z

            named = {"sx": SPIN_X, "sy": SPIN_Y, "sz": SPIN_Z}
            if args.observable not in named or dim != 2:
                raise UsageError("observable %r needs a two-level model"
                                 % args.observable)
            obs = named[args.observable]
        traj = observable_trajectory(spec, obs, ts)
        columns = ["t", "distance_to_asymptotic"]
        columns += ["re_%d_%d" % (i, j) for i in range(dim) for j in range(dim)]
        rows = []
        from .operators import max_norm

        for t, O in zip(traj.times, traj.values):
            cells = [_fmt(t), _fmt(max_norm(O - traj.asymptotic))]
            cells += [_fmt(O[i, j].real) for i in range(dim) for j in range(dim)]
            rows.append(tuple(cells))
    else:
        n = dyn.dim
        f = np.zeros(n)
        f[0] = 1.0
        columns = ["t", "distance_to_asymptotic"]
        columns += ["f_%d" % i for i in range(n)]
        P = dyn.stationary_matrix()
        f_ss = P.T @ f
        rows = []
        for t in ts:
            ft = dyn.evolution_matrix(float(t)).T @ f
            cells = [_fmt(t), _fmt(float(np.max(np.abs(ft - f_ss))))]
            cells += [_fmt(v) for v in ft]
            rows.append(tuple(cells))
    fh = _open_out(args)
    _emit_csv(fh, _meta_line(payload, args.seed), columns, rows)
    if fh is not sys.stdout:
        fh.close()
    return 0


# ---------------------------------------------------------------------------

def _add_common(p, grid_required=True, tmin=1e-3, tmax=1e3):
    p.add_argument("--model", required=True,
                   help="builtin:<name> or file:<path>")
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="model parameter (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (0 = auto)")
    p.add_argument("--out", help="output file (default stdout)")
    if grid_required:
        p.add_argument("--tmin", type=float, default=tmin)
        p.add_argument("--tmax", type=float, default=tmax)
        p.add_argument("--points", type=int, default=50)
        p.add_argument("--spacing", choices=("log", "linear"), default="log")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metastab",
        description="Metastability analysis of Markovian open quantum systems "
                    "and classical Markov chains")
    parser.add_argument("--version", action="version",
                        version="metastab " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    specs = {}

    def register(name, fn, grid=True, extra=None):
        for variant, classical in ((name, False), ("classical-" + name, True)):
            p = sub.add_parser(variant)
            _add_common(p, grid_required=grid)
            if extra:
                extra(p)
            specs[variant] = (fn, classical)
    register("spectrum", _cmd_spectrum, grid=False)
    register("distances", _cmd_distances)

    def changes_extra(p):
        p.add_argument("--ratio", type=float, default=2.0)
    register("changes", _cmd_changes, extra=changes_extra)

    def detect_extra(p):
        p.add_argument("--cdelta-max", type=float, default=0.1,
                       dest="cdelta_max")
        p.add_argument("--ratio", type=float, default=2.0)
        p.add_argument("--scan-points", type=int, default=24,
                       dest="scan_points")
    register("detect", _cmd_detect, grid=False, extra=detect_extra)

    def project_extra(p):
        p.add_argument("--window", type=float, nargs=2, metavar=("T1", "T2"))
        p.add_argument("--m", type=int)
        p.add_argument("--cdelta-max", type=float, default=0.1,
                       dest="cdelta_max")
        p.add_argument("--ratio", type=float, default=2.0)
        p.add_argument("--scan-points", type=int, default=24,
                       dest="scan_points")
    register("project", _cmd_project, grid=False, extra=project_extra)

    def verify_extra(p):
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--tmin", type=float, default=None)
        p.add_argument("--tmax", type=float, default=None)
        p.add_argument("--points", type=int, default=33)
        p.add_argument("--spacing", choices=("log", "linear"), default="log")
    register("verify-bounds", _cmd_verify_bounds, grid=False,
             extra=verify_extra)

    def heisenberg_extra(p):
        p.add_argument("--observable", default="sz",
                       help="sz, sx, sy (two-level models) or basis")
    register("heisenberg", _cmd_heisenberg, extra=heisenberg_extra)

    parser._command_specs = specs
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors already; propagate its code
        raise
    fn, classical = parser._command_specs[args.command]
    if "METASTAB_SEED" in os.environ:
        try:
            args.seed = int(os.environ["METASTAB_SEED"])
        except ValueError:
            print("METASTAB_SEED must be an integer", file=sys.stderr)
            return 2
    if args.threads == 0:
        args.threads = os.cpu_count() or 1
    try:
        if classical:
            generator, payload = _load_classical_generator(args)
            dyn = _backend(args, generator=generator)
        else:
            model, payload = _load_quantum_model(args)
            dyn = _backend(args, model=model)
        return fn(args, dyn, payload)
    except UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except DefectiveLiouvillianError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except ValueError as err:
        # invalid windows, cuts, or parameter domains reached an operation
        print("error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""``lrpr`` command line: JSON config in, JSON/CSV/SVG artifacts out.

Exit codes: 0 success, 1 usage or input error, 2 numeric failure
(non-convergence, infeasibility, failed oracle check).
"""

import argparse
import hashlib
import os
import sys

import numpy as np

from . import __version__
from .anchor import (
    anchor_col_from_row,
    anchor_naive_vectorized,
    anchor_oracle,
    anchor_quality,
    anchor_rank1,
    Anchor,
    AnchorMethod,
)
from .bench import (
    Pipeline,
    PhaseGridSpec,
    emit_heatmap_svg,
    fit_transition_curve,
    classification_accuracy,
    rows_to_csv,
    run_init_accuracy,
    run_noise_sweep,
    run_phase_transition,
)
from .deconv import (
    DECONV_LAMBDA,
    forward_conv_magnitudes,
    random_subspace_model,
    recover_signals,
    signal_to_json,
)
from .metrics import relative_phase_dist, vec_sin_angle
from .model import (
    Ensemble,
    EnsembleKind,
    Observations,
    make_noise,
    measure,
    noise_budget,
    sample_gaussian_iid,
    sample_rank1_complex,
)
from .oracle import run_battery
from .rng import RngSpec, complex_normal
from .serialize import decode_array, encode_array, manifest, read_json, write_json
from .solver import DEFAULT_LAMBDA, Mode, SolverConfig, Status, solve

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
CONFIG_VERSION = 1


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


_REQ = object()

# field -> (type or tuple of types, default); _REQ marks required fields
_COMMON = {"config_version": (int, _REQ), "seed": (int, _REQ)}
_SOLVER = {
    "lambda": ((int, float), None),
    "mode": (str, None),
    "eps": ((int, float), 0.0),
    "max_iter": (int, 20000),
    "tol_rel_change": ((int, float), 1e-7),
    "tol_feas": ((int, float), 1e-8),
}
SCHEMAS = {
    "simulate": {
        "kind": (str, "RankOneComplex"), "d1": (int, _REQ), "d2": (int, _REQ),
        "M": (int, _REQ), "rank": (int, 1), "noise": (dict, None),
    },
    "anchor": {
        "ensemble": (str, "ensemble.json"), "observations": (str, "obs.json"),
        "method": (str, "rank1"), "rank": (int, None),
    },
    "solve": {
        "ensemble": (str, "ensemble.json"), "observations": (str, "obs.json"),
        "anchor": (str, "anchor.json"), **_SOLVER,
    },
    "deconv": {
        "M": (int, _REQ), "d1": (int, _REQ), "d2": (int, _REQ), "noise": (dict, None),
        **_SOLVER,
    },
    "bench-pt": {
        "M_values": (list, _REQ), "d_values": (list, _REQ), "trials": (int, _REQ),
        "success_tol": ((int, float), 1e-4), "pipeline": (str, "OracleAnchor"),
        "lambda": ((int, float), None), "max_iter": (int, 5000), "timing": (bool, False),
    },
    "noise-sweep": {
        "d": (int, _REQ), "M": (int, _REQ), "levels": (list, _REQ), "trials": (int, _REQ),
        "lambda": ((int, float), 0.7), "pipeline": (str, "OracleAnchor"),
        "max_iter": (int, 20000),
    },
    "init-sweep": {"d": (int, _REQ), "M_values": (list, _REQ), "trials": (int, _REQ)},
    "verify-moments": {"instances": (int, 100)},
}
_NOISE = {"kind": (str, "zero"), "level": ((int, float), 0.0), "low": ((int, float), None),
          "high": ((int, float), None)}


def _check_fields(doc, schema, where):
    if not isinstance(doc, dict):
        raise UsageError(f"{where}: expected a JSON object")
    for key in doc:
        if key not in schema:
            raise UsageError(f"{where}: unknown field '{key}'")
    out = {}
    for key, (typ, default) in schema.items():
        if key not in doc:
            if default is _REQ:
                raise UsageError(f"{where}: missing required field '{key}'")
            out[key] = default
            continue
        val = doc[key]
        bad_bool = isinstance(val, bool) and typ is not bool
        if val is not None and (bad_bool or not isinstance(val, typ)):
            raise UsageError(f"{where}: field '{key}' has wrong type")
        out[key] = val
    return out


def validate_config(command, doc):
    cfg = _check_fields(doc, {**_COMMON, **SCHEMAS[command]}, "config")
    if cfg["config_version"] != CONFIG_VERSION:
        raise UsageError(f"config: field 'config_version' must be {CONFIG_VERSION}")
    if cfg["seed"] < 0:
        raise UsageError("config: field 'seed' must be nonnegative")
    for key in ("d1", "d2", "M", "d", "trials", "rank", "max_iter", "instances"):
        if cfg.get(key) is not None and cfg[key] < 1:
            raise UsageError(f"config: field '{key}' must be >= 1")
    for key in ("M_values", "d_values", "levels"):
        if key in cfg:
            vals = cfg[key]
            num = (int,) if key != "levels" else (int, float)
            if not vals or not all(isinstance(v, num) and not isinstance(v, bool) for v in vals):
                raise UsageError(f"config: field '{key}' must be a nonempty list of numbers")
            if min(vals) < (0 if key == "levels" else 1):
                raise UsageError(f"config: field '{key}' has out-of-range entries")
    if cfg.get("noise") is not None:
        cfg["noise"] = _check_fields(cfg["noise"], _NOISE, "config.noise")
    for key in ("lambda", "eps"):
        if cfg.get(key) is not None and cfg[key] < 0:
            raise UsageError(f"config: field '{key}' must be nonnegative")
    return cfg


def _manifest(raw, cfg):
    return manifest(raw, cfg["seed"])


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def _load(base, path, loader, what):
    full = _resolve(base, path)
    if not os.path.exists(full):
        raise UsageError(f"{what} file not found: {path}")
    try:
        return loader(read_json(full))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{what} file {path} is invalid: {exc}") from exc


def _random_target(gen, d1, d2, r, complex_):
    def draw(shape):
        return complex_normal(gen, shape) if complex_ else gen.standard_normal(shape)

    X = draw((d1, r)) @ np.conj(draw((d2, r))).T
    return X / np.linalg.norm(X)


def _noise(cfg, M, spec):
    n = cfg.get("noise") or _check_fields({}, _NOISE, "config.noise")
    try:
        return make_noise(n["kind"], M, spec, n["level"], n["low"], n["high"])
    except ValueError as exc:
        raise UsageError(f"config.noise: {exc}") from exc


def cmd_simulate(cfg, raw, base, out):
    spec = RngSpec(cfg["seed"])
    try:
        kind = EnsembleKind(cfg["kind"])
    except ValueError:
        raise UsageError(f"config: field 'kind' must be one of "
                         f"{[k.value for k in EnsembleKind if k is not EnsembleKind.STRUCTURED]}")
    if kind is EnsembleKind.STRUCTURED:
        raise UsageError("config: field 'kind': use the deconv command for structured ensembles")
    d1, d2, M, r = cfg["d1"], cfg["d2"], cfg["M"], cfg["rank"]
    if r > min(d1, d2):
        raise UsageError("config: field 'rank' exceeds min(d1, d2)")
    sampler = sample_rank1_complex if kind is EnsembleKind.RANK_ONE_COMPLEX else sample_gaussian_iid
    ens = sampler(d1, d2, M, spec.derive("ensemble"))
    X = _random_target(spec.derive("signal").generator(), d1, d2, r, not ens.is_real)
    obs = measure(ens, X, _noise(cfg, M, spec))
    man = _manifest(raw, cfg)
    write_json(os.path.join(out, "ensemble.json"), {"manifest": man, **ens.to_dict()})
    write_json(os.path.join(out, "obs.json"),
               {"manifest": man, **obs.to_dict(), "truth": encode_array(X)})
    return EXIT_OK, f"wrote ensemble.json and obs.json (M={M}, d1={d1}, d2={d2})"


def _load_inputs(cfg, base):
    ens = _load(base, cfg["ensemble"], Ensemble.from_dict, "ensemble")
    doc = read_json(_resolve(base, cfg["observations"])) if os.path.exists(
        _resolve(base, cfg["observations"])) else None
    if doc is None:
        raise UsageError(f"observations file not found: {cfg['observations']}")
    try:
        obs = Observations.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"observations file is invalid: {exc}") from exc
    truth = decode_array(doc["truth"]) if "truth" in doc else None
    if obs.M != ens.M:
        raise UsageError(f"observations have M={obs.M}, ensemble has M={ens.M}")
    return ens, obs, truth


def cmd_anchor(cfg, raw, base, out):
    ens, obs, truth = _load_inputs(cfg, base)
    method = cfg["method"]
    r = cfg["rank"] or (1 if truth is None else int(np.linalg.matrix_rank(truth, tol=1e-10)))
    try:
        if method == "rank1":
            if not ens.kind.is_rank_one:
                raise UsageError(f"method 'rank1' needs a rank-one ensemble, got {ens.kind.value}")
            anchor = anchor_rank1(ens, obs.y)
        elif method == "naive":
            anchor = anchor_naive_vectorized(ens, obs.y, r)
        elif method == "row_to_col":
            Vhat = anchor_naive_vectorized(ens, obs.y, r).V0
            anchor = Anchor(anchor_col_from_row(ens, obs.y, Vhat), Vhat, AnchorMethod.ROW_TO_COL)
        elif method == "oracle":
            if truth is None:
                raise UsageError("method 'oracle' needs ground truth in the observations file")
            anchor = anchor_oracle(truth)
        else:
            raise UsageError("config: field 'method' must be one of rank1, naive, row_to_col, oracle")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"manifest": _manifest(raw, cfg), **anchor.to_dict()}
    msg = f"anchor method {anchor.method.value}, rank {anchor.rank}"
    if truth is not None:
        doc["delta"] = anchor_quality(anchor, truth)
        msg += f", delta={doc['delta']:.4g}"
    write_json(os.path.join(out, "anchor.json"), doc)
    return EXIT_OK, msg


def _solver_config(cfg, obs=None, default_mode=None, default_lam=DEFAULT_LAMBDA):
    mode = cfg["mode"] or default_mode or Mode.DISK_PROJECTION.value
    try:
        mode = Mode(mode)
    except ValueError:
        raise UsageError(f"config: field 'mode' must be one of {[m.value for m in Mode]}")
    eta = 0.0
    if mode is Mode.HINGE_BALL:
        xi = obs.xi if obs is not None and obs.xi is not None else np.zeros(1)
        eta = noise_budget(xi, cfg["eps"])
    lam = default_lam if cfg["lambda"] is None else float(cfg["lambda"])
    try:
        return SolverConfig(lam=lam, eta=eta, mode=mode, max_iter=cfg["max_iter"],
                            tol_rel_change=cfg["tol_rel_change"], tol_feas=cfg["tol_feas"],
                            seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from exc


def _status_exit(status):
    return EXIT_OK if status is Status.CONVERGED else EXIT_NUMERIC


def cmd_solve(cfg, raw, base, out):
    ens, obs, truth = _load_inputs(cfg, base)
    anchor = _load(base, cfg["anchor"], Anchor.from_dict, "anchor")
    if anchor.shape != (ens.d1, ens.d2):
        raise UsageError(f"anchor shape {anchor.shape} does not match ensemble {ens.shape}")
    has_noise = obs.xi is not None and np.any(obs.xi)
    scfg = _solver_config(cfg, obs, Mode.HINGE_BALL.value if has_noise else None)
    try:
        rep = solve(ens, obs, anchor, scfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"manifest": _manifest(raw, cfg), "config": scfg.to_dict(), **rep.to_dict()}
    msg = f"status {rep.status.value} after {rep.iterations} iterations"
    if truth is not None:
        doc["relative_error"] = relative_phase_dist(rep.Xhat, truth)
        msg += f", relative error {doc['relative_error']:.3g}"
    write_json(os.path.join(out, "solve.json"), doc)
    return _status_exit(rep.status), msg


def cmd_deconv(cfg, raw, base, out):
    spec = RngSpec(cfg["seed"])
    M, d1, d2 = cfg["M"], cfg["d1"], cfg["d2"]
    sm = random_subspace_model(M, d1, d2, spec.derive("subspaces"))
    gen = spec.derive("signal").generator()
    u = complex_normal(gen, (d1,))
    v = complex_normal(gen, (d2,))
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    # the raw Fourier magnitudes carry a factor M relative to the lifted model
    y = forward_conv_magnitudes(sm, u, v) / M
    xi = _noise(cfg, M, spec)
    obs = Observations(y + xi, xi, y)
    scfg = _solver_config(cfg, obs, Mode.HINGE_BALL.value if np.any(xi) else None,
                          DECONV_LAMBDA)
    uh, vh, sigma, rep = recover_signals(sm, obs, scfg)
    doc = {
        "manifest": _manifest(raw, cfg),
        "status": rep.status.value,
        "iterations": rep.iterations,
        "u_true": signal_to_json(u),
        "v_true": signal_to_json(v),
        "u": None if uh is None else signal_to_json(uh),
        "v": None if vh is None else signal_to_json(vh),
        "sigma": sigma,
        "sin_u": None if uh is None else vec_sin_angle(uh, u),
        "sin_v": None if vh is None else vec_sin_angle(vh, v),
    }
    write_json(os.path.join(out, "deconv.json"), doc)
    msg = f"status {rep.status.value}"
    if uh is not None:
        msg += f", sin(u)={doc['sin_u']:.3g}, sin(v)={doc['sin_v']:.3g}"
    return _status_exit(rep.status), msg


def _sha(text):
    return hashlib.sha256(text.encode()).hexdigest()


def cmd_bench_pt(cfg, raw, base, out, workers=1, log=None):
    try:
        spec = PhaseGridSpec(cfg["M_values"], cfg["d_values"], cfg["trials"], cfg["success_tol"],
                             Pipeline(cfg["pipeline"]), cfg["seed"], cfg["lambda"],
                             cfg["max_iter"])
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from exc
    progress = None
    if log:
        def progress(M, d, s, t):
            log(f"M={M} d={d}: {s}/{t}")
    result = run_phase_transition(spec, workers=workers, progress=progress)
    try:
        c, alpha = fit_transition_curve(result)
        curve = {"c": c, "alpha": alpha, "log": "natural",
                 "accuracy": classification_accuracy(result, c, alpha)}
    except ValueError as exc:
        curve = {"error": str(exc)}
    csv_text = result.to_csv(include_timing=cfg["timing"])
    with open(os.path.join(out, "grid.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text)
    emit_heatmap_svg(result, os.path.join(out, "grid.svg"),
                     (curve["c"], curve["alpha"]) if "c" in curve else None)
    write_json(os.path.join(out, "grid.json"), {
        "manifest": _manifest(raw, cfg),
        "spec": spec.to_dict(),
        "effective_lambda": spec.effective_lambda,
        "fit": curve,
        "statuses": result.meta["statuses"],
        "csv_sha256": _sha(csv_text),
    })
    return EXIT_OK, f"wrote grid.csv, grid.svg, grid.json; fit {curve}"


def _write_table(out, stem, raw, cfg, rows, extra=None):
    csv_text = rows_to_csv(rows)
    with open(os.path.join(out, f"{stem}.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text)
    write_json(os.path.join(out, f"{stem}.json"), {
        "manifest": _manifest(raw, cfg), "rows": rows, "csv_sha256": _sha(csv_text),
        **(extra or {}),
    })


def cmd_noise_sweep(cfg, raw, base, out):
    try:
        pipeline = Pipeline(cfg["pipeline"])
    except ValueError:
        raise UsageError("config: field 'pipeline' must be OracleAnchor or DataAnchor")
    rows = run_noise_sweep(cfg["d"], cfg["M"], cfg["levels"], cfg["trials"], cfg["seed"],
                           lam=float(cfg["lambda"]), pipeline=pipeline,
                           max_iter=cfg["max_iter"])
    _write_table(out, "noise", raw, cfg, rows)
    return EXIT_OK, "wrote noise.csv and noise.json"


def cmd_init_sweep(cfg, raw, base, out):
    rows = run_init_accuracy(cfg["d"], cfg["M_values"], cfg["trials"], cfg["seed"])
    _write_table(out, "init", raw, cfg, rows)
    return EXIT_OK, "wrote init.csv and init.json"


def cmd_verify_moments(cfg, raw, base, out):
    ok, reports = run_battery(cfg["seed"], cfg["instances"])
    write_json(os.path.join(out, "moments.json"),
               {"manifest": _manifest(raw, cfg), "passed": ok, "checks": reports})
    lines = [f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}" for r in reports]
    return (EXIT_OK if ok else EXIT_NUMERIC), "\n".join(lines)


COMMANDS = {
    "simulate": cmd_simulate,
    "anchor": cmd_anchor,
    "solve": cmd_solve,
    "deconv": cmd_deconv,
    "bench-pt": cmd_bench_pt,
    "noise-sweep": cmd_noise_sweep,
    "init-sweep": cmd_init_sweep,
    "verify-moments": cmd_verify_moments,
}


def build_parser():
    p = argparse.ArgumentParser(prog="lrpr", description="Low-rank phase retrieval toolkit.")
    p.add_argument("--version", action="version", version=f"lrpr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="worker processes (bench-pt)")
        sp.add_argument("--quiet", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    def log(msg):
        if not args.quiet:
            print(msg, file=sys.stderr)

    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        try:
            raw = read_json(args.config)
        except ValueError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        cfg = validate_config(args.command, raw)
        os.makedirs(args.out, exist_ok=True)
        base = os.path.dirname(os.path.abspath(args.config))
        fn = COMMANDS[args.command]
        if fn is cmd_bench_pt:
            code, msg = fn(cfg, raw, base, args.out, workers=args.workers, log=log)
        else:
            code, msg = fn(cfg, raw, base, args.out)
    except UsageError as exc:
        print(f"lrpr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError, NumericFailure) as exc:
        print(f"lrpr {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log(msg)
    return code


if __name__ == "__main__":
    sys.exit(main())

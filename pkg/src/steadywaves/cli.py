"""Batch front-end: laminar / solve / transform / verify / report.

All numeric output uses 17 significant digits so files round-trip doubles
exactly; JSON keys are sorted and iteration order is fixed, making runs
byte-identical for identical configs (the manifest's timestamp field is the
single exception).

Exit codes: 0 success, 2 validation error, 3 non-convergence,
4 verification-threshold failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, ConfigError
from .grid import Grid, AlignmentError
from .field import HeightField
from . import laminar as laminar_mod
from . import solver as solver_mod
from . import transform as transform_mod
from . import weakform as wf


def _fmt(x):
    return f"{float(x):.17g}"


def write_csv(path, header, columns):
    cols = [np.asarray(c).ravel() for c in columns]
    n = len(cols[0])
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def write_manifest(outdir, cfg: RunConfig, command):
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(cfg.raw_text.encode()).hexdigest(),
        "grid": {"Nq": cfg.Nq, "Np": cfg.Np},
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    write_json(Path(outdir) / "manifest.json", manifest)


def make_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.Nq, cfg.Np, aligned_jumps=cfg.vorticity.breakpoints)


def write_field(outdir, hf: HeightField, summary):
    g = hf.grid
    qq = np.repeat(g.q, g.Np + 1)
    pp = np.tile(g.p, g.Nq)
    write_csv(Path(outdir) / "field.csv", ["q", "p", "h"],
              [qq, pp, hf.h.ravel()])
    write_json(Path(outdir) / "field.json", summary)


class SchemaError(ValueError):
    """Field file does not match the configured grid."""


def read_field(path, cfg: RunConfig) -> HeightField:
    header, data = read_csv(path)
    if header != ["q", "p", "h"]:
        raise SchemaError(f"{path}: expected columns q,p,h, got {header}")
    g = make_grid(cfg)
    n_expected = g.Nq * (g.Np + 1)
    if data.shape[0] != n_expected:
        raise SchemaError(f"{path}: {data.shape[0]} rows, grid needs "
                          f"{n_expected}; stale field file?")
    h = data[:, 2].reshape(g.Nq, g.Np + 1)
    qq = data[:, 0].reshape(g.Nq, g.Np + 1)[:, 0]
    if np.max(np.abs(qq - g.q)) > 1e-12:
        raise SchemaError(f"{path}: q-grid mismatch with config")
    side = Path(path).with_suffix(".json")
    if not side.exists():
        side = Path(path).parent / "field.json"
    if not side.exists():
        raise SchemaError(f"missing field summary JSON next to {path}")
    Q = json.loads(side.read_text())["Q"]
    return HeightField(g, h, Q=Q)


def _say(args, msg):
    if not args.quiet:
        print(msg)


# -- subcommands -----------------------------------------------------------------


def run_laminar(cfg: RunConfig, outdir, args):
    g = make_grid(cfg)
    lf = laminar_mod.solve(cfg.vorticity, cfg.params, g.p)
    write_csv(Path(outdir) / "laminar.csv", ["p", "h", "h_p"],
              [lf.p, lf.h, lf.h_p])
    write_json(Path(outdir) / "laminar.json", {"Q": lf.Q, "lambda": lf.lam})
    write_manifest(outdir, cfg, "laminar")
    _say(args, f"laminar: lambda = {lf.lam:.12g}, Q = {lf.Q:.12g}")
    return 0


def run_solve(cfg: RunConfig, outdir, args):
    g = make_grid(cfg)
    if cfg.mode == "fixed_Q":
        hf0 = HeightField(g, np.zeros((g.Nq, g.Np + 1)), Q=cfg.Q)
        result = solver_mod.newton_solve(hf0, cfg.vorticity, cfg.params,
                                         mode="fixed_Q", Q=cfg.Q,
                                         tol=cfg.tol, max_iter=cfg.max_iter)
        hf, iters, res_inf = result.field, result.iterations, result.residual_inf
    else:
        lf = laminar_mod.solve(cfg.vorticity, cfg.params, g.p)
        hf0 = HeightField(g, np.tile(lf.h, (g.Nq, 1)), Q=lf.Q)
        cont = solver_mod.continuation(hf0, cfg.vorticity, cfg.params,
                                       cfg.amplitude_schedule, tol=cfg.tol,
                                       max_iter=cfg.max_iter)
        if not cont.converged:
            _say(args, f"solve: continuation failed at amplitude "
                       f"{cont.failed_amplitude}: {cont.message}")
            if cont.fields:
                last = cont.fields[-1]
                write_field(outdir, last, _solve_summary(
                    last, cfg, iterations=-1, residual_inf=float("nan")))
            write_manifest(outdir, cfg, "solve")
            return 3
        hf = cont.fields[-1]
        interior, surface = solver_mod.residual(hf, cfg.vorticity, cfg.params)
        res_inf = max(np.max(np.abs(interior)), np.max(np.abs(surface)))
        iters = len(cont.fields)
    write_field(outdir, hf, _solve_summary(hf, cfg, iters, res_inf))
    write_manifest(outdir, cfg, "solve")
    _say(args, f"solve: Q = {hf.Q:.12g}, residual_inf = {res_inf:.3e}")
    return 0


def _solve_summary(hf: HeightField, cfg: RunConfig, iterations, residual_inf):
    return {
        "Q": hf.Q,
        "amplitude": hf.amplitude(cfg.params.d),
        "residual_inf": residual_inf,
        "iterations": iterations,
        "min_one_plus_hp": hf.min_one_plus_hp(),
    }


def run_transform(cfg: RunConfig, outdir, args, field_path):
    hf = read_field(field_path, cfg)
    fields = transform_mod.reconstruct_fields(hf, cfg.vorticity, cfg.params)
    g = hf.grid
    xx = np.repeat(fields.x, g.Np + 1)
    write_csv(Path(outdir) / "fields.csv", ["x", "y", "psi", "u", "v", "P"],
              [xx, fields.y.ravel(), fields.psi.ravel(), fields.u.ravel(),
               fields.v.ravel(), fields.P.ravel()])
    write_csv(Path(outdir) / "eta.csv", ["x", "eta"], [fields.x, fields.eta])
    summ = transform_mod.summary(fields, cfg.vorticity, cfg.params)
    write_json(Path(outdir) / "transform.json", summ)
    write_manifest(outdir, cfg, "transform")
    _say(args, f"transform: max(u-c) = {summ['max_u_minus_c']:.3e}, "
               f"collapse = {summ['bernoulli_collapse_err']:.3e}")
    return 0


def _lattice(cfg: RunConfig):
    return wf.default_lattice(cfg.n_q_centers, cfg.radii, cfg.p_centers)


def run_verify(cfg: RunConfig, outdir, args, field_path):
    hf = read_field(field_path, cfg)
    tfs = _lattice(cfg)
    if not tfs:
        raise ConfigError("empty test-function lattice")
    v, params = cfg.vorticity, cfg.params
    fields = transform_mod.reconstruct_fields(hf, v, params)
    g = hf.grid

    reports = []
    rows = []  # flat CSV rows: formulation, q0, pc, level, value, normalizer

    # quadrature: q is refined to resolve the bump sums (the field's trig
    # interpolant is exact, so extra q-nodes cost nothing in accuracy);
    # p stays on field-node multiples, where the sampled field is exact
    nq_base = g.Nq * max(1, -(-256 // g.Nq))
    npp_base = g.Np

    def run_formulation(name, fn):
        rep = wf.PairingReport(formulation=name)
        for lvl in cfg.levels:
            nq, npp = nq_base * lvl, npp_base * lvl
            vals = []
            for tf in tfs:
                val = fn(tf, nq, npp)
                norm = wf.norm_grad_rect(tf)
                vals.append(abs(val) / max(norm, 1e-300))
                if lvl == cfg.levels[0]:
                    rep.per_testfn.append({
                        "center": list(tf.center), "radii": list(tf.radii),
                        "value": val, "normalizer": norm})
                rows.append([name, tf.center[0], tf.center[1], lvl, val, norm])
            rep.refinement.append({"level": lvl, "max_abs": max(vals)})
        if len(rep.refinement) >= 2 and rep.refinement[-1]["max_abs"] > 0:
            l0, l1 = rep.refinement[0], rep.refinement[-1]
            rep.fitted_rates["refinement_order"] = float(
                np.log(l0["max_abs"] / l1["max_abs"])
                / np.log(l1["level"] / l0["level"]))
        reports.append(rep)
        return rep

    run_formulation(
        "height", lambda tf, nq, npp: wf.pair_height(hf, v, params, tf,
                                                     nq=nq, npp=npp))
    run_formulation(
        "stream", lambda tf, nq, npp: wf.pair_stream(
            fields, v, params, wf.pushforward_testfn(tf, hf, params),
            nq=nq, npp=npp))
    for i, name in enumerate(("euler_R1", "euler_R2", "euler_R3")):
        run_formulation(
            name, lambda tf, nq, npp, i=i: wf.pair_euler(
                fields, params, wf.pushforward_testfn(tf, hf, params),
                nq=nq, npp=npp, v=v)[i])

    cross = []
    for tf in tfs:
        lhs, rhs, gap = wf.cross_identity(hf, v, params, tf,
                                          nq=nq_base, npp=npp_base)
        cross.append({"center": list(tf.center), "lhs": lhs, "rhs": rhs,
                      "gap": gap})
    surf = wf.surface_identity(hf, params)
    out = {
        "pairings": [r.to_dict() for r in reports],
        "cross_identity": cross,
        "surface_identity": surf,
    }
    if cfg.eps_list:
        out["mollification"] = wf.mollification_rate(fields, params,
                                                     cfg.eps_list)
    write_json(Path(outdir) / "verify.json", out)
    lines = ["formulation,q_center,p_center,level,value,normalizer"]
    for name, q0, pc, lvl, val, norm in rows:
        lines.append(f"{name},{_fmt(q0)},{_fmt(pc)},{lvl},{_fmt(val)},"
                     f"{_fmt(norm)}")
    (Path(outdir) / "verify.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
    write_manifest(outdir, cfg, "verify")

    failed = False
    for rep in reports:
        mx = rep.max_normalized()
        verdict = "PASS" if mx <= cfg.pairing_tol else "FAIL"
        failed |= verdict == "FAIL"
        _say(args, f"verify {rep.formulation:9s}: max normalized pairing "
                   f"{mx:.3e} {verdict}")
    _say(args, f"verify surface  : identity gap {surf['identity_gap_rel']:.3e}, "
               f"|lhs-Q| {surf['surface_residual']:.3e}")
    return 4 if failed else 0


def run_report(outdir, args):
    rows = []
    for name in ("laminar", "field", "transform", "verify"):
        p = Path(outdir) / f"{name}.json"
        if p.exists():
            data = json.loads(p.read_text())
            flat = _flatten(data, name)
            rows.extend(flat)
    if not rows:
        _say(args, "report: no JSON summaries found")
        return 0
    lines = ["key,value"]
    for k, val in rows:
        lines.append(f"{k},{val}")
    (Path(outdir) / "report.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
    width = max(len(k) for k, _ in rows)
    for k, val in rows:
        _say(args, f"{k:<{width}}  {val}")
    return 0


def _flatten(obj, prefix):
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            out.extend(_flatten(obj[k], f"{prefix}.{k}"))
    elif isinstance(obj, (int, float, str, bool)):
        val = _fmt(obj) if isinstance(obj, float) else str(obj)
        out.append((prefix, val))
    return out


# -- entry point -------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="steadywaves",
        description="Steady periodic rotational water waves of fixed mean "
                    "depth: solve, transform and verify.")
    parser.add_argument("command",
                        choices=["laminar", "solve", "transform", "verify",
                                 "report"])
    parser.add_argument("--config", help="run configuration file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--field", help="height-field CSV (transform/verify)")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            if not args.out:
                parser.error("report needs --out")
            return run_report(args.out, args)
        if not args.config:
            parser.error(f"{args.command} needs --config")
        cfg = load_config(args.config)
        outdir = Path(args.out or cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "laminar":
            return run_laminar(cfg, outdir, args)
        if args.command == "solve":
            return run_solve(cfg, outdir, args)
        if args.command in ("transform", "verify"):
            if not args.field:
                parser.error(f"{args.command} needs --field")
            if args.command == "transform":
                return run_transform(cfg, outdir, args, args.field)
            return run_verify(cfg, outdir, args, args.field)
    except (ConfigError, AlignmentError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (solver_mod.ConvergenceError, solver_mod.StagnationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        history = getattr(exc, "history", None)
        if history:
            tail = ", ".join(f"{r:.3e}" for r in history[-6:])
            print(f"residual history (last {min(6, len(history))}): {tail}",
                  file=sys.stderr)
        return 3
    except laminar_mod.BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every subcommand accepts ``--config run.json``; explicit flags override the
fields of the config document.  Exit status: 0 success, 2 invalid input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import AlgebrodynError, ValidationError
from .residuals import fmt

COMMANDS = ("roots", "field", "locus", "charge", "residuals", "duplicons", "c3map", "catalog")

DEFAULTS = {
    "catalog": None,
    "pi": None,
    "a": 0.0,
    "b": None,
    "imaginary_b": False,
    "sign": 1,
    "grid": None,
    "half_width": 1.0,
    "samples": 16,
    "t": [0.0],
    "tol": 1e-12,
    "out": None,
    "format": None,
    "workers": 1,
    "seed": 0.0,
    "radius": 2.0,
    "nodes": 5810,
    "center": [0.0, 0.0, 0.0],
    "fix_z": None,
    "line": None,
    "point": [0.0, 0.0, 0.0, 1.0],
    "z": None,
    "random": 0,
    "rng_seed": 0,
    "h": 0.01,
    "n": 64,
    "points": 1000,
}


# -- config ---------------------------------------------------------------------


def load_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}", path=args.config) from exc
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object", path=args.config)
        unknown = set(doc) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ValidationError("unknown config fields", fields=sorted(unknown))
        cfg.update(doc)
    for key, val in vars(args).items():
        if key in DEFAULTS and val is not None:
            cfg[key] = val
    env = os.environ.get("ALGEBRODYN_WORKERS")
    if env:
        try:
            cfg["workers"] = int(env)
        except ValueError as exc:
            raise ValidationError("ALGEBRODYN_WORKERS must be an integer", value=env) from exc
    if int(cfg["workers"]) < 1:
        raise ValidationError("workers must be >= 1", workers=cfg["workers"])
    if float(cfg["tol"]) <= 0:
        raise ValidationError("tolerance must be positive", tol=cfg["tol"])
    cfg["t"] = [float(x) for x in np.atleast_1d(cfg["t"])]
    return cfg


def generating_poly(cfg):
    from .catalog import CATALOG, catalog_poly
    from .polys import GeneratingPoly

    if cfg["pi"]:
        return GeneratingPoly.from_json(cfg["pi"])
    name = cfg["catalog"]
    if name is None:
        raise ValidationError("give --catalog NAME or --pi FILE", known=CATALOG)
    return catalog_poly(name, a=float(cfg["a"]), b=cfg["b"], imaginary_b=bool(cfg["imaginary_b"]))


def grid_spec(cfg):
    from .grid import GridSpec

    if cfg["grid"]:
        return GridSpec.from_dict(cfg["grid"])
    return GridSpec.cube(float(cfg["half_width"]), int(cfg["samples"]), tuple(cfg["t"]))


def parse_complex(s):
    try:
        return complex(str(s).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ValidationError("not a complex number", value=s) from exc


def _floats(text, n=None):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError as exc:
        raise ValidationError("expected comma-separated numbers", value=text) from exc
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} numbers", value=text)
    return vals


def _out(cfg):
    return open(cfg["out"], "w", newline="") if cfg["out"] else sys.stdout


def _emit_json(cfg, doc):
    fh = _out(cfg)
    try:
        json.dump(doc, fh, indent=1, default=_jsonable)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)


def _chunks(n, workers, size=65536):
    step = max(1, min(size, -(-n // workers)))
    return [slice(i, min(n, i + step)) for i in range(0, n, step)]


def parallel_map(func, slices, workers):
    if workers == 1 or len(slices) == 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, slices))


# -- subcommands ---------------------------------------------------------------------


def cmd_roots(cfg):
    from .algebra import embed_coords
    from .twistor import roots_batch

    Pi = generating_poly(cfg)
    grid = grid_spec(cfg)
    t, x, y, z = (a.reshape(-1) for a in grid.mesh())
    u, v, w, p = embed_coords(t, x, y, z)

    def work(s):
        return roots_batch(Pi, u[s], v[s], w[s], p[s])

    parts = parallel_map(work, _chunks(t.size, int(cfg["workers"])), int(cfg["workers"]))
    roots = np.concatenate([r[0] for r in parts])
    P = np.concatenate([r[1] for r in parts])
    tsing = np.concatenate([r[2] for r in parts])
    fh = _out(cfg)
    try:
        fh.write("t,x,y,z,branch,ReG,ImG,absP,ill_conditioned\n")
        for i in range(t.size):
            for k in range(roots.shape[1]):
                G = roots[i, k]
                if np.isfinite(G):
                    cells = [fmt(G.real), fmt(G.imag), fmt(abs(P[i, k]))]
                else:
                    cells = ["inf", "", ""]
                ill = not np.isfinite(G) or abs(P[i, k]) < tsing[i]
                fh.write(",".join([fmt(t[i]), fmt(x[i]), fmt(y[i]), fmt(z[i]), str(k)] + cells + [str(int(ill))]) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_field(cfg):
    from .residuals import export_grid_csv, export_grid_jsonl, fd_residuals, grid_fields, solve_grid

    Pi = generating_poly(cfg)
    grid = grid_spec(cfg)
    gb = solve_grid(Pi, grid, seed=parse_complex(cfg["seed"]))
    E, H = grid_fields(Pi, gb)
    report = None
    if min(grid.samples) >= 3 and len(grid.times) >= 3:
        report = fd_residuals(Pi, gb)
    fmt_ = cfg["format"] or ("jsonl" if str(cfg["out"] or "").endswith(".jsonl") else "csv")
    out = cfg["out"] or "/dev/stdout"
    if fmt_ == "jsonl":
        export_grid_jsonl(out, gb, E, H)
    else:
        export_grid_csv(out, gb, E, H, report)
    summary = {"points": int(gb.G.size), "flagged": int(gb.flagged.sum())}
    if report:
        summary["residuals"] = report.summary()
    print(json.dumps(summary, default=_jsonable), file=sys.stderr)
    return 0


def cmd_locus(cfg):
    from .singular import locus_evolve, locus_scan

    Pi = generating_poly(cfg)
    grid = grid_spec(cfg)
    if cfg["fix_z"] is not None:
        clouds = [locus_scan(Pi, grid, t, float(cfg["tol"]), fix_z=float(cfg["fix_z"])) for t in cfg["t"]]
    else:
        clouds = locus_evolve(Pi, grid, cfg["t"], float(cfg["tol"]))
    if all(c is None for c in clouds):
        from .errors import EmptyLocus

        raise EmptyLocus("no locus points at any requested time", op="locus")
    if (cfg["format"] or "csv") == "json":
        _emit_json(cfg, [c.to_dict() if c else {"t": t, "components": []} for c, t in zip(clouds, cfg["t"])])
        return 0
    fh = _out(cfg)
    try:
        fh.write("t,x,y,z,component,dim\n")
        for c in clouds:
            if c is not None:
                buf = []

                class _W:
                    def write(self, s):
                        buf.append(s)

                c.to_csv(_W())
                fh.write("".join(buf).split("\n", 1)[1])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_charge(cfg):
    from .singular import pipeline_charge

    Pi = generating_poly(cfg)
    center = cfg["center"] if not isinstance(cfg["center"], str) else _floats(cfg["center"], 3)
    t0 = time.perf_counter()
    audits = []
    for t in cfg["t"]:
        au = pipeline_charge(Pi, t, center, float(cfg["radius"]), int(cfg["nodes"]), parse_complex(cfg["seed"]))
        doc = au.to_dict()
        doc["t"] = t
        audits.append(doc)
    doc = audits[0] if len(audits) == 1 else audits
    if isinstance(doc, dict):
        doc["seconds"] = time.perf_counter() - t0
    _emit_json(cfg, doc)
    return 0


def cmd_residuals(cfg):
    from .algebra import embed_coords
    from .fields import derivs_at, selfdual_residual, spinor_to_vector, strength_ln_g, strength_twistor
    from .residuals import convergence_study, exact_residuals
    from .twistor import roots_batch

    Pi = generating_poly(cfg)
    rng = np.random.default_rng(int(cfg["rng_seed"]))
    n = int(cfg["points"])
    X = rng.uniform(-2, 2, (n, 4))
    u, v, w, p = embed_coords(*X.T)
    roots, P, tsing, ok = roots_batch(Pi, u, v, w, p)
    G = roots[:, 0]
    good = ok & np.isfinite(G) & (np.abs(P[:, 0]) > 1e3 * tsing) & (np.abs(G) > 1e-8)
    sel = [a[good] for a in (u, v, w, p, G)]
    ex = exact_residuals(Pi, *sel)
    d = derivs_at(Pi, *sel)
    F1, F2 = strength_ln_g(d), strength_twistor(d)
    W = spinor_to_vector(F2)
    cross = np.abs(F1 - F2).max(axis=(-2, -1)) / np.abs(F2).max(axis=(-2, -1))
    doc = {
        "points": int(good.sum()),
        "exact": {k: float(np.nanmax(v)) for k, v in ex.items()},
        "strength_cross_validation": float(cross.max()),
        "self_duality": float(selfdual_residual(W, 1j * W).max()),
    }
    center = cfg["center"] if not isinstance(cfg["center"], str) else _floats(cfg["center"], 3)
    conv, _ = convergence_study(Pi, center, float(cfg["h"]), int(cfg["n"]), cfg["t"][0], seed=parse_complex(cfg["seed"]))
    doc["convergence"] = {k: {"max_h": a, "max_h2": b, "ratio": r} for k, (a, b, r) in conv.items()}
    _emit_json(cfg, doc)
    return 0


def _load_line(cfg):
    from .complexspace import WorldLineC

    if cfg["line"] is None:
        raise ValidationError("duplicons needs --line FILE (JSON with u, v, w, p coefficients)")
    if isinstance(cfg["line"], dict):
        return WorldLineC.from_dict(cfg["line"])
    return WorldLineC.from_json(cfg["line"])


def cmd_duplicons(cfg):
    from .complexspace import duplicons

    line = _load_line(cfg)
    X = cfg["point"] if not isinstance(cfg["point"], str) else _floats(cfg["point"], 4)
    rows = duplicons(line, tuple(float(c) for c in X))
    fh = _out(cfg)
    try:
        fh.write("k,Re_tau,Im_tau," + ",".join(f"Re_z{m},Im_z{m}" for m in range(4)) + "\n")
        for k, (tau, zc) in enumerate(rows):
            cells = [fmt(tau.real), fmt(tau.imag)] + [fmt(c) for zz in zc for c in (zz.real, zz.imag)]
            fh.write(",".join([str(k)] + cells) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_c3map(cfg):
    from .complexspace import c3_map

    if cfg["z"] is not None:
        src = cfg["z"]
        if isinstance(src, str):
            with open(src) as fh:
                src = json.load(fh)
        z = np.array([[parse_complex(c) if isinstance(c, str) else complex(*c) if isinstance(c, list) else complex(c) for c in row] for row in src])
    elif int(cfg["random"]) > 0:
        rng = np.random.default_rng(int(cfg["rng_seed"]))
        z = rng.normal(size=(int(cfg["random"]), 3)) + 1j * rng.normal(size=(int(cfg["random"]), 3))
    else:
        raise ValidationError("c3map needs --z FILE or --random N")
    if z.ndim != 2 or z.shape[1] != 3:
        raise ValidationError("z must be a list of complex 3-vectors", shape=z.shape)
    r = c3_map(z)
    fh = _out(cfg)
    try:
        fh.write("Re_sigma,Im_sigma,phase,T,X1,X2,X3,S2\n")
        for i in range(len(z)):
            cells = [r.sigma[i].real, r.sigma[i].imag, r.phase[i], r.T[i], *r.X[i], r.S2[i]]
            fh.write(",".join(fmt(c) for c in cells) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_catalog(cfg):
    from .catalog import born_reference, kerr_reference

    name = cfg["catalog"]
    if name not in ("kerr", "born", "coulomb"):
        raise ValidationError("catalog needs --catalog kerr|born|coulomb", catalog=name)
    grid = grid_spec(cfg)
    t, x, y, z = (a.reshape(-1) for a in grid.mesh())
    X = np.stack([t, x, y, z], -1)
    a = 0.0 if name == "coulomb" else float(cfg["a"])
    if name == "born":
        b = a if cfg["b"] is None else float(cfg["b"])
        b2 = -(b**2) if cfg["imaginary_b"] else b**2
        ref = born_reference(X, b2=b2, sign=int(cfg["sign"]))
    else:
        ref = kerr_reference(X, a, int(cfg["sign"]))
    E, H, G = ref.E_re, ref.H_re, ref.G
    fh = _out(cfg)
    try:
        fh.write("t,x,y,z,ReG,ImG,Ex,Ey,Ez,Hx,Hy,Hz\n")
        for i in range(t.size):
            cells = [t[i], x[i], y[i], z[i], G[i].real, G[i].imag, *E[i], *H[i]]
            fh.write(",".join(fmt(c) for c in cells) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


HANDLERS = {
    "roots": cmd_roots,
    "field": cmd_field,
    "locus": cmd_locus,
    "charge": cmd_charge,
    "residuals": cmd_residuals,
    "duplicons": cmd_duplicons,
    "c3map": cmd_c3map,
    "catalog": cmd_catalog,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="algebrodyn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--catalog", choices=("kerr", "born", "coulomb"))
        sp.add_argument("--pi", help="generating function JSON (monomials)")
        sp.add_argument("--a", type=float)
        sp.add_argument("--b", type=float)
        sp.add_argument("--imaginary-b", dest="imaginary_b", action="store_true", default=None)
        sp.add_argument("--sign", type=int, choices=(1, -1))
        sp.add_argument("--half-width", dest="half_width", type=float, help="cube grid [-w, w]^3")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--t", type=float, nargs="+")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "json", "jsonl"))
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", help="branch seed value (complex)")
        sp.add_argument("--radius", type=float)
        sp.add_argument("--nodes", type=int)
        sp.add_argument("--center", help="x,y,z")
        sp.add_argument("--fix-z", dest="fix_z", type=float)
        sp.add_argument("--line", help="world line JSON")
        sp.add_argument("--point", help="t,x,y,z")
        sp.add_argument("--z", help="JSON list of complex 3-vectors")
        sp.add_argument("--random", type=int)
        sp.add_argument("--rng-seed", dest="rng_seed", type=int)
        sp.add_argument("--h", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--points", type=int)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return HANDLERS[args.command](cfg)
    except AlgebrodynError as exc:
        print(f"algebrodyn {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"algebrodyn {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

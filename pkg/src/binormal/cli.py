"""Command-line front end.

Subcommands mirror the library surface:

    binormal verify two-sphere | superposed | choquet-deny | sweep
                    | generators | normal
    binormal solve  wos-laplace | wos-riquier | two-sphere-walk
    binormal export grid
    binormal zoo    list
    binormal run    CONFIG.toml

Reports are emitted as a JSON envelope; exit codes: 0 all pass, 1 usage or
config error, 2 verification failure, 3 numeric singularity.  The env var
BINORMAL_QUAD_ORDER overrides the default quadrature order.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time

import click
import numpy as np

from . import __version__, funczoo, kernels, verify, wos
from .geometry import Ball, ball
from .measures import (SignedMeasure, closed_ball, dirac, harmonic_measure,
                       uniform_sphere)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_SINGULAR = 3

# exit code 2 is reserved for verification failures; route every usage and
# config error (including click's own flag parsing) to exit code 1
click.UsageError.exit_code = EXIT_USAGE


def _default_quad_order() -> int:
    env = os.environ.get("BINORMAL_QUAD_ORDER")
    if env is None:
        return verify.DEFAULT_VERIFY_ORDER
    try:
        return int(env)
    except ValueError:
        raise click.UsageError(f"BINORMAL_QUAD_ORDER={env!r} is not an integer")


def _parse_vec(text: str, dim: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise click.UsageError(f"cannot parse coordinates {text!r}")
    if dim is not None and v.size != dim:
        raise click.UsageError(f"expected {dim} coordinates in {text!r}")
    return v


def _parse_ball(text: str) -> Ball:
    head, _, rad = text.rpartition(":")
    if not head:
        raise click.UsageError(f"ball spec {text!r} needs center:radius")
    return ball(_parse_vec(head), float(rad))


def _parse_atom(text: str):
    w, _, loc = text.partition("@")
    if not loc:
        raise click.UsageError(f"atom spec {text!r} needs weight@x,y[,z]")
    return float(w), _parse_vec(loc)


def _field(expr: str, dim: int):
    """Boundary-data spec: a bare polynomial expression or a zoo identifier
    (poly:<expr> / harmonic:<expr>)."""
    try:
        if expr.startswith(("poly:", "harmonic:")):
            return funczoo.zoo_member(expr, dim)
        return funczoo.parse_poly(expr, dim)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _estimate_dict(est: wos.McEstimate) -> dict:
    return {
        "value": est.value,
        "stderr": est.stderr,
        "samples_used": est.samples_used,
        "mean_steps": est.mean_steps,
        "truncated_walks": est.truncated_walks,
    }


def _emit(envelope: dict, out: str | None, no_timestamp: bool,
          started: float) -> None:
    if not no_timestamp:
        envelope["wall_clock_s"] = time.monotonic() - started
    text = json.dumps(envelope, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _finish(ctx, envelope, out, no_timestamp, started):
    _emit(envelope, out, no_timestamp, started)
    ctx.exit(EXIT_OK if envelope["pass"] else EXIT_VERIFICATION)


def _envelope(scenario: dict, reports: list) -> dict:
    ok = all(r.get("pass", True) for r in reports)
    return {
        "tool": {"name": "binormal", "version": __version__},
        "scenario": scenario,
        "reports": reports,
        "pass": ok,
    }


@click.group()
def main():
    """Potential-theory verifiers and walk-on-spheres solvers on balls."""


# -- verify -----------------------------------------------------------------


@main.group("verify")
def verify_group():
    """Residual verifiers emitting JSON reports."""


def _common_verify_options(fn):
    fn = click.option("--quad-order", type=int, default=None,
                      help="sphere quadrature order (env BINORMAL_QUAD_ORDER)")(fn)
    fn = click.option("--tolerance", type=float, default=verify.DEFAULT_TOLERANCE,
                      show_default=True)(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="write the JSON envelope here instead of stdout")(fn)
    fn = click.option("--no-timestamp", is_flag=True,
                      help="omit wall-clock fields (byte-stable output)")(fn)
    return fn


def _two_sphere_cfg(dim, center, r1, r2, x):
    c = _parse_vec(center, dim) if center else np.zeros(dim)
    xx = _parse_vec(x, dim) if x else c
    try:
        return verify.TwoSphereConfig(tuple(xx), ball(c, r1), ball(c, r2))
    except ValueError as exc:
        raise click.UsageError(str(exc))


@verify_group.command("two-sphere")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--center", default=None, help="sphere center, comma separated")
@click.option("--r1", type=float, default=1.0, show_default=True)
@click.option("--r2", type=float, default=2.0, show_default=True)
@click.option("--x", default=None, help="evaluation point (default: center)")
@click.option("--grid-point", "grid_points", multiple=True,
              help="extra exterior probe point, repeatable")
@_common_verify_options
@click.pass_context
def verify_two_sphere(ctx, dim, center, r1, r2, x, grid_points, quad_order,
                      tolerance, out, no_timestamp):
    """Pure-binormality of the two-sphere measure on an exterior grid."""
    started = time.monotonic()
    cfg = _two_sphere_cfg(dim, center, r1, r2, x)
    order = quad_order or _default_quad_order()
    lam = verify.two_sphere_binormal(cfg)
    K = closed_ball(cfg.omega2.center, cfg.omega2.radius)
    extra = [_parse_vec(g, dim) for g in grid_points]
    grid = verify.default_exterior_grid(K, extra_points=extra)
    rep = verify.verify_pure_binormal(lam, K, grid=grid, quad_order=order,
                                      tolerance=tolerance)
    scenario = {"kind": "two-sphere", "dim": dim, "r1": r1, "r2": r2,
                "x": list(map(float, cfg.x)),
                "center": list(map(float, cfg.omega1.center)),
                "quad_order": order}
    _finish(ctx, _envelope(scenario, [rep.to_dict()]), out, no_timestamp, started)


@verify_group.command("superposed")
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--atom", "atoms", multiple=True, required=True,
              help="weight@x,y[,z] of one atom; repeatable")
@click.option("--r1", type=float, default=0.5, show_default=True)
@click.option("--r2", type=float, default=1.0, show_default=True)
@_common_verify_options
@click.pass_context
def verify_superposed(ctx, dim, atoms, r1, r2, quad_order, tolerance, out,
                      no_timestamp):
    """Pure-binormality of a superposition of centered two-sphere measures."""
    started = time.monotonic()
    order = quad_order or _default_quad_order()
    nu = SignedMeasure(())
    for spec in atoms:
        w, loc = _parse_atom(spec)
        if loc.size != dim:
            raise click.UsageError(f"atom {spec!r} has wrong dimension")
        nu = nu + w * dirac(loc)
    lam = verify.superposed_binormal(nu, [(r1, r2)] * len(atoms))
    support = lam.bounding_ball()
    K = closed_ball(support.center, support.radius * 1.000001)
    rep = verify.verify_pure_binormal(lam, K, quad_order=order,
                                      tolerance=tolerance)
    scenario = {"kind": "superposed", "dim": dim, "atoms": list(atoms),
                "r1": r1, "r2": r2, "quad_order": order}
    _finish(ctx, _envelope(scenario, [rep.to_dict()]), out, no_timestamp, started)


@verify_group.command("choquet-deny")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--ball", "ball_spec", default=None,
              help="density ball center:radius (default unit ball)")
@click.option("--atom", "atoms", multiple=True,
              help="weight@coords of the source measure; repeatable")
@_common_verify_options
@click.pass_context
def verify_choquet(ctx, dim, ball_spec, atoms, quad_order, tolerance, out,
                   no_timestamp):
    """Iterated-kernel consistency of the density construction."""
    started = time.monotonic()
    E = _parse_ball(ball_spec) if ball_spec else ball([0.0] * dim, 1.0)
    if not atoms:
        # two atoms by default so the volume-quadrature side decomposes
        # differently from the per-atom iterated-kernel side
        scale = E.radius
        a1 = E.c + np.array([0.35 * scale] + [0.0] * (dim - 1))
        a2 = E.c + np.array([-0.15 * scale, 0.3 * scale] + [0.0] * (dim - 2))
        atoms = ("0.8@" + ",".join(f"{v}" for v in a1),
                 "-0.4@" + ",".join(f"{v}" for v in a2))
    lam = SignedMeasure(())
    for spec in atoms:
        w, loc = _parse_atom(spec)
        lam = lam + w * dirac(loc)
    order = min(quad_order or 48, 64)
    tol = tolerance if tolerance != verify.DEFAULT_TOLERANCE else 1e-6
    rep = verify.verify_choquet_deny(lam, E, quad_order=order, tolerance=tol)
    scenario = {"kind": "choquet-deny", "dim": dim, "atoms": list(atoms),
                "ball": {"center": list(E.center), "radius": E.radius}}
    _finish(ctx, _envelope(scenario, [rep.to_dict()]), out, no_timestamp, started)


@verify_group.command("sweep")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--center", default=None)
@click.option("--r1", type=float, default=1.0, show_default=True)
@click.option("--r2", type=float, default=2.0, show_default=True)
@click.option("--x", default=None)
@_common_verify_options
@click.pass_context
def verify_sweep(ctx, dim, center, r1, r2, x, quad_order, tolerance, out,
                 no_timestamp):
    """Sweep decomposition: interior part balayaged onto the outer sphere."""
    started = time.monotonic()
    cfg = _two_sphere_cfg(dim, center, r1, r2, x)
    rep = verify.verify_sweep_decomposition(cfg, quad_order=min(
        quad_order or 64, 256), tolerance=tolerance)
    scenario = {"kind": "sweep", "dim": dim, "r1": r1, "r2": r2,
                "x": list(map(float, cfg.x))}
    _finish(ctx, _envelope(scenario, [rep.to_dict()]), out, no_timestamp, started)


@verify_group.command("generators")
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--center", default=None)
@click.option("--r1", type=float, default=1.0, show_default=True)
@click.option("--r2", type=float, default=2.0, show_default=True)
@click.option("--x", default=None)
@click.option("-m", "--m", "m", type=int, default=64, show_default=True,
              help="generator node count")
@_common_verify_options
@click.pass_context
def verify_generators(ctx, dim, center, r1, r2, x, m, quad_order, tolerance,
                      out, no_timestamp):
    """Weak error of the finite generator expansion."""
    started = time.monotonic()
    cfg = _two_sphere_cfg(dim, center, r1, r2, x)
    _, rep = verify.generator_expansion(cfg, m, quad_order=min(
        quad_order or 64, 512), tolerance=tolerance)
    scenario = {"kind": "generators", "dim": dim, "m": m,
                "x": list(map(float, cfg.x))}
    _finish(ctx, _envelope(scenario, [rep.to_dict()]), out, no_timestamp, started)


@verify_group.command("normal")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--center", default=None)
@click.option("--radius", type=float, default=1.0, show_default=True)
@click.option("--x", default=None, help="atom location (default: center)")
@_common_verify_options
@click.pass_context
def verify_normal(ctx, dim, center, radius, x, quad_order, tolerance, out,
                  no_timestamp):
    """Both potential checks for the single-sphere measure (atom minus its
    harmonic measure): the Newtonian check passes, the biharmonic-profile
    check is expected to FAIL — the measure is normal but not binormal."""
    started = time.monotonic()
    order = quad_order or _default_quad_order()
    c = _parse_vec(center, dim) if center else np.zeros(dim)
    xx = _parse_vec(x, dim) if x else c
    b = ball(c, radius)
    lam0 = dirac(xx) - harmonic_measure(b, xx)
    K = closed_ball(c, radius)
    rep_p = verify.verify_2normal(lam0, K, quad_order=order, tolerance=tolerance)
    rep_w = verify.verify_pure_binormal(lam0, K, quad_order=order,
                                        tolerance=tolerance)
    scenario = {"kind": "normal", "dim": dim, "radius": radius,
                "x": [float(v) for v in xx]}
    _finish(ctx, _envelope(scenario, [rep_p.to_dict(), rep_w.to_dict()]),
            out, no_timestamp, started)


# -- solve ------------------------------------------------------------------


@main.group("solve")
def solve_group():
    """Walk-on-spheres Monte Carlo solvers."""


def _domain_option(fn):
    fn = click.option("--domain", default="ball:0,0:1",
                      help="ball:center:radius or box:lo:hi", show_default=True)(fn)
    return fn


def _parse_domain(text: str):
    kind, _, rest = text.partition(":")
    if kind == "ball":
        head, _, rad = rest.rpartition(":")
        if not head:
            raise click.UsageError("ball domain needs ball:center:radius")
        return wos.BallDomain(ball(_parse_vec(head), float(rad)))
    if kind == "box":
        lo_s, _, hi_s = rest.partition(":")
        if not hi_s:
            raise click.UsageError("box domain needs box:lo,lo:hi,hi")
        return wos.AxisBox(_parse_vec(lo_s), _parse_vec(hi_s))
    raise click.UsageError(f"unknown domain kind {kind!r}")


def _common_solve_options(fn):
    fn = click.option("--point", required=True, help="evaluation point")(fn)
    fn = click.option("--samples", type=int, default=100_000, show_default=True)(fn)
    fn = click.option("--eps", type=float, default=1e-3, show_default=True,
                      help="absorption shell width")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--max-steps", type=int, default=1000, show_default=True)(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True)(fn)
    fn = click.option("--out", type=click.Path(), default=None)(fn)
    fn = click.option("--no-timestamp", is_flag=True)(fn)
    return fn


def _make_cfg(samples, eps, seed, max_steps, threads, nested_budget=8):
    try:
        return wos.WosConfig(eps_shell=eps, max_steps=max_steps,
                             samples=samples, seed=seed, threads=threads,
                             nested_budget=nested_budget)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@solve_group.command("wos-laplace")
@_domain_option
@click.option("--f1", required=True, help="boundary data, polynomial in z1..zn")
@_common_solve_options
@click.pass_context
def solve_laplace(ctx, domain, f1, point, samples, eps, seed, max_steps,
                  threads, out, no_timestamp):
    """Dirichlet problem for the Laplacian."""
    started = time.monotonic()
    dom = _parse_domain(domain)
    x = _parse_vec(point, dom.dim)
    cfg = _make_cfg(samples, eps, seed, max_steps, threads)
    est = wos.wos_laplace(dom, _field(f1, dom.dim), x, cfg)
    scenario = {"kind": "wos-laplace", "domain": domain, "f1": f1,
                "point": [float(v) for v in x], "samples": samples,
                "eps": eps, "seed": seed}
    _finish(ctx, _envelope(scenario, [_estimate_dict(est)]), out,
            no_timestamp, started)


@solve_group.command("wos-riquier")
@_domain_option
@click.option("--f1", default=None, help="first boundary component")
@click.option("--f2", default=None, help="second boundary component")
@click.option("--pair", default=None,
              help="zoo pair almansi:h=<e>,q=<e> supplying both components")
@click.option("--nested-budget", type=int, default=8, show_default=True)
@_common_solve_options
@click.pass_context
def solve_riquier(ctx, domain, f1, f2, pair, nested_budget, point, samples,
                  eps, seed, max_steps, threads, out, no_timestamp):
    """Coupled biharmonic boundary value problem (u and its Laplacian)."""
    started = time.monotonic()
    dom = _parse_domain(domain)
    x = _parse_vec(point, dom.dim)
    cfg = _make_cfg(samples, eps, seed, max_steps, threads, nested_budget)
    if pair is not None:
        try:
            zp = funczoo.zoo_member(pair, dom.dim)
        except ValueError as exc:
            raise click.UsageError(str(exc))
        if not isinstance(zp, funczoo.BiharmonicPair):
            raise click.UsageError("--pair must name a biharmonic pair")
        field1, field2 = zp.u1, zp.u2
        f1, f2 = pair, pair
    elif f1 is not None and f2 is not None:
        field1, field2 = _field(f1, dom.dim), _field(f2, dom.dim)
    else:
        raise click.UsageError("provide --f1 and --f2, or --pair")
    u1, u2 = wos.wos_riquier(dom, field1, field2, x, cfg)
    scenario = {"kind": "wos-riquier", "domain": domain, "f1": f1, "f2": f2,
                "point": [float(v) for v in x], "samples": samples,
                "eps": eps, "seed": seed, "nested_budget": nested_budget}
    reports = [{"component": "u1", **_estimate_dict(u1)},
               {"component": "u2", **_estimate_dict(u2)}]
    _finish(ctx, _envelope(scenario, reports), out, no_timestamp, started)


@solve_group.command("two-sphere-walk")
@_domain_option
@click.option("--f1", required=True, help="boundary data")
@click.option("--ratio", type=float, default=0.5, show_default=True,
              help="inner/outer sphere radius ratio")
@click.option("--depth-cap", type=int, default=12, show_default=True)
@_common_solve_options
@click.pass_context
def solve_branching(ctx, domain, f1, ratio, depth_cap, point, samples, eps,
                    seed, max_steps, threads, out, no_timestamp):
    """EXPERIMENTAL signed branching walk on the two-sphere recursion."""
    started = time.monotonic()
    dom = _parse_domain(domain)
    x = _parse_vec(point, dom.dim)
    cfg = _make_cfg(samples, eps, seed, max_steps, threads)
    est = wos.two_sphere_walk(dom, _field(f1, dom.dim), x, cfg,
                              R_ratio=ratio, depth_cap=depth_cap)
    scenario = {"kind": "two-sphere-walk", "domain": domain, "f1": f1,
                "point": [float(v) for v in x], "samples": samples,
                "ratio": ratio, "depth_cap": depth_cap, "seed": seed}
    _finish(ctx, _envelope(scenario, [_estimate_dict(est)]), out,
            no_timestamp, started)


# -- export -----------------------------------------------------------------


@main.group("export")
def export_group():
    """Kernel value exports."""


def _grid_points(points: str | None, grid: str | None, dim: int) -> np.ndarray:
    if (points is None) == (grid is None):
        raise click.UsageError("specify exactly one of --points or --grid")
    if points is not None:
        rows = [_parse_vec(p, dim) for p in points.split(";") if p.strip()]
        return np.vstack(rows)
    axes = []
    for part in grid.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise click.UsageError(f"grid axis {part!r} needs lo:hi:count")
        lo, hi, count = float(bits[0]), float(bits[1]), int(bits[2])
        axes.append(np.linspace(lo, hi, count))
    if len(axes) != dim:
        raise click.UsageError(f"grid needs {dim} axes")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@export_group.command("grid")
@click.option("--kernel", "kernel_name", required=True,
              type=click.Choice(["newtonian", "biharmonic", "riesz",
                                 "ball-green", "iterated-ball-green"]))
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--y", "y_spec", required=True, help="kernel source point")
@click.option("--ball", "ball_spec", default=None,
              help="center:radius for the ball kernels")
@click.option("--points", default=None, help="semicolon-separated points")
@click.option("--grid", default=None, help="lo:hi:count per axis, comma separated")
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
def export_grid(ctx, kernel_name, dim, y_spec, ball_spec, points, grid, out):
    """CSV of kernel values, 17 significant digits, lexicographic row order."""
    y = _parse_vec(y_spec, dim)
    pts = _grid_points(points, grid, dim)
    ball_ = _parse_ball(ball_spec) if ball_spec else None
    if kernel_name in ("ball-green", "iterated-ball-green") and ball_ is None:
        raise click.UsageError(f"--ball is required for {kernel_name}")

    def one(p):
        if kernel_name == "newtonian":
            return kernels.newtonian(p, y, dim)
        if kernel_name == "biharmonic":
            return kernels.biharm_fundamental(p, y, dim)
        if kernel_name == "riesz":
            return kernels.riesz_iterated(p, y, dim)
        if kernel_name == "ball-green":
            return kernels.ball_green(ball_, p, y)
        return kernels.iterated_ball_green(ball_, p, y)

    singular = False
    lines = [",".join([f"x{i+1}" for i in range(dim)] + ["value"])]
    for p in pts:
        try:
            v = one(p)
        except (ZeroDivisionError, ValueError):
            v = float("nan")
        if not np.isfinite(v):
            singular = True
            lines.append(",".join(f"{c:.17g}" for c in p) + ",nan")
        else:
            lines.append(",".join(f"{c:.17g}" for c in p) + f",{v:.17g}")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    ctx.exit(EXIT_SINGULAR if singular else EXIT_OK)


# -- zoo --------------------------------------------------------------------


@main.group("zoo")
def zoo_group():
    """Named polynomial test functions."""


@zoo_group.command("list")
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--max-degree", type=int, default=4, show_default=True)
def zoo_list_cmd(dim, max_degree):
    """Identifiers accepted anywhere a scalar field is expected."""
    for line in funczoo.zoo_list(dim, max_degree):
        click.echo(line)


# -- config runner -----------------------------------------------------------

_SCENARIO_KEYS = {
    "two-sphere": {"name", "kind", "dim", "center", "r1", "r2", "x",
                   "quad_order", "tolerance", "grid_points"},
    "sweep": {"name", "kind", "dim", "center", "r1", "r2", "x",
              "quad_order", "tolerance"},
    "generators": {"name", "kind", "dim", "center", "r1", "r2", "x", "m",
                   "quad_order", "tolerance"},
    "normal": {"name", "kind", "dim", "center", "radius", "x",
               "quad_order", "tolerance"},
    "choquet-deny": {"name", "kind", "dim", "ball", "measure",
                     "quad_order", "tolerance"},
    "pure-binormal": {"name", "kind", "dim", "measure", "support",
                      "quad_order", "tolerance"},
    "2-normal": {"name", "kind", "dim", "measure", "support",
                 "quad_order", "tolerance"},
    "wos-laplace": {"name", "kind", "domain", "f1", "point", "samples",
                    "eps", "seed", "max_steps", "threads"},
    "wos-riquier": {"name", "kind", "domain", "f1", "f2", "point", "samples",
                    "eps", "seed", "max_steps", "threads", "nested_budget"},
    "two-sphere-walk": {"name", "kind", "domain", "f1", "point", "samples",
                        "eps", "seed", "ratio", "depth_cap", "threads"},
}

_MEASURE_KEYS = {"weight", "kind", "location", "ball", "base"}


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _strict(entry: dict, allowed: set, where: str):
    unknown = set(entry) - allowed
    if unknown:
        raise click.UsageError(
            f"unknown key {sorted(unknown)[0]!r} in {where}")


def _measure_from_config(entries, dim: int) -> SignedMeasure:
    m = SignedMeasure(())
    for i, entry in enumerate(entries):
        _strict(entry, _MEASURE_KEYS, f"measure[{i}]")
        w = float(entry.get("weight", 1.0))
        kind = entry.get("kind")
        if kind == "point":
            term = w * dirac(np.asarray(entry["location"], dtype=float))
        elif kind == "harmonic":
            b = entry["ball"]
            _strict(b, {"center", "radius"}, f"measure[{i}].ball")
            bb = ball(b["center"], float(b["radius"]))
            term = w * harmonic_measure(bb, np.asarray(entry["base"], dtype=float))
        elif kind == "uniform-sphere":
            b = entry["ball"]
            _strict(b, {"center", "radius"}, f"measure[{i}].ball")
            term = w * uniform_sphere(ball(b["center"], float(b["radius"])))
        else:
            raise click.UsageError(f"unknown measure kind {kind!r} in measure[{i}]")
        if term.dim != dim:
            raise click.UsageError(
                f"measure[{i}] has dimension {term.dim}, scenario dim is {dim}")
        m = m + term
    return m


def _run_scenario(entry: dict, overrides: dict) -> dict:
    kind = entry.get("kind")
    if kind not in _SCENARIO_KEYS:
        raise click.UsageError(f"unknown scenario kind {kind!r}")
    _strict(entry, _SCENARIO_KEYS[kind], f"scenario {entry.get('name', kind)!r}")
    entry = {**entry, **{k: v for k, v in overrides.items()
                         if k in _SCENARIO_KEYS[kind]}}
    dim = int(entry.get("dim", 3))
    order = int(entry.get("quad_order", _default_quad_order()))
    tol = float(entry.get("tolerance", verify.DEFAULT_TOLERANCE))
    name = entry.get("name", kind)

    if kind in ("two-sphere", "sweep", "generators"):
        c = np.asarray(entry.get("center", [0.0] * dim), dtype=float)
        x = np.asarray(entry.get("x", c), dtype=float)
        cfg = verify.TwoSphereConfig(tuple(x),
                                     ball(c, float(entry.get("r1", 1.0))),
                                     ball(c, float(entry.get("r2", 2.0))))
        if kind == "two-sphere":
            lam = verify.two_sphere_binormal(cfg)
            K = closed_ball(cfg.omega2.center, cfg.omega2.radius)
            extra = [np.asarray(g, dtype=float)
                     for g in entry.get("grid_points", [])]
            grid = verify.default_exterior_grid(K, extra_points=extra)
            rep = verify.verify_pure_binormal(lam, K, grid=grid,
                                              quad_order=order, tolerance=tol)
            reports = [rep.to_dict()]
        elif kind == "sweep":
            reports = [verify.verify_sweep_decomposition(
                cfg, quad_order=min(order, 256), tolerance=tol).to_dict()]
        else:
            _, rep = verify.generator_expansion(
                cfg, int(entry.get("m", 64)), quad_order=min(order, 512),
                tolerance=tol)
            reports = [rep.to_dict()]
    elif kind == "normal":
        c = np.asarray(entry.get("center", [0.0] * dim), dtype=float)
        x = np.asarray(entry.get("x", c), dtype=float)
        b = ball(c, float(entry.get("radius", 1.0)))
        lam0 = dirac(x) - harmonic_measure(b, x)
        K = closed_ball(c, b.radius)
        reports = [verify.verify_2normal(lam0, K, quad_order=order,
                                         tolerance=tol).to_dict(),
                   verify.verify_pure_binormal(lam0, K, quad_order=order,
                                               tolerance=tol).to_dict()]
    elif kind in ("pure-binormal", "2-normal"):
        m = _measure_from_config(entry.get("measure", []), dim)
        sup = entry["support"]
        _strict(sup, {"center", "radius"}, "support")
        K = closed_ball(np.asarray(sup["center"], dtype=float),
                        float(sup["radius"]))
        fn = verify.verify_pure_binormal if kind == "pure-binormal" \
            else verify.verify_2normal
        reports = [fn(m, K, quad_order=order, tolerance=tol).to_dict()]
    elif kind == "choquet-deny":
        m = _measure_from_config(entry.get("measure", []), dim)
        b = entry.get("ball", {"center": [0.0] * dim, "radius": 1.0})
        _strict(b, {"center", "radius"}, "ball")
        E = ball(b["center"], float(b["radius"]))
        reports = [verify.verify_choquet_deny(
            m, E, quad_order=min(order, 64),
            tolerance=tol if tol != verify.DEFAULT_TOLERANCE else 1e-6).to_dict()]
    else:  # walk solvers
        dom = _parse_domain(entry["domain"])
        x = np.asarray(entry["point"], dtype=float)
        cfg = wos.WosConfig(
            eps_shell=float(entry.get("eps", 1e-3)),
            max_steps=int(entry.get("max_steps", 1000)),
            samples=int(entry.get("samples", 100_000)),
            seed=int(entry.get("seed", 0)),
            threads=int(entry.get("threads", 1)),
            nested_budget=int(entry.get("nested_budget", 8)))
        f1 = _field(entry["f1"], dom.dim)
        if kind == "wos-laplace":
            reports = [_estimate_dict(wos.wos_laplace(dom, f1, x, cfg))]
        elif kind == "wos-riquier":
            u1, u2 = wos.wos_riquier(dom, f1, _field(entry["f2"], dom.dim),
                                     x, cfg)
            reports = [{"component": "u1", **_estimate_dict(u1)},
                       {"component": "u2", **_estimate_dict(u2)}]
        else:
            est = wos.two_sphere_walk(dom, f1, x, cfg,
                                      R_ratio=float(entry.get("ratio", 0.5)),
                                      depth_cap=int(entry.get("depth_cap", 12)))
            reports = [_estimate_dict(est)]
    return {"name": name, "kind": kind, "reports": reports,
            "pass": all(r.get("pass", True) for r in reports)}


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), default=None)
@click.option("--no-timestamp", is_flag=True)
@click.option("--parallel", is_flag=True,
              help="run independent scenarios concurrently (output order is "
                   "still by scenario index)")
@click.option("--set", "overrides", multiple=True,
              help="override key=value in every scenario that accepts it")
@click.pass_context
def run_cmd(ctx, config_path, out, no_timestamp, parallel, overrides):
    """Execute the scenarios in a TOML config and emit one JSON envelope."""
    started = time.monotonic()
    try:
        doc = _load_toml(config_path)
    except Exception as exc:
        raise click.UsageError(f"cannot parse {config_path}: {exc}")
    _strict(doc, {"scenario"}, "config root")
    scenarios = doc.get("scenario", [])
    if not isinstance(scenarios, list) or not scenarios:
        raise click.UsageError("config needs at least one [[scenario]] table")
    odict = {}
    for ov in overrides:
        key, _, val = ov.partition("=")
        if not val:
            raise click.UsageError(f"--set needs key=value, got {ov!r}")
        try:
            odict[key] = json.loads(val)
        except json.JSONDecodeError:
            odict[key] = val

    if parallel and len(scenarios) > 1:
        with concurrent.futures.ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda s: _run_scenario(s, odict), scenarios))
    else:
        results = [_run_scenario(s, odict) for s in scenarios]
    envelope = {
        "tool": {"name": "binormal", "version": __version__},
        "scenario": {"config": os.path.basename(config_path),
                     "count": len(scenarios)},
        "reports": results,
        "pass": all(r["pass"] for r in results),
    }
    _finish(ctx, envelope, out, no_timestamp, started)


if __name__ == "__main__":
    main()

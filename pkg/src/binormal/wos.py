"""Walk-on-spheres Monte Carlo solvers.

Three estimators on ball and axis-aligned-box domains (dim 2 or 3):

  * wos_laplace      — Dirichlet problem for the Laplacian.
  * wos_riquier      — the coupled pair: laplacian u2 = 0, laplacian u1 = -u2
                       with (u1, u2) boundary data; the volume source term is
                       sampled from the normalized Green-volume density of
                       each step ball and the source value u2 is estimated by
                       independent nested walks with a fixed per-node budget.
  * two_sphere_walk  — EXPERIMENTAL signed branching estimator built on the
                       two-sphere mean-value recursion
                       u(x) = alpha E[u(Z1)] - beta E[u(Z2)]; since
                       alpha + beta > 1 the branching is supercritical, so
                       depth truncation and weight guards are part of the
                       contract and bias/variance are measured outputs.

Every random draw is a pure function of (seed, sample index, step, slot)
through the counter RNG, so estimates are bit-identical for any thread count
or batching.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .geometry import Ball, as_point, eval_field

_MAX_SAMPLES_BITS = 30
_MAX_STEP_BITS = 11
MAX_STEPS_CAP = (1 << _MAX_STEP_BITS) - 1  # counter budget per walk
MAX_DEPTH_CAP = 24


class BallDomain:
    def __init__(self, ball_: Ball):
        if ball_.dim not in (2, 3):
            raise ValueError("walk domains support dim 2 and 3")
        self.ball = ball_
        self.dim = ball_.dim

    def distance(self, pts: np.ndarray) -> np.ndarray:
        return self.ball.radius - np.linalg.norm(pts - self.ball.c, axis=1)

    def project(self, pts: np.ndarray) -> np.ndarray:
        v = pts - self.ball.c
        r = np.linalg.norm(v, axis=1, keepdims=True)
        return self.ball.c + self.ball.radius * v / np.maximum(r, 1e-300)


class AxisBox:
    def __init__(self, lower, upper):
        self.lo = np.asarray(lower, dtype=float)
        self.hi = np.asarray(upper, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box corners must be vectors of equal length")
        if self.lo.size not in (2, 3):
            raise ValueError("walk domains support dim 2 and 3")
        if not np.all(self.hi > self.lo):
            raise ValueError("box must have nonempty interior")
        self.dim = self.lo.size

    def distance(self, pts: np.ndarray) -> np.ndarray:
        gaps = np.concatenate([pts - self.lo, self.hi - pts], axis=1)
        return gaps.min(axis=1)

    def project(self, pts: np.ndarray) -> np.ndarray:
        gaps = np.concatenate([pts - self.lo, self.hi - pts], axis=1)
        k = np.argmin(gaps, axis=1)
        out = pts.copy()
        rows = np.arange(len(pts))
        lo_side = k < self.dim
        out[rows[lo_side], k[lo_side]] = self.lo[k[lo_side]]
        hi_side = ~lo_side
        out[rows[hi_side], k[hi_side] - self.dim] = self.hi[k[hi_side] - self.dim]
        return out


@dataclass(frozen=True)
class WosConfig:
    eps_shell: float = 1e-3
    max_steps: int = 1000
    samples: int = 100_000
    seed: int = 0
    threads: int = 1
    nested_budget: int = 8  # per-node walks estimating the source value

    def __post_init__(self):
        if self.eps_shell <= 0:
            raise ValueError("eps_shell must be positive")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.samples >= 1 << _MAX_SAMPLES_BITS:
            raise ValueError("sample count exceeds the counter budget")
        if not 1 <= self.max_steps <= MAX_STEPS_CAP:
            raise ValueError(f"max_steps must be in [1, {MAX_STEPS_CAP}]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 1 <= self.nested_budget <= 15:
            raise ValueError("nested budget must be in [1, 15]")


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples_used: int
    mean_steps: float
    truncated_walks: int

    @property
    def truncation_fraction(self) -> float:
        return self.truncated_walks / max(self.samples_used, 1)


def _finalize(values: np.ndarray, steps: np.ndarray, truncated: int,
              warn_label: str | None) -> McEstimate:
    n = len(values)
    stderr = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if warn_label is not None and truncated > 0.01 * n:
        warnings.warn(f"{warn_label}: {truncated} of {n} walks hit the step "
                      "cap; the estimate carries truncation bias")
    return McEstimate(value=float(np.mean(values)), stderr=stderr,
                      samples_used=n, mean_steps=float(np.mean(steps)),
                      truncated_walks=int(truncated))


def _walk_keys(idx, step, slot=0):
    return rng.pack(rng.TAG_WALK, (idx, _MAX_SAMPLES_BITS),
                    (np.uint64(step), _MAX_STEP_BITS), (np.uint64(slot), 6))


def _source_keys(idx, step, slot=0):
    return rng.pack(rng.TAG_SOURCE, (idx, _MAX_SAMPLES_BITS),
                    (np.uint64(step), _MAX_STEP_BITS), (np.uint64(slot), 6))


def _nested_keys(idx, step, j, nstep, slot=0):
    return rng.pack(rng.TAG_NESTED, (idx, _MAX_SAMPLES_BITS),
                    (np.uint64(step), _MAX_STEP_BITS), (j, 4),
                    (np.uint64(nstep), _MAX_STEP_BITS), (np.uint64(slot), 6))


def _run_chunks(cfg: WosConfig, total: int, chunk_fn):
    """Partition sample indices into per-thread chunks and merge results by
    absolute index; per-sample purity makes the result thread-agnostic."""
    bounds = np.linspace(0, total, cfg.threads + 1, dtype=int)
    ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(ranges) == 1:
        return [chunk_fn(*ranges[0])]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        return list(pool.map(lambda ab: chunk_fn(*ab), ranges))


def wos_laplace(dom, g, x, cfg: WosConfig) -> McEstimate:
    """Harmonic-measure sampling of the boundary field g at x: jump uniformly
    on the largest inscribed sphere until within eps_shell of the boundary,
    then evaluate g at the projected boundary point."""
    x = as_point(x, dom.dim)
    if dom.distance(x[None, :])[0] <= 0:
        raise ValueError("start point must lie strictly inside the domain")
    values = np.zeros(cfg.samples)
    steps = np.zeros(cfg.samples, dtype=np.int64)
    trunc = np.zeros(1, dtype=np.int64)

    def chunk(lo, hi):
        vals, stp, tr = _walk_chunk(dom, g, x, cfg, lo, hi)
        values[lo:hi] = vals
        steps[lo:hi] = stp
        trunc[0] += tr

    _run_chunks(cfg, cfg.samples, chunk)
    return _finalize(values, steps, int(trunc[0]), "wos_laplace")


def _walk_chunk(dom, g, x, cfg, lo, hi):
    n = dom.dim
    count = hi - lo
    pos = np.repeat(x[None, :], count, axis=0)
    alive = np.arange(lo, hi, dtype=np.uint64)
    vals = np.zeros(count)
    stps = np.zeros(count, dtype=np.int64)
    truncated = 0
    step = 0
    while alive.size:
        d = dom.distance(pos)
        hit = d < cfg.eps_shell
        if step >= cfg.max_steps:
            truncated += int((~hit).sum())
            hit = np.ones_like(hit)
        if np.any(hit):
            bp = dom.project(pos[hit])
            rows = (alive[hit] - np.uint64(lo)).astype(np.int64)
            vals[rows] = eval_field(g, bp)
            stps[rows] = step
        keep = ~hit
        pos, alive, d = pos[keep], alive[keep], d[keep]
        if not alive.size:
            break
        dirs = rng.unit_vectors(cfg.seed, _walk_keys(alive, step), n)
        pos = pos + d[:, None] * dirs
        step += 1
    return vals, stps, truncated


# -- Green-volume radial sampling ------------------------------------------------

def green_radius_fraction(u: np.ndarray, n: int) -> np.ndarray:
    """Inverse CDF of the normalized Green-volume radial law of a ball:
    returns rho / r for uniform u in [0, 1).

    n = 3: F(t) = 3 t^2 - 2 t^3 (smoothstep), inverted in closed form.
    n = 2: F(t) = t^2 (1 - ln t^2), inverted with vectorized Newton on
           v - v ln v = u for v = t^2 (monotone; converges quadratically).
    """
    u = np.asarray(u, dtype=float)
    if n == 3:
        u = np.clip(u, 0.0, 1.0)
        return 0.5 - np.sin(np.arcsin(1.0 - 2.0 * u) / 3.0)
    if n == 2:
        v = np.clip(u, 1e-15, 1.0 - 1e-15).copy()
        for _ in range(30):
            lnv = np.log(v)
            gval = v - v * lnv - u
            v = np.clip(v - gval / (-lnv), 1e-300, 1.0 - 1e-16)
        return np.sqrt(v)
    raise ValueError("radial law implemented for dim 2 and 3")


def wos_riquier(dom, f1, f2, x, cfg: WosConfig):
    """Coupled solve: u2 from wos_laplace on f2; u1 from walks carrying a
    volume source, where each step on the inscribed ball B(y, r) adds
    (r^2 / 2n) * u2_hat(z) with z drawn from the normalized Green-volume
    density and u2_hat the mean of nested_budget independent walks.
    Returns (u1 estimate, u2 estimate at x).
    """
    x = as_point(x, dom.dim)
    if dom.distance(x[None, :])[0] <= 0:
        raise ValueError("start point must lie strictly inside the domain")
    u2 = wos_laplace(dom, f2, x, cfg)
    values = np.zeros(cfg.samples)
    steps = np.zeros(cfg.samples, dtype=np.int64)
    trunc = np.zeros(1, dtype=np.int64)

    def chunk(lo, hi):
        vals, stp, tr = _riquier_chunk(dom, f1, f2, x, cfg, lo, hi)
        values[lo:hi] = vals
        steps[lo:hi] = stp
        trunc[0] += tr

    _run_chunks(cfg, cfg.samples, chunk)
    u1 = _finalize(values, steps, int(trunc[0]), "wos_riquier")
    return u1, u2


def _riquier_chunk(dom, f1, f2, x, cfg, lo, hi):
    n = dom.dim
    count = hi - lo
    pos = np.repeat(x[None, :], count, axis=0)
    alive = np.arange(lo, hi, dtype=np.uint64)
    vals = np.zeros(count)
    stps = np.zeros(count, dtype=np.int64)
    truncated = 0
    step = 0
    while alive.size:
        d = dom.distance(pos)
        hit = d < cfg.eps_shell
        if step >= cfg.max_steps:
            truncated += int((~hit).sum())
            hit = np.ones_like(hit)
        if np.any(hit):
            bp = dom.project(pos[hit])
            rows = (alive[hit] - np.uint64(lo)).astype(np.int64)
            vals[rows] += eval_field(f1, bp)
            stps[rows] = step
        keep = ~hit
        pos, alive, d = pos[keep], alive[keep], d[keep]
        if not alive.size:
            break
        # source contribution from the current inscribed ball, before jumping
        src_dirs = rng.unit_vectors(cfg.seed, _source_keys(alive, step), n)
        u = rng.uniforms(cfg.seed, _source_keys(alive, step, slot=8))
        rho = d * green_radius_fraction(u, n)
        src_pts = pos + rho[:, None] * src_dirs
        u2_hat = _nested_u2(dom, f2, src_pts, alive, step, cfg)
        rows = (alive - np.uint64(lo)).astype(np.int64)
        vals[rows] += (d * d / (2.0 * n)) * u2_hat
        dirs = rng.unit_vectors(cfg.seed, _walk_keys(alive, step), n)
        pos = pos + d[:, None] * dirs
        step += 1
    return vals, stps, truncated


def _nested_u2(dom, f2, starts, owner_idx, owner_step, cfg):
    """Mean of nested_budget walk-on-spheres estimates of the harmonic
    second component at each start point."""
    n = dom.dim
    budget = cfg.nested_budget
    m = len(starts)
    pos = np.repeat(starts, budget, axis=0)
    own = np.repeat(owner_idx, budget)
    jj = np.tile(np.arange(budget, dtype=np.uint64), m)
    vals = np.zeros(m * budget)
    rows = np.arange(m * budget)
    nstep = 0
    while rows.size:
        d = dom.distance(pos)
        hit = (d < cfg.eps_shell) | (nstep >= cfg.max_steps)
        if np.any(hit):
            bp = dom.project(pos[hit])
            vals[rows[hit]] = eval_field(f2, bp)
        keep = ~hit
        pos, rows, own, jj, d = pos[keep], rows[keep], own[keep], jj[keep], d[keep]
        if not rows.size:
            break
        dirs = rng.unit_vectors(
            cfg.seed, _nested_keys(own, owner_step, jj, nstep), n)
        pos = pos + d[:, None] * dirs
        nstep += 1
    return vals.reshape(m, budget).mean(axis=1)


# -- experimental signed branching estimator -------------------------------------

def two_sphere_walk(dom, f1, x, cfg: WosConfig, R_ratio: float = 0.5,
                    depth_cap: int = 12) -> McEstimate:
    """Signed branching walk on the two-sphere mean-value recursion.

    Each node at y spawns a child on the sphere of radius R1 = R_ratio * d(y)
    with weight +alpha and one on radius R2 = d(y) with weight -beta, where
    alpha = 1 / (1 - R_ratio^2) and beta = alpha - 1 (the centered two-sphere
    coefficients).  Branches absorb at the boundary shell with value f1, or
    at depth_cap with value 0 — a documented truncation bias.  Branches whose
    cumulative weight exceeds 1e6 are aborted and counted.  This estimator is
    experimental: it fixes the mean-value structure only, so what boundary
    problem it solves for general f1 is reported, not asserted.
    """
    if not 0.0 < R_ratio < 1.0:
        raise ValueError("R_ratio must lie in (0, 1)")
    if not 1 <= depth_cap <= MAX_DEPTH_CAP:
        raise ValueError(f"depth_cap must be in [1, {MAX_DEPTH_CAP}]")
    x = as_point(x, dom.dim)
    if dom.distance(x[None, :])[0] <= 0:
        raise ValueError("start point must lie strictly inside the domain")
    alpha = 1.0 / (1.0 - R_ratio * R_ratio)
    beta = alpha - 1.0
    values = np.zeros(cfg.samples)
    depth_sum = np.zeros(cfg.samples)
    leaf_count = np.zeros(cfg.samples, dtype=np.int64)
    trunc = np.zeros(1, dtype=np.int64)

    # chunk sample ranges to bound the level-synchronous tree width
    chunk_size = max(1, (1 << 21) >> min(depth_cap, 20))
    n = dom.dim
    for lo in range(0, cfg.samples, chunk_size):
        hi = min(lo + chunk_size, cfg.samples)
        count = hi - lo
        pos = np.repeat(x[None, :], count, axis=0)
        sample = np.arange(lo, hi, dtype=np.uint64)
        node = np.ones(count, dtype=np.uint64)  # heap numbering, root = 1
        weight = np.ones(count)
        for depth in range(depth_cap + 1):
            if not sample.size:
                break
            d = dom.distance(pos)
            hit = d < cfg.eps_shell
            if np.any(hit):
                bp = dom.project(pos[hit])
                fv = eval_field(f1, bp)
                contrib = weight[hit] * fv
                rows = sample[hit].astype(np.int64)
                np.add.at(values, rows, contrib)
                np.add.at(depth_sum, rows, float(depth))
                np.add.at(leaf_count, rows, 1)
            keep = ~hit
            pos, sample, node, weight, d = (pos[keep], sample[keep],
                                            node[keep], weight[keep], d[keep])
            if not sample.size:
                break
            if depth == depth_cap:
                trunc[0] += sample.size  # value 0 at the cap
                break
            over = np.abs(weight) > 1e6
            if np.any(over):
                trunc[0] += int(over.sum())
                keep = ~over
                pos, sample, node, weight, d = (pos[keep], sample[keep],
                                                node[keep], weight[keep], d[keep])
                if not sample.size:
                    break
            child1 = node * np.uint64(2)
            child2 = child1 + np.uint64(1)
            key1 = rng.pack(rng.TAG_NESTED, (sample, _MAX_SAMPLES_BITS),
                            (child1, 26), (np.uint64(0), 6))
            key2 = rng.pack(rng.TAG_NESTED, (sample, _MAX_SAMPLES_BITS),
                            (child2, 26), (np.uint64(0), 6))
            d1 = rng.unit_vectors(cfg.seed, key1, n)
            d2 = rng.unit_vectors(cfg.seed, key2, n)
            pos = np.vstack([pos + (R_ratio * d)[:, None] * d1,
                             pos + d[:, None] * d2])
            sample = np.concatenate([sample, sample])
            node = np.concatenate([child1, child2])
            weight = np.concatenate([alpha * weight, -beta * weight])

    # truncated_walks counts pruned BRANCHES (cap hits and weight-guard
    # aborts); the documented truncation bias is part of this estimator's
    # contract, so no warning is raised here.
    steps = np.where(leaf_count > 0, depth_sum / np.maximum(leaf_count, 1), 0.0)
    return _finalize(values, steps, int(trunc[0]), None)

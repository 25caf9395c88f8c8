"""Area-tilted effective random walk bridges above a floor.

A bridge of width W is a height path (y_0, ..., y_W) with fixed endpoints,
increments drawn from an IncrementLaw with unit horizontal steps, weighted
by exp(-A/N) 1{y >= floor}, where the area functional A is the column sum
of (height - floor) (the cone-point interpolation; endpoint columns
contribute a constant and are included). The transfer recursion gives exact
column marginals and exact conditional sampling; a local-move MCMC sampler
is kept alongside and validated against the oracle rather than trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateInputError, InfeasibleError, ResourceLimitError,
                     StructureError)
from .fs import FSModel, ks_distance

ORACLE_MAX_WIDTH = 20
ORACLE_MAX_CAP = 40


@dataclass
class IncrementLaw:
    steps: list                   # [(dx, dy)] with dx > 0
    probs: np.ndarray
    source: str = "basic"
    truncated_mass: float = 0.0
    tail_rate: float = float("nan")

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.steps) != len(self.probs):
            raise StructureError("steps/probs length mismatch")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise StructureError("probabilities must sum to 1 within 1e-12")
        if any(dx <= 0 for dx, _ in self.steps):
            raise StructureError("x components must be strictly positive")

    @property
    def mean(self):
        mx = sum(p * dx for (dx, _), p in zip(self.steps, self.probs))
        my = sum(p * dy for (_, dy), p in zip(self.steps, self.probs))
        return (float(mx), float(my))

    @property
    def y_variance(self):
        my = self.mean[1]
        return float(sum(p * (dy - my) ** 2
                         for (_, dy), p in zip(self.steps, self.probs)))

    def y_symmetric(self, tol=1e-12):
        d = {tuple(s): p for s, p in zip(self.steps, self.probs)}
        return all(abs(p - d.get((dx, -dy), 0.0)) <= tol
                   for (dx, dy), p in d.items())

    def unit_step_projection(self):
        """Restriction to dx = 1 steps (renormalized), for bridge machinery.
        Returns (law, dropped_mass)."""
        keep = [(i, s) for i, s in enumerate(self.steps) if s[0] == 1]
        mass = float(sum(self.probs[i] for i, _ in keep))
        if mass <= 0:
            raise InfeasibleError("no unit-x steps to build a bridge from")
        law = IncrementLaw(steps=[s for _, s in keep],
                           probs=[self.probs[i] / mass for i, _ in keep],
                           source=self.source + "|unit-x",
                           truncated_mass=self.truncated_mass + (1.0 - mass))
        return law, 1.0 - mass


def basic_increment_law(q):
    """Three-step caricature of the low-temperature increments:
    (1,0) with 1-2q, (1,+-1) with q each; y-variance 2q."""
    if not 0 < q < 0.5:
        raise StructureError("need 0 < q < 1/2 (q = 0 degenerates to a "
                             "deterministic horizontal walk)")
    return IncrementLaw(steps=[(1, 0), (1, 1), (1, -1)],
                        probs=[1 - 2 * q, q, q], source=f"basic(q={q})")


def enumerated_increment_law(beta, n=0, p=2.0, k_max=8, extra_len=12):
    """Normalized irreducible-component weights from the polymer enumeration.

    Reports the truncated mass 1 - sum and a fit of the exponential tail of
    the |X|_1 mass profile. Status warning when more than 10% is truncated.
    """
    if k_max > 8:
        raise ResourceLimitError("k_max above the stated desk-scale cap of 8")
    from .polymer import irreducible_increment_weights
    law_w, total = irreducible_increment_weights(beta, k_max=k_max,
                                                 extra_len=extra_len)
    steps = sorted(law_w)
    probs = np.array([law_w[s] for s in steps]) / total
    trunc = 1.0 - total
    by_k = {}
    for (dx, dy), w in law_w.items():
        k = dx + abs(dy)
        by_k[k] = by_k.get(k, 0.0) + w / total
    ks = sorted(k for k in by_k if by_k[k] > 0)
    rate = float("nan")
    if len(ks) >= 2:
        xs = np.array(ks, dtype=float)
        ys = np.log([by_k[k] for k in ks])
        A = np.vstack([xs, np.ones_like(xs)]).T
        coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
        rate = -float(coef[0]) / beta   # mass ~ exp(-rate * beta * k)
    law = IncrementLaw(steps=[tuple(s) for s in steps], probs=probs,
                       source=f"enumerated(beta={beta},n={n},p={p},kmax={k_max})",
                       truncated_mass=trunc, tail_rate=rate)
    if trunc > 0.10:
        law.source += "|WARNING:truncated-mass>10%"
    return law


@dataclass
class TiltedBridgeSpec:
    u: tuple                      # (x, y) left endpoint
    v: tuple                      # (x, y) right endpoint
    floor: int
    tilt_N: float                 # area divisor; math.inf switches the tilt off
    law: IncrementLaw
    ceiling: int = None

    def __post_init__(self):
        if self.v[0] <= self.u[0]:
            raise StructureError("right endpoint must be strictly to the right")
        if self.u[1] < self.floor or self.v[1] < self.floor:
            raise InfeasibleError("floor above an endpoint")
        if self.ceiling is not None and (self.u[1] > self.ceiling
                                         or self.v[1] > self.ceiling):
            raise InfeasibleError("ceiling below an endpoint")

    @property
    def width(self):
        return self.v[0] - self.u[0]


def _unit_law(spec):
    law = spec.law
    if any(dx != 1 for dx, _ in law.steps):
        law, _ = law.unit_step_projection()
    dys = [dy for _, dy in law.steps]
    return dys, np.asarray(law.probs, dtype=float)


def _height_window(spec):
    lo = spec.floor
    if spec.ceiling is not None:
        hi = spec.ceiling
    else:
        dys, _ = _unit_law(spec)
        span = max(abs(d) for d in dys) * spec.width
        hi = max(spec.u[1], spec.v[1]) + span
    return lo, hi


def _forward_backward(spec, cap=None):
    """Forward/backward vectors of the tilted bridge on heights
    floor..floor+cap. Returns (fwd, bwd, heights, site_factor) with
    fwd[i] * bwd[i] proportional to the column-i marginal."""
    dys, probs = _unit_law(spec)
    lo, hi = _height_window(spec)
    if cap is not None:
        hi = min(hi, lo + cap)
    n_h = hi - lo + 1
    W = spec.width
    if spec.tilt_N == math.inf:
        site = np.ones(n_h)
    else:
        site = np.exp(-(np.arange(n_h)) / spec.tilt_N)
    T_rows = [(dy, p) for dy, p in zip(dys, probs)]
    fwd = np.zeros((W + 1, n_h))
    iu = spec.u[1] - lo
    iv = spec.v[1] - lo
    if not (0 <= iu < n_h and 0 <= iv < n_h):
        raise InfeasibleError("endpoint outside the height window")
    fwd[0, iu] = site[iu]
    for i in range(1, W + 1):
        acc = np.zeros(n_h)
        for dy, p in T_rows:
            if dy == 0:
                acc += p * fwd[i - 1]
            elif dy > 0:
                acc[dy:] += p * fwd[i - 1][:-dy]
            else:
                acc[:dy] += p * fwd[i - 1][-dy:]
        acc *= site
        m = acc.max()
        if m <= 0.0:
            raise InfeasibleError("endpoints infeasible under the step support")
        fwd[i] = acc / m
    bwd = np.zeros((W + 1, n_h))
    bwd[W, iv] = 1.0
    for i in range(W - 1, -1, -1):
        acc = np.zeros(n_h)
        nxt = bwd[i + 1] * site
        for dy, p in T_rows:
            if dy == 0:
                acc += p * nxt
            elif dy > 0:
                acc[:-dy] += p * nxt[dy:]
            else:
                acc[-dy:] += p * nxt[:dy]
        m = acc.max()
        if m <= 0.0:
            raise InfeasibleError("endpoints infeasible under the step support")
        bwd[i] = acc / m
    if fwd[W, iv] <= 0.0:
        raise InfeasibleError("endpoints infeasible under the step support")
    heights = np.arange(lo, hi + 1)
    return fwd, bwd, heights, site


def transfer_matrix_exact(spec: TiltedBridgeSpec, height_cap=None,
                          enforce_caps=True):
    """Exact column marginals of the tilted bridge by forward-backward
    accumulation over height states; each column normalized to 1 within
    1e-12.

    The oracle contract caps width at 20 and the height window at 40 states;
    pass enforce_caps=False for larger instances (same dense recursion).
    """
    if enforce_caps:
        if spec.width > ORACLE_MAX_WIDTH:
            raise ResourceLimitError(f"width {spec.width} > {ORACLE_MAX_WIDTH}")
        lo, hi = _height_window(spec)
        if height_cap is None and hi - lo + 1 > ORACLE_MAX_CAP:
            height_cap = ORACLE_MAX_CAP
        if height_cap is not None and height_cap > ORACLE_MAX_CAP:
            raise ResourceLimitError(f"height cap {height_cap} > {ORACLE_MAX_CAP}")
    fwd, bwd, heights, _ = _forward_backward(spec, cap=height_cap)
    marg = fwd * bwd
    sums = marg.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise InfeasibleError("zero-mass column; infeasible bridge")
    marg /= sums
    return heights, marg


def sample_tilted_bridge(spec: TiltedBridgeSpec, count, seed, method="auto",
                         height_cap=None, mcmc_sweeps_per_sample=4,
                         mcmc_burn_in=None):
    """Paths from the tilted bridge measure, shape (count, width+1).

    method 'enumerate' computes the full path distribution (short bridges),
    'transfer' samples exactly through the conditional chain of the
    forward-backward recursion (any width), 'mcmc' runs single-column
    Metropolis moves (validated against the oracle in the tests). 'auto'
    enumerates when the path space is tiny and otherwise uses 'transfer'.
    """
    if method == "auto":
        n_paths = len(spec.law.steps) ** min(spec.width, 24)
        method = "enumerate" if n_paths <= 100_000 else "transfer"
    if method == "enumerate":
        paths, weights = enumerate_bridge(spec)
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(weights), size=count, p=weights / weights.sum())
        return paths[idx], {"method": "enumerate", "n_paths": len(weights)}
    if method == "transfer":
        return _sample_transfer(spec, count, seed, height_cap), {"method": "transfer"}
    if method == "mcmc":
        return _sample_mcmc(spec, count, seed, mcmc_sweeps_per_sample,
                            mcmc_burn_in)
    raise StructureError(f"unknown sampling method {method!r}")


def enumerate_bridge(spec: TiltedBridgeSpec):
    """All feasible paths with their (unnormalized) weights; the brute-force
    oracle behind the oracle."""
    dys, probs = _unit_law(spec)
    W = spec.width
    if len(dys) ** W > 2_000_000:
        raise ResourceLimitError("path space too large to enumerate")
    paths = []
    weights = []
    y0 = spec.u[1]

    def rec(i, y, prob, area, path):
        if y < spec.floor or (spec.ceiling is not None and y > spec.ceiling):
            return
        path.append(y)
        if i == W:
            if y == spec.v[1]:
                paths.append(list(path))
                a = area + (y - spec.floor)
                tilt = 0.0 if spec.tilt_N == math.inf else a / spec.tilt_N
                weights.append(prob * math.exp(-tilt))
            path.pop()
            return
        for dy, p in zip(dys, probs):
            rec(i + 1, y + dy, prob * p, area + (y - spec.floor), path)
        path.pop()

    rec(0, y0, 1.0, 0.0, [])
    if not paths:
        raise InfeasibleError("no feasible path between the endpoints")
    return np.asarray(paths), np.asarray(weights)


def _sample_transfer(spec, count, seed, height_cap=None):
    dys, probs = _unit_law(spec)
    fwd, bwd, heights, site = _forward_backward(spec, cap=height_cap)
    n_h = len(heights)
    W = spec.width
    rng = np.random.default_rng(seed)
    n_steps = len(dys)
    # conditional cdf per column: C[i][y, j] ~ P(step j | y at column i)
    out = np.empty((count, W + 1), dtype=np.int64)
    y = np.full(count, spec.u[1] - heights[0], dtype=np.int64)
    out[:, 0] = y
    for i in range(W):
        nxt = bwd[i + 1] * site
        w = np.zeros((n_h, n_steps))
        for j, (dy, p) in enumerate(zip(dys, probs)):
            lo_t = max(0, dy)
            hi_t = n_h + min(0, dy)
            w[lo_t - dy:hi_t - dy, j] = p * nxt[lo_t:hi_t]
        cdf = np.cumsum(w, axis=1)
        tot = cdf[:, -1].copy()
        tot[tot == 0] = 1.0
        cdf /= tot[:, None]
        u = rng.random(count)
        rows = cdf[y]
        j = (u[:, None] > rows).sum(axis=1)
        y = y + np.asarray(dys)[j]
        out[:, i + 1] = y
    return out + heights[0]


def _sample_mcmc(spec, count, seed, sweeps_per_sample=4, burn_in=None):
    """Single-column +-1 Metropolis on the height path (for unit-step laws a
    corner flip is such a move). Irreducible: any path can reach the minimal
    one by monotone moves."""
    dys, probs = _unit_law(spec)
    pstep = {dy: p for dy, p in zip(dys, probs)}
    W = spec.width
    if W < 2:
        raise StructureError("bridge too narrow for MCMC moves")
    if burn_in is None:
        burn_in = 10 * W
    rng = np.random.default_rng(seed)
    y = _initial_path(spec, dys)
    tilt = 0.0 if spec.tilt_N == math.inf else 1.0 / spec.tilt_N
    samples = np.empty((count, W + 1), dtype=np.int64)
    accepts = proposals = 0
    mid_trace = np.empty(count)
    k = 0
    total_sweeps = burn_in + count * sweeps_per_sample
    for sweep in range(total_sweeps):
        cols = rng.integers(1, W, size=W - 1)
        eps = rng.choice((-1, 1), size=W - 1)
        us = rng.random(W - 1)
        for c, e, u in zip(cols, eps, us):
            ynew = y[c] + e
            if ynew < spec.floor or (spec.ceiling is not None and ynew > spec.ceiling):
                continue
            dl_old, dr_old = y[c] - y[c - 1], y[c + 1] - y[c]
            dl_new, dr_new = ynew - y[c - 1], y[c + 1] - ynew
            if dl_new not in pstep or dr_new not in pstep:
                continue
            ratio = (pstep[dl_new] * pstep[dr_new]) / (pstep[dl_old] * pstep[dr_old])
            ratio *= math.exp(-tilt * e)
            proposals += 1
            if u < ratio:
                y[c] = ynew
                accepts += 1
        if sweep >= burn_in and (sweep - burn_in) % sweeps_per_sample == 0 and k < count:
            samples[k] = y
            mid_trace[k] = y[W // 2]
            k += 1
    from .stats import integrated_autocorr_time
    diag = {"method": "mcmc",
            "acceptance_rate": accepts / max(proposals, 1),
            "midpoint_autocorr_samples": (integrated_autocorr_time(mid_trace[:k])
                                          if k >= 8 else float("nan"))}
    return samples[:k], diag


def _initial_path(spec, dys):
    """A feasible path: greedy walk toward the right endpoint."""
    W = spec.width
    y = np.empty(W + 1, dtype=np.int64)
    y[0] = spec.u[1]
    target = spec.v[1]
    up = max(dys)
    dn = min(dys)
    for i in range(1, W + 1):
        remaining = W - i
        cur = y[i - 1]
        best = None
        for dy in sorted(dys, key=lambda d: abs(target - (cur + d))):
            ny = cur + dy
            if ny < spec.floor or (spec.ceiling is not None and ny > spec.ceiling):
                continue
            if ny + dn * remaining <= target <= ny + up * remaining:
                best = ny
                break
        if best is None:
            raise InfeasibleError("no feasible path between the endpoints")
        y[i] = best
    if y[-1] != target:
        raise InfeasibleError("no feasible path between the endpoints")
    return y


def fs_comparison(paths, N, sigma, ts=(0.0, -0.5, 0.5, 0.75), min_samples=200):
    """KS of rescaled bridge marginals against the Ferrari-Spohn density.

    paths: (n, W+1) heights of bridges of width W >= 6 N^(2/3) above a wall
    at 0; heights rescale by N^(-1/3) and positions by N^(2/3) around the
    center. Returns {'ks': {t: value}, 'n': n, 'sigma': sigma, ...}.

    Convention note: the continuum law has a Dirichlet (killed) boundary at
    0, whose discrete analogue is a strictly positive walk. Feeding bridges
    with floor = 1 (heights in {1, 2, ...} above the wall row 0) removes the
    one-lattice-unit boundary layer that a floor-0 bridge carries; at desk
    scales that layer dominates the KS.
    """
    paths = np.asarray(paths)
    n, Wp1 = paths.shape
    if n < min_samples:
        raise DegenerateInputError(f"need at least {min_samples} paths")
    W = Wp1 - 1
    win = N ** (2.0 / 3.0)
    if W < 6 * win - 2:
        raise StructureError("bridge too narrow: need width >= 6 N^(2/3)")
    center = W // 2
    model = FSModel(sigma=sigma)
    scale = N ** (1.0 / 3.0)
    ks = {}
    for t in ts:
        col = center + int(round(t * win))
        if not 0 <= col <= W:
            raise StructureError(f"t={t} outside the bridge")
        ks[t] = ks_distance(paths[:, col] / scale, model)
    return {"ks": ks, "n": int(n), "sigma": sigma,
            "window_columns": int(round(2 * win)), "center": center}

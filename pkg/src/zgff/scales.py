"""Plateau-height scales: single-site height statistics of the no-floor
measure, H(L), the N_n sequence, the exceptional side-length set, and
large-deviation diagnostics.

H(L) is the largest h whose single-site probability still beats 5*beta/L;
N_n = 1/P(H-n) sets the (N^(2/3), N^(1/3)) fluctuation scales of the n-th
level line from the top. Side lengths in any interval [ceil(3/4 L_h), L_h],
L_h = ceil(5*beta/P(h)), sit at a plateau transition and are excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InfeasibleError, StructureError
from .stats import batch_means_ci, integrated_autocorr_time
from .surface import ModelParams, SurfaceConfig, build_boundary
from .mcmc import ChainState, run_chain


@dataclass
class HeightHistogram:
    p: float
    beta: float
    box_size: int
    probs: dict                  # h -> estimated probability
    n_samples: int
    ci_half: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def prob(self, h):
        return self.probs.get(int(h), 0.0)

    def tail_below(self, h):
        """P(phi_o < h) from the recorded histogram."""
        return sum(p for k, p in self.probs.items() if k < h)


def proxy_box_side(L):
    """Zero-boundary box side used as the infinite-volume proxy; decorrelation
    of the center from the boundary is exponential in the distance."""
    return max(64, int(4 * math.log(L) ** 2))


def estimate_height_prob(params: ModelParams, box_size, samples, seed,
                         thinning=2, burn_in=None) -> HeightHistogram:
    """Histogram of the center-site height under the no-floor measure with
    zero boundary on a box_size^2 box. CIs by batch means."""
    if box_size < 2 * math.log(max(box_size, 2)) ** 2:
        raise StructureError(f"box size {box_size} too small for the center "
                             "site to decorrelate from the boundary")
    if burn_in is None:
        burn_in = max(50, box_size)
    run_params = ModelParams(p=params.p, beta=params.beta)
    boundary = build_boundary(("all", 0), box_size)
    cfg = SurfaceConfig.flat(box_size, boundary=boundary)
    state = ChainState(config=cfg, seed=seed,
                       scan_order="checkerboard" if box_size >= 16 else "raster")
    mid = box_size // 2
    run_chain(state, run_params, burn_in)
    trace = np.empty(samples, dtype=np.int64)
    W = box_size + 2
    mid_flat = (mid + 1) * W + (mid + 1)
    k = 0

    def on_sweep(t, grid_or_cfg, interior):
        nonlocal k
        if (t - burn_in) % thinning != 0:
            return
        if k < samples:
            if interior is None:
                trace[k] = grid_or_cfg.heights[mid, mid]
            else:
                trace[k] = grid_or_cfg[mid_flat]
            k += 1

    run_chain(state, run_params, samples * thinning, on_sweep=on_sweep)
    trace = trace[:k]
    values, counts = np.unique(trace, return_counts=True)
    probs = {int(v): c / k for v, c in zip(values, counts)}
    ci = {}
    warnings = []
    for v, c in zip(values, counts):
        ind = (trace == v).astype(float)
        _, half = batch_means_ci(ind)
        ci[int(v)] = half
        if c < 25:
            warnings.append(f"height {int(v)}: only {int(c)} hits, CI unreliable")
    return HeightHistogram(p=params.p, beta=params.beta, box_size=box_size,
                           probs=probs, n_samples=int(k), ci_half=ci,
                           warnings=warnings)


@dataclass
class ScaleTable:
    L: int
    H: int
    N: list                      # N_n for n = 0..m-1
    L_h: dict                    # h -> L_h for every recorded h >= 1
    bad_intervals: list          # merged [(lo, hi)] integer intervals
    L_in_bad_set: bool
    threshold: float


def compute_scales(hist, L, m=1, beta=None, threshold_coefficient=5.0) -> ScaleTable:
    """H = max{h : P(h) >= c*beta/L}, N_n = 1/P(H-n), L_h = ceil(c*beta/P(h)),
    and the exceptional set union of [ceil(3 L_h / 4), L_h].

    hist may be a HeightHistogram (beta read from it) or a plain {h: prob}
    dict with beta passed explicitly. threshold_coefficient defaults to the
    standard 5 and is exposed only as an override.
    """
    if isinstance(hist, HeightHistogram):
        probs = hist.probs
        beta = hist.beta if beta is None else beta
    else:
        probs = {int(h): float(p) for h, p in hist.items()}
        if beta is None:
            raise StructureError("beta required with a plain probability dict")
    thr = threshold_coefficient * beta / L
    eligible = [h for h, p in probs.items() if p >= thr]
    if not eligible:
        raise InfeasibleError(f"no height reaches the threshold {thr:.3g}")
    H = max(eligible)
    hmax = max(probs)
    if probs.get(hmax, 0.0) >= thr:
        raise InfeasibleError(
            f"histogram truncated too aggressively: height {hmax + 1} missing "
            f"but P({hmax}) is still above the threshold")
    N = []
    for n in range(m):
        ph = probs.get(H - n, 0.0)
        if ph <= 0:
            raise InfeasibleError(f"no estimate for height {H - n} (needed for N_{n})")
        N.append(1.0 / ph)
    L_h = {h: int(math.ceil(threshold_coefficient * beta / probs[h]))
           for h in sorted(probs) if h >= 1 and probs[h] > 0}
    raw = [(int(math.ceil(0.75 * Lh)), Lh) for Lh in sorted(L_h.values())]
    bad = _merge_intervals(raw)
    in_bad = any(lo <= L <= hi for lo, hi in bad)
    return ScaleTable(L=L, H=H, N=N, L_h=L_h, bad_intervals=bad,
                      L_in_bad_set=in_bad, threshold=thr)


def _merge_intervals(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def bad_set_log_density(bad_intervals, n_grid=None):
    """(sum_{k in B, k <= n} 1/k) / log n over a grid of n.

    Defaults to evaluating at the interval right endpoints. The zero
    logarithmic density of the exceptional set shows up as this ratio
    trending down when P(h) decays super-exponentially.
    """
    if not bad_intervals:
        return [], []
    if n_grid is None:
        n_grid = [hi for _, hi in bad_intervals]
    n_grid = sorted(n_grid)
    ratios = []
    for n in n_grid:
        s = 0.0
        for lo, hi in bad_intervals:
            if lo > n:
                break
            top = min(hi, n)
            # sum_{k=lo}^{top} 1/k via digamma-free partial harmonic sums
            s += _harmonic(top) - _harmonic(lo - 1)
        ratios.append(s / math.log(n))
    return n_grid, ratios


def _harmonic(n):
    if n <= 0:
        return 0.0
    if n < 100:
        return sum(1.0 / k for k in range(1, n + 1))
    # Euler-Maclaurin, plenty for diagnostics
    return math.log(n) + 0.5772156649015329 + 1.0 / (2 * n) - 1.0 / (12 * n * n)


def ld_diagnostics(hist, p=None):
    """Ratios P(h)/P(h-1), monotone-decay check, and a rate fit.

    For p = 2 the fit is log P(h) ~ -c * h^2/log h (h >= 2); otherwise
    log P(h) ~ -c * h^(min(p, 2)). Reports fit quality, asserts nothing.
    """
    if isinstance(hist, HeightHistogram):
        probs = {h: v for h, v in hist.probs.items() if h >= 0 and v > 0}
        if p is None:
            p = hist.p
    else:
        probs = {int(h): float(v) for h, v in hist.items() if v > 0 and int(h) >= 0}
        if p is None:
            p = 2.0
    hs = sorted(probs)
    if len(hs) < 3:
        return {"status": "insufficient", "n_heights": len(hs)}
    ratios = {}
    for h in hs:
        if h - 1 in probs and h >= 1:
            ratios[h] = probs[h] / probs[h - 1]
    rvals = [ratios[h] for h in sorted(ratios)]
    monotone = all(a > b for a, b in zip(rvals, rvals[1:])) if len(rvals) >= 2 else None

    if p == 2:
        pts = [(h * h / math.log(h), math.log(probs[h])) for h in hs if h >= 2]
    else:
        pts = [(h ** min(p, 2.0), math.log(probs[h])) for h in hs if h >= 1]
    fit = None
    if len(pts) >= 2:
        x = np.array([a for a, _ in pts])
        y = np.array([b for _, b in pts])
        A = np.vstack([x, np.ones_like(x)]).T
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        yhat = A @ coef
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot if ss_tot > 0 else 1.0
        fit = {"rate": -float(coef[0]), "intercept": float(coef[1]), "r_squared": r2,
               "x_form": "h^2/log h" if p == 2 else f"h^{min(p, 2.0):g}"}
    return {"status": "ok", "ratios": ratios, "ratios_strictly_decreasing": monotone,
            "fit": fit, "n_heights": len(hs)}


def floor_probability_check(params: ModelParams, f_side, h, samples, seed,
                            hist: HeightHistogram = None, box_size=None):
    """Compare P(phi >= -h on an f_side^2 region F) under the no-floor
    zero-boundary measure against exp(-P(phi_o < -h) |F|).

    Returns a dict with lhs, rhs, ratio and a CI for lhs; status 'too-rare'
    when the event never varies enough to estimate.
    """
    if f_side * f_side > 400:
        raise StructureError("|F| above the stated desk-scale limit of 400")
    if box_size is None:
        box_size = max(f_side + 8, 24)
    if hist is None:
        hist = estimate_height_prob(params, box_size, max(2000, samples), seed + 1)
    tail = hist.tail_below(-h)
    rhs = math.exp(-tail * f_side * f_side)

    boundary = build_boundary(("all", 0), box_size)
    cfg = SurfaceConfig.flat(box_size, boundary=boundary)
    state = ChainState(config=cfg, seed=seed,
                       scan_order="checkerboard" if box_size >= 16 else "raster")
    run_chain(state, ModelParams(p=params.p, beta=params.beta), max(50, box_size))
    lo = (box_size - f_side) // 2
    hits = np.zeros(samples, dtype=bool)
    thinning = 2
    k = 0

    def on_sweep(t, grid_or_cfg, interior):
        nonlocal k
        if t % thinning != 0 or k >= samples:
            return
        if interior is None:
            block = grid_or_cfg.heights[lo:lo + f_side, lo:lo + f_side]
        else:
            arr = np.asarray(grid_or_cfg, dtype=np.int64).reshape(box_size + 2, box_size + 2)
            block = arr[lo + 1:lo + 1 + f_side, lo + 1:lo + 1 + f_side]
        hits[k] = bool((block >= -h).all())
        k += 1

    run_chain(state, ModelParams(p=params.p, beta=params.beta),
              samples * thinning, on_sweep=on_sweep)
    lhs = float(hits[:k].mean())
    if f_side == 0:
        return {"lhs": 1.0, "rhs": 1.0, "ratio": 1.0, "status": "ok", "ci": (1.0, 1.0)}
    if lhs == 0.0:
        return {"lhs": 0.0, "rhs": rhs, "ratio": 0.0, "status": "too-rare",
                "ci": (0.0, 0.0)}
    se = math.sqrt(max(lhs * (1 - lhs), 1.0 / k) / k)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "status": "ok",
            "ci": (max(0.0, lhs - 1.96 * se), min(1.0, lhs + 1.96 * se)),
            "tail": tail, "n": int(k)}

"""Surface tension of the directed polymer ensemble, Wulff geometry, and the
closed-form droplet-growth evaluators.

The tension is minus the per-unit-L1-length exponential rate of the polymer
partition function between two points. The estimator here evaluates that
partition function exactly by a transfer recursion over column states for
the truncated ensemble: simple x-monotone paths with unit gradients and all
cluster decorations zero (higher gradients and backtracking blobs cost at
least e^(-2 beta) each and sit below the resolution of every consumer).
Under this truncation the estimate does not depend on the level index n or
the gradient exponent p; both are still recorded in the output table.

A path from (0,0) to (M, Y) is M horizontal bonds plus one free vertical run
per column 0..M, so exp(beta M) Z(M, Y) is the (M+1)-fold convolution of the
discrete Laplace kernel exp(-beta |r|) evaluated at Y. The finite-size form
log Z = -tau * l1 - (1/2) log M + O(1) (the local-CLT prefactor) is used for
extrapolation and checked as an invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InfeasibleError, StructureError


def log_partition_directed(M, Y, beta):
    """log Z(M, Y) for the truncated ensemble, exact up to kernel tail 1e-30."""
    if M < 1:
        raise StructureError("need at least one column step")
    w = int(math.ceil(70.0 / beta)) + 1
    R = abs(Y) + w + 2
    kernel = np.exp(-beta * np.abs(np.arange(-w, w + 1, dtype=float)))
    v = np.zeros(2 * R + 1)
    v[R] = 1.0
    log_scale = 0.0
    for _ in range(M + 1):
        v = np.convolve(v, kernel, mode="same")
        m = v.max()
        v /= m
        log_scale += math.log(m)
    val = v[R + Y]
    if val <= 0:
        raise InfeasibleError("partition value underflow; increase kernel width")
    return -beta * M + log_scale + math.log(val)


def tension_l1_axis(beta):
    """Closed-form tau_l1(0) of the truncated ensemble:
    beta - log coth(beta/2), from the saddle point of the run generating
    function. Used to normalize irreducible-increment weights."""
    t = math.exp(-beta)
    return beta - math.log((1.0 + t) / (1.0 - t))


@dataclass
class TensionEntry:
    theta: float
    tau: float          # per unit Euclidean length
    tau_l1: float       # per unit L1 length
    ci: float
    sizes: tuple
    direction: tuple    # primitive (q, r) with the transfer applied natively


@dataclass
class TensionTable:
    beta: float
    n: int
    p: float
    entries: list = field(default_factory=list)

    def theta_grid(self):
        return [e.theta for e in self.entries]

    def tau_of_theta(self, theta):
        """Periodic interpolation of tau (Euclidean normalization) using the
        dihedral symmetry of the lattice."""
        th = _fold_angle(theta)
        grid = [(e.theta, e.tau) for e in self.entries]
        grid.sort()
        ts = [g[0] for g in grid]
        vs = [g[1] for g in grid]
        if th <= ts[0]:
            return vs[0]
        if th >= ts[-1]:
            return vs[-1]
        j = np.searchsorted(ts, th)
        t0, t1 = ts[j - 1], ts[j]
        lam = (th - t0) / (t1 - t0)
        return (1 - lam) * vs[j - 1] + lam * vs[j]


def _fold_angle(theta):
    """Fold an angle into [0, pi/4] by the dihedral symmetries."""
    th = math.fmod(theta, math.pi / 2.0)
    if th < 0:
        th += math.pi / 2.0
    if th > math.pi / 4.0:
        th = math.pi / 2.0 - th
    return th


def estimate_tension(beta, direction, sizes=None, n=0, p=2.0):
    """Tension in one direction from the exact transfer, with a finite-size
    fit z_k = tau * l1_k + C + D / k (z_k = -log Z - 0.5 log M).

    direction: primitive integer (q, r) with 0 <= r <= q (fold first for
    other angles). sizes: multiples k of the primitive step to evaluate.
    """
    q, r = direction
    if not (0 <= r <= q and q >= 1):
        raise StructureError("direction must satisfy 0 <= r <= q, q >= 1")
    if sizes is None:
        hi = max(4, int(round(96 / q)))
        step = max(1, hi // 6)
        sizes = tuple(range(max(2, hi // 4), hi + 1, step))
    if len(sizes) < 3:
        raise StructureError("need at least three sizes to extrapolate")
    zs = []
    l1s = []
    for k in sizes:
        M, Y = q * k, r * k
        z = -log_partition_directed(M, Y, beta) - 0.5 * math.log(M)
        zs.append(z)
        l1s.append(M + abs(Y))
    zs = np.asarray(zs)
    l1s = np.asarray(l1s, dtype=float)
    # last step slope, with a Richardson pair (slope ~ tau + c/M) giving the
    # uncertainty bracket
    s_last = (zs[-1] - zs[-2]) / (l1s[-1] - l1s[-2])
    s_prev = (zs[-2] - zs[-3]) / (l1s[-2] - l1s[-3])
    m_last = 0.5 * (l1s[-1] + l1s[-2])
    m_prev = 0.5 * (l1s[-2] + l1s[-3])
    rich = (m_last * s_last - m_prev * s_prev) / (m_last - m_prev)
    tau_l1 = float(s_last)
    ci = float(abs(rich - s_last) + abs(s_last - s_prev))
    theta = math.atan2(r, q)
    scale = (abs(math.cos(theta)) + abs(math.sin(theta)))
    return TensionEntry(theta=theta, tau=tau_l1 * scale, tau_l1=tau_l1,
                        ci=ci, sizes=tuple(sizes), direction=(q, r))


DEFAULT_DIRECTIONS = ((1, 0), (8, 1), (6, 1), (4, 1), (3, 1), (8, 3),
                      (2, 1), (5, 3), (4, 3), (8, 7), (1, 1))


def tension_table(beta, directions=DEFAULT_DIRECTIONS, sizes=None, n=0, p=2.0):
    table = TensionTable(beta=beta, n=n, p=p)
    for d in directions:
        table.entries.append(estimate_tension(beta, d, sizes=sizes, n=n, p=p))
    return table


def finite_size_drift(beta, direction=(1, 0), sizes=range(4, 65, 4)):
    """The sequence log Z + tau*l1 + 0.5 log M over the enumerated range;
    its spread being O(1)-bounded is the finite-size invariant."""
    ent = estimate_tension(beta, direction)
    seq = []
    q, r = direction
    for k in sizes:
        M, Y = q * k, r * k
        seq.append(log_partition_directed(M, Y, beta)
                   + ent.tau_l1 * (M + abs(Y)) + 0.5 * math.log(M))
    return np.asarray(seq)


# ---------------------------------------------------------------------------
# Wulff geometry


def wulff_shape(angles, taus, check_convex=True):
    """Convex body from halfplanes {h : h . n(theta) <= tau(theta)} over the
    full circle; returns the vertex list (closed, counterclockwise).

    tau values are per unit Euclidean normal. Raises on a table whose
    homogeneous extension is not convex (an inactive constraint).
    """
    angles = np.asarray(angles, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if len(angles) < 16:
        raise StructureError("need tau sampled on at least 16 angles")
    if np.any(taus <= 0):
        raise InfeasibleError("tension must be positive")
    order = np.argsort(angles)
    angles = angles[order]
    taus = taus[order]
    n = len(angles)
    verts = []
    for i in range(n):
        j = (i + 1) % n
        p = _line_intersect(angles[i], taus[i], angles[j], taus[j])
        verts.append(p)
    # prune: every vertex must satisfy all constraints
    out = []
    for v in verts:
        if all(v[0] * math.cos(t) + v[1] * math.sin(t) <= tau * (1 + 1e-9) + 1e-12
               for t, tau in zip(angles, taus)):
            out.append(v)
    if len(out) < 3:
        raise InfeasibleError("tension table produced a degenerate body")
    if check_convex:
        # every halfplane must touch the body: support(theta) == tau(theta)
        for t, tau in zip(angles, taus):
            support = max(v[0] * math.cos(t) + v[1] * math.sin(t) for v in out)
            if support < tau * (1 - 1e-6) - 1e-12:
                raise InfeasibleError(
                    f"constraint at theta={t:.4f} inactive: input table is not "
                    "the restriction of a convex support function")
    return out


def wulff_from_table(table: TensionTable):
    """Wulff body straight from an estimated tension table: the [0, pi/4]
    entries are unfolded over the full circle by the dihedral symmetries."""
    full = {}
    for e in table.entries:
        for k in range(4):
            for s in (1, -1):
                ang = (s * e.theta + k * math.pi / 2.0) % (2.0 * math.pi)
                full[round(ang, 12)] = e.tau
    angles = np.array(sorted(full))
    return wulff_shape(angles, np.array([full[a] for a in angles]))


def _line_intersect(t1, tau1, t2, tau2):
    a = np.array([[math.cos(t1), math.sin(t1)], [math.cos(t2), math.sin(t2)]])
    b = np.array([tau1, tau2])
    return tuple(np.linalg.solve(a, b))


def polygon_area(verts):
    s = 0.0
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        s += x0 * y1 - x1 * y0
    return 0.5 * abs(s)


def polygon_perimeter(verts):
    return sum(math.hypot(x1 - x0, y1 - y0)
               for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]))


def unit_wulff(verts):
    """Rescale a Wulff body to unit area."""
    s = 1.0 / math.sqrt(polygon_area(verts))
    return [(x * s, y * s) for (x, y) in verts]


def wulff_functional_w1(verts_unit, tau_of_theta):
    """w1 = integral of tau(normal direction) over the unit-area boundary,
    edge by edge."""
    w1 = 0.0
    m = len(verts_unit)
    for i in range(m):
        x0, y0 = verts_unit[i]
        x1, y1 = verts_unit[(i + 1) % m]
        ex, ey = x1 - x0, y1 - y0
        length = math.hypot(ex, ey)
        if length == 0:
            continue
        theta_n = math.atan2(ex, -ey)  # outward normal for ccw orientation
        w1 += tau_of_theta(theta_n) * length
    return w1


def _convex_hull(points):
    """Andrew monotone chain; returns ccw hull without the repeated point."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and (
                    (out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                    - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return lower[:-1] + upper[:-1]


def shape_union(verts_unit, ell, r, square=1.0):
    """Union of all translates of ell * (unit Wulff body) inside the square
    [0, s]^2, dilated by (1 + r): flat sides with Wulff arcs at the corners.

    Computed as the Minkowski sum of the admissible-center rectangle with
    the scaled body (the union of translates of a convex body K inside S is
    (S eroded by K) + K). Returns the ccw vertex list; raises when the body
    does not fit.
    """
    K = [(ell * x, ell * y) for (x, y) in verts_unit]
    wx_hi = max(x for x, _ in K)
    wx_lo = -min(x for x, _ in K)
    wy_hi = max(y for _, y in K)
    wy_lo = -min(y for _, y in K)
    if wx_hi + wx_lo >= square or wy_hi + wy_lo >= square:
        raise InfeasibleError("scaled body does not fit inside the square")
    centers = [(wx_lo, wy_lo), (square - wx_hi, wy_lo),
               (square - wx_hi, square - wy_hi), (wx_lo, square - wy_hi)]
    sums = [(cx + kx, cy + ky) for (cx, cy) in centers for (kx, ky) in K]
    hull = _convex_hull(sums)
    return [((1.0 + r) * x, (1.0 + r) * y) for (x, y) in hull]


def wulff_midpoint_drop(d, theta, tau, tau_second, w1):
    """Vertical sagitta of a chord of length d at angle theta on the
    unit-area Wulff boundary, to leading order:
    w1 d^2 / (16 (tau + tau'') cos theta). The 1 + O(d^2) bracket is the
    caller's to remember."""
    if tau + tau_second <= 0:
        raise InfeasibleError("tau + tau'' must be positive (strict convexity)")
    return w1 * d * d / (16.0 * (tau + tau_second) * math.cos(theta))


def growth_gadget_params(N_n, a, theta, tau, tau_second, L):
    """The (Y, sigma^2) pair of the droplet-growth estimate:
    Y = -N^(1/3) (log L)^(2a) / (8 (tau+tau'') cos^3 theta),
    sigma^2 = N^(2/3) (log L)^a / (4 (tau+tau'') cos^3 theta)."""
    if tau + tau_second <= 0:
        raise InfeasibleError("tau + tau'' must be positive")
    if not 0 <= theta <= math.pi / 4:
        raise StructureError("theta outside [0, pi/4]")
    denom = (tau + tau_second) * math.cos(theta) ** 3
    logL = math.log(L)
    Y = -N_n ** (1.0 / 3.0) * logL ** (2 * a) / (8.0 * denom)
    sigma2 = N_n ** (2.0 / 3.0) * logL ** a / (4.0 * denom)
    return Y, sigma2


def g_mu(ell, theta, mu, N_n, tau, tau_second):
    """-tau(theta) ell + ell^3 mu^2 / (24 (tau+tau'') N_n^2)."""
    if tau + tau_second <= 0:
        raise InfeasibleError("tau + tau'' must be positive")
    return -tau * ell + ell ** 3 * mu ** 2 / (24.0 * (tau + tau_second) * N_n ** 2)


def ell_n(w1, N_n, L, delta=0.1):
    """Starting Wulff radius of the growth procedure: w1 N_n / (2 (1-delta) L)."""
    return w1 * N_n / (2.0 * (1.0 - delta) * L)


def kappa_nb(N_n, L, b):
    """Shrink margin per growth round: N_n^(1/3) (log L)^b / L."""
    return N_n ** (1.0 / 3.0) * math.log(L) ** b / L

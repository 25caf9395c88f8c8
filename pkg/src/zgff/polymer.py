"""Disagreement polymers, cone points, and irreducible decomposition.

A disagreement polymer is a maximal connected component (in the dual graph)
of bonds dual to edges with nonzero height gradient. Gradients follow the
north/west convention: across a vertical site-edge the gradient is
phi(north) - phi(south); across a horizontal site-edge it is
phi(west) - phi(east). The complement of a polymer splits into regions D_i
whose inner *-boundary carries a single label h_i.

Cone points use closed unit cones: m is a cone point of a point set P with
m in P iff |q_y - m_y| <= |q_x - m_x| for every q in P. Decomposing at cone
points yields irreducible pieces whose weights multiply exactly because the
truncated energy is bond additive (all cluster-expansion decorations are
set to zero in this artifact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, StructureError
from .surface import ModelParams, SurfaceConfig


def disagreement_gradients(config: SurfaceConfig):
    """bond -> signed gradient for every disagreement dual bond, including
    edges whose endpoints are both boundary-ring sites (a split-arc boundary
    has its disagreements there).

    Bond encoding matches levellines: (a, b, 'v') separates sites
    (a-1, b) | (a, b) (dual to a horizontal site-edge; gradient west - east),
    (a, b, 'h') separates (a, b-1) | (a, b) (vertical site-edge; gradient
    north - south).
    """
    L = config.L
    g = config.padded()
    grads = {}
    for a in range(L + 1):
        for b in range(-1, L + 1):
            d = int(g[a, b + 1] - g[a + 1, b + 1])  # west - east
            if d:
                grads[(a, b, "v")] = d
    for a in range(-1, L + 1):
        for b in range(L + 1):
            d = int(g[a + 1, b + 1] - g[a + 1, b])  # north - south
            if d:
                grads[(a, b, "h")] = d
    return grads


def _bond_endpoints(bond):
    a, b, d = bond
    return ((a, b), (a + 1, b)) if d == "h" else ((a, b), (a, b + 1))


def _bond_cut_pair(bond):
    """The two sites separated by a bond."""
    a, b, d = bond
    if d == "v":
        return (a - 1, b), (a, b)
    return (a, b - 1), (a, b)


@dataclass
class LabeledPolymer:
    bonds: dict                   # bond -> gradient
    regions: list                 # [(frozenset of sites, label h_i)]
    length_N: int                 # sum |gradient|
    energy: float                 # beta * sum |gradient|^p
    touches_boundary: bool

    @property
    def n_bonds(self):
        return len(self.bonds)

    def points(self):
        pts = set()
        for bond in self.bonds:
            pts.update(_bond_endpoints(bond))
        return pts


def extract_polymers(config: SurfaceConfig, params: ModelParams):
    """Maximal connected components of the disagreement bonds, with their
    labeled complement regions."""
    grads = disagreement_gradients(config)
    comp_of = {}
    comps = []
    incident = {}
    for bond in grads:
        for c in _bond_endpoints(bond):
            incident.setdefault(c, []).append(bond)
    for bond in grads:
        if bond in comp_of:
            continue
        cid = len(comps)
        stack = [bond]
        comp_of[bond] = cid
        members = []
        while stack:
            cur = stack.pop()
            members.append(cur)
            for c in _bond_endpoints(cur):
                for nxt in incident[c]:
                    if nxt not in comp_of:
                        comp_of[nxt] = cid
                        stack.append(nxt)
        comps.append(members)

    L = config.L
    out = []
    for members in comps:
        cut = set()
        for bond in members:
            cut.add(frozenset(_bond_cut_pair(bond)))
        regions = _complement_regions(config, cut)
        labeled = []
        poly_sites = set()
        for bond in members:
            poly_sites.update(_bond_cut_pair(bond))
        for region in regions:
            touching = [s for s in region if s in poly_sites]
            if not touching:
                continue
            labels = {config.height_at(*s) for s in touching}
            if len(labels) != 1:
                raise StructureError("region label not constant; polymer not maximal?")
            labeled.append((frozenset(region), labels.pop()))
        length_N = sum(abs(v) for v in (grads[b] for b in members))
        energy = params.beta * sum(abs(grads[b]) ** params.p for b in members)
        touches = any(x in (-1, L) or y in (-1, L)
                      for b in members for (x, y) in _bond_cut_pair(b))
        out.append(LabeledPolymer(bonds={b: grads[b] for b in members},
                                  regions=labeled, length_N=int(length_N),
                                  energy=float(energy), touches_boundary=touches))
    return out


def _complement_regions(config, cut_pairs):
    """Connected components of (interior + ring) sites with the polymer's
    dual edges removed."""
    L = config.L
    all_sites = set()
    for x in range(-1, L + 1):
        for y in range(-1, L + 1):
            if 0 <= x < L and 0 <= y < L:
                all_sites.add((x, y))
            elif (x in (-1, L)) != (y in (-1, L)):
                all_sites.add((x, y))
            elif x in (-1, L) and y in (-1, L):
                all_sites.add((x, y))  # corners ride along; they have no bonds
    seen = set()
    regions = []
    for s in sorted(all_sites):
        if s in seen:
            continue
        stack = [s]
        seen.add(s)
        region = []
        while stack:
            cur = stack.pop()
            region.append(cur)
            x, y = cur
            for nxt in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
                if nxt in all_sites and nxt not in seen \
                        and frozenset((cur, nxt)) not in cut_pairs:
                    seen.add(nxt)
                    stack.append(nxt)
        regions.append(region)
    return regions


def cone_points(obj, endpoints=None):
    """All points m of a polymer/path/point set such that the whole set lies
    in the closed forward-and-backward unit cones of m; sorted by x.

    A point sharing its column with any other point of the set is never a
    cone point (the closed cone forces |dy| <= 0 there).
    """
    pts = _as_points(obj)
    pts_sorted = sorted(pts)
    out = []
    for m in pts_sorted:
        mx, my = m
        ok = True
        for q in pts_sorted:
            if q == m:
                continue
            if abs(q[1] - my) > abs(q[0] - mx):
                ok = False
                break
        if ok:
            out.append(m)
    return out


def _as_points(obj):
    if isinstance(obj, LabeledPolymer):
        return obj.points()
    if isinstance(obj, DualPath):
        return set(obj.points)
    pts = set()
    for item in obj:
        if isinstance(item, tuple) and len(item) == 3 and item[2] in ("h", "v"):
            pts.update(_bond_endpoints(item))
        else:
            pts.add((int(item[0]), int(item[1])))
    return pts


@dataclass
class DualPath:
    """An x-monotone simple path of dual bonds, stored as its corner list."""

    points: list                  # ordered corners, first = A (left), last = B

    @property
    def n_bonds(self):
        return len(self.points) - 1

    @property
    def displacement(self):
        return (self.points[-1][0] - self.points[0][0],
                self.points[-1][1] - self.points[0][1])

    def bonds(self):
        out = []
        for p, q in zip(self.points, self.points[1:]):
            if q[0] == p[0] + 1:
                out.append((p[0], p[1], "h"))
            elif q[0] == p[0]:
                out.append((p[0], min(p[1], q[1]), "v"))
            else:
                raise StructureError("path is not x-monotone")
        return out


@dataclass
class AnimalDecomposition:
    status: str                   # 'ok' | 'not-decomposable'
    cone_points: list
    components: list              # [(DualPath piece, displacement)], left to right

    def concatenated_points(self):
        pts = []
        for piece, _ in self.components:
            pts.extend(piece.points if not pts else piece.points[1:])
        return pts


def decompose(path: DualPath) -> AnimalDecomposition:
    """Split a path at every cone point. Weight multiplicativity across the
    cuts is exact for the decoration-free weights (energy is bond additive
    and no enclosed region crosses a cut column)."""
    cpts = cone_points(path)
    if len(cpts) < 2:
        return AnimalDecomposition(status="not-decomposable", cone_points=cpts,
                                   components=[])
    pieces = []
    idx = {p: i for i, p in enumerate(path.points)}
    cut_indices = sorted(idx[c] for c in cpts if c in idx)
    bounds = [0] + cut_indices + [len(path.points) - 1]
    bounds = sorted(set(bounds))
    for i0, i1 in zip(bounds, bounds[1:]):
        seg = path.points[i0:i1 + 1]
        piece = DualPath(points=seg)
        pieces.append((piece, (seg[-1][0] - seg[0][0], seg[-1][1] - seg[0][1])))
    return AnimalDecomposition(status="ok", cone_points=cpts, components=pieces)


def path_weight(path: DualPath, beta, p=2.0, gradient=1):
    """exp(-E*) for a simple path with unit gradients: E* = beta * n_bonds
    (|gradient| = 1 across a simple-path polymer with adjacent labels)."""
    return math.exp(-beta * path.n_bonds * abs(gradient) ** p)


def enumerate_irreducible(beta, k_max=8, extra_len=12):
    """All irreducible x-monotone pieces with |X|_1 <= k_max.

    A piece runs from (0, 0) to (dx, dy), stays in the closed forward cone of
    its start and backward cone of its end, and has no interior cone points.
    Vertical runs are single-direction per column (simple path) and total
    length is capped at |X|_1 + extra_len (weight below e^(-beta*extra_len)
    is discarded, recorded as truncated mass by the caller).

    Returns {(dx, dy): [(n_bonds, multiplicity), ...]}.
    """
    out = {}
    for dx in range(1, k_max + 1):
        for dy in range(-(k_max - dx), k_max - dx + 1):
            if abs(dy) > dx:
                continue
            paths = _paths_in_cones(dx, dy, dx + abs(dy) + extra_len)
            counts = {}
            for pts in paths:
                if _has_interior_cone_point(pts):
                    continue
                nb = len(pts) - 1
                counts[nb] = counts.get(nb, 0) + 1
            if counts:
                out[(dx, dy)] = sorted(counts.items())
    return out


def _paths_in_cones(dx, dy, max_bonds):
    """x-monotone corner sequences (0,0) -> (dx,dy) inside both cones.

    A column holds at most one single-direction vertical run (simple path);
    the forward cone pins y = 0 at column 0 and the backward cone pins
    y = dy at column dx, so runs only occur at interior columns.
    """
    results = []

    def ok(x, y):
        return abs(y) <= x and abs(y - dy) <= dx - x

    def rec(x, y, pts, n_bonds):
        if x == dx:
            if y == dy:
                results.append(pts)
            return
        if n_bonds + 1 <= max_bonds and ok(x + 1, y):
            rec(x + 1, y, pts + [(x + 1, y)], n_bonds + 1)
        if x > 0:
            for sgn in (1, -1):
                run = []
                yy = y
                while True:
                    yy += sgn
                    if not ok(x, yy):
                        break
                    run.append((x, yy))
                    nb = n_bonds + len(run) + 1
                    if nb > max_bonds:
                        break
                    if ok(x + 1, yy):
                        rec(x + 1, yy, pts + run + [(x + 1, yy)], nb)

    rec(0, 0, [(0, 0)], 0)
    return results


def _has_interior_cone_point(pts):
    for m in pts[1:-1]:
        mx, my = m
        if all(abs(q[1] - my) <= abs(q[0] - mx) for q in pts if q != m):
            return True
    return False


def region_floor_factor(region_sites, h_label, beta, p=2.0,
                        tail_below_zero=None, exact_max_sites=6,
                        height_halfwidth=4):
    """P(phi >= 0 everywhere) for the no-floor measure on a small enclosed
    region whose outer boundary sits at the constant label h_label.

    region_sites: coordinates of the region's sites; every neighbor outside
    the set is treated as fixed at h_label. Exact enumeration (heights
    within +-height_halfwidth of the label, a 1e-12-level truncation at
    beta >= 1) up to exact_max_sites sites; the exp(-P(phi_o < 0) * n)
    surrogate beyond. Larger regions only arise from polymers whose energy
    already suppresses them below every statistical resolution used here.
    """
    sites = sorted(set(map(tuple, region_sites)))
    n = len(sites)
    if n == 0:
        return 1.0
    if n > exact_max_sites:
        if tail_below_zero is None:
            raise StructureError("surrogate needs the single-site tail "
                                 "P(phi_o < 0)")
        return math.exp(-tail_below_zero * n)
    index = {s: i for i, s in enumerate(sites)}
    internal = []
    external_count = np.zeros(n)
    for s in sites:
        x, y = s
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in index:
                internal.append((index[s], index[nb]))
        for nb in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
            if nb not in index:
                external_count[index[s]] += 1
    vals = np.arange(h_label - height_halfwidth, h_label + height_halfwidth + 1)
    grids = np.meshgrid(*([vals] * n), indexing="ij")
    heights = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    energy = (np.abs(heights - h_label) ** p) @ external_count
    for i, j in internal:
        energy += np.abs(heights[:, i] - heights[:, j]) ** p
    w = np.exp(-beta * energy)
    return float(w[(heights >= 0).all(axis=1)].sum() / w.sum())


def irreducible_increment_weights(beta, k_max=8, extra_len=12, tension_l1=None):
    """Normalized irreducible-component weights e^(h.X) q(Gamma).

    h = grad tau at (1, 0) is (tau_l1(0), 0) for the truncated model, so a
    piece of displacement (dx, dy) and n bonds carries weight
    exp(tau_l1(0) * dx - beta * n). Returns (law dict {X: prob-mass}, total),
    where total <= 1 is the truncated OZ normalization sum.
    """
    if tension_l1 is None:
        from .tension import tension_l1_axis
        tension_l1 = tension_l1_axis(beta)
    table = enumerate_irreducible(beta, k_max=k_max, extra_len=extra_len)
    law = {}
    for (dx, dy), counts in table.items():
        w = sum(mult * math.exp(tension_l1 * dx - beta * nb) for nb, mult in counts)
        law[(dx, dy)] = w
    total = sum(law.values())
    return law, total

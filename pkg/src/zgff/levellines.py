"""Level-line extraction on the dual lattice.

The h level-line set of a configuration is the set of bonds dual to
nearest-neighbor edges (u, v) with phi_u < h <= phi_v, including edges into
the boundary ring. With sites as unit cells, dual vertices (corners) are the
integer points of [0, L]^2. A bond is encoded (a, b, 'h') for the segment
(a, b)-(a+1, b) or (a, b, 'v') for (a, b)-(a, b+1).

Corners of degree 4 (the four cells around them alternate high/low) are
resolved by the northeast rule: the two strands are split apart along the
northeast diagonal, i.e. the bond arriving from the west joins the one
leaving north, and the east bond joins the south one. Equivalently, cells
at or above h stay *-connected across a northeast-diagonal contact and the
low cells on the other diagonal are shielded. Only degrees 0, 2, 4 occur
for a fixed level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, StructureError
from .surface import SurfaceConfig


@dataclass
class LevelLoop:
    """A closed non-self-crossing circuit of dual bonds at one level."""

    level: int
    bonds: list                 # [(a, b, 'h'|'v'), ...] in traversal order
    length: int
    interior_area: int
    macroscopic: bool
    _row_intervals: dict = field(default=None, repr=False)

    def interior_cells(self):
        """Set of cells (sites) enclosed, by even-odd ray casting per row."""
        cells = set()
        for b, intervals in self.row_intervals().items():
            for a0, a1 in intervals:
                for x in range(a0, a1):
                    cells.add((x, b))
        return cells

    def row_intervals(self):
        """Per cell-row b, the [a0, a1) column intervals of interior cells.

        A cell (x, b) is interior iff an odd number of the loop's vertical
        bonds (a, b, 'v') lie at a <= x, so the sorted a's pair up into
        half-open intervals. Integer exact.
        """
        if self._row_intervals is None:
            rows = {}
            for (a, b, d) in self.bonds:
                if d == "v":
                    rows.setdefault(b, []).append(a)
            out = {}
            for b, alist in rows.items():
                alist.sort()
                out[b] = [(alist[i], alist[i + 1]) for i in range(0, len(alist), 2)]
            self._row_intervals = out
        return self._row_intervals

    def contains_loop(self, other: "LevelLoop"):
        return other.interior_cells() <= self.interior_cells()

    def column_hits(self, c):
        """Sorted y-coordinates at which the loop meets the vertical line
        x = c (corner points; vertical bonds contribute both endpoints)."""
        ys = set()
        for (a, b, d) in self.bonds:
            if d == "v" and a == c:
                ys.add(b)
                ys.add(b + 1)
            elif d == "h" and (a == c or a + 1 == c):
                ys.add(b)
        return sorted(ys)


def macroscopic_threshold(L):
    """Loops at least log^2 L long are macroscopic (natural log)."""
    return math.log(L) ** 2


def disagreement_bond_set(config: SurfaceConfig, h):
    """Brute-force set of level-h disagreement duals (the extraction oracle
    must cover exactly this set)."""
    L = config.L
    g = config.padded()
    below = g < h
    bonds = set()
    # vertical bonds (a, b, 'v') separate sites (a-1, b) | (a, b), b in 0..L-1
    va, vb = np.nonzero(below[:L + 1, 1:L + 1] != below[1:L + 2, 1:L + 1])
    bonds.update((int(a), int(b), "v") for a, b in zip(va, vb))
    # horizontal bonds (a, b, 'h') separate sites (a, b-1) | (a, b), a in 0..L-1
    ha, hb = np.nonzero(below[1:L + 1, :L + 1] != below[1:L + 1, 1:L + 2])
    bonds.update((int(a), int(b), "h") for a, b in zip(ha, hb))
    return bonds


# Bond slots around corner (a, b): W/E horizontal, S/N vertical.
def _incident(a, b):
    return {"W": (a - 1, b, "h"), "E": (a, b, "h"),
            "S": (a, b - 1, "v"), "N": (a, b, "v")}


_NE_PAIR = {"W": "N", "N": "W", "E": "S", "S": "E"}


def extract_level_lines(config: SurfaceConfig, h):
    """All level-h loops of a configuration, northeast splitting applied.

    Returns a list of LevelLoop whose bond sets partition the disagreement
    dual set for level h.
    """
    bonds = disagreement_bond_set(config, h)
    if not bonds:
        return []
    incident = {}
    for (a, b, d) in bonds:
        if d == "h":
            ends = ((a, b), (a + 1, b))
        else:
            ends = ((a, b), (a, b + 1))
        for c in ends:
            incident.setdefault(c, []).append((a, b, d))
    for c, blist in incident.items():
        if len(blist) not in (2, 4):
            raise StructureError(f"corner {c} has degree {len(blist)}")

    thresh = macroscopic_threshold(config.L)
    unused = set(bonds)
    ordered = sorted(bonds)  # deterministic traversal order
    cursor = 0
    loops = []
    while unused:
        while ordered[cursor] not in unused:
            cursor += 1
        start = ordered[cursor]
        loop_bonds = []
        bond = start
        corner = (bond[0], bond[1])  # enter at the lower-left endpoint
        while True:
            unused.discard(bond)
            loop_bonds.append(bond)
            a, b, d = bond
            nxt_corner = (a + 1, b) if d == "h" else (a, b + 1)
            if nxt_corner == corner:
                nxt_corner = (a, b)
            here = incident[nxt_corner]
            if len(here) == 2:
                nxt = here[0] if here[1] == bond else here[1]
            else:
                slots = _incident(*nxt_corner)
                slot_of = {v: k for k, v in slots.items()}
                nxt = slots[_NE_PAIR[slot_of[bond]]]
            if nxt == start:
                break
            bond, corner = nxt, nxt_corner
        loop = LevelLoop(level=h, bonds=loop_bonds, length=len(loop_bonds),
                         interior_area=0, macroscopic=len(loop_bonds) >= thresh)
        loop.interior_area = sum(a1 - a0 for iv in loop.row_intervals().values()
                                 for a0, a1 in iv)
        loops.append(loop)
    return loops


def enclosed_region(config: SurfaceConfig, h):
    """Cells enclosed by an odd number of level-h loops. With a ring below h
    this is exactly {phi >= h}; used for the monotone-containment check."""
    bonds = disagreement_bond_set(config, h)
    rows = {}
    for (a, b, d) in bonds:
        if d == "v":
            rows.setdefault(b, []).append(a)
    cells = set()
    for b, alist in rows.items():
        alist.sort()
        for i in range(0, len(alist), 2):
            for x in range(alist[i], alist[i + 1]):
                cells.add((x, b))
    return cells


def nesting_report(config: SurfaceConfig, h_max=None):
    """Per level: loop counts, macroscopic counts, uniqueness; plus whether
    the unique top loops are nested by containment across levels.

    Violations are reported, not fatal.
    """
    if h_max is None:
        h_max = int(config.heights.max()) + 1
    per_level = []
    top_loops = {}
    for h in range(0, h_max + 2):
        loops = extract_level_lines(config, h)
        macro = [lp for lp in loops if lp.macroscopic]
        entry = {
            "level": h,
            "n_loops": len(loops),
            "n_macroscopic": len(macro),
            "unique_macroscopic": len(macro) == 1,
        }
        pool = macro if macro else loops
        if len(pool) >= 1:
            top = max(pool, key=lambda lp: lp.interior_area)
            entry["top_area"] = top.interior_area
            entry["unique_top"] = len(pool) == 1
            top_loops[h] = top
        per_level.append(entry)
    nested = True
    pairs = []
    hs = sorted(top_loops)
    for h1, h2 in zip(hs, hs[1:]):
        if h2 != h1 + 1:
            continue
        ok = top_loops[h1].contains_loop(top_loops[h2])
        pairs.append((h1, h2, ok))
        nested &= ok
    return {"levels": per_level, "nested": nested, "nesting_pairs": pairs}


@dataclass
class LevelProfile:
    """Vertical distance profile of one loop over a centered column window."""

    n: int
    half_width: int
    columns: np.ndarray          # x offsets from the center column
    rho: np.ndarray              # min hit height per column (nan if no hit)
    rho_bar: np.ndarray          # max hit height <= L/2 (nan if none)
    covered: np.ndarray          # bool per column
    center: int
    L: int


def profile(loop: LevelLoop, n, N_n, L, K=1.0):
    """rho_n(x) = min{y >= 0 : (L/2 + x, y) in loop} and the companion
    rho_bar over x in [-W, W], W = ceil(K * N_n^(2/3)).

    Columns the loop never meets are flagged, not interpolated. Raises
    CoverageError if the loop misses the whole window.
    """
    W = int(math.ceil(K * N_n ** (2.0 / 3.0)))
    center = L // 2
    xs = np.arange(-W, W + 1)
    rho = np.full(xs.shape, np.nan)
    rho_bar = np.full(xs.shape, np.nan)
    covered = np.zeros(xs.shape, dtype=bool)
    half = L / 2.0
    for j, x in enumerate(xs):
        c = center + int(x)
        if c < 0 or c > L:
            continue
        ys = loop.column_hits(c)
        if not ys:
            continue
        covered[j] = True
        rho[j] = ys[0]
        below = [y for y in ys if y <= half]
        rho_bar[j] = below[-1] if below else np.nan
    if not covered.any():
        raise CoverageError("loop misses the entire measurement interval")
    return LevelProfile(n=n, half_width=W, columns=xs, rho=rho, rho_bar=rho_bar,
                        covered=covered, center=center, L=L)


def rescale(prof: LevelProfile, N_n):
    """Y_n(t) = N_n^(-1/3) rho_n(t N_n^(2/3)) on the integer column grid.

    Returns (t, Y, sup_gap) with sup_gap = N_n^(-1/3) max(rho_bar - rho),
    ignoring flagged columns.
    """
    t = prof.columns / N_n ** (2.0 / 3.0)
    Y = prof.rho / N_n ** (1.0 / 3.0)
    gap = prof.rho_bar - prof.rho
    sup_gap = float(np.nanmax(gap) / N_n ** (1.0 / 3.0)) if np.any(~np.isnan(gap)) else float("nan")
    return t, Y, sup_gap


def loops_to_records(loops):
    """JSON-ready records for loop export."""
    return [{"level": lp.level, "length": lp.length, "area": lp.interior_area,
             "macroscopic": bool(lp.macroscopic),
             "bonds": [[int(a), int(b), d] for (a, b, d) in lp.bonds]}
            for lp in loops]

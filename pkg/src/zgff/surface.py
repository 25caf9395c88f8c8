"""Integer |grad phi|^p surface configurations on an L x L box.

Sites are indexed (x, y) with x the column and y the row, both in 0..L-1,
y = 0 at the bottom. The boundary ring is the width-1 layer at x or y in
{-1, L} (corners included) and is stored explicitly so that split-arc
boundary conditions are unambiguous at corners.

Geometric convention used throughout the package: site (x, y) occupies the
unit cell [x, x+1] x [y, y+1], so dual (contour) vertices live at integer
points of [0, L]^2.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from math import exp

import numpy as np

from .errors import ConfigError, InvalidConstraintError, StructureError

SNAPSHOT_MAGIC = b"ZGFFSNAP"
SNAPSHOT_VERSION = 1

# Per-direction stopping rule for conditional supports: stop extending once the
# newly added weight falls below TRUNCATION_EPS times the running total. The
# |grad phi|^p tails are super-exponential for p > 1 and exponential for p = 1,
# so this guarantees total-variation error < 1e-12 per site update.
TRUNCATION_EPS = 1e-15

SIDES = ("top", "right", "bottom", "left")
# Corner -> side that follows it clockwise (top runs NW->NE, right NE->SE, ...).
_CORNER_SIDE = {"nw": "top", "ne": "right", "se": "bottom", "sw": "left"}


@dataclass
class ModelParams:
    """Gradient exponent, inverse temperature and constraint specs.

    p = 2 is the Discrete Gaussian, p = 1 the SOS model.
    """

    p: float = 2.0
    beta: float = 2.0
    boundary_spec: tuple = ("all", 0)
    floor_spec: object = None      # None | int | (L, L) array
    ceiling_spec: object = None

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"gradient exponent p must be >= 1, got {self.p}")
        if self.beta <= 0:
            raise ConfigError(f"inverse temperature beta must be > 0, got {self.beta}")


def ring_sites(L):
    """All boundary-ring sites of an L x L box, corners included."""
    out = []
    for x in range(-1, L + 1):
        out.append((x, -1))
        out.append((x, L))
    for y in range(0, L):
        out.append((-1, y))
        out.append((L, y))
    return out


def side_sites(side, L):
    if side == "bottom":
        return [(x, -1) for x in range(L)]
    if side == "top":
        return [(x, L) for x in range(L)]
    if side == "left":
        return [(-1, y) for y in range(L)]
    if side == "right":
        return [(L, y) for y in range(L)]
    raise ConfigError(f"unknown side {side!r}")


def corner_sites(L):
    return {"sw": (-1, -1), "se": (L, -1), "nw": (-1, L), "ne": (L, L)}


def build_boundary(spec, L, H=None, n=None):
    """Realize a named boundary pattern as a total mapping on the ring.

    Supported specs:
      ("all", k)                      -- constant height k
      ("split-arc", sides_tuple)     -- H - n on the listed sides, H - n - 1
                                         elsewhere (H, n required)
      ("custom", mapping)            -- explicit {site: height}, must be total

    Corners take the value of the side that follows them clockwise.
    """
    if not isinstance(spec, tuple) or not spec:
        raise ConfigError(f"boundary spec must be a nonempty tuple, got {spec!r}")
    kind = spec[0]
    if kind == "all":
        k = int(spec[1])
        return {s: k for s in ring_sites(L)}
    if kind == "split-arc":
        if H is None or n is None:
            raise ConfigError("split-arc boundary needs H and n")
        arc = tuple(spec[1])
        for s in arc:
            if s not in SIDES:
                raise ConfigError(f"unknown side {s!r} in split-arc spec")
        hi, lo = int(H) - int(n), int(H) - int(n) - 1
        bnd = {}
        for side in SIDES:
            v = hi if side in arc else lo
            for s in side_sites(side, L):
                bnd[s] = v
        for corner, (cx, cy) in corner_sites(L).items():
            bnd[(cx, cy)] = hi if _CORNER_SIDE[corner] in arc else lo
        return bnd
    if kind == "custom":
        mapping = dict(spec[1])
        missing = [s for s in ring_sites(L) if s not in mapping]
        if missing:
            raise ConfigError(f"custom boundary missing {len(missing)} sites, e.g. {missing[0]}")
        return {s: int(mapping[s]) for s in ring_sites(L)}
    raise ConfigError(f"unknown boundary pattern {kind!r}")


@dataclass
class SurfaceConfig:
    """Height field on the interior plus an explicit boundary ring.

    heights[x, y] is the height of site (x, y). floor/ceiling are either
    None, an int (uniform), or an (L, L) int array of per-site bounds.
    """

    L: int
    heights: np.ndarray
    boundary: dict
    floor: object = None
    ceiling: object = None

    @classmethod
    def flat(cls, L, value=0, boundary=None, floor=None, ceiling=None):
        if boundary is None:
            boundary = build_boundary(("all", 0), L)
        h = np.full((L, L), value, dtype=np.int32)
        return cls(L=L, heights=h, boundary=boundary, floor=floor, ceiling=ceiling)

    def copy(self):
        return SurfaceConfig(self.L, self.heights.copy(), dict(self.boundary),
                             _copy_bound(self.floor), _copy_bound(self.ceiling))

    def floor_at(self, x, y):
        return _bound_at(self.floor, x, y)

    def ceiling_at(self, x, y):
        return _bound_at(self.ceiling, x, y)

    def height_at(self, x, y):
        """Height of an interior or ring site."""
        if 0 <= x < self.L and 0 <= y < self.L:
            return int(self.heights[x, y])
        try:
            return self.boundary[(x, y)]
        except KeyError:
            raise StructureError(f"missing boundary value at {(x, y)}") from None

    def neighbor_heights(self, x, y):
        return (self.height_at(x - 1, y), self.height_at(x + 1, y),
                self.height_at(x, y - 1), self.height_at(x, y + 1))

    def padded(self):
        """(L+2)^2 array with the ring written into the border; corners 0."""
        L = self.L
        g = np.zeros((L + 2, L + 2), dtype=np.int64)
        g[1:L + 1, 1:L + 1] = self.heights
        for (x, y), v in self.boundary.items():
            g[x + 1, y + 1] = v
        return g

    def validate(self):
        L = self.L
        if self.heights.shape != (L, L):
            raise StructureError(f"heights shape {self.heights.shape} != ({L}, {L})")
        for s in ring_sites(L):
            if s not in self.boundary:
                raise StructureError(f"missing boundary value at {s}")
        if self.floor is not None:
            f = _bound_grid(self.floor, L)
            if np.any(self.heights < f):
                raise StructureError("height below floor")
        if self.ceiling is not None:
            c = _bound_grid(self.ceiling, L)
            if np.any(self.heights > c):
                raise StructureError("height above ceiling")
        if self.floor is not None and self.ceiling is not None:
            f, c = _bound_grid(self.floor, L), _bound_grid(self.ceiling, L)
            if np.any(f > c):
                raise InvalidConstraintError("floor above ceiling somewhere")
        return True


def _copy_bound(b):
    return b.copy() if isinstance(b, np.ndarray) else b


def _bound_at(b, x, y):
    if b is None:
        return None
    if isinstance(b, np.ndarray):
        return int(b[x, y])
    return int(b)


def _bound_grid(b, L):
    if isinstance(b, np.ndarray):
        return b
    return np.full((L, L), int(b))


def energy(config: SurfaceConfig, params: ModelParams) -> float:
    """beta * sum |phi_x - phi_y|^p over interior-interior and
    interior-boundary nearest-neighbor pairs. Deterministic; boundary-only
    pairs are excluded."""
    L = config.L
    g = config.padded().astype(np.float64)
    # Horizontal pairs in interior rows span ring-interior...interior-ring;
    # same for vertical pairs in interior columns. Ring-ring pairs never enter.
    dh = np.abs(np.diff(g[:, 1:L + 1], axis=0))
    dv = np.abs(np.diff(g[1:L + 1, :], axis=1))
    if params.p == 2:
        s = np.sum(dh * dh) + np.sum(dv * dv)
    elif params.p == 1:
        s = np.sum(dh) + np.sum(dv)
    else:
        s = np.sum(dh ** params.p) + np.sum(dv ** params.p)
    return params.beta * float(s)


class DiscreteDist:
    """Finite distribution on consecutive integers with cached cdf."""

    __slots__ = ("support", "probs", "cdf")

    def __init__(self, support, probs, cdf):
        self.support = support
        self.probs = probs
        self.cdf = cdf

    def prob(self, k):
        if self.support[0] <= k <= self.support[-1]:
            return self.probs[k - self.support[0]]
        return 0.0

    def quantile(self, u):
        """Right-continuous inverse cdf; monotone in u and in the law."""
        return self.support[bisect_right(self.cdf, u)]

    def as_arrays(self):
        return np.asarray(self.support), np.asarray(self.probs)


_COND_CACHE = {}
_COND_CACHE_MAX = 1 << 20


def conditional_tables(neighbors, floor, ceiling, params: ModelParams):
    """Cached core of local_conditional.

    Returns (support0, probs, cdf, shift): the law of k - shift, so a draw is
    support0[bisect_right(cdf, u)] + shift. Cache keys are translation
    normalized (shift = smallest neighbor), exploiting the covariance of the
    conditional under common shifts of neighbors and bounds.
    """
    if floor is not None and ceiling is not None and floor > ceiling:
        raise InvalidConstraintError(f"floor {floor} > ceiling {ceiling}")
    n = sorted(int(v) for v in neighbors)
    if len(n) != 4:
        raise StructureError("exactly four neighbor heights required")
    shift = n[0]
    key = (n[1] - shift, n[2] - shift, n[3] - shift,
           None if floor is None else floor - shift,
           None if ceiling is None else ceiling - shift,
           params.p, params.beta)
    hit = _COND_CACHE.get(key)
    if hit is not None:
        return hit[0], hit[1], hit[2], shift

    n0 = [v - shift for v in n]
    lo = None if floor is None else floor - shift
    hi = None if ceiling is None else ceiling - shift
    p, beta = params.p, params.beta

    def w(k):
        if p == 2:
            s = sum((k - v) * (k - v) for v in n0)
        elif p == 1:
            s = sum(abs(k - v) for v in n0)
        else:
            s = sum(abs(k - v) ** p for v in n0)
        return exp(-beta * s)

    m = (n0[1] + n0[2]) // 2
    if lo is not None and m < lo:
        m = lo
    if hi is not None and m > hi:
        m = hi

    ks = [m]
    ws = [w(m)]
    total = ws[0]
    # grow upward
    k = m + 1
    while hi is None or k <= hi:
        wk = w(k)
        if wk < TRUNCATION_EPS * total and k > n0[3]:
            break
        ks.append(k)
        ws.append(wk)
        total += wk
        k += 1
    # grow downward
    k = m - 1
    head_ks, head_ws = [], []
    while lo is None or k >= lo:
        wk = w(k)
        if wk < TRUNCATION_EPS * total and k < n0[0]:
            break
        head_ks.append(k)
        head_ws.append(wk)
        total += wk
        k -= 1
    support = head_ks[::-1] + ks
    weights = head_ws[::-1] + ws

    probs = [x / total for x in weights]
    cdf = []
    acc = 0.0
    for x in probs:
        acc += x
        cdf.append(acc)
    cdf[-1] = 1.0
    if len(_COND_CACHE) >= _COND_CACHE_MAX:
        _COND_CACHE.clear()
    _COND_CACHE[key] = (support, probs, cdf)
    return support, probs, cdf, shift


def local_conditional(neighbors, floor, ceiling, params: ModelParams) -> DiscreteDist:
    """Exact single-site conditional law given the four neighbor heights.

    Proportional to exp(-beta * sum_i |k - n_i|^p) restricted to
    [floor, ceiling]. The support is enumerated outward from the integer
    median of the neighbors until the per-direction added weight drops below
    TRUNCATION_EPS of the running total.
    """
    support0, probs, cdf, shift = conditional_tables(neighbors, floor, ceiling, params)
    return DiscreteDist([s + shift for s in support0], probs, cdf)


def write_snapshot(path, config: SurfaceConfig, params: ModelParams):
    """Binary snapshot: fixed header then row-major little-endian int32 heights.

    Layout (all little-endian):
      bytes 0-7   magic "ZGFFSNAP"
      uint16      format version (1)
      uint32      L
      float64     p
      float64     beta
      uint8       floor flag   (0 none, 1 uniform, 2 per-site grid appended)
      uint8       ceiling flag (same encoding)
      int32       uniform floor value    (present iff floor flag == 1)
      int32       uniform ceiling value  (present iff ceiling flag == 1)
      int32 x L^2 heights, bottom row first, each row left to right
      int32 x L^2 per-site floor grid    (present iff floor flag == 2)
      int32 x L^2 per-site ceiling grid  (present iff ceiling flag == 2)

    The boundary ring is not part of the snapshot; checkpoints carry it in
    the sidecar record.
    """
    def flag_of(b):
        if b is None:
            return 0
        return 2 if isinstance(b, np.ndarray) else 1

    ffl, cfl = flag_of(config.floor), flag_of(config.ceiling)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HIddBB", SNAPSHOT_VERSION, config.L,
                             params.p, params.beta, ffl, cfl))
        if ffl == 1:
            fh.write(struct.pack("<i", int(config.floor)))
        if cfl == 1:
            fh.write(struct.pack("<i", int(config.ceiling)))
        fh.write(np.ascontiguousarray(config.heights.T, dtype="<i4").tobytes())
        if ffl == 2:
            fh.write(np.ascontiguousarray(config.floor.T, dtype="<i4").tobytes())
        if cfl == 2:
            fh.write(np.ascontiguousarray(config.ceiling.T, dtype="<i4").tobytes())


def read_snapshot(path, boundary=None):
    """Inverse of write_snapshot. Returns (SurfaceConfig, ModelParams).

    The returned config carries an all-zero boundary unless one is supplied.
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SNAPSHOT_MAGIC:
            raise StructureError(f"bad snapshot magic {magic!r}")
        ver, L, p, beta, ffl, cfl = struct.unpack("<HIddBB", fh.read(24))
        if ver != SNAPSHOT_VERSION:
            raise StructureError(f"unsupported snapshot version {ver}")
        floor = ceiling = None
        if ffl == 1:
            floor = struct.unpack("<i", fh.read(4))[0]
        if cfl == 1:
            ceiling = struct.unpack("<i", fh.read(4))[0]
        n = L * L * 4
        heights = np.frombuffer(fh.read(n), dtype="<i4").reshape(L, L).T.astype(np.int32)
        if ffl == 2:
            floor = np.frombuffer(fh.read(n), dtype="<i4").reshape(L, L).T.astype(np.int32)
        if cfl == 2:
            ceiling = np.frombuffer(fh.read(n), dtype="<i4").reshape(L, L).T.astype(np.int32)
    if boundary is None:
        boundary = build_boundary(("all", 0), L)
    cfg = SurfaceConfig(L=L, heights=heights.copy(), boundary=boundary,
                        floor=floor, ceiling=ceiling)
    return cfg, ModelParams(p=p, beta=beta)

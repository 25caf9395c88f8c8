"""Independent oracles shared by the tests: exact Gibbs enumeration on tiny
boxes, a transfer-matrix center marginal for small no-floor boxes, and a
from-scratch disagreement-dual computation. These deliberately avoid the
package's own code paths they are used to check."""

import itertools
import math

import numpy as np


def gibbs_2x2_exact(beta, p, floor, ceiling):
    """Exact law over the (ceiling - floor + 1)^4 states of a 2x2 interior
    with zero boundary. Returns {state tuple in site order (0,0),(1,0),(0,1),
    (1,1): probability}."""
    vals = range(floor, ceiling + 1)
    weights = {}
    for h00, h10, h01, h11 in itertools.product(vals, repeat=4):
        # interior edges
        e = abs(h00 - h10) ** p + abs(h01 - h11) ** p
        e += abs(h00 - h01) ** p + abs(h10 - h11) ** p
        # boundary edges: each site has two zero-height ring neighbors
        for h in (h00, h10, h01, h11):
            e += 2 * abs(h) ** p
        weights[(h00, h10, h01, h11)] = math.exp(-beta * e)
    Z = sum(weights.values())
    return {k: v / Z for k, v in weights.items()}


def box_center_marginal_exact(L, beta, p, M):
    """Center-site height marginal of the no-floor measure on an L x L box
    with zero boundary, heights truncated to [-M, M]; exact by a transfer
    recursion over column states."""
    vals = np.arange(-M, M + 1)
    states = np.array(list(itertools.product(vals, repeat=L)))  # (S, L)
    S = len(states)

    def intra(col):
        e = np.abs(np.diff(col, axis=1)).astype(float) ** p
        e = e.sum(axis=1)
        e += np.abs(col[:, 0]).astype(float) ** p      # bottom ring
        e += np.abs(col[:, -1]).astype(float) ** p     # top ring
        return e

    # energies shifted by their minimum before exponentiating so large beta
    # cannot underflow the whole vector; shifts cancel in the normalization
    e_col = intra(states)
    w_col = np.exp(-beta * (e_col - e_col.min()))
    diff = np.abs(states[:, None, :] - states[None, :, :]).astype(float) ** p
    T = np.exp(-beta * diff.sum(axis=2))   # min inter-column energy is 0
    e_ring = (np.abs(states).astype(float) ** p).sum(axis=1)
    ring = np.exp(-beta * (e_ring - e_ring.min()))

    # forward to the center column c and backward from it; the center's
    # intra-column weight is double counted once
    c = L // 2
    f = ring * w_col
    for _ in range(c):
        f = (f @ T) * w_col
    g = ring * w_col
    for _ in range(L - 1 - c):
        g = (T @ g) * w_col
    safe = np.where(w_col > 0, w_col, 1.0)
    joint = np.where(w_col > 0, f * g / safe, 0.0)
    Z = joint.sum()
    probs = {}
    for s_idx in range(S):
        h = int(states[s_idx, c])
        probs[h] = probs.get(h, 0.0) + joint[s_idx] / Z
    return probs


def disagreement_duals_reference(heights_padded, h):
    """From-scratch level-h dual set on the padded (L+2)^2 grid; independent
    of the package's extraction code."""
    L = heights_padded.shape[0] - 2
    below = heights_padded < h
    bonds = set()
    for a in range(L + 1):
        for b in range(L):
            if bool(below[a, b + 1]) != bool(below[a + 1, b + 1]):
                bonds.add((a, b, "v"))
    for a in range(L):
        for b in range(L + 1):
            if bool(below[a + 1, b]) != bool(below[a + 1, b + 1]):
                bonds.add((a, b, "h"))
    return bonds


def enumerate_directed_paths_weight(M, Y, beta, run_cap=8):
    """Brute-force sum of exp(-beta * length) over x-monotone simple paths
    (0,0) -> (M,Y) with one signed vertical run per column 0..M."""
    total = 0.0
    for runs in itertools.product(range(-run_cap, run_cap + 1), repeat=M + 1):
        if sum(runs) != Y:
            continue
        length = M + sum(abs(r) for r in runs)
        total += math.exp(-beta * length)
    return total

"""The stationary Ferrari-Spohn diffusion on (0, infinity).

For scale sigma > 0 put c = (2/sigma^2)^(1/3) and phi(x) = Ai(c x - omega1).
The diffusion has generator (sigma^2/2) d^2/dx^2 + sigma^2 (phi'/phi) d/dx
with Dirichlet boundary at 0; it is ergodic and reversible with respect to
the density proportional to phi(x)^2 on x > 0. The normalization is fixed
numerically by quadrature (the closed form c / Ai'(-omega1)^2 is kept as a
consistency check rather than trusted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .airy import airy, omega1, airy_prime_first_zero
from .errors import DegenerateInputError, StructureError

CDF_GRID_POINTS = 10_000


def _adaptive_simpson(f, a, b, tol, max_depth=48):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
                + rec(m, b, fm, frm, fb, right, tol / 2.0, depth + 1))

    return rec(a, b, fa, fm, fb, whole, tol, 0)


@dataclass
class FSModel:
    sigma: float
    omega1: float = field(default=None)
    ai_prime_at_minus_omega1: float = field(default=None)
    normalization: float = field(default=None)   # density = normalization * phi^2
    x_max: float = field(default=None)
    x_grid: np.ndarray = field(default=None, repr=False)
    pdf_grid: np.ndarray = field(default=None, repr=False)
    cdf_grid: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise StructureError("sigma must be positive")
        w1 = omega1()
        self.omega1 = w1
        self.ai_prime_at_minus_omega1 = airy(-w1)[1]
        c = self.scale
        # Ai(u)^2 ~ exp(-(4/3) u^(3/2)): u = 14 leaves ~1e-31 of mass outside
        self.x_max = (w1 + 14.0) / c
        raw = lambda x: airy(c * x - w1)[0] ** 2
        integral = _adaptive_simpson(raw, 0.0, self.x_max, 1e-12)
        self.normalization = 1.0 / integral
        self.x_grid = np.linspace(0.0, self.x_max, CDF_GRID_POINTS)
        self.pdf_grid = np.array([self.normalization * raw(x) for x in self.x_grid])
        # composite Simpson accumulation on the cached grid
        h = self.x_grid[1] - self.x_grid[0]
        mids = 0.5 * (self.x_grid[:-1] + self.x_grid[1:])
        pdf_mid = np.array([self.normalization * raw(x) for x in mids])
        panel = h / 6.0 * (self.pdf_grid[:-1] + 4.0 * pdf_mid + self.pdf_grid[1:])
        cdf = np.concatenate([[0.0], np.cumsum(panel)])
        self.cdf_grid = np.minimum(cdf / cdf[-1], 1.0)

    @property
    def scale(self):
        return (2.0 / self.sigma ** 2) ** (1.0 / 3.0)

    def closed_form_normalization(self):
        """c / Ai'(-omega1)^2; compared against the quadrature in tests."""
        return self.scale / self.ai_prime_at_minus_omega1 ** 2

    def argmax(self):
        """Density peak: (sigma^2/2)^(1/3) (omega1 - a*), a* the first zero
        of Ai' on the negative axis."""
        return (self.omega1 - airy_prime_first_zero()) / self.scale


def fs_density(x, model: FSModel):
    """Stationary density; zero on x <= 0 (Dirichlet at 0)."""
    if np.ndim(x) > 0:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = [fs_density(float(v), model) for v in x[pos]]
        return out
    if x <= 0:
        return 0.0
    ai = airy(model.scale * x - model.omega1)[0]
    return model.normalization * ai * ai


def fs_drift(x, model: FSModel):
    """sigma^2 phi'(x)/phi(x); diverges to +infinity as x -> 0+ and is
    strictly negative beyond the density argmax. Domain x > 0."""
    if x <= 0:
        raise DegenerateInputError("drift is defined on x > 0 only")
    u = model.scale * x - model.omega1
    ai, aip = airy(u)
    return model.sigma ** 2 * model.scale * aip / ai


def fs_cdf(x, model: FSModel):
    x = np.asarray(x, dtype=float)
    return np.interp(x, model.x_grid, model.cdf_grid, left=0.0, right=1.0)


def fs_quantile(u, model: FSModel):
    """Monotone interpolation of the cached cdf."""
    u = np.asarray(u, dtype=float)
    return np.interp(u, model.cdf_grid, model.x_grid)


def sample_path(model: FSModel, horizon, dt, x0, seed):
    """Euler-Maruyama path of the diffusion, one trajectory.

    A proposed step landing at or below 0 is handled by resampling its
    Gaussian increment (the inward drift makes crossings vanishingly rare at
    dt <= 1e-3, and rejection preserves positivity without first-order bias).
    """
    n_steps = int(round(horizon / dt))
    paths = sample_paths(model, 1, n_steps, dt, x0, seed)
    return paths[0]


def sample_paths(model: FSModel, n_paths, n_steps, dt, x0, seed):
    """Vectorized ensemble of Euler-Maruyama paths, shape (n_paths, n_steps+1).

    The drift is evaluated through a dense table of x*drift(x) (smooth at 0,
    value sigma^2), which keeps the sampler exact to interpolation error
    while allowing ensemble steps.
    """
    if x0 <= 0 or dt <= 0:
        raise StructureError("need x0 > 0 and dt > 0")
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, model.x_max * 1.5, 60_000)
    xg = grid.copy()
    xg[0] = 1e-12
    g_tab = np.empty_like(grid)
    g_tab[0] = model.sigma ** 2
    for i in range(1, len(grid)):
        g_tab[i] = grid[i] * fs_drift(grid[i], model)

    x = np.full(n_paths, float(x0))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = x
    sig_sqdt = model.sigma * math.sqrt(dt)
    for t in range(1, n_steps + 1):
        drift = np.interp(x, grid, g_tab) / x
        base = x + drift * dt
        xi = rng.standard_normal(n_paths)
        prop = base + sig_sqdt * xi
        bad = prop <= 0.0
        tries = 0
        while bad.any():
            xi = rng.standard_normal(int(bad.sum()))
            prop[bad] = base[bad] + sig_sqdt * xi
            bad = prop <= 0.0
            tries += 1
            if tries > 1000:
                prop[bad] = x[bad]  # freeze pathological walkers
                break
        x = prop
        out[:, t] = x
    return out


def ks_distance(samples, model: FSModel):
    """sup |empirical cdf - model cdf| in [0, 1]."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise DegenerateInputError("empty sample")
    F = fs_cdf(s, model)
    n = s.size
    up = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(F - up), np.abs(F - lo))))


def zero_flux_residual(model: FSModel, x_lo=0.2, x_hi=None, n=200):
    """Stationarity in reversible form: (sigma^2/2) rho'(x) = drift(x) rho(x).

    Returns the max absolute residual over a grid, with rho' by central
    differences; small residual certifies reversibility of the pair
    (drift, density).
    """
    if x_hi is None:
        x_hi = model.argmax() * 3.0
    xs = np.linspace(x_lo, x_hi, n)
    h = 1e-5
    worst = 0.0
    for x in xs:
        rp = (fs_density(x + h, model) - fs_density(x - h, model)) / (2 * h)
        resid = abs(0.5 * model.sigma ** 2 * rp - fs_drift(x, model) * fs_density(x, model))
        worst = max(worst, resid)
    return worst

"""Statistical checks tying simulated networks to their stable limits.

Rates are measured on the projection-scale functional gamma(u) rather than on
densities: stable densities have no closed form, and the sup-norm density gap
is bounded by an integral of |gamma_n(u) - gamma(u)| over the sphere once both
scales are bounded away from zero. Every RateReport carries this note.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import limit_recursion as lr
from .network import joint_layers
from .spectral import (
    SampleBatch, coalesce, cf_multivariate, drop_coordinate, projection_scale,
    sample_stable_vector)
from .stable_core import check_alpha, sample_stable, tail_constant

CF_TOLERANCE_FACTOR = 4.0
KS_MIN_SAMPLES = 1000
RATE_PROXY_NOTE = ("gap = max over u-grid of |gamma_n(u) - gamma(u)|; "
                   "a proxy for the density sup-norm, which it bounds from above up to constants")


def stream(seed, *key):
    """Independent generator for (seed, key...), stable under reordering of work."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _draws(batch):
    return batch.draws if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def default_t_grid(k, points=20, radii=(0.5, 1.0, 1.5, 2.0)):
    """Fixed evaluation grid: ``points`` vectors spread over radii and directions."""
    per = points // len(radii)
    if k == 1:
        dirs = np.ones((per, 1)) * np.where(np.arange(per) % 2 == 0, 1.0, -1.0)[:, None]
    elif k == 2:
        theta = np.arange(per) * np.pi / per + np.pi / (2 * per)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        dirs = lr.sphere_grid(k, per, seed=7)
    grid = np.vstack([r * dirs for r in radii])
    if grid.shape[0] < points:
        grid = np.vstack([grid, radii[-1] * dirs[: points - grid.shape[0]]])
    return grid


@dataclass
class CFReport:
    t_grid: np.ndarray
    empirical: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    analytic: np.ndarray | None
    n_draws: int
    max_abs_gap: float = math.nan
    tolerance: float = math.nan
    passed: bool | None = None
    imag_ok: bool = True

    def __post_init__(self):
        self.tolerance = CF_TOLERANCE_FACTOR / math.sqrt(self.n_draws)
        self.imag_ok = bool(np.all(np.abs(self.empirical.imag) <= 3 * self.stderr_im + 1e-15))
        if self.analytic is not None:
            self.max_abs_gap = float(np.max(np.abs(self.empirical - self.analytic)))
            self.passed = self.max_abs_gap <= self.tolerance


def empirical_cf(batch, t_grid, analytic=None):
    """Sample mean of exp(i x.t) per grid point with standard errors.

    ``analytic`` may be an array of CF values or a callable of the grid.
    """
    x = _draws(batch)
    t = np.atleast_2d(np.asarray(t_grid, dtype=float))
    if t.shape[1] != x.shape[1]:
        raise ValueError("t_grid dimension does not match the draws")
    phase = x @ t.T
    c, s = np.cos(phase), np.sin(phase)
    n = x.shape[0]
    se_c = c.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(t.shape[0])
    se_s = s.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(t.shape[0])
    if callable(analytic):
        analytic = analytic(t)
    if analytic is not None:
        analytic = np.asarray(analytic, dtype=float)
    return CFReport(t, c.mean(axis=0) + 1j * s.mean(axis=0), se_c, se_s, analytic, n)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if min(a.size, b.size) < KS_MIN_SAMPLES:
        raise ValueError(f"asymptotic KS needs at least {KS_MIN_SAMPLES} draws per sample")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def tail_radius(alpha, k, total_mass, eps):
    """Smallest R with R^(a/2) >= c(a) k Gamma(S)^(1/a) / eps."""
    alpha = check_alpha(alpha, allow_gaussian=False)
    if not 0 < eps <= 1:
        raise ValueError("eps must be in (0, 1]")
    return (tail_constant(alpha) * k * total_mass ** (1.0 / alpha) / eps) ** (2.0 / alpha)


@dataclass(frozen=True)
class TailReport:
    radius: float
    exceed_frac: float
    slack: float
    eps: float
    holds: bool


def tail_check(batch, alpha, k, total_mass, eps):
    """Empirical P(|S| > R) against eps at the tail-bound radius R."""
    x = _draws(batch)
    R = tail_radius(alpha, k, total_mass, eps)
    frac = float(np.mean(np.linalg.norm(x, axis=1) > R))
    slack = 3.0 * math.sqrt(eps / x.shape[0])
    return TailReport(R, frac, slack, eps, frac <= eps + slack)


def conditional_cf(prev, t_grid, sigma_w, sigma_b, alpha, activation):
    """CF of a next-layer unit given the previous layer's units: exp(-gamma_n(t))."""
    return np.exp(-lr.empirical_scale_u(prev, t_grid, sigma_w, sigma_b, alpha, activation))


@dataclass
class CFConvergence:
    """Per (layer, n): max CF gaps of each pool against the limit."""

    n_grid: list
    layers: list
    pool_size: int
    gaps: dict = field(default_factory=dict)

    def median(self, layer, n):
        return float(np.median(self.gaps[(layer, n)]))

    def medians(self, layer):
        return [self.median(layer, n) for n in self.n_grid]


def cf_convergence(config, limits, n_grid, t_grid, repeats, seed, pool_size=1, layers=None):
    """Finite joint network vs particle limit, measured through CF gaps.

    Each of the ``repeats`` pools holds ``pool_size`` independent network
    realizations run up to the deepest requested layer minus one. For layer l
    a realization supplies the exact conditional CF of a unit given layer
    l-1, exp(-gamma_n^(l)(t)); averaging over a pool estimates the unit's
    unconditional CF without bias. Each pool contributes max over ``t_grid``
    of |pool CF - limit CF|, and ``median`` is taken across pools.
    """
    layers = list(range(2, config.depth + 1)) if layers is None else list(layers)
    if min(layers) < 2:
        raise ValueError("layer 1 is exact; conditional gaps start at layer 2")
    out = CFConvergence(list(n_grid), layers, pool_size)
    lim_cf = {l: cf_multivariate(limits[l - 1].measure, config.alpha, t_grid) for l in layers}
    for n in n_grid:
        cfg = config.with_width(n)
        for l in layers:
            out.gaps[(l, n)] = []
        for pool in range(repeats):
            acc = {l: np.zeros(len(t_grid)) for l in layers}
            for r in range(pool_size):
                rng = stream(seed, n, pool, r)
                for l_prev, h in enumerate(joint_layers(cfg, rng, upto=max(layers) - 1), start=1):
                    if l_prev + 1 in acc:
                        acc[l_prev + 1] += conditional_cf(h, t_grid, cfg.sigma_w, cfg.sigma_b,
                                                          cfg.alpha, cfg.activation)
            for l in layers:
                out.gaps[(l, n)].append(float(np.max(np.abs(acc[l] / pool_size - lim_cf[l]))))
    return out


def fit_loglog_slope(n_grid, gaps, level=0.95):
    """Least-squares slope of log(gap) on log(n) and its confidence half-width."""
    x = np.log(np.asarray(n_grid, dtype=float))
    y = np.log(np.asarray(gaps, dtype=float))
    res = stats.linregress(x, y)
    dof = len(x) - 2
    half = float(stats.t.ppf(0.5 + level / 2, dof) * res.stderr) if dof > 0 else math.inf
    return float(res.slope), half


def joint_delta_bounds(depth, k, alpha):
    """Supremum admissible exponents delta_l for the joint regime, l = 2..depth."""
    bounds = {2: 0.5}
    for l in range(3, depth + 1):
        bounds[l] = bounds[l - 1] / (1 + 2 * k / alpha)
    return bounds


@dataclass
class RateReport:
    regime: str
    layer: int
    n_grid: list
    median_gaps: list
    repeats: int
    slope: float
    slope_halfwidth: float
    theory_delta: float
    degenerate: bool
    grid_points: int
    refinement_delta: float
    note: str = RATE_PROXY_NOTE

    def __post_init__(self):
        if len(self.n_grid) < 4 or np.any(np.diff(self.n_grid) <= 0):
            raise ValueError("n_grid must be strictly increasing with at least 4 points")
        if self.repeats < 8:
            raise ValueError("rate reports need at least 8 repeats")


def check_rate_preconditions(config):
    """Raise ValueError naming the first violated assumption of the rate results."""
    if config.alpha >= 2:
        raise ValueError("rate results need alpha < 2")
    if not config.activation.bounded:
        raise ValueError("rate results need a bounded activation")
    if not config.activation.strictly_monotone:
        raise ValueError("rate results need a strictly monotone activation")
    if not config.inputs.spans:
        raise ValueError("span condition fails: {1, x_1, ..., x_I} does not span R^k")


def previous_layer_units(config, regime, layer, n, rng, source=None):
    """Layer l-1 units feeding layer l: finite joint network or limit draws."""
    cfg = config.with_width(n)
    if regime == "joint":
        h = None
        for h in joint_layers(cfg, rng, upto=layer - 1):
            pass
        return h
    if regime == "sequential":
        return sample_stable_vector(source, config.alpha, n, rng).draws
    raise ValueError(f"unknown regime {regime!r}")


def rate_experiment(config, regime, layer, n_grid, u_grid, repeats, seed, limits,
                    sample_mesh=4096):
    """Median gamma-gap per width n and the fitted log-log slope.

    ``limits`` are the particle limits for layers 1..layer. In the sequential
    regime the layer-(l-1) limit is sampled directly (through a coalesced copy
    when it has more than ``sample_mesh`` pairs).
    """
    check_rate_preconditions(config)
    if layer < 2:
        raise ValueError("rates are measured for layer >= 2")
    u_grid = np.atleast_2d(u_grid)
    n_grid = [int(n) for n in n_grid]
    source = None
    if regime == "sequential":
        source = limits[layer - 2].measure
        if sample_mesh is not None:
            source = coalesce(source, sample_mesh).measure
    coarse = u_grid[::2]
    medians, coarse_last = [], []
    for n in n_grid:
        gaps = []
        for r in range(repeats):
            rng = stream(seed, n, r)
            prev = previous_layer_units(config, regime, layer, n, rng, source)
            args = (config.sigma_w, config.sigma_b, config.alpha, config.activation)
            gaps.append(lr.scale_supremum_gap(limits[layer - 1], prev, u_grid, *args))
            if n == n_grid[-1]:
                coarse_last.append(lr.scale_supremum_gap(limits[layer - 1], prev, coarse, *args))
        medians.append(float(np.median(gaps)))
    # without weights gamma_n == gamma; the gaps are pure round-off
    degenerate = config.sigma_w == 0 or any(g <= 0 for g in medians)
    slope, half = (math.nan, math.nan) if degenerate else fit_loglog_slope(n_grid, medians)
    theory = 0.5 if regime == "sequential" else joint_delta_bounds(layer, config.k, config.alpha)[layer]
    refinement = abs(medians[-1] - float(np.median(coarse_last)))
    return RateReport(regime, layer, n_grid, medians, repeats, slope, half, theory,
                      degenerate, u_grid.shape[0], refinement)


def layer_gaps_at_width(config, regime, layers, n, u_grid, repeats, seed, limits, sample_mesh=4096):
    """Per-repeat gamma-gaps at one width for several layers of one regime."""
    check_rate_preconditions(config)
    out = {}
    for l in layers:
        source = None
        if regime == "sequential":
            source = limits[l - 2].measure
            if sample_mesh is not None:
                source = coalesce(source, sample_mesh).measure
        gaps = []
        for r in range(repeats):
            rng = stream(seed, l, n, r)
            prev = previous_layer_units(config, regime, l, n, rng, source)
            gaps.append(lr.scale_supremum_gap(limits[l - 1], prev, u_grid, config.sigma_w,
                                              config.sigma_b, config.alpha, config.activation))
        out[l] = gaps
    return out


def cramer_wold_exponent_factor(weights, alpha):
    """sum_i p_i^alpha: how the projection weights rescale the limit CF exponent."""
    return float(np.sum(np.asarray(weights, dtype=float) ** alpha))


def _check_cw_weights(indices, weights):
    p = np.asarray(weights, dtype=float)
    if len(indices) != len(p) or len(p) == 0:
        raise ValueError("one weight per index required")
    if len(set(indices)) != len(indices):
        raise ValueError("indices must be distinct")
    if len(p) == 1:
        ok = np.isclose(p[0], 1.0)
    else:
        ok = np.all((p > 0) & (p < 1))
    if not ok or not np.isclose(p.sum(), 1.0):
        raise ValueError("weights must lie in (0, 1) and sum to 1")
    return p


def cramer_wold_check(config, layer, indices, weights, t_grid, seed, limits, realizations):
    """Empirical CF of T = sum_i p_i (f_i^(l) - b_i 1) against its limit.

    The limit exponent is sum_i p_i^a times the weight part of gamma^(l)(t),
    i.e. gamma^(l)(t) minus the bias term sigma_b^a |1.t|^a.
    """
    p = _check_cw_weights(indices, weights)
    if layer < 2:
        raise ValueError("projection check needs layer >= 2")
    if max(indices) >= config.width:
        raise ValueError("unit index beyond the network width")
    a = config.alpha
    n = config.width
    draws = np.empty((realizations, config.k))
    for r in range(realizations):
        rng = stream(seed, r)
        h = None
        for h in joint_layers(config, rng, upto=layer - 1):
            pass
        w = sample_stable(a, config.sigma_w, (len(indices), n), rng)
        draws[r] = (p @ w) @ config.activation(h) * n ** (-1.0 / a)
    t = np.atleast_2d(t_grid)
    weight_part = projection_scale(limits[layer - 1].measure, t, a) - config.sigma_b ** a * np.abs(t.sum(axis=1)) ** a
    analytic = np.exp(-cramer_wold_exponent_factor(p, a) * weight_part)
    return empirical_cf(draws, t, analytic)


def consistency_check(measure, alpha, r, t_grid):
    """max |cf(G, t with t_r = 0) - cf(G without coordinate r, t without t_r)|."""
    if measure.dim < 2:
        raise ValueError("consistency needs k >= 2")
    t = np.array(np.atleast_2d(t_grid), dtype=float)
    t[:, r] = 0.0
    full = cf_multivariate(measure, alpha, t)
    reduced = cf_multivariate(drop_coordinate(measure, alpha, r), alpha, np.delete(t, r, axis=1))
    return float(np.max(np.abs(full - reduced)))


def moment_estimate(batch, activation, p):
    """Mean and standard error of ||phi(f)||^p over the draws."""
    if p <= 0:
        raise ValueError("moment exponent must be > 0")
    vals = np.linalg.norm(activation(_draws(batch)), axis=1) ** p
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return float(vals.mean()), se

"""Limiting spectral measures of the infinitely wide network.

Layer 1 is exact. For l >= 2 the limit measure integrates the zeta pair of
sigma_w * phi(f) against the law of the previous layer's limit; here that
integral is replaced by an average over M particles drawn from the previous
(particle) limit. Stacking the step layer by layer has the same law as a
width-M network grown one layer at a time, but keeping the measure around
makes limit CFs, projection scales and marginals cheap to query afterwards.
"""

import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkConfig
from .spectral import (
    SampleBatch, coalesce, gamma_first_layer, projection_scale, sample_stable_vector,
    zeta_pairs)
from .stable_core import check_alpha


@dataclass(frozen=True)
class ParticleLimit:
    layer: int
    measure: object
    particle_count: float
    seeds: tuple = ()
    sample_error: float = 0.0  # coalescing CF error bound at |t| = 1; scales as |t|**alpha

    @property
    def exact(self):
        return math.isinf(self.particle_count)


def _seed_tag(rng):
    seq = getattr(rng.bit_generator, "seed_seq", None)
    if seq is None:
        return "unseeded"
    return f"entropy={seq.entropy},spawn_key={tuple(seq.spawn_key)}"


def first_layer_limit(inputs, sigma_w, sigma_b, alpha):
    """Exact layer-1 law as a ParticleLimit with infinite particle count."""
    return ParticleLimit(1, gamma_first_layer(inputs, sigma_w, sigma_b, alpha), math.inf)


def bias_and_particles(particles, activation, sigma_w, sigma_b, alpha):
    """Bias pair along 1/|1| plus the empirical zeta average over particles."""
    particles = np.atleast_2d(particles)
    n, k = particles.shape
    ones = np.ones((1, k))
    bias = zeta_pairs(ones, [sigma_b ** alpha * k ** (alpha / 2)])
    if sigma_w == 0:
        return bias
    phi = activation(particles)
    masses = sigma_w ** alpha * np.linalg.norm(phi, axis=1) ** alpha / n
    return bias + zeta_pairs(phi, masses)


def propagate_measure(prev, activation, sigma_w, sigma_b, alpha, particles, rng,
                      sample_mesh=None):
    """One particle step: layer l-1 limit -> approximate layer l limit.

    Draws ``particles`` samples from St_k(alpha, prev.measure) and forms the
    bias pair plus the M-term average of zeta pairs of sigma_w * phi(f).

    ``sample_mesh`` (off by default) draws the particles from a copy of
    ``prev.measure`` coalesced onto that many directions; exact sampling
    costs pairs * particles variates, which is prohibitive once the previous
    measure is itself a large particle measure. The CF error this introduces
    is recorded in ``sample_error``.
    """
    alpha = check_alpha(alpha)
    if particles < 1:
        raise ValueError("particle count must be >= 1")
    source = prev.measure
    err = 0.0
    if sample_mesh is not None:
        co = coalesce(source, sample_mesh)
        source = co.measure
        err = float(co.cf_error_bound(np.ones((1, source.dim)) / math.sqrt(source.dim), alpha)[0])
    draws = sample_stable_vector(source, alpha, particles, rng).draws
    measure = bias_and_particles(draws, activation, sigma_w, sigma_b, alpha)
    return ParticleLimit(prev.layer + 1, measure, float(particles),
                         prev.seeds + (_seed_tag(rng),), err)


def particle_limits(config: NetworkConfig, particles, rng, upto=None, sample_mesh=None):
    """Limits for layers 1..upto; ``sample_mesh`` applies from layer 3 on."""
    upto = config.depth if upto is None else upto
    limits = [first_layer_limit(config.inputs, config.sigma_w, config.sigma_b, config.alpha)]
    for layer in range(2, upto + 1):
        mesh = sample_mesh if layer >= 3 else None
        limits.append(propagate_measure(limits[-1], config.activation, config.sigma_w,
                                        config.sigma_b, config.alpha, particles, rng, mesh))
    return limits


def limit_scale_u(limit, u, alpha):
    """gamma^(l)(u) evaluated on the (particle) limit measure."""
    return projection_scale(limit.measure, u, alpha)


def _units(batch):
    return batch.draws if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def empirical_scale_u(batch, u, sigma_w, sigma_b, alpha, activation):
    """gamma_n^(l)(u) = sigma_b^a |1.u|^a + sigma_w^a / n sum_j |phi(f_j).u|^a.

    ``batch`` holds the n previous-layer units of one realization.
    """
    prev = _units(batch)
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    bias = sigma_b ** alpha * np.abs(u.sum(axis=1)) ** alpha
    if sigma_w == 0:
        out = bias
    else:
        out = bias + sigma_w ** alpha * np.mean(np.abs(activation(prev) @ u.T) ** alpha, axis=0)
    return float(out[0]) if single else out


def scale_summand_spread(batch, u, sigma_w, alpha, activation):
    """Standard deviation of the summands sigma_w^a |phi(f_j).u|^a, per u."""
    prev = _units(batch)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return sigma_w ** alpha * np.std(np.abs(activation(prev) @ u.T) ** alpha, axis=0, ddof=1)


def scale_supremum_gap(limit, batch, u_grid, sigma_w, sigma_b, alpha, activation):
    """max over u_grid of |gamma_n(u) - gamma(u)|, the sphere sup on a grid."""
    u_grid = np.atleast_2d(np.asarray(u_grid, dtype=float))
    if u_grid.shape[0] == 0:
        raise ValueError("u_grid must be non-empty")
    emp = empirical_scale_u(batch, u_grid, sigma_w, sigma_b, alpha, activation)
    lim = limit_scale_u(limit, u_grid, alpha)
    return float(np.max(np.abs(emp - lim)))


def sphere_grid(k, points=None, seed=20240101):
    """Unit vectors standing in for S^{k-1}.

    k = 2: uniform angles on the half circle (default 64); the functionals
    are even in u so the other half is redundant. k >= 3: a fixed-seed
    quasi-uniform set (default 256) from normalised Gaussian draws.
    """
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        points = 64 if points is None else points
        theta = np.arange(points) * np.pi / points
        return np.column_stack([np.cos(theta), np.sin(theta)])
    points = 256 if points is None else points
    g = np.random.default_rng(seed).standard_normal((points, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)

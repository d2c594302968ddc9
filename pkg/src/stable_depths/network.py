"""Finite-width deep Stable networks.

Layer 1 is f_i(X) = sum_j w_ij x_j + b_i 1 over the I input rows; deeper
layers mix n units as n**(-1/alpha) sum_j w_ij phi(f_j) + b_i 1. Weights and
biases are i.i.d. St(alpha, sigma_w) and St(alpha, sigma_b). Outputs are
stored unit-major: an (n, k) array whose row i is unit i evaluated at the k
input signals.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import InputMatrix, SampleBatch, sample_stable_vector
from .stable_core import check_alpha, check_sigma, sample_stable

DEFAULT_ENVELOPE_GRID = np.concatenate([
    -np.logspace(-3, 6, 400)[::-1], np.linspace(-10, 10, 2001), np.logspace(-3, 6, 400)])


@dataclass(frozen=True)
class ActivationSpec:
    """Activation function plus the facts the theory needs about it.

    ``envelope`` is (a, b, beta) in |phi(s)| <= a + b |s|**beta.
    ``sup_bound`` is sup |phi| for bounded activations.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    envelope: tuple
    bounded: bool
    strictly_monotone: bool
    sup_bound: float | None = None

    def __post_init__(self):
        a, b, beta = self.envelope
        if a < 0 or b < 0 or not 0 < beta < 1:
            raise ValueError("envelope needs a >= 0, b >= 0, 0 < beta < 1")
        if self.bounded and self.sup_bound is None:
            raise ValueError("bounded activation needs sup_bound")

    def __call__(self, s):
        return self.fn(s)

    @property
    def rate_ready(self):
        """Bounded and strictly monotone, as the rate results assume."""
        return self.bounded and self.strictly_monotone


def tanh():
    return ActivationSpec("tanh", np.tanh, (1.0, 0.0, 0.5), True, True, 1.0)


def logistic():
    def fn(s):
        return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(s)))
    return ActivationSpec("logistic", fn, (1.0, 0.0, 0.5), True, True, 1.0)


def gaussian_bump():
    def fn(s):
        return np.exp(-np.square(s))
    return ActivationSpec("gaussian-bump", fn, (1.0, 0.0, 0.5), True, False, 1.0)


def custom_table(knots, values, envelope, grid=None):
    """Piecewise-linear activation through (knots, values), clamped outside.

    The envelope is checked on ``grid`` at construction and a ValueError is
    raised when it fails.
    """
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
        raise ValueError("need matching 1-d knots and values, at least two")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")

    def fn(s):
        return np.interp(s, knots, values)

    steps = np.diff(values)
    spec = ActivationSpec(
        "custom-table", fn, tuple(envelope), True,
        bool(np.all(steps > 0) or np.all(steps < 0)), float(np.max(np.abs(values))))
    report = check_activation_envelope(spec, DEFAULT_ENVELOPE_GRID if grid is None else grid)
    if not report.holds:
        raise ValueError(f"custom activation violates its envelope (ratio {report.worst_ratio:.3g})")
    return spec


ACTIVATIONS = {"tanh": tanh, "logistic": logistic, "gaussian-bump": gaussian_bump}


def activation_by_name(name):
    try:
        return ACTIVATIONS[name]()
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass(frozen=True)
class EnvelopeReport:
    holds: bool
    worst_ratio: float
    worst_at: float


def check_activation_envelope(activation, grid=None):
    """Check |phi(s)| <= a + b |s|**beta on a grid; report the worst ratio."""
    s = np.asarray(DEFAULT_ENVELOPE_GRID if grid is None else grid, dtype=float)
    if s.size == 0:
        raise ValueError("grid must be non-empty")
    a, b, beta = activation.envelope
    value = np.abs(activation(s))
    bound = a + b * np.abs(s) ** beta
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, value / bound, np.where(value > 0, np.inf, 0.0))
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    return EnvelopeReport(worst <= 1.0 + 1e-12, worst, float(s[i]))


@dataclass(frozen=True)
class NetworkConfig:
    alpha: float
    sigma_w: float
    sigma_b: float
    depth: int
    width: int
    activation: ActivationSpec
    inputs: InputMatrix

    def __post_init__(self):
        check_alpha(self.alpha)
        check_sigma(self.sigma_w)
        check_sigma(self.sigma_b)
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be >= 1")
        if not isinstance(self.inputs, InputMatrix):
            object.__setattr__(self, "inputs", InputMatrix(self.inputs))

    @property
    def k(self):
        return self.inputs.k

    def with_width(self, n):
        return NetworkConfig(self.alpha, self.sigma_w, self.sigma_b, self.depth, int(n),
                             self.activation, self.inputs)

    def mass_bound(self):
        """gamma_bar = sigma_b^a k^(a/2) + sigma_w^a phi_bar^a k^(a/2), or None if phi is unbounded."""
        if not self.activation.bounded:
            return None
        a, k = self.alpha, self.k
        return (self.sigma_b ** a + (self.sigma_w * self.activation.sup_bound) ** a) * k ** (a / 2)


def forward_first(X, weights, bias):
    x = X.rows if isinstance(X, InputMatrix) else np.atleast_2d(np.asarray(X, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    bias = np.asarray(bias, dtype=float).reshape(-1)
    if weights.shape[1] != x.shape[0]:
        raise ValueError(f"weights have {weights.shape[1]} columns, inputs have {x.shape[0]} rows")
    if bias.shape[0] != weights.shape[0]:
        raise ValueError("one bias per unit required")
    return weights @ x + bias[:, None]


def forward_layer(prev, weights, bias, alpha, activation):
    """n**(-1/alpha) W phi(prev) + b 1, with n the number of previous units."""
    prev = np.atleast_2d(np.asarray(prev, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    bias = np.asarray(bias, dtype=float).reshape(-1)
    n = prev.shape[0]
    if weights.shape[1] != n:
        raise ValueError(f"weights have {weights.shape[1]} columns, previous layer has {n} units")
    if bias.shape[0] != weights.shape[0]:
        raise ValueError("one bias per unit required")
    return (weights @ activation(prev)) * n ** (-1.0 / alpha) + bias[:, None]


def conditional_mass(prev, config):
    """Total mass of the conditional spectral measure of the next layer."""
    a, k = config.alpha, config.k
    norms = np.linalg.norm(config.activation(prev), axis=1)
    return config.sigma_b ** a * k ** (a / 2) + config.sigma_w ** a * np.mean(norms ** a)


def _assert_mass(prev, config):
    bound = config.mass_bound()
    if bound is None:
        return
    mass = conditional_mass(prev, config)
    if mass > bound * (1 + 1e-12):
        raise RuntimeError(f"conditional spectral mass {mass} exceeds bound {bound}")


def _draw_layer(config, rng, rows, cols):
    w = sample_stable(config.alpha, config.sigma_w, (rows, cols), rng)
    b = sample_stable(config.alpha, config.sigma_b, rows, rng)
    return w, b


def first_layer(config, rng, rows=None):
    n = config.width if rows is None else rows
    w, b = _draw_layer(config, rng, n, config.inputs.n_inputs)
    return forward_first(config.inputs, w, b)


def next_layer(prev, config, rng, rows=None):
    _assert_mass(prev, config)
    n = config.width if rows is None else rows
    w, b = _draw_layer(config, rng, n, prev.shape[0])
    return forward_layer(prev, w, b, config.alpha, config.activation)


def joint_layers(config, rng, upto=None, last_rows=None):
    """Yield the full (n, k) unit array of layers 1..upto for one realization.

    Weights are drawn layer by layer and discarded. When ``last_rows`` is set
    only that many units of the final layer are computed.
    """
    upto = config.depth if upto is None else upto
    if not 1 <= upto <= config.depth:
        raise ValueError(f"layer {upto} outside 1..{config.depth}")
    rows = last_rows if upto == 1 else None
    h = first_layer(config, rng, rows)
    yield h
    for layer in range(2, upto + 1):
        h = next_layer(h, config, rng, last_rows if layer == upto else None)
        yield h


def simulate_joint(config, rng, units=1, seed=None):
    """One realization of the full network; first ``units`` units per layer.

    Returns {layer: SampleBatch} with ``units`` rows each. Units within a
    layer are exchangeable but dependent; independent realizations need
    independent streams.
    """
    if units > config.width:
        raise ValueError(f"cannot keep {units} units of a width-{config.width} network")
    out = {}
    for layer, h in enumerate(joint_layers(config, rng), start=1):
        out[layer] = SampleBatch(h[:units], layer=layer, width=config.width,
                                 seed=seed, regime="finite-joint")
    return out


def limit_sampler(measure, alpha):
    """Sampler callable (count, rng) -> (count, k) drawing from St_k(alpha, measure)."""
    def draw(count, rng):
        return sample_stable_vector(measure, alpha, count, rng).draws
    return draw


def sequential_inputs(config, layer, sampler, rng):
    """The n previous-layer units of the sequential network: limit draws."""
    if layer < 2:
        raise ValueError("the sequential network differs from the joint one only for layer >= 2")
    prev = np.asarray(sampler(config.width, rng), dtype=float)
    if prev.shape != (config.width, config.k):
        raise ValueError(f"sampler returned shape {prev.shape}, expected {(config.width, config.k)}")
    return prev


def simulate_sequential(config, layer, sampler, rng, units=1, seed=None):
    """Width-n layer ``layer`` stacked on i.i.d. draws of the layer-(l-1) limit."""
    if units > config.width:
        raise ValueError(f"cannot keep {units} units of a width-{config.width} network")
    prev = sequential_inputs(config, layer, sampler, rng)
    h = next_layer(prev, config, rng, rows=units)
    return SampleBatch(h, layer=layer, width=config.width, seed=seed, regime="finite-sequential")

"""Discrete spectral measures on the unit sphere and the symmetric
multivariate alpha-stable laws St_k(alpha, Gamma) they induce.

A measure is held as symmetric pairs: each row of ``directions`` stands for
the two atoms +s and -s, each carrying half of the matching entry of
``masses``. This is the zeta-form ``m * (delta_s + delta_{-s}) / 2``. Any
discrete measure gives the same symmetric stable law as its symmetrisation,
so nothing is lost by storing pairs.
"""

from dataclasses import dataclass, field

import numpy as np

from .stable_core import check_alpha, sample_std_stable

UNIT_TOL = 1e-12
RENORM_TOL = 1e-6

# stable variates generated per sampling chunk
_CHUNK_VARIATES = 2_000_000


@dataclass(frozen=True)
class SpectralMeasure:
    directions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        d = np.array(self.directions, dtype=float, copy=True)
        m = np.array(self.masses, dtype=float, copy=True).reshape(-1)
        if d.ndim != 2:
            raise ValueError("directions must be a (pairs, k) array")
        if d.shape[0] != m.shape[0]:
            raise ValueError("one mass per direction required")
        if d.shape[1] < 1:
            raise ValueError("dimension k must be >= 1")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(m))):
            raise ValueError("non-finite atom")
        if np.any(m <= 0):
            raise ValueError("atom masses must be strictly positive")
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > RENORM_TOL):
            raise ValueError("directions must lie on the unit sphere")
        d /= norms[:, None]
        d.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "masses", m)

    @classmethod
    def empty(cls, k):
        return cls(np.zeros((0, k)), np.zeros(0))

    @classmethod
    def from_atoms(cls, directions, masses):
        """Build from an explicit atom list.

        Consecutive antipodal atoms of equal mass are folded back into one
        pair; any other atom (s, m) becomes the pair of total mass m, which
        leaves the characteristic function unchanged.
        """
        d = np.asarray(directions, dtype=float)
        m = np.asarray(masses, dtype=float)
        pair_dirs, pair_mass = [], []
        i = 0
        while i < len(m):
            if (i + 1 < len(m) and np.allclose(d[i], -d[i + 1], rtol=0, atol=1e-12)
                    and np.isclose(m[i], m[i + 1], rtol=1e-12, atol=0)):
                pair_dirs.append(d[i])
                pair_mass.append(m[i] + m[i + 1])
                i += 2
            else:
                pair_dirs.append(d[i])
                pair_mass.append(m[i])
                i += 1
        if not pair_dirs:
            return cls.empty(d.shape[1] if d.ndim == 2 else 1)
        return cls(np.array(pair_dirs), np.array(pair_mass))

    @property
    def dim(self):
        return self.directions.shape[1]

    @property
    def n_pairs(self):
        return self.directions.shape[0]

    @property
    def n_atoms(self):
        return 2 * self.n_pairs

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def atoms(self):
        """Expanded atom view: (2P, k) directions and (2P,) masses, +s then -s."""
        d = np.empty((self.n_atoms, self.dim))
        d[0::2] = self.directions
        d[1::2] = -self.directions
        m = np.repeat(self.masses / 2.0, 2)
        return d, m

    def __add__(self, other):
        if not isinstance(other, SpectralMeasure):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("cannot add measures of different dimension")
        return SpectralMeasure(np.vstack([self.directions, other.directions]),
                               np.concatenate([self.masses, other.masses]))

    def scaled(self, factor):
        """Multiply every mass by ``factor`` (>= 0)."""
        if factor < 0:
            raise ValueError("mass factor must be >= 0")
        if factor == 0:
            return SpectralMeasure.empty(self.dim)
        return SpectralMeasure(self.directions, self.masses * factor)


@dataclass(frozen=True)
class InputMatrix:
    """The I x k matrix of input signals; row j is x_j in R^k."""

    rows: np.ndarray
    spans: bool = field(init=False)

    def __post_init__(self):
        x = np.array(self.rows, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("input matrix must be I x k with I, k >= 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("input matrix has non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "rows", x)
        object.__setattr__(self, "spans", spans_space(x))

    @property
    def k(self):
        return self.rows.shape[1]

    @property
    def n_inputs(self):
        return self.rows.shape[0]

    @property
    def unit_row(self):
        return np.ones(self.k)


def spans_space(rows):
    """True when {1, x_1, ..., x_I} spans R^k."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    stacked = np.vstack([np.ones(rows.shape[1]), rows])
    return bool(np.linalg.matrix_rank(stacked) == rows.shape[1])


@dataclass
class SampleBatch:
    """N x k draws plus where they came from."""

    draws: np.ndarray
    layer: int | None = None
    width: int | None = None
    seed: object = None
    regime: str | None = None

    REGIMES = ("finite-joint", "finite-sequential", "limit-particle")

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.draws.shape[0] < 1:
            raise ValueError("a sample batch needs at least one draw")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("sample batch contains non-finite draws")
        if self.regime is not None and self.regime not in self.REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")

    @property
    def dim(self):
        return self.draws.shape[1]

    def __len__(self):
        return self.draws.shape[0]


def zeta_measure(h, mass):
    """Symmetrised two-atom measure mass * (delta_{h/|h|} + delta_{-h/|h|}) / 2.

    Empty when ``h`` is the zero vector or ``mass`` is zero.
    """
    h = np.asarray(h, dtype=float).reshape(-1)
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite")
    if mass < 0:
        raise ValueError("mass must be >= 0")
    norm = np.linalg.norm(h)
    if norm == 0 or mass == 0:
        return SpectralMeasure.empty(h.size)
    return SpectralMeasure((h / norm)[None, :], [mass])


def zeta_pairs(vectors, masses):
    """Vectorised sum of zeta measures, one per row; zero rows are dropped."""
    v = np.asarray(vectors, dtype=float)
    m = np.asarray(masses, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    keep = (norms > 0) & (m > 0)
    return SpectralMeasure(v[keep] / norms[keep, None], m[keep])


def gamma_first_layer(X, sigma_w, sigma_b, alpha):
    """Spectral measure of a first-layer unit sum_j w_j x_j + b 1.

    The bias contributes the pair along 1/|1| with total mass sigma_b**alpha
    * k**(alpha/2); every non-zero input row x_j the pair along x_j/|x_j|
    with total mass |sigma_w x_j|**alpha.
    """
    alpha = check_alpha(alpha)
    if not isinstance(X, InputMatrix):
        X = InputMatrix(X)
    ones = X.unit_row
    bias = zeta_pairs(ones[None, :], [sigma_b ** alpha * X.k ** (alpha / 2)])
    rows = zeta_pairs(X.rows, sigma_w ** alpha * np.linalg.norm(X.rows, axis=1) ** alpha)
    return bias + rows


def _as_points(u, k):
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[1] != k:
        raise ValueError(f"expected vectors of length {k}, got {u.shape[1]}")
    return u, single


def projection_scale(G, u, alpha):
    """int |s.u|**alpha G(ds): the alpha-th power scale of the projection on u.

    ``u`` may be a single k-vector or an (n, k) array of vectors.
    """
    alpha = check_alpha(alpha)
    u, single = _as_points(u, G.dim)
    if G.n_pairs == 0:
        out = np.zeros(u.shape[0])
    else:
        out = np.abs(u @ G.directions.T) ** alpha @ G.masses
    return float(out[0]) if single else out


def cf_multivariate(G, alpha, t):
    """Characteristic function exp(-int |s.t|**alpha G(ds)) of St_k(alpha, G)."""
    return np.exp(-projection_scale(G, t, alpha))


def marginal_scale(G, alpha, r):
    """Scale sigma of the r-th (0-based) coordinate, which is St(alpha, sigma)."""
    if not 0 <= r < G.dim:
        raise IndexError(f"coordinate {r} out of range for k={G.dim}")
    e = np.zeros(G.dim)
    e[r] = 1.0
    return projection_scale(G, e, alpha) ** (1.0 / alpha)


def sample_stable_vector(G, alpha, count, rng):
    """Exact draws from St_k(alpha, G).

    Each pair (s, m) contributes m**(1/alpha) Z s with Z standard symmetric
    alpha-stable, one variate per pair. Cost is O(pairs * k) per draw.
    """
    alpha = check_alpha(alpha)
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    if G.n_pairs == 0:
        return SampleBatch(np.zeros((count, G.dim)), regime="limit-particle")
    coef = (G.masses ** (1.0 / alpha))[:, None] * G.directions
    chunk = max(1, _CHUNK_VARIATES // G.n_pairs)
    out = np.empty((count, G.dim))
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        z = sample_std_stable(alpha, (stop - start, G.n_pairs), rng)
        out[start:stop] = z @ coef
    return SampleBatch(out, regime="limit-particle")


def drop_coordinate(G, alpha, r):
    """Spectral measure of the law with coordinate r (0-based) removed.

    Atom (s, m) goes to s'/|s'| with mass m |s'|**alpha where s' is s without
    its r-th entry; atoms lying along e_r vanish. The characteristic function
    of the result at t' equals that of G at t' with a zero re-inserted at r.
    """
    alpha = check_alpha(alpha)
    if G.dim < 2:
        raise ValueError("cannot marginalise a one-dimensional measure")
    if not 0 <= r < G.dim:
        raise IndexError(f"coordinate {r} out of range for k={G.dim}")
    reduced = np.delete(G.directions, r, axis=1)
    norms = np.linalg.norm(reduced, axis=1)
    return zeta_pairs(reduced, G.masses * norms ** alpha)


def direction_mesh(k, points, seed=0):
    """Fixed mesh of pair directions on the half sphere used for coalescing."""
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        theta = (np.arange(points) + 0.5) * np.pi / points
        return np.column_stack([np.cos(theta), np.sin(theta)])
    g = np.random.default_rng(seed).standard_normal((points, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class Coalesced:
    measure: SpectralMeasure
    max_angle: float
    mesh_points: int

    def cf_error_bound(self, t, alpha):
        """Upper bound on |cf_original(t) - cf_coalesced(t)|.

        Uses | |a|^alpha - |b|^alpha | <= |a - b|^alpha for alpha <= 1 and
        alpha |t|^(alpha-1) |a - b| for alpha > 1, with |a - b| bounded by
        |t| times the largest chord moved, and |e^-x - e^-y| <= |x - y|.
        """
        t = np.atleast_2d(np.asarray(t, dtype=float))
        tn = np.linalg.norm(t, axis=1)
        chord = 2.0 * np.sin(self.max_angle / 2.0)
        if alpha <= 1.0:
            per_unit = (chord * tn) ** alpha
        else:
            per_unit = alpha * tn ** alpha * chord
        return per_unit * self.measure.total_mass


def coalesce(G, points=1024, seed=0):
    """Merge pairs onto a fixed direction mesh, preserving total mass.

    Pairs are assigned to the mesh direction maximising |s.d|, sign-aligned
    with it, and replaced by the normalised mass-weighted mean direction of
    their cell. Mass-weighting cancels the first-order error for alpha > 1.
    Returns a :class:`Coalesced` carrying the worst angular displacement.
    """
    if G.n_pairs <= points:
        return Coalesced(G, 0.0, G.n_pairs)
    mesh = direction_mesh(G.dim, points, seed)
    cell = np.empty(G.n_pairs, dtype=np.intp)
    sign = np.empty(G.n_pairs)
    step = max(1, 4_000_000 // (points * G.dim))
    for start in range(0, G.n_pairs, step):
        dots = G.directions[start:start + step] @ mesh.T
        best = np.argmax(np.abs(dots), axis=1)
        cell[start:start + step] = best
        sign[start:start + step] = np.sign(dots[np.arange(len(best)), best])
    sign[sign == 0] = 1.0
    aligned = G.directions * sign[:, None]
    mass = np.bincount(cell, weights=G.masses, minlength=points)
    summed = np.zeros((points, G.dim))
    np.add.at(summed, cell, aligned * G.masses[:, None])
    used = mass > 0
    merged = summed[used]
    merged /= np.linalg.norm(merged, axis=1, keepdims=True)
    new = SpectralMeasure(merged, mass[used])
    remap = np.cumsum(used) - 1
    cosang = np.clip(np.einsum("ij,ij->i", aligned, merged[remap[cell]]), -1.0, 1.0)
    return Coalesced(new, float(np.max(np.arccos(cosang))), points)


def write_measure(G, alpha, path, comments=()):
    """Write ``k alpha`` then one ``s_1 ... s_k mass`` line per atom.

    ``comments`` are emitted as leading ``#`` lines (provenance, seed chain).
    """
    d, m = G.atoms()
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"{G.dim} {float(alpha)!r}\n")
        for row, mass in zip(d, m):
            fh.write(" ".join(repr(float(x)) for x in row) + f" {float(mass)!r}\n")


def read_measure(path):
    """Inverse of :func:`write_measure`; returns (measure, alpha, comments)."""
    comments, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.append(line)
    if not body:
        raise ValueError(f"{path}: missing header line")
    k_str, alpha_str = body[0].split()
    k = int(k_str)
    alpha = float(alpha_str)
    rows = np.array([[float(x) for x in line.split()] for line in body[1:]]).reshape(-1, k + 1)
    G = SpectralMeasure.from_atoms(rows[:, :k], rows[:, k]) if len(rows) else SpectralMeasure.empty(k)
    return G, alpha, comments

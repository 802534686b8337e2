"""Fractional (Riesz) operator with state-dependent noise intensity.

Two forms are provided for a scalar noise field s(x):

* kernel form   R f(x) = P.V. int [f(x) - f(y)] C s(x)^alpha |x - y|^(-d-alpha) dy
  (Fourier symbol +|s k|^alpha for constant s), and
* generator form  A f(x) = int [f(x + s xi) - f(x) - 1{|xi|<1} s xi . grad f] C |xi|^(-d-alpha) dxi
  (symbol -|s k|^alpha), the generator of s times a unit SaS motion.

One-dimensional quadrature
--------------------------
Offsets are measured in grid cells.  Within one cell of the node the
integrand is replaced by its second-order Taylor expansion (the odd part
cancels between the two sides).  Beyond that, the difference f(x +- z) - f(x)
is interpolated linearly on each cell and integrated exactly against
z^(-1-alpha) (product integration).  The leading interpolation error,
proportional to f'' on each cell, is added back in closed form.  In the
generator form the jump lattice has spacing h / s(x), so every jump lands on
a node and the compensator cancels between the +xi and -xi halves.

Periodic grids sum images explicitly over several periods and close the
remainder with a Hurwitz-zeta tail (kernel form) or a mean-value tail
(generator form).  Bounded grids extend f by its end values, for which the
tail integral is exact.

Two-dimensional quadrature
--------------------------
A lattice sum with a Gaussian-weighted second-order correction near the
origin; the correction replaces the lattice sum of the quadratic Taylor term
by its exact integral.  Only scalar (isotropic) noise fields are supported.
"""

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import circulant
from scipy.special import gamma as gamma_fn
from scipy.special import zeta

from .stable import alpha_normalization_constant

PERIODIC_IMAGES = 32  # periods summed explicitly before the analytic tail
ASYMPTOTIC_FROM = 64  # cell index beyond which closed forms switch to expansions


@dataclass
class GridFn:
    """Samples of a function on a uniform tensor grid.

    Periodic grids exclude the right end point (nodes lower + h*i, i < n);
    bounded grids include both ends.
    """

    values: np.ndarray
    lower: tuple
    upper: tuple
    periodic: bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        self.upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if self.values.ndim not in (1, 2) or self.values.ndim != len(self.lower):
            raise ValueError("grid must be 1D or 2D with matching bounds")
        if any(u <= lo for lo, u in zip(self.lower, self.upper)):
            raise ValueError("upper bounds must exceed lower bounds")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        if min(self.values.shape) < 2:
            raise ValueError("need at least two nodes per dimension")

    @classmethod
    def sample(cls, func: Callable, lower, upper, shape, periodic: bool = False) -> "GridFn":
        shape = tuple(np.atleast_1d(shape))
        probe = cls(np.zeros(shape), lower, upper, periodic)
        return cls(func(*probe.mesh()) if len(shape) > 1 else func(probe.axes[0]), lower, upper, periodic)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def spacing(self) -> tuple:
        n = self.values.shape
        return tuple((u - lo) / (k if self.periodic else k - 1) for lo, u, k in zip(self.lower, self.upper, n))

    @property
    def axes(self) -> list:
        return [lo + h * np.arange(k) for lo, h, k in zip(self.lower, self.spacing, self.values.shape)]

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self) -> np.ndarray:
        """Node coordinates, shape (nodes, dim), in C order of ``values``."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def with_values(self, values) -> "GridFn":
        return GridFn(np.asarray(values, dtype=float).reshape(self.values.shape), self.lower, self.upper, self.periodic)

    def to_csv(self, path):
        if self.dim != 1:
            raise ValueError("CSV export is defined for 1D grids")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "value"])
            for x, v in zip(self.axes[0], self.values):
                w.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, periodic: bool = False, upper=None) -> "GridFn":
        """Read an ``x,value`` file; periodic grids need the excluded right end ``upper``."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        x, v = data[:, 0], data[:, 1]
        if periodic and upper is None:
            upper = x[-1] + (x[1] - x[0])
        return cls(v, x[0], x[-1] if upper is None else upper, periodic)


@dataclass
class SigmaField:
    """Scalar noise intensity s(x) with ellipticity bounds lam <= s^2 <= Lam."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    lam: float
    Lam: float

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise ValueError("ellipticity bounds need 0 < lam <= Lam")

    @classmethod
    def constant(cls, s: float) -> "SigmaField":
        s = float(s)
        return cls(lambda x: np.full(len(x), s), s * s, s * s)

    def at(self, points: np.ndarray) -> np.ndarray:
        """Values at ``points`` (shape (nodes, dim)); raises on an ellipticity violation."""
        s = np.abs(np.broadcast_to(np.asarray(self.evaluator(points), dtype=float), (len(points),)))
        s2 = s * s
        bad = np.flatnonzero(~((s2 >= self.lam * (1 - 1e-12)) & (s2 <= self.Lam * (1 + 1e-12))))
        if bad.size:
            i = bad[0]
            raise ValueError(
                f"ellipticity violated at node {i} (x={points[i].tolist()}): s^2={s2[i]} outside [{self.lam}, {self.Lam}]"
            )
        return s

    def lipschitz(self, grid: GridFn) -> float:
        """Largest finite-difference slope of s over the grid."""
        s = self.at(grid.points()).reshape(grid.values.shape)
        slopes = [np.abs(np.diff(s, axis=a)).max() / h for a, h in enumerate(grid.spacing)]
        return float(max(slopes))


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")


def _check_dim(f: GridFn, dim):
    if dim is not None and dim != f.dim:
        raise ValueError(f"dim={dim} does not match the grid dimension {f.dim}")


# -- one-dimensional unit-cell moments ------------------------------------


def _cell_moments(alpha, n_cells):
    """Integrals over unit cells [c, c+1], c = 1..n_cells, against s^(-1-alpha).

    Returns (A, B, E): weights of the left and right end values of a linear
    interpolant, and the quadratic-error moment int (s-c)(c+1-s) s^(-1-alpha).
    """
    c = np.arange(1, n_cells + 1, dtype=float)
    a, b, e = np.empty_like(c), np.empty_like(c), np.empty_like(c)
    near = c <= ASYMPTOTIC_FROM
    cn = c[near]
    i0 = (cn ** -alpha - (cn + 1) ** -alpha) / alpha
    i1 = ((cn + 1) ** (1 - alpha) - cn ** (1 - alpha)) / (1 - alpha)
    i2 = ((cn + 1) ** (2 - alpha) - cn ** (2 - alpha)) / (2 - alpha)
    a[near] = (cn + 1) * i0 - i1
    b[near] = i1 - cn * i0
    e[near] = -i2 + (2 * cn + 1) * i1 - cn * (cn + 1) * i0
    m = c[~near] + 0.5
    lead = m ** (-1 - alpha)
    k1 = (1 + alpha) / (12 * m)
    k2 = (1 + alpha) * (2 + alpha) / (48 * m * m)
    a[~near] = lead * (0.5 + k1 + k2)
    b[~near] = lead * (0.5 - k1 + k2)
    e[~near] = lead / 6 + (1 + alpha) * (2 + alpha) * m ** (-3 - alpha) / 240
    return a, b, e


def _side_weights(alpha, n_nodes):
    """Product-integration weights for offsets 1..n_nodes on one side.

    Covers [1, n_nodes] in cell units; index 0 of each array is offset 0.
    ``corr`` spreads each cell's error moment evenly over its two end nodes.
    """
    w = np.zeros(n_nodes + 1)
    corr = np.zeros(n_nodes + 1)
    if n_nodes >= 2:
        a, b, e = _cell_moments(alpha, n_nodes - 1)
        w[1:n_nodes] += a
        w[2:n_nodes + 1] += b
        corr[1:n_nodes] += e / 2
        corr[2:n_nodes + 1] += e / 2
    return w, corr


def _second_difference(f, periodic):
    if periodic:
        return np.roll(f, -1) - 2 * f + np.roll(f, 1)
    g = np.concatenate([f[:1], f, f[-1:]])
    return g[2:] - 2 * f + g[:-2]


def _periodic_stencils(alpha, n, tail):
    """Folded weights (length n) for sum_j W_j f_{i+j} and the f'' correction.

    ``tail`` is 'zeta' (trapezoid images beyond the window, summed with the
    Hurwitz zeta function) or 'mean' (returned separately as a coefficient on
    mean(f) - f(x)).
    """
    big = PERIODIC_IMAGES * n
    w, corr = _side_weights(alpha, big)
    mean_coef = 0.0
    if tail == "zeta":
        w[big] += 0.5 * float(big) ** (-1 - alpha)
        residues = np.arange(1, n + 1)
        extra = float(n) ** (-1 - alpha) * zeta(1 + alpha, PERIODIC_IMAGES + residues / n)
    else:
        mean_coef = float(big) ** (-alpha) / alpha
    fold_w = np.zeros(n)
    fold_c = np.zeros(n)
    np.add.at(fold_w, np.arange(big + 1) % n, w)
    np.add.at(fold_c, np.arange(big + 1) % n, corr)
    if tail == "zeta":
        np.add.at(fold_w, residues % n, extra)
    # both sides: offset j on the right is offset n - j on the left
    both_w = fold_w + np.roll(fold_w[::-1], 1)
    both_c = fold_c + np.roll(fold_c[::-1], 1)
    return both_w, both_c, 2.0 * mean_coef


def _periodic_1d(f: GridFn, s, alpha, tail):
    """Generator-signed 1D periodic operator, before the C s^alpha h^-alpha factor."""
    n = f.values.size
    w, corr, mean_coef = _periodic_stencils(alpha, n, tail)
    v = f.values
    d2 = _second_difference(v, True)
    # rows: out_i = sum_j w_j v_{i+j}; circulant(c)[i, m] = c[(i - m) % n]
    wc = circulant(np.roll(w[::-1], 1))
    cc = circulant(np.roll(corr[::-1], 1))
    jumps = wc @ v - w.sum() * v
    out = d2 / (2 - alpha) + jumps - 0.5 * (cc @ d2) + mean_coef * (v.mean() - v)
    h = f.spacing[0]
    return alpha_normalization_constant(alpha, 1) * s**alpha * h**-alpha * out


def box_generator_matrix_1d(n, h, s, alpha) -> np.ndarray:
    """Matrix of the generator on a bounded 1D grid with end-value extension.

    Off-diagonal entries are non-negative and rows sum to zero, so
    I + dt*M is monotone for dt small enough.
    """
    _check_alpha(alpha)
    s = np.broadcast_to(np.asarray(s, dtype=float), (n,))
    d2 = np.zeros((n, n))
    idx = np.arange(n)
    d2[idx, idx] = -2.0
    d2[idx[1:], idx[:-1]] = 1.0
    d2[idx[:-1], idx[1:]] = 1.0
    d2[0, 0] += 1.0
    d2[-1, -1] += 1.0
    m = d2 / (2 - alpha)
    cache = {}
    for i in range(n):
        for side, count in ((1, n - 1 - i), (-1, i)):
            if count == 0:
                continue
            if count not in cache:
                cache[count] = _side_weights(alpha, count)
            w, corr = cache[count]
            cols = i + side * np.arange(1, count + 1)
            m[i, cols] += w[1:]
            m[i, i] -= w[1:].sum()
            # everything past the last node equals its value
            t = float(count) ** (-alpha) / alpha
            m[i, cols[-1]] += t
            m[i, i] -= t
            m[i] -= 0.5 * corr[1:] @ d2[cols]
    scale = alpha_normalization_constant(alpha, 1) * s**alpha * h**-alpha
    return scale[:, None] * m


# -- two dimensions --------------------------------------------------------


def _lattice_2d(alpha, h, radius):
    """Offsets within ``radius`` (excluding 0) with jump weights and the near correction.

    Returns (offsets (K, 2) ints, weights (K,), corr (2,)).  The generator
    at a node is sum_k weights_k (f(x + z_k) - f(x)) + sum_a corr_a f_aa(x),
    before the C s^alpha factor.
    """
    h1, h2 = h
    r1, r2 = int(np.ceil(radius / h1)), int(np.ceil(radius / h2))
    j, k = np.meshgrid(np.arange(-r1, r1 + 1), np.arange(-r2, r2 + 1), indexing="ij")
    z1, z2 = j * h1, k * h2
    r = np.hypot(z1, z2)
    keep = (r > 0) & (r <= radius)
    z1, z2, r = z1[keep], z2[keep], r[keep]
    weights = r ** (-2 - alpha) * h1 * h2
    # exact minus lattice for the quadratic Taylor term, Gaussian-localised
    r0 = 4.0 * max(h1, h2)
    phi = np.exp(-((r / r0) ** 2))
    exact = 0.5 * np.pi * r0 ** (2 - alpha) * 0.5 * gamma_fn(1 - alpha / 2)
    corr = np.array([
        exact - 0.5 * np.sum(z1**2 * weights * phi),
        exact - 0.5 * np.sum(z2**2 * weights * phi),
    ])
    return np.stack([j[keep], k[keep]], axis=1), weights, corr


def _hessian_diag_2d(v, h, periodic):
    out = []
    for axis, ha in enumerate(h):
        if periodic:
            d2 = np.roll(v, -1, axis) - 2 * v + np.roll(v, 1, axis)
        else:
            pad = [(0, 0), (0, 0)]
            pad[axis] = (1, 1)
            g = np.pad(v, pad, mode="edge")
            sl = [slice(None), slice(None)]
            sl[axis] = slice(2, None)
            up = g[tuple(sl)]
            sl[axis] = slice(None, -2)
            down = g[tuple(sl)]
            d2 = up - 2 * v + down
        out.append(d2 / ha**2)
    return out


def _generator_2d(f: GridFn, s, alpha):
    v = f.values
    if not f.periodic:
        return (box_generator_matrix_2d(f, s, alpha) @ v.ravel()).reshape(v.shape)
    n1, n2 = v.shape
    h = f.spacing
    radius = PERIODIC_IMAGES / 4 * max(f.upper[0] - f.lower[0], f.upper[1] - f.lower[1])
    offsets, weights, corr = _lattice_2d(alpha, h, radius)
    folded = np.zeros((n1, n2))
    np.add.at(folded, (offsets[:, 0] % n1, offsets[:, 1] % n2), weights)
    total = np.zeros_like(v)
    for a, b in zip(*np.nonzero(folded)):
        total += folded[a, b] * (np.roll(v, (-a, -b), axis=(0, 1)) - v)
    total += 2 * np.pi * radius ** (-alpha) / alpha * (v.mean() - v)
    fxx, fyy = _hessian_diag_2d(v, h, True)
    total += corr[0] * fxx + corr[1] * fyy
    return alpha_normalization_constant(alpha, 2) * s.reshape(v.shape) ** alpha * total


def box_generator_matrix_2d(f: GridFn, s, alpha) -> np.ndarray:
    """Generator matrix on a bounded 2D grid; outside values are clamped to the nearest node."""
    _check_alpha(alpha)
    h = f.spacing
    n1, n2 = f.values.shape
    nn = n1 * n2
    s = np.broadcast_to(np.asarray(s, dtype=float), (nn,))
    radius = 3.0 * np.hypot(f.upper[0] - f.lower[0], f.upper[1] - f.lower[1])
    offsets, weights, corr = _lattice_2d(alpha, h, radius)
    tail = 2 * np.pi * radius ** (-alpha) / alpha
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rows = np.arange(nn)
    flat = np.zeros(nn * nn)
    for start in range(0, len(weights), 4096):
        block = slice(start, start + 4096)
        a, b = offsets[block, 0][:, None], offsets[block, 1][:, None]
        cols = np.clip(ii + a, 0, n1 - 1) * n2 + np.clip(jj + b, 0, n2 - 1)
        idx = (rows * nn + cols).ravel()
        flat += np.bincount(idx, np.repeat(weights[block], nn), minlength=nn * nn)
    m = flat.reshape(nn, nn)
    # far field: the clamped extension is, to leading order, the boundary average
    boundary = np.zeros((n1, n2), dtype=bool)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True
    m[:, boundary.ravel()] += tail / boundary.sum()
    for axis, ha in enumerate(h):
        step = n2 if axis == 0 else 1
        pos = ii if axis == 0 else jj
        size = n1 if axis == 0 else n2
        up = np.where(pos < size - 1, rows + step, rows)
        down = np.where(pos > 0, rows - step, rows)
        np.add.at(m, (rows, up), corr[axis] / ha**2)
        np.add.at(m, (rows, down), corr[axis] / ha**2)
    m[rows, rows] -= m.sum(axis=1)
    return alpha_normalization_constant(alpha, 2) * s[:, None] ** alpha * m


# -- public operators -------------------------------------------------------


def _noise_values(f: GridFn, sigma: SigmaField):
    return sigma.at(f.points())


def apply_generator_form(f: GridFn, sigma: SigmaField, alpha: float, dim=None) -> GridFn:
    """Generator of s(x) times a unit SaS motion applied to ``f`` (symbol -|s k|^alpha)."""
    _check_alpha(alpha)
    _check_dim(f, dim)
    s = _noise_values(f, sigma)
    if f.dim == 2:
        return f.with_values(_generator_2d(f, s, alpha))
    if f.periodic:
        return f.with_values(_periodic_1d(f, s, alpha, "mean"))
    m = box_generator_matrix_1d(f.values.size, f.spacing[0], s, alpha)
    return f.with_values(m @ f.values)


def apply_kernel_form(f: GridFn, sigma: SigmaField, alpha: float, dim=None) -> GridFn:
    """Principal-value Riesz operator with kernel C s(x)^alpha |x-y|^(-d-alpha) (symbol +|s k|^alpha)."""
    _check_alpha(alpha)
    _check_dim(f, dim)
    s = _noise_values(f, sigma)
    if f.dim == 1 and f.periodic:
        return f.with_values(-_periodic_1d(f, s, alpha, "zeta"))
    # bounded and 2D grids share the generator's weights: for a scalar field the
    # substitution y = x + s xi maps one lattice onto the other
    return f.with_values(-apply_generator_form(f, sigma, alpha, dim).values)


def generator_matrix(grid: GridFn, sigma: SigmaField, alpha: float) -> np.ndarray:
    """Dense generator matrix on a bounded grid (values of ``grid`` are ignored).

    ``alpha = 2`` gives the Gaussian limit s^2 times the second-difference
    Laplacian, with the same end-value extension.
    """
    if grid.periodic:
        raise ValueError("generator_matrix is for bounded grids")
    s = _noise_values(grid, sigma)
    if alpha == 2.0:
        return _laplacian_matrix(grid, s)
    _check_alpha(alpha)
    if grid.dim == 1:
        return box_generator_matrix_1d(grid.values.size, grid.spacing[0], s, alpha)
    return box_generator_matrix_2d(grid, s, alpha)


def _laplacian_matrix(grid: GridFn, s) -> np.ndarray:
    shape = grid.values.shape
    nn = int(np.prod(shape))
    m = np.zeros((nn, nn))
    idx = np.arange(nn).reshape(shape)
    for axis, h in enumerate(grid.spacing):
        up = np.take(np.pad(idx, [(0, 1) if a == axis else (0, 0) for a in range(len(shape))], mode="edge"),
                     np.arange(1, shape[axis] + 1), axis=axis)
        down = np.take(np.pad(idx, [(1, 0) if a == axis else (0, 0) for a in range(len(shape))], mode="edge"),
                       np.arange(0, shape[axis]), axis=axis)
        rows = idx.ravel()
        np.add.at(m, (rows, up.ravel()), 1.0 / h**2)
        np.add.at(m, (rows, down.ravel()), 1.0 / h**2)
        m[rows, rows] -= 2.0 / h**2
    return (s**2)[:, None] * m


def spectral_reference(f: GridFn, sigma_const: float, alpha: float, sign: str = "generator") -> GridFn:
    """Multiply each Fourier mode by -|s k|^alpha (generator) or +|s k|^alpha (riesz)."""
    if not f.periodic:
        raise ValueError("spectral reference needs a periodic grid")
    if sign not in ("generator", "riesz"):
        raise ValueError("sign must be 'generator' or 'riesz'")
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    ks = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(f.values.shape, f.spacing)]
    kk = np.meshgrid(*ks, indexing="ij")
    knorm = np.sqrt(sum(k * k for k in kk))
    symbol = np.abs(sigma_const * knorm) ** alpha
    if sign == "generator":
        symbol = -symbol
    return f.with_values(np.real(np.fft.ifftn(symbol * np.fft.fftn(f.values))))


def relative_l2(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))

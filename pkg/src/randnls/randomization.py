"""
Radial test profiles, Wiener randomisation and the probabilistic estimators.

Gaussians are indexed by the cube centre ``k`` and drawn in a fixed shell
order (by ``max|k_i|``, then lexicographically), so a given seed assigns the
same ``g_k`` to a cube whatever the grid size.  This keeps draws at
different resolutions or truncation levels directly comparable.
"""
import itertools
import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from randnls.errors import ConfigurationError, EstimationError
from randnls.spectral import (
    SPECTRAL,
    Field,
    GridSpec,
    _wrap,
    cube_windows_1d,
    sobolev_norm,
)

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# seeding


def generator(seed, index=None):
    """Philox stream for ``seed`` or, with ``index``, for sample ``index`` of an ensemble.

    Streams for distinct ``index`` values are derived through
    ``SeedSequence.spawn_key`` and are independent of evaluation order.
    """
    if index is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def complex_gaussians(rng, size):
    """Unit complex Gaussians ``(a + i b)/sqrt(2)``, so ``E|g|^2 = 1``."""
    ab = rng.standard_normal((int(np.prod(size)), 2))
    return ((ab[:, 0] + 1j * ab[:, 1]) / np.sqrt(2.0)).reshape(size)


@lru_cache(maxsize=8)
def _shell_rank(K, d):
    """Rank of every ``k`` in ``[-K, K]^d`` in the resolution-independent draw order."""
    ax = np.arange(-K, K + 1)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    shell = np.abs(mesh).max(axis=1)
    keys = [mesh[:, i] for i in reversed(range(d))] + [shell]
    order = np.lexsort(keys)
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    rank = rank.reshape((2 * K + 1,) * d)
    rank.setflags(write=False)
    return rank


def cube_gaussians(seed, centres, d):
    """Gaussians ``g_k`` for every cube with centres in ``centres^d``."""
    K = int(np.max(np.abs(centres)))
    rank = _shell_rank(K, d)
    g = complex_gaussians(generator(seed), rank.size)
    sub = np.ix_(*([np.asarray(centres) + K] * d))
    return g[rank[sub]]


# --------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RadialProfile:
    """Power-law radial spectrum ``amplitude * <xi>^-(s_target + d/2 + decay_margin)``."""

    s_target: float
    decay_margin: float
    amplitude: float
    grid: GridSpec


def synthesize_profile(spec: RadialProfile) -> Field:
    """Radial field with real, positive spectrum just inside ``H^{s_target}``."""
    if not 0.25 < spec.s_target <= 1.0:
        raise ConfigurationError(f"s_target must lie in (1/4, 1], got {spec.s_target}")
    if not spec.decay_margin > 0:
        raise ConfigurationError("decay_margin must be positive")
    g = spec.grid
    k = g.kmag()
    expo = spec.s_target + 0.5 * g.d + spec.decay_margin
    coeffs = spec.amplitude * (1.0 + k * k) ** (-0.5 * expo)
    return _wrap(g, SPECTRAL, coeffs.astype(np.complex128))


def translate(field: Field, shift) -> Field:
    """Translate by the vector ``shift`` (exact spectral shift)."""
    ks = field.grid.wavevector()
    phase = np.exp(-1j * sum(k * s for k, s in zip(ks, shift)))
    return _wrap(field.grid, SPECTRAL, field.coefficients() * phase)


# --------------------------------------------------------------------------
# randomisation


@dataclass(frozen=True, eq=False)
class RandomDraw:
    seed: int
    centres: np.ndarray
    gaussians: np.ndarray
    field: Field

    def g(self, k):
        """Gaussian attached to cube ``k``."""
        idx = tuple(int(np.searchsorted(self.centres, ki)) for ki in k)
        return self.gaussians[idx]


def _contract_windows(G, W, d):
    # sum_k G[k] prod_i W[k_i, m_i]  -> multiplier on the lattice
    out = G
    for _ in range(d):
        out = np.tensordot(out, W, axes=([0], [0]))
    return out


def randomize(f0: Field, seed: int) -> RandomDraw:
    """
    Wiener randomisation ``sum_k g_k Q_k f0``.

    Because every ``Q_k`` is diagonal in frequency, the sum is evaluated as a
    single multiplier ``sum_k g_k psi_k(xi)`` built from the tensor structure of
    the cube windows.
    """
    g = f0.grid
    centres, W = cube_windows_1d(g)
    G = cube_gaussians(seed, centres, g.d)
    mult = _contract_windows(G, W, g.d)
    field = _wrap(g, SPECTRAL, f0.coefficients() * mult)
    return RandomDraw(int(seed), centres, G, field)


def block_energy(f0: Field, s=0.0):
    """``sum_k ||Q_k f0||_{H^s}^2``, the expected ``||f0^omega||_{H^s}^2``."""
    g = f0.grid
    _, W = cube_windows_1d(g)
    w2 = np.ones(g.shape)
    for ax, Wi in enumerate([W] * g.d):
        col = np.sum(Wi * Wi, axis=0)
        shape = [1] * g.d
        shape[ax] = g.n
        w2 = w2 * col.reshape(shape)
    c = f0.coefficients()
    k = g.kmag()
    return float(np.sum(w2 * (1.0 + k * k) ** s * np.abs(c) ** 2))


def square_function(f0: Field):
    """Pointwise ``sum_k |Q_k f0(x)|^2`` on the physical grid.

    Expanding the square gives ``sum_tau e^{i tau x} sum_xi c_xi conj(c_{xi-tau})
    K(xi, xi-tau)`` with the tensor kernel ``K = prod_i kappa(xi_i, eta_i)``,
    ``kappa = W^T W``.  Windows only overlap their neighbours, so ``tau`` runs
    over a few diagonals per axis and the cost is ``O(#tau * n^d)`` instead of
    one transform per cube.
    """
    g = f0.grid
    _, W = cube_windows_1d(g)
    order = np.argsort(g.k_axis(), kind="stable")
    Ws = W[:, order]
    kappa = Ws.T @ Ws
    n = g.n
    offsets = [t for t in range(-(n - 1), n)
               if np.any(np.abs(np.diagonal(kappa, offset=-t)) > 0)]
    diag = {t: np.diagonal(kappa, offset=-t) for t in offsets}
    c = f0.coefficients()
    for axis in range(g.d):
        c = np.take(c, order, axis=axis)
    x = (np.arange(n) - n // 2) * g.h
    phase = {t: np.exp(1j * t * g.dk * x) for t in offsets}
    acc = np.zeros(g.shape, dtype=np.complex128)
    for ts in itertools.product(offsets, repeat=g.d):
        hi = tuple(slice(max(t, 0), n + min(t, 0)) for t in ts)
        lo = tuple(slice(max(-t, 0), n - max(t, 0)) for t in ts)
        prod = c[hi] * np.conj(c[lo])
        for axis, t in enumerate(ts):
            shape = [1] * g.d
            shape[axis] = -1
            prod = prod * diag[t].reshape(shape)
        coef = prod.sum()
        if coef == 0:
            continue
        term = np.array(coef)
        for axis, t in enumerate(ts):
            term = np.multiply.outer(term, phase[t])
        acc += term
    return acc.real * g.L ** (-float(g.d))


def radial_embedding_functional(f0: Field, delta: float):
    """
    Weighted square-function size against the ``H^delta`` norm.

    Returns ``(lhs, rhs)`` with ``lhs = max_x <x> (sum_k |Q_k f0(x)|^2)^(1/2)``
    and ``rhs = ||f0||_{H^delta}``.  Non-radial input only triggers a warning.
    """
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    if not is_radial(f0):
        warnings.warn("radial_embedding_functional called on a non-radial field", stacklevel=2)
    return weighted_square_max(f0), sobolev_norm(f0, delta)


def weighted_square_max(f0: Field) -> float:
    """``max_x <x> (sum_k |Q_k f0(x)|^2)^(1/2)``."""
    sq = square_function(f0)
    r = f0.grid.radius()
    return float(np.sqrt(np.max((1.0 + r * r) * sq)))


def shell_deviation(f0: Field):
    """Largest deviation of a spectral coefficient from the mean over its ``|xi|`` shell."""
    g = f0.grid
    c = f0.coefficients().ravel()
    k2 = np.round((g.kmag() / g.dk) ** 2).astype(np.int64).ravel()
    _, inv = np.unique(k2, return_inverse=True)
    counts = np.bincount(inv)
    mean = (np.bincount(inv, c.real) + 1j * np.bincount(inv, c.imag)) / counts
    return float(np.max(np.abs(c - mean[inv])))


def is_radial(f0: Field, tol=1e-10):
    scale = max(float(np.max(np.abs(f0.coefficients()))), 1e-300)
    return shell_deviation(f0) <= tol * scale


# --------------------------------------------------------------------------
# probabilistic estimators


def khinchin_ratio(coeffs, p: float, n_samples: int, seed: int) -> float:
    """
    Monte Carlo estimate of ``(E|sum c_n g_n|^p)^(1/p) / (sqrt(p) ||c||_2)``.

    The ``g_n`` are unit complex Gaussians from the stream of ``seed``.
    """
    c = np.asarray(coeffs, dtype=np.complex128).ravel()
    if n_samples < 100:
        raise ConfigurationError("khinchin_ratio needs at least 100 samples")
    if p < 2:
        raise ConfigurationError("p must be at least 2")
    norm = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    if norm == 0:
        raise ConfigurationError("coefficient sequence must be nonzero")
    G = complex_gaussians(generator(seed), (int(n_samples), c.size))
    S = np.abs(G @ (c / norm))
    moment = float(np.mean(S ** p) ** (1.0 / p))
    return moment / np.sqrt(p)


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    residual_rms: float
    lambdas: np.ndarray
    log_tail: np.ndarray
    n_samples: int

    @property
    def n_used(self):
        return int(self.lambdas.size)


def empirical_tail(samples, lambdas):
    """Complementary empirical CDF ``P(X > lambda)``."""
    x = np.sort(np.asarray(samples, dtype=float))
    lam = np.asarray(lambdas, dtype=float)
    return 1.0 - np.searchsorted(x, lam, side="right") / x.size


def default_lambda_grid(samples, lo_q=0.5, hi_q=0.995, num=12):
    x = np.asarray(samples, dtype=float)
    return np.linspace(np.quantile(x, lo_q), np.quantile(x, hi_q), num)


def tail_fit(samples, lambda_grid=None, min_samples=500) -> TailFit:
    """
    Least-squares fit of ``log P(X > lambda)`` against ``lambda^2``.

    A sub-Gaussian tail ``P(X > lambda) <= C exp(-c lambda^2)`` shows up as a
    negative slope ``-c``.  Grid points with an empty tail are dropped.

    Raises
    ------
    EstimationError
        Fewer than ``min_samples`` samples, a degenerate sample, or fewer
        than three usable grid points.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_samples:
        raise EstimationError(f"tail_fit needs at least {min_samples} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise EstimationError("non-finite samples")
    if x.max() == x.min():
        raise EstimationError("degenerate sample: all values identical")
    lam = default_lambda_grid(x) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    lam = lam[(lam >= x.min()) & (lam < x.max())]
    tail = empirical_tail(x, lam)
    use = tail > 0
    lam, tail = lam[use], tail[use]
    if lam.size < 3:
        raise EstimationError("fewer than three usable lambda values")
    A = np.vstack([lam ** 2, np.ones_like(lam)]).T
    logt = np.log(tail)
    (slope, intercept), *_ = np.linalg.lstsq(A, logt, rcond=None)
    resid = logt - A @ np.array([slope, intercept])
    return TailFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))), lam, logt, int(x.size))

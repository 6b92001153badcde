"""
Periodic-box discretisation, unitary transforms and Fourier multipliers.

The box is ``[-L/2, L/2)^d`` sampled at ``n`` points per axis, so the
origin is a lattice point (index ``n // 2``).  Spectral coefficients are
stored in FFT order and are normalised so that

    u_hat(xi) = L^{d/2} / n^d * sum_j u(x_j) exp(-i xi . x_j)

which makes the transform an isometry from ``L^2(box)`` (trapezoid
quadrature) to ``l^2`` of the lattice.  With this choice every Sobolev
norm is a plain weighted ``l^2`` sum of the coefficients.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.fft as sfft

from randnls import _kernels
from randnls.errors import ConfigurationError, StructuralError

PHYSICAL = "physical"
SPECTRAL = "spectral"

# multiplicative fault on the forward transform; only touched by the
# fault-injection hook used by ``check_suite``
_FORWARD_SCALE = 1.0


@contextmanager
def corrupted_normalization(factor=1.01):
    """Temporarily scale the forward transform by ``factor`` (fault injection)."""
    global _FORWARD_SCALE
    old = _FORWARD_SCALE
    _FORWARD_SCALE = float(factor)
    try:
        yield
    finally:
        _FORWARD_SCALE = old


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice with ``n`` points per axis on a box of side ``L``."""

    n: int
    L: float
    d: int = 3

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ConfigurationError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ConfigurationError(f"L must be positive, got {self.L}")
        if self.d not in (1, 2, 3):
            raise ConfigurationError(f"d must be 1, 2 or 3, got {self.d}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def dk(self) -> float:
        """Spacing of the Fourier lattice."""
        return 2.0 * np.pi / self.L

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency per axis, ``pi n / L``."""
        return np.pi * self.n / self.L

    def x_axis(self):
        return -0.5 * self.L + self.h * np.arange(self.n)

    def k_axis(self):
        return self.dk * np.fft.fftfreq(self.n, d=1.0 / self.n)

    def coords(self):
        """Broadcastable coordinate arrays ``(x_1, ..., x_d)``."""
        return _broadcast_axes(self.x_axis(), self.d)

    def wavevector(self):
        """Broadcastable wavenumber arrays ``(k_1, ..., k_d)`` in FFT order."""
        return _broadcast_axes(self.k_axis(), self.d)

    def kmag(self):
        return _kmag(self.n, self.L, self.d)

    def radius(self):
        return _radius(self.n, self.L, self.d)


def _broadcast_axes(axis, d):
    out = []
    for i in range(d):
        shape = [1] * d
        shape[i] = axis.size
        out.append(axis.reshape(shape))
    return tuple(out)


@lru_cache(maxsize=16)
def _kmag(n, L, d):
    g = GridSpec(n, L, d)
    k2 = sum(k * k for k in g.wavevector())
    out = np.sqrt(np.broadcast_to(k2, g.shape))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _radius(n, L, d):
    g = GridSpec(n, L, d)
    r2 = sum(x * x for x in g.coords())
    out = np.sqrt(np.broadcast_to(r2, g.shape))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _centre_phase(n, d):
    # exp(-i xi . (-L/2)) = (-1)^(m_1 + ... + m_d) on the lattice
    s = (-1.0) ** np.arange(n)
    out = np.ones((n,) * d)
    for ax in _broadcast_axes(s, d):
        out = out * ax
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Field:
    """Complex scalar field on a grid, in one of two representations.

    The data array is frozen on construction; every operation returns a new
    field.
    """

    grid: GridSpec
    rep: str
    data: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        if self.rep not in (PHYSICAL, SPECTRAL):
            raise StructuralError(f"unknown representation {self.rep!r}")
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise StructuralError(
                f"data shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        # read-only arrays are trusted as private; anything writable is copied
        if arr.flags.writeable:
            if arr is self.data:
                arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def physical(cls, grid, data):
        return cls(grid, PHYSICAL, data)

    @classmethod
    def spectral(cls, grid, data):
        return cls(grid, SPECTRAL, data)

    @classmethod
    def zeros(cls, grid, rep=PHYSICAL):
        return cls(grid, rep, np.zeros(grid.shape, dtype=np.complex128))

    def to_spectral(self) -> "Field":
        return self if self.rep == SPECTRAL else transform(self, SPECTRAL)

    def to_physical(self) -> "Field":
        return self if self.rep == PHYSICAL else transform(self, PHYSICAL)

    def values(self):
        """Physical samples (transforming if needed)."""
        return self.to_physical().data

    def coefficients(self):
        """Spectral coefficients (transforming if needed)."""
        return self.to_spectral().data

    def like(self, data, rep=None) -> "Field":
        return Field(self.grid, rep or self.rep, data)

    def __add__(self, other):
        _check_same_grid(self, other)
        return _wrap(self.grid, self.rep, self.data + _in_rep(other, self.rep))

    def __sub__(self, other):
        _check_same_grid(self, other)
        return _wrap(self.grid, self.rep, self.data - _in_rep(other, self.rep))

    def __mul__(self, scalar):
        if isinstance(scalar, Field):
            raise TypeError("pointwise products of fields go through spectral.product")
        return _wrap(self.grid, self.rep, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return _wrap(self.grid, self.rep, -self.data)


def _wrap(grid, rep, arr):
    """Build a Field around a freshly computed array without copying it."""
    arr = np.asarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return Field(grid, rep, arr)


def _in_rep(f, rep):
    return f.to_spectral().data if rep == SPECTRAL else f.to_physical().data


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise StructuralError(f"grid mismatch: {a.grid} vs {b.grid}")


def transform(field: Field, direction: str) -> Field:
    """Unitary discrete Fourier transform between representations.

    Parameters
    ----------
    field : Field
        Input, which must currently be in the representation opposite to
        ``direction``.
    direction : {"spectral", "physical"}
        Target representation.
    """
    if direction not in (PHYSICAL, SPECTRAL):
        raise StructuralError(f"unknown direction {direction!r}")
    if field.rep == direction:
        raise StructuralError(f"field is already in {direction} representation")
    g = field.grid
    if field.data.shape != g.shape:
        raise StructuralError("data shape does not match grid")
    phase = _centre_phase(g.n, g.d)
    if direction == SPECTRAL:
        out = sfft.fftn(field.data, norm="forward")
        out *= phase * (g.L ** (g.d / 2.0) * _FORWARD_SCALE)
    else:
        out = sfft.ifftn(field.data * phase, norm="forward")
        out *= g.L ** (-g.d / 2.0)
    return _wrap(g, direction, out)


def to_spectral_array(grid, u):
    """Forward transform of a raw physical array (no Field wrapper)."""
    out = sfft.fftn(u, norm="forward")
    out *= _centre_phase(grid.n, grid.d) * (grid.L ** (grid.d / 2.0) * _FORWARD_SCALE)
    return out


def to_physical_array(grid, uh):
    out = sfft.ifftn(uh * _centre_phase(grid.n, grid.d), norm="forward")
    out *= grid.L ** (-grid.d / 2.0)
    return out


def l2_norm(field: Field) -> float:
    """``||u||_{L^2}`` by trapezoid quadrature on the physical samples."""
    u = field.values()
    return float(np.sqrt(_kernels.abs_pow_sum(u, 2.0) * field.grid.cell_volume))


def lp_norm(field_or_array, p, grid=None) -> float:
    """Spatial ``L^p`` norm; ``p=inf`` gives the max modulus."""
    if isinstance(field_or_array, Field):
        grid = field_or_array.grid
        u = field_or_array.values()
    else:
        u = field_or_array
    if np.isinf(p):
        return _kernels.abs_max(u)
    return float((_kernels.abs_pow_sum(u, float(p)) * grid.cell_volume) ** (1.0 / p))


def sobolev_weight(grid, s, homogeneous=False):
    k = grid.kmag()
    if homogeneous:
        w = np.zeros_like(k)
        nz = k > 0
        w[nz] = k[nz] ** s
        return w
    return (1.0 + k * k) ** (0.5 * s)


def sobolev_norm(field: Field, s: float, homogeneous: bool = False) -> float:
    """
    ``H^s`` (``<xi>`` weight) or homogeneous ``H-dot^s`` (``|xi|`` weight) norm.

    In the homogeneous case the zero mode is dropped.
    """
    c = field.coefficients()
    w = sobolev_weight(field.grid, s, homogeneous)
    return float(np.sqrt(np.sum(w * w * (c.real ** 2 + c.imag ** 2))))


def gradient(field: Field):
    """Spectral gradient, returned as a list of physical-space arrays.

    The Nyquist wavenumber is zeroed (odd derivative), so real fields have
    real gradients.
    """
    g = field.grid
    c = field.coefficients()
    k = g.k_axis()
    k[g.n // 2] = 0.0
    return [to_physical_array(g, 1j * kk * c) for kk in _broadcast_axes(k, g.d)]


# --------------------------------------------------------------------------
# multipliers


@dataclass(frozen=True)
class MultiplierSymbol:
    """
    Frequency-diagonal operator.

    ``func`` receives the broadcastable wavevector components of the grid and
    returns the symbol sampled on the lattice.  ``key`` carries the index of a
    symbol inside a bank (dyadic ``K`` or cube centre ``k``).
    """

    func: Callable
    label: str
    key: Optional[tuple] = None

    def values(self, grid):
        return np.broadcast_to(np.asarray(self.func(grid.wavevector())), grid.shape)

    def __call__(self, xi):
        """Evaluate at an explicit frequency vector (or stack of them, last axis = d)."""
        xi = np.asarray(xi, dtype=float)
        comps = tuple(xi[..., i] for i in range(xi.shape[-1]))
        return self.func(comps)


def radial_symbol(profile, label, key=None):
    """Symbol depending on ``|xi|`` only."""

    def func(ks):
        return profile(np.sqrt(sum(k * k for k in ks)))

    return MultiplierSymbol(func, label, key)


def apply_multiplier(field: Field, symbol) -> Field:
    """Multiply the spectral coefficients by ``symbol``; output keeps the input representation.

    ``symbol`` may be a :class:`MultiplierSymbol` or an array already sampled on
    the lattice.
    """
    g = field.grid
    vals = symbol.values(g) if isinstance(symbol, MultiplierSymbol) else np.asarray(symbol)
    out = _wrap(g, SPECTRAL, field.coefficients() * vals)
    return out if field.rep == SPECTRAL else out.to_physical()


def free_propagator_symbol(t):
    """Symbol ``exp(-i t |xi|^2)`` of the free Schroedinger group."""
    return MultiplierSymbol(
        lambda ks: np.exp(-1j * t * sum(k * k for k in ks)), f"exp(it Laplacian), t={t:g}"
    )


def bessel_symbol(s, homogeneous=False):
    if homogeneous:
        def prof(r):
            r = np.asarray(r, dtype=float)
            return np.where(r > 0, np.abs(r) ** s, 0.0)
        return radial_symbol(prof, f"|grad|^{s:g}")
    return radial_symbol(lambda r: (1.0 + r * r) ** (0.5 * s), f"<grad>^{s:g}")


# --------------------------------------------------------------------------
# the I-operator


@dataclass(frozen=True)
class IOperatorSpec:
    """Truncation level ``N`` and regularity ``sigma`` of the smoothing multiplier.

    ``transition`` is ``"power"`` (the power law ``(N/|xi|)^(1-sigma)`` clipped
    at one, the default) or ``"smoothstep"`` (a C^1 cosine blend between one
    and the power law across ``N < |xi| < 2N``).
    """

    N: float
    sigma: float
    transition: str = "power"

    def __post_init__(self):
        if not self.N > 0:
            raise ConfigurationError(f"N must be positive, got {self.N}")
        if not 0.5 < self.sigma <= 1.0:
            raise ConfigurationError(f"sigma must lie in (1/2, 1], got {self.sigma}")
        if self.transition not in ("power", "smoothstep"):
            raise ConfigurationError(f"unknown transition {self.transition!r}")


def i_symbol(xi_mag, spec: IOperatorSpec):
    """Value of the I-multiplier at frequency magnitude ``xi_mag`` (scalar or array)."""
    r = np.asarray(xi_mag, dtype=float)
    with np.errstate(divide="ignore"):
        power = np.where(r > spec.N, (spec.N / np.maximum(r, spec.N)) ** (1.0 - spec.sigma), 1.0)
    if spec.transition == "smoothstep":
        t = np.clip((r - spec.N) / spec.N, 0.0, 1.0)
        blend = 0.5 * (1.0 - np.cos(np.pi * t))
        power = 1.0 - (1.0 - power) * blend
    return power if power.ndim else float(power)


def i_operator(spec: IOperatorSpec) -> MultiplierSymbol:
    return radial_symbol(lambda r: i_symbol(r, spec), f"I(N={spec.N:g}, sigma={spec.sigma:g})")


def apply_I(field: Field, spec: IOperatorSpec) -> Field:
    return apply_multiplier(field, i_symbol(field.grid.kmag(), spec))


# --------------------------------------------------------------------------
# smooth partitions and projector banks


def _smooth_step(x):
    """C-infinity step: 0 for x<=0, 1 for x>=1, and S(x) + S(1-x) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def bump(t):
    """Hat-shaped C-infinity window on ``[-1, 1]`` whose integer translates sum to one."""
    t = np.asarray(t, dtype=float)
    return _smooth_step(1.0 - np.abs(t))


def cube_windows_1d(grid):
    """
    Per-axis Wiener windows.

    Returns ``(centres, W)`` where ``centres`` are the integer cube centres
    along one axis and ``W[c, m] = bump(k_m - centres[c])`` on the grid's 1D
    Fourier lattice (FFT order).  The d-dimensional window of cube
    ``(c_1, ..., c_d)`` is the tensor product of the rows.
    """
    k = grid.k_axis()
    lo = int(np.floor(k.min())) - 1
    hi = int(np.ceil(k.max())) + 1
    centres = np.arange(lo, hi + 1)
    W = bump(k[None, :] - centres[:, None])
    keep = W.max(axis=1) > 0
    return centres[keep], W[keep]


def _dyadic_range(grid):
    dk = grid.dk
    # lowest shell holds only the zero mode: sqrt(2) K_min < dk
    j_min = int(np.ceil(np.log2(dk / np.sqrt(2.0)))) - 1
    kmax = float(grid.kmag().max())
    j_max = int(np.ceil(np.log2(kmax / np.sqrt(2.0))))
    return j_min, max(j_max, j_min)


def littlewood_paley_bank(grid, smooth=False):
    j_min, j_max = _dyadic_range(grid)
    if j_max - j_min < 1:
        raise ConfigurationError("grid too small to hold two dyadic shells")
    bank = []
    for j in range(j_min, j_max + 1):
        K = 2.0 ** j
        if smooth:
            prof = _smooth_lp_profile(j, j_min, j_max)
        else:
            prof = _sharp_lp_profile(j, j == j_min, j == j_max)
        bank.append(radial_symbol(prof, f"P_{K:g}", key=(K,)))
    return bank


def _sharp_lp_profile(j, lowest, highest):
    # shell edges shared bit-for-bit with the neighbouring shells
    lo, hi = 2.0 ** (j - 0.5), 2.0 ** (j + 0.5)

    def prof(r):
        r = np.asarray(r, dtype=float)
        inside = np.ones_like(r, dtype=bool)
        if not lowest:
            inside &= r > lo
        if not highest:
            inside &= r <= hi
        return inside.astype(float)

    return prof


def _smooth_lp_profile(j, j_min, j_max):
    def prof(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.where(r > 0, np.log2(np.where(r > 0, r, 1.0)), -np.inf) - j
        out = bump(np.where(np.isfinite(t), t, -2.0))
        if j == j_min:
            out = np.where(t <= 0, 1.0, out)
        if j == j_max:
            out = np.where(t >= 0, 1.0, out)
        return out

    return prof


def littlewood_paley(grid, K, smooth=False):
    """The symbol ``P_K`` of the bank on ``grid`` whose key is ``K``."""
    for sym in littlewood_paley_bank(grid, smooth):
        if np.isclose(sym.key[0], K):
            return sym
    raise ConfigurationError(f"dyadic shell K={K} not resolved by {grid}")


def wiener_cube_bank(grid):
    centres, _ = cube_windows_1d(grid)
    bank = []
    for idx in np.ndindex(*(len(centres),) * grid.d):
        k = tuple(int(centres[i]) for i in idx)
        bank.append(_cube_symbol(k))
    return bank


def _cube_symbol(k):
    def func(ks):
        out = 1.0
        for ki, c in zip(ks, k):
            out = out * bump(ki - c)
        return out

    return MultiplierSymbol(func, f"Q_{k}", key=k)


def projector_bank(grid: GridSpec, kind: str, smooth: bool = False):
    """
    Bank of frequency projectors forming a partition of unity on the lattice.

    Parameters
    ----------
    kind : {"littlewood-paley", "wiener-cube"}
        Dyadic shells ``P_K`` or unit-cube windows ``Q_k``.
    smooth : bool
        Littlewood-Paley only: smooth log-scale windows instead of sharp annuli.
    """
    if kind == "littlewood-paley":
        return littlewood_paley_bank(grid, smooth)
    if kind == "wiener-cube":
        return wiener_cube_bank(grid)
    raise ConfigurationError(f"unknown projector bank kind {kind!r}")


# --------------------------------------------------------------------------
# products


@lru_cache(maxsize=8)
def dealias_mask(n, d):
    """Two-thirds rule: keep modes with ``|m_i| < n/3`` on every axis."""
    m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    keep1 = m < n / 3.0
    out = np.ones((n,) * d, dtype=bool)
    for ax in _broadcast_axes(keep1, d):
        out = out & ax
    out.setflags(write=False)
    return out


def _pad_slices(n):
    h = n // 2
    return [slice(0, h), slice(-h, None)]


def _embed(uh, n, M):
    """Copy an FFT-ordered n^d coefficient array into the low modes of an M^d array."""
    d = uh.ndim
    out = np.zeros((M,) * d, dtype=np.complex128)
    for combo in np.ndindex(*(2,) * d):
        src = tuple(_pad_slices(n)[c] for c in combo)
        out[src] = uh[src]
    return out


def _truncate(Uh, n):
    d = Uh.ndim
    out = np.empty((n,) * d, dtype=np.complex128)
    for combo in np.ndindex(*(2,) * d):
        src = tuple(_pad_slices(n)[c] for c in combo)
        out[src] = Uh[src]
    return out


def cubic_product(a: Field, b: Field = None, c: Field = None) -> Field:
    """
    Alias-free ``a * conj(b) * c`` projected onto the grid's modes.

    Computed by zero-padding to ``2n`` per axis, which is enough for a cubic
    product to leave the retained modes untouched by wrap-around.  With one
    argument this is the defocusing nonlinearity ``|a|^2 a``.
    """
    b = a if b is None else b
    c = a if c is None else c
    _check_same_grid(a, b)
    _check_same_grid(a, c)
    g = a.grid
    M = 2 * g.n
    big = GridSpec(M, g.L, g.d)
    # padded coefficients describe the same trigonometric polynomial on the finer grid
    pa = to_physical_array(big, _embed(a.coefficients(), g.n, M))
    pb = pa if b is a else to_physical_array(big, _embed(b.coefficients(), g.n, M))
    pc = pa if c is a else to_physical_array(big, _embed(c.coefficients(), g.n, M))
    prod = pa * np.conj(pb) * pc
    return _wrap(g, SPECTRAL, _truncate(to_spectral_array(big, prod), g.n))

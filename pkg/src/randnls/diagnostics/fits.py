from dataclasses import dataclass

import numpy as np

from randnls.errors import EstimationError


@dataclass(frozen=True)
class PowerLawFit:
    """``y ~ C x^exponent`` fitted by least squares in log-log."""

    exponent: float
    prefactor: float
    residual_rms: float
    n_points: int


def power_law_fit(xs, ys) -> PowerLawFit:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        raise EstimationError("power-law fit needs at least two positive points")
    lx, ly = np.log(x[ok]), np.log(y[ok])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (a, b), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([a, b])
    return PowerLawFit(float(a), float(np.exp(b)), float(np.sqrt(np.mean(resid ** 2))), int(ok.sum()))


def trapezoid(values, times):
    v = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    if v.size < 2:
        raise EstimationError("time quadrature needs at least two checkpoints")
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))

"""
Pointwise hot loops shared by the integrator and the diagnostics.

Every kernel has a pure-numpy implementation and, when numba imports and
``RANDNLS_DISABLE_NUMBA`` is unset (or ``0``), a compiled twin.  Both paths
are importable directly (``numpy_kernels`` / ``numba_kernels``) so tests and
``benchmarks/bench_kernels.py`` can compare them; the module-level names
bind to whichever backend is active.
"""
import os

import numpy as np

_DISABLED = os.environ.get("RANDNLS_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")


# --------------------------------------------------------------------------
# numpy reference path


def _np_phase_rotate(u, dt):
    amp2 = u.real * u.real + u.imag * u.imag
    return u * np.exp(-1j * dt * amp2)


def _np_abs_pow_sum(u, p):
    a = np.abs(u)
    if p == 2.0:
        return float(np.sum(a * a))
    if p == 4.0:
        a2 = a * a
        return float(np.sum(a2 * a2))
    return float(np.sum(a ** p))


def _np_abs_max(u):
    return float(np.max(np.abs(u))) if u.size else 0.0


def _np_all_finite(u):
    return bool(np.isfinite(u).all())


numpy_kernels = {
    "phase_rotate": _np_phase_rotate,
    "abs_pow_sum": _np_abs_pow_sum,
    "abs_max": _np_abs_max,
    "all_finite": _np_all_finite,
}

# --------------------------------------------------------------------------
# numba path

numba_kernels = None
NUMBA_AVAILABLE = False

if not _DISABLED:
    try:
        import numba
        from numba import njit, prange
    except ImportError:  # optional extra
        numba = None

    if numba is not None:
        NUMBA_AVAILABLE = True
        if "NUMBA_THREADING_LAYER" not in os.environ:
            # avoid probing an outdated TBB first
            numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

        @njit(parallel=True, fastmath=False, cache=True)
        def _nb_phase_rotate_flat(u, dt, out):
            for i in prange(u.size):
                z = u[i]
                a2 = z.real * z.real + z.imag * z.imag
                th = -dt * a2
                c = np.cos(th)
                s = np.sin(th)
                out[i] = complex(z.real * c - z.imag * s, z.real * s + z.imag * c)

        # serial on purpose: a threaded reduction would tie the result to the thread count
        @njit(cache=True)
        def _nb_abs_pow_sum_flat(u, p):
            acc = 0.0
            if p == 2.0:
                for i in range(u.size):
                    z = u[i]
                    acc += z.real * z.real + z.imag * z.imag
            elif p == 4.0:
                for i in range(u.size):
                    z = u[i]
                    a2 = z.real * z.real + z.imag * z.imag
                    acc += a2 * a2
            else:
                half = 0.5 * p
                for i in range(u.size):
                    z = u[i]
                    a2 = z.real * z.real + z.imag * z.imag
                    if a2 > 0.0:
                        acc += a2 ** half
            return acc

        @njit(cache=True)
        def _nb_abs_max_flat(u):
            m = 0.0
            for i in range(u.size):
                z = u[i]
                a2 = z.real * z.real + z.imag * z.imag
                if a2 > m:
                    m = a2
            return np.sqrt(m)

        @njit(cache=True)
        def _nb_all_finite_flat(u):
            for i in range(u.size):
                z = u[i]
                if not (np.isfinite(z.real) and np.isfinite(z.imag)):
                    return False
            return True

        def _nb_phase_rotate(u, dt):
            u = np.ascontiguousarray(u, dtype=np.complex128)
            out = np.empty_like(u)
            _nb_phase_rotate_flat(u.ravel(), float(dt), out.ravel())
            return out

        def _nb_abs_pow_sum(u, p):
            u = np.ascontiguousarray(u, dtype=np.complex128)
            return float(_nb_abs_pow_sum_flat(u.ravel(), float(p)))

        def _nb_abs_max(u):
            u = np.ascontiguousarray(u, dtype=np.complex128)
            return float(_nb_abs_max_flat(u.ravel()))

        def _nb_all_finite(u):
            u = np.ascontiguousarray(u, dtype=np.complex128)
            return bool(_nb_all_finite_flat(u.ravel()))

        numba_kernels = {
            "phase_rotate": _nb_phase_rotate,
            "abs_pow_sum": _nb_abs_pow_sum,
            "abs_max": _nb_abs_max,
            "all_finite": _nb_all_finite,
        }

BACKEND = "numba" if numba_kernels is not None else "numpy"
_active = numba_kernels if numba_kernels is not None else numpy_kernels

phase_rotate = _active["phase_rotate"]
abs_pow_sum = _active["abs_pow_sum"]
abs_max = _active["abs_max"]
all_finite = _active["all_finite"]

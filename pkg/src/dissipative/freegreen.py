"""Spherical Bessel functions and free radial Green kernels.

Boundary values are taken from below the real axis, ``R0(lambda - i0)``, the
limit of ``(h0 - lambda + i eps)^-1``. For ``l = 0`` the kernel is
``sin(k r<) exp(-i k r>) / k``; its imaginary part is negative semi-definite.

Internally the functions are carried in scaled form,
``jt_n(x) = j_n(x) / x**n`` and ``yt_n(x) = y_n(x) * x**(n+1)``, so that high
orders at small arguments neither overflow nor underflow.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, Unsupported

ELL_MAX = 64
_RESCALE = 1e100


@dataclass(frozen=True)
class BesselPair:
    ell: int
    x: float
    j: float
    y: float
    dj: float
    dy: float

    @property
    def wronskian(self):
        """``j y' - j' y``; equals ``1/x**2`` exactly."""
        return self.j * self.dy - self.dj * self.y


def _check_order(ell):
    if int(ell) != ell or ell < 0 or ell > ELL_MAX:
        raise Unsupported(f"order must be an integer in [0, {ELL_MAX}], got {ell}")
    return int(ell)


def scaled_j(lmax, x):
    """``j_n(x) / x**n`` for ``n = 0..lmax``, shape ``(lmax + 1, len(x))``.

    Miller's downward recurrence, normalised on ``j_0`` or ``j_1``,
    whichever is larger in magnitude.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = x * x
    top = lmax + int(np.ceil(x.max())) + 40
    out = np.zeros((lmax + 1, x.size))
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    for n in range(top, 0, -1):
        prev = (2 * n + 1) * cur - x2 * nxt
        nxt, cur = cur, prev
        if n - 1 <= lmax:
            out[n - 1] = cur
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur[big] /= _RESCALE
            nxt[big] /= _RESCALE
            out[:, big] /= _RESCALE
    # out[1] was written one step before out[0]; both are current
    j0 = np.sin(x) / x
    small = x < 0.1
    jt1 = np.where(
        small,
        1 / 3 - x2 / 30 + x2 * x2 / 840 - x2**3 / 45360,
        (j0 - np.cos(x)) / np.where(small, 1.0, x2),
    )
    if lmax >= 1:
        use0 = np.abs(j0) >= np.abs(x * jt1)
        scale = np.where(use0, j0 / _nonzero(out[0]), jt1 / _nonzero(out[1]))
    else:
        scale = j0 / _nonzero(out[0])
    return out * scale


def _nonzero(a):
    return np.where(a == 0, np.finfo(float).tiny, a)


def scaled_y(lmax, x):
    """``y_n(x) * x**(n+1)`` for ``n = 0..lmax`` by upward recurrence."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = x * x
    out = np.empty((max(lmax, 1) + 1, x.size))
    out[0] = -np.cos(x)
    out[1] = -np.cos(x) - x * np.sin(x)
    for n in range(1, lmax):
        out[n + 1] = (2 * n + 1) * out[n] - x2 * out[n - 1]
    return out[: lmax + 1]


def spherical_bessel(ell, x):
    """Regular and irregular spherical Bessel functions with derivatives."""
    ell = _check_order(ell)
    if not x > 0:
        raise InvalidArgument(f"argument must be positive, got {x}")
    x = float(x)
    top = max(ell, 1)
    jt = scaled_j(top, x)[:, 0]
    yt = scaled_y(top, x)[:, 0]
    orders = np.arange(top + 1)
    j = jt * x**orders
    y = yt / x ** (orders + 1)
    if ell == 0:
        dj, dy = -j[1], -y[1]
    else:
        dj = j[ell - 1] - (ell + 1) / x * j[ell]
        dy = y[ell - 1] - (ell + 1) / x * y[ell]
    return BesselPair(ell, x, float(j[ell]), float(y[ell]), float(dj), float(dy))


def riccati(ell, x):
    """Riccati-Bessel values ``x j_l``, ``x y_l`` and their x-derivatives.

    Vectorised over ``x``. Returns ``(u, du, v, dv)``.
    """
    ell = _check_order(ell)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    top = ell + 1
    jt = scaled_j(top, x)
    yt = scaled_y(top, x)
    j_l = jt[ell] * x**ell
    j_n = jt[ell + 1] * x ** (ell + 1)
    y_l = yt[ell] / x ** (ell + 1)
    y_n = yt[ell + 1] / x ** (ell + 2)
    # (x f_l)' = (l + 1) f_l - x f_{l+1}
    u = x * j_l
    du = (ell + 1) * j_l - x * j_n
    v = x * y_l
    dv = (ell + 1) * y_l - x * y_n
    return u, du, v, dv


def _kernel_from_scaled(ell, x_lo, x_hi, jt_lo, jt_hi, yt_hi):
    # u(x<) w(x>) with w = -i x h2 = -i u - v, assembled without forming x**-l
    u_lo = jt_lo * x_lo ** (ell + 1)
    u_hi = jt_hi * x_hi ** (ell + 1)
    ratio = np.power(x_lo / x_hi, ell)
    return -1j * u_lo * u_hi - x_lo * ratio * jt_lo * yt_hi


def free_green_kernel(ch, r, rp):
    """Kernel of ``(h_l0 - lambda - i0)^-1`` at ``(r, rp)`` for channel ``ch``."""
    if not (r > 0 and rp > 0):
        raise InvalidArgument("radii must be positive")
    ell, k = ch.ell, ch.k
    lo, hi = min(r, rp), max(r, rp)
    x = np.array([k * lo, k * hi])
    jt = scaled_j(ell, x)[ell]
    yt = scaled_y(ell, x)[ell]
    val = _kernel_from_scaled(ell, x[0], x[1], jt[0], jt[1], yt[1]) / k
    return complex(val)


def free_green_matrix(ell, k, r):
    """Kernel values ``g_l(r_p, r_q; k)`` on a set of nodes (no quadrature weights)."""
    ell = _check_order(ell)
    r = np.asarray(r, dtype=float)
    x = k * r
    jt = scaled_j(ell, x)[ell]
    yt = scaled_y(ell, x)[ell]
    ar = np.arange(r.size)
    lo = np.minimum.outer(ar, ar)
    hi = np.maximum.outer(ar, ar)
    return _kernel_from_scaled(ell, x[lo], x[hi], jt[lo], jt[hi], yt[hi]) / k


def zero_energy_kernel_matrix(ell, r):
    """``r<^(l+1) r>^(-l) / (2l + 1)``, the ``k -> 0`` limit of the kernel."""
    r = np.asarray(r, dtype=float)
    lo = np.minimum.outer(r, r)
    hi = np.maximum.outer(r, r)
    return lo * np.power(lo / hi, ell) / (2 * ell + 1)

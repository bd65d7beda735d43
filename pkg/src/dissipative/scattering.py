"""Partial-wave scattering coefficients ``S_l(lam)`` of the pair (H, H0).

For radial potentials the scattering matrix is diagonal in spherical
harmonics. ``S_l`` is obtained by integrating the regular solution with RK4
to the edge of the support and matching to incoming/outgoing Riccati-Hankel
functions, normalised so that the free model gives ``S_l = 1``. A zero of
``S_l`` marks a spectral singularity.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, MatchingDegenerate
from .freegreen import free_green_matrix, riccati
from .model import quadrature_samples, RadialGrid

DEFAULT_STEP = 1e-3
INVERTIBLE_THRESHOLD = 1e-3


def _segments(model):
    """Affine pieces of ``V`` and ``W`` on ``(0, a]`` as ``(r0, r1, v, dv, w, dw)``."""
    a = model.support_radius
    cuts = {0.0, a}
    cuts.update(b for b in model.V.breakpoints if b < a)
    cuts.update(b for b in model.W.breakpoints if b < a)
    cuts = sorted(cuts)
    out = []
    for r0, r1 in zip(cuts, cuts[1:]):
        mid = 0.5 * (r0 + r1)
        v, dv = model.V.linear_piece(mid)
        w, dw = model.W.linear_piece(mid)
        # re-anchor the affine pieces at r0
        out.append((r0, r1, v - dv * (mid - r0), dv, w - dw * (mid - r0), dw))
    return out


def _series_start(ell, p0, p1, r_s):
    """Regular solution of ``phi'' = (l(l+1)/r^2 + p0 + p1 r) phi`` at ``r_s``.

    Frobenius series scaled by ``r_s**-(l+1)``; returns ``(phi, phi')``.
    """
    a2 = p0 * r_s**2
    a3 = p1 * r_s**3
    t = [np.ones_like(p0), np.zeros_like(p0), None]
    phi = np.ones_like(p0)
    dphi = np.full_like(p0, ell + 1.0)
    t[2] = a2 * t[0] / (2 * (2 * ell + 3))
    m = 2
    while True:
        if m > 2:
            t.append((a2 * t[m - 2] + a3 * t[m - 3]) / (m * (m + 2 * ell + 1)))
        phi = phi + t[m]
        dphi = dphi + (m + ell + 1) * t[m]
        tail = max(np.max(np.abs(t[m])), np.max(np.abs(t[m - 1])))
        if (m > 6 and tail < 1e-18 * np.max(np.abs(phi))) or m > 400:
            break
        m += 1
    return phi, dphi / r_s


def regular_solution(model, ell, k, step=DEFAULT_STEP):
    """``(phi, phi')`` of the regular solution at the support radius, up to scale.

    Vectorised over the momenta ``k``.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    k2 = k * k
    g2 = model.g**2
    segs = _segments(model)
    cent = ell * (ell + 1)

    r0, r1, v, dv, w, dw = segs[0]
    p0 = (v - 1j * g2 * w) - k2 + 0j
    p1 = dv - 1j * g2 * dw
    size = max(np.max(np.abs(p0)), 1e-300)
    r_s = min(r1, np.sqrt(0.25 / size))
    if p1 != 0:
        r_s = min(r_s, (0.25 / abs(p1)) ** (1 / 3))
    phi, dphi = _series_start(ell, p0, p1 + 0j * p0, r_s)

    first = True
    for r0, r1, v, dv, w, dw in segs:
        start = r_s if first else r0
        first = False
        length = r1 - start
        if length <= 0:
            continue
        nsteps = max(1, int(np.ceil(length / step - 1e-9)))
        s = length / nsteps
        u0 = v - 1j * g2 * w
        du = dv - 1j * g2 * dw

        def q(r):
            return cent / (r * r) + u0 + du * (r - r0) - k2

        r = start
        for _ in range(nsteps):
            k1p, k1d = dphi, q(r) * phi
            rm = r + 0.5 * s
            qm = q(rm)
            k2p, k2d = dphi + 0.5 * s * k1d, qm * (phi + 0.5 * s * k1p)
            k3p, k3d = dphi + 0.5 * s * k2d, qm * (phi + 0.5 * s * k2p)
            r = r + s
            k4p, k4d = dphi + s * k3d, q(r) * (phi + s * k3p)
            phi = phi + s / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            dphi = dphi + s / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        scale = np.maximum(np.abs(phi), np.abs(dphi))
        phi, dphi = phi / scale, dphi / scale
    return phi, dphi


def _match(ell, k, a, phi, dphi):
    u, du, v, dv = riccati(ell, k * a)
    h1, dh1 = u + 1j * v, k * (du + 1j * dv)
    h2, dh2 = u - 1j * v, k * (du - 1j * dv)
    w_in = phi * dh1 - dphi * h1  # 2ik * incoming amplitude
    w_out = h2 * dphi - dh2 * phi
    scale = np.abs(phi) * np.abs(dh1) + np.abs(dphi) * np.abs(h1)
    if np.any(np.abs(w_in) <= 1e-14 * scale):
        raise MatchingDegenerate("incoming amplitude vanished; refine the step size")
    return w_out / w_in


def scattering_coefficients(model, ell, lams, step=DEFAULT_STEP):
    """``S_l`` at each energy in ``lams`` (ODE matching)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise InvalidArgument("energies must be positive")
    if model.support_radius == 0 or (model.V.is_zero and (model.W.is_zero or model.g == 0)):
        return np.ones(lams.size, dtype=complex)
    k = np.sqrt(lams)
    phi, dphi = regular_solution(model, ell, k, step)
    return _match(ell, k, model.support_radius, phi, dphi)


def scattering_coefficient(model, ch, step=DEFAULT_STEP):
    return complex(scattering_coefficients(model, ch.ell, [ch.lam], step)[0])


def scattering_coefficient_integral(model, ch, n_nodes=200, levels=3):
    """Independent estimate ``S = 1 - (2i/k) <u, U psi>`` from the outgoing
    Lippmann-Schwinger equation, Richardson-extrapolated over ``levels``
    successive halvings of the Nystrom spacing.
    """
    a = model.support_radius
    if a == 0:
        return 1.0 + 0j
    k = ch.k
    est = []
    for lev in range(levels):
        grid = RadialGrid(a, n_nodes * 2**lev)
        r = grid.nodes
        pot = quadrature_samples(model.V, grid) - 1j * model.g**2 * quadrature_samples(model.W, grid)
        gout = np.conj(free_green_matrix(ch.ell, k, r)) * grid.h
        u = riccati(ch.ell, k * r)[0]
        psi = np.linalg.solve(np.eye(r.size) + gout * pot[None, :], u)
        est.append(1.0 - 2j / k * grid.h * np.sum(u * pot * psi))
    est = np.array(est)
    # even-power error expansion: eliminate h^2, h^4, ...
    for p in range(1, levels):
        f = 4.0**p
        est = (f * est[1:] - est[:-1]) / (f - 1)
    return complex(est[-1])


@dataclass
class ScatteringProfile:
    lams: np.ndarray
    ells: np.ndarray
    S: np.ndarray  # shape (n_lam, n_ell)
    method: str = "ode-matching"
    threshold: float = INVERTIBLE_THRESHOLD

    @property
    def modulus(self):
        return np.abs(self.S)

    @property
    def min_modulus(self):
        return self.modulus.min(axis=1)

    @property
    def invertible(self):
        return self.min_modulus > self.threshold

    def contraction_violation(self):
        return float(np.max(self.modulus) - 1.0)


def scattering_profile(model, J, n_lam, ell_max, step=DEFAULT_STEP):
    lo, hi = J
    if not 0 < lo < hi or not np.isfinite(hi):
        raise InvalidArgument("J must be a compact interval inside (0, inf)")
    lams = np.linspace(lo, hi, int(n_lam))
    ells = np.arange(ell_max + 1)
    S = np.column_stack([scattering_coefficients(model, ell, lams, step) for ell in ells])
    return ScatteringProfile(lams, ells, S)

"""Weighted resolvent boundary values and the discrete spectrum.

``A_l(lam) = C R_V(lam - i0) C`` is assembled by a Nystrom discretisation of
the Lippmann-Schwinger equation with trapezoidal weights. Matrices carry the
symmetric weight ``h`` so that matrix products represent operator products.
Only nodes where ``V`` or ``C`` is nonzero take part in the solve, since the
rest of the grid never couples to the interaction.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, SpectralSingularityError, Unsupported
from .freegreen import free_green_matrix

COND_LIMIT = 1e12
SIGMA_FLOOR = 1e-10
DENSE_LIMIT = 4000


@dataclass
class Block:
    """Interaction-region pieces of one ``(l, lam)`` assembly."""

    index: np.ndarray
    free: np.ndarray
    resolvent: np.ndarray
    a: np.ndarray
    condition: float

    @property
    def trusted(self):
        return self.condition <= COND_LIMIT


@dataclass
class WeightedResolvent:
    ell: int
    lam: float
    kind: str
    n: int
    index: np.ndarray
    block: np.ndarray
    trusted: bool = True
    condition: float = 1.0

    @property
    def entries(self):
        """Dense ``n x n`` matrix; zero outside the interaction region."""
        out = np.zeros((self.n, self.n), dtype=complex)
        out[np.ix_(self.index, self.index)] = self.block
        return out


def _rcond(m, lu_piv):
    gecon, = sla.get_lapack_funcs(("gecon",), (m,))
    anorm = np.abs(m).sum(axis=0).max()
    rcond, _ = gecon(lu_piv[0], anorm, norm="1")
    return rcond


def a_block(h, r, v, c, ell, lam):
    """Core assembly on the interaction nodes ``r`` with samples ``v`` and ``c``."""
    k = np.sqrt(lam)
    free = h * free_green_matrix(ell, k, r)
    if np.any(v != 0):
        m = np.eye(r.size) + free * v[None, :]
        lu = sla.lu_factor(m, check_finite=False)
        rcond = _rcond(m, lu)
        cond = np.inf if rcond == 0 else 1.0 / rcond
        res = sla.lu_solve(lu, free, check_finite=False)
    else:
        cond = 1.0
        res = free
    a = c[:, None] * res * c[None, :]
    return Block(np.arange(r.size), free, res, a, cond)


def assemble_block(model, ell, lam):
    idx = model.support_index
    if idx.size == 0:
        z = np.zeros((0, 0), dtype=complex)
        return Block(idx, z, z, z, 1.0)
    if np.any(model.w < 0):
        raise InvalidArgument("W must be non-negative")
    blk = a_block(model.grid.h, model.grid.nodes[idx], model.v[idx], model.c[idx], ell, lam)
    blk.index = idx
    return blk


def assemble_A(model, ch):
    """``A_l(lam) = g C R_V(lam - i0) C g`` on the grid.

    ``trusted`` is false when ``Id + G0 V`` has condition number above
    1e12; the caller should refine the grid.
    """
    blk = assemble_block(model, ch.ell, ch.lam)
    return WeightedResolvent(
        ch.ell, ch.lam, "A_of_HV", model.grid.n, blk.index, blk.a, blk.trusted, blk.condition
    )


def b_from_a(a):
    """``B = (Id - iA)^-1 A``, raising if ``Id - iA`` is numerically singular."""
    if a.size == 0:
        return a.copy(), 1.0
    m = np.eye(a.shape[0]) - 1j * a
    smin = float(sla.svdvals(m, check_finite=False)[-1])
    if smin <= SIGMA_FLOOR:
        raise SpectralSingularityError(
            f"Id - iA is singular (sigma_min={smin:.3e})", sigma_min=smin
        )
    return sla.solve(m, a, check_finite=False), smin


def assemble_B(model, ch):
    """``B_l(lam) = C R(lam - i0) C`` via the second resolvent identity ``B = A + iAB``."""
    blk = assemble_block(model, ch.ell, ch.lam)
    try:
        b, _ = b_from_a(blk.a)
    except SpectralSingularityError as exc:
        exc.lam = ch.lam
        raise
    return WeightedResolvent(
        ch.ell, ch.lam, "B_of_H", model.grid.n, blk.index, b, blk.trusted, blk.condition
    )


def resolvent_residual(a, b):
    """``||B - (A + iAB)|| / ||B||`` in the spectral norm."""
    nb = np.linalg.norm(b, 2)
    if nb == 0:
        return 0.0
    return float(np.linalg.norm(b - (a + 1j * a @ b), 2) / nb)


# -- discrete spectrum --------------------------------------------------------


def channel_operator(model, ell, absorbing=True):
    """Tridiagonal ``-d^2/dr^2 + l(l+1)/r^2 + V - i g^2 W`` (Dirichlet at both ends)."""
    grid = model.grid
    r = grid.nodes
    h2 = grid.h**2
    diag = 2.0 / h2 + ell * (ell + 1) / r**2 + model.v
    if absorbing:
        diag = diag - 1j * model.g**2 * model.w
    off = np.full(grid.n - 1, -1.0 / h2)
    return sp.diags([off, diag.astype(complex), off], [-1, 0, 1], format="csc")


def free_operator(grid, ell):
    r = grid.nodes
    h2 = grid.h**2
    diag = 2.0 / h2 + ell * (ell + 1) / r**2
    off = np.full(grid.n - 1, -1.0 / h2)
    return sp.diags([off, diag, off], [-1, 0, 1], format="csc")


@dataclass
class Region:
    re: tuple
    im: tuple

    def __post_init__(self):
        if self.re[0] > self.re[1] or self.im[0] > self.im[1]:
            raise InvalidArgument("region bounds are reversed")
        if self.im[1] > 1e-8:
            raise InvalidArgument("region must lie in the closed lower half-plane")

    def contains(self, z):
        z = np.asarray(z)
        return (
            (z.real >= self.re[0]) & (z.real <= self.re[1])
            & (z.imag >= self.im[0]) & (z.imag <= self.im[1])
        )


@dataclass
class SpectrumReport:
    ell: int
    eigenvalues: np.ndarray
    vectors: list = field(default_factory=list)
    residuals: np.ndarray = None

    def pairs(self):
        return list(zip(self.eigenvalues, self.vectors))


def _norm(u, h):
    return np.sqrt(h) * np.linalg.norm(u)


def inverse_iteration(op, z0, h, tol=1e-13, maxiter=30, u0=None):
    """Rayleigh-quotient iteration with the complex-symmetric quotient ``u^T H u / u^T u``."""
    n = op.shape[0]
    eye = sp.identity(n, dtype=complex, format="csc")
    u = np.ones(n, dtype=complex) if u0 is None else np.asarray(u0, dtype=complex)
    z = complex(z0)
    scale = max(abs(op).max(), 1.0)
    for _ in range(maxiter):
        # tiny offset keeps the factorisation regular when z is already exact
        lu = spla.splu(op - (z + 1e-13 * scale) * eye)
        u = lu.solve(u)
        u /= np.linalg.norm(u)
        hu = op @ u
        utu = u @ u
        z_new = (u @ hu) / utu if abs(utu) > 1e-8 else np.vdot(u, hu)
        res = np.linalg.norm(hu - z_new * u)
        z = z_new
        if res <= tol * scale:
            break
    u = u / _norm(u, h)
    res = _norm(op @ u - z * u, h)
    return z, u, res


def discrete_spectrum(model, ell, region):
    """Eigenvalues of the channel operator inside ``region`` with refined eigenpairs."""
    if not isinstance(region, Region):
        region = Region(*region)
    op = channel_operator(model, ell)
    if op.shape[0] > DENSE_LIMIT:
        raise Unsupported(f"dense diagonalisation limited to n <= {DENSE_LIMIT}")
    ev = sla.eigvals(op.toarray(), check_finite=False)
    cand = np.sort_complex(ev[region.contains(ev)])
    zs, vecs, res = [], [], []
    for z0 in cand:
        z, u, r = inverse_iteration(op, z0, model.grid.h)
        zs.append(z)
        vecs.append(u)
        res.append(r)
    return SpectrumReport(ell, np.array(zs, dtype=complex), vecs, np.array(res))


def refine_eigenvalue(model, ell, z0, factors=(1, 2)):
    """Grid-refined eigenvalue near ``z0``: Richardson over ``h / f`` assuming O(h^2)."""
    vals = []
    for f in factors:
        m = model.refined(f) if f != 1 else model
        z, _, _ = inverse_iteration(channel_operator(m, ell), z0, m.grid.h)
        vals.append(z)
    if len(vals) == 1:
        return vals[0], vals
    f0, f1 = factors[-2], factors[-1]
    q = (f1 / f0) ** 2
    return (q * vals[-1] - vals[-2]) / (q - 1), vals


def birman_schwinger_distance(model, ell, z):
    """``min |1 - mu|`` over the spectrum of ``-G0_h(z) (V - i g^2 W)``.

    ``G0_h`` is the resolvent of the discrete free channel operator, so the
    distance vanishes exactly when ``z`` is an eigenvalue of the grid operator.
    """
    idx = model.support_index
    if idx.size == 0:
        return 1.0
    n = model.grid.n
    t = free_operator(model.grid, ell).astype(complex)
    lu = spla.splu(t - z * sp.identity(n, dtype=complex, format="csc"))
    rhs = np.zeros((n, idx.size), dtype=complex)
    rhs[idx, np.arange(idx.size)] = 1.0
    g0 = lu.solve(rhs)[idx]
    u = model.v[idx] - 1j * model.g**2 * model.w[idx]
    mu = np.linalg.eigvals(-g0 * u[None, :])
    return float(np.min(np.abs(1.0 - mu)))

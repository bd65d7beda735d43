"""Time evolution ``exp(-itH)`` on the radial grid.

Steps use the Cayley transform ``(Id + i dt/2 H)^-1 (Id - i dt/2 H)``. It is
contractive whenever the numerical range of the grid operator lies in the
closed lower half-plane, which is the case for ``W >= 0``. Norms are the
discrete ``L^2`` norms ``sqrt(h) |u|``.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoxTooSmall, ClassificationUndetermined, InvalidArgument
from .resolvent import channel_operator, free_operator

STEP_WARN = 10.0
LEAK_LIMIT = 1e-3
EDGE_FRACTION = 0.1
TAIL_FRACTION = 0.1
NORM_TOL = 1e-8
EIG_RESIDUAL_MAX = 1e-8


class StepTooLargeWarning(UserWarning):
    pass


def grid_norm(u, h):
    return float(np.sqrt(h) * np.linalg.norm(u))


def edge_mass(u, grid, fraction=EDGE_FRACTION):
    """Probability in the outer ``fraction`` of the box."""
    cut = int(np.floor((1 - fraction) * grid.n))
    return float(grid.h * np.sum(np.abs(u[cut:]) ** 2))


def gaussian_state(grid, center, width, momentum=0.0):
    """Normalised Gaussian bump, made odd about ``r = 0`` so it meets the Dirichlet condition."""
    if width <= 0:
        raise InvalidArgument("width must be positive")
    r = grid.nodes
    bump = lambda x: np.exp(-0.5 * (x / width) ** 2 + 1j * momentum * x)
    u = bump(r - center) - bump(-r - center)
    nrm = grid_norm(u, grid.h)
    if nrm == 0:
        raise InvalidArgument("initial state vanishes on the grid")
    return u / nrm


class CayleyStepper:
    """Repeated application of the Cayley step for a fixed tridiagonal operator."""

    def __init__(self, op, dt, backward=False):
        n = op.shape[0]
        eye = sp.identity(n, dtype=complex, format="csc")
        half = 0.5j * dt * op
        if backward:
            half = -half
        self._lu = spla.splu((eye + half).tocsc())
        self._rhs = (eye - half).tocsr()

    def step(self, u):
        return self._lu.solve(self._rhs @ u)


def _op_norm(op):
    return float(abs(op).sum(axis=1).max())


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    norms: np.ndarray
    p_scatt_estimate: float
    p_abs_estimate: float
    leakage: float
    final: np.ndarray = None
    max_step_growth: float = 0.0

    @property
    def monotone(self):
        return self.max_step_growth <= 1e-12


def _check_state(u0, grid):
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != (grid.n,):
        raise InvalidArgument(f"state must have {grid.n} grid values")
    if abs(grid_norm(u0, grid.h) - 1) > NORM_TOL:
        raise InvalidArgument("initial state must be normalised")
    return u0


def propagate(model, ell, u0, T, dt):
    """Cayley propagation of ``u0`` up to time ``T``; the norm is recorded after every step."""
    if not dt > 0 or not T >= dt:
        raise InvalidArgument("need dt > 0 and T >= dt")
    grid = model.grid
    u = _check_state(u0, grid)
    op = channel_operator(model, ell)
    nsteps = int(np.ceil(T / dt - 1e-9))
    dt = T / nsteps
    if dt * _op_norm(op) > STEP_WARN:
        warnings.warn(
            f"dt*||H|| = {dt * _op_norm(op):.3g} exceeds {STEP_WARN}; high grid modes are not resolved in time",
            StepTooLargeWarning,
            stacklevel=2,
        )
    stepper = CayleyStepper(op, dt)
    norms = np.empty(nsteps + 1)
    norms[0] = grid_norm(u, grid.h)
    leak = edge_mass(u, grid)
    for i in range(nsteps):
        u = stepper.step(u)
        norms[i + 1] = grid_norm(u, grid.h)
        leak = max(leak, edge_mass(u, grid))
    times = dt * np.arange(nsteps + 1)
    growth = float(np.max(norms[1:] / norms[:-1]) - 1.0)
    tail = norms[-max(1, int(np.ceil(TAIL_FRACTION * nsteps))):]
    p_scatt = float(np.median(tail**2))
    return TrajectoryRecord(times, norms, p_scatt, 1.0 - p_scatt, leak, u, growth)


@dataclass
class StateClassification:
    decay_rate_fit: float
    predicted: float
    cls: str
    fit_residual: float = 0.0
    tail_norm: float = None


def fit_decay_rate(times, norms):
    """Least-squares slope and RMS residual of ``log norms`` against ``times``."""
    logn = np.log(norms)
    slope, icept = np.polyfit(times, logn, 1)
    resid = float(np.sqrt(np.mean((logn - (slope * times + icept)) ** 2)))
    return float(slope), resid


def decay_check(model, ell, z, u, T=10.0, dt=0.01, rate_tol=1e-6):
    """Propagate an eigenvector and compare the fitted decay rate with ``Im z``."""
    op = channel_operator(model, ell)
    h = model.grid.h
    u = np.asarray(u, dtype=complex)
    u = u / grid_norm(u, h)
    res = grid_norm(op @ u - z * u, h)
    if res > EIG_RESIDUAL_MAX:
        raise InvalidArgument(f"eigenpair residual {res:.2e} exceeds {EIG_RESIDUAL_MAX}")
    tr = propagate(model, ell, u, T, dt)
    rate, resid = fit_decay_rate(tr.times, tr.norms)
    if not np.isfinite(rate) or resid > 1e-6:
        raise ClassificationUndetermined(f"log-norm fit did not converge (residual {resid:.2e})")
    cls = "decaying-candidate" if rate < -rate_tol else "bound"
    return StateClassification(rate, float(np.imag(z)), cls, resid, float(tr.norms[-1]))


def riesz_complement(u, vectors):
    """Remove the components of ``u`` along eigenvectors of a complex-symmetric operator.

    The projection uses the bilinear pairing ``v^T u``, under which
    eigenvectors for distinct eigenvalues are orthogonal.
    """
    u = np.array(u, dtype=complex)
    for v in vectors:
        u = u - v * (v @ u) / (v @ v)
    return u


def classify_state(model, ell, u0, T, dt, vectors=(), plateau_tol=1e-3):
    """Tag ``u0`` (after removing eigen-components) as scattering or decaying.

    A scattering candidate keeps a positive norm whose relative drop over the
    last tenth of the run is below ``plateau_tol``.
    """
    h = model.grid.h
    u = riesz_complement(u0, vectors)
    nrm = grid_norm(u, h)
    if nrm == 0:
        return StateClassification(-np.inf, np.nan, "decaying-candidate", tail_norm=0.0)
    tr = propagate(model, ell, u / nrm, T, dt)
    k = max(2, int(np.ceil(TAIL_FRACTION * len(tr.norms))))
    tail_t, tail_n = tr.times[-k:], tr.norms[-k:]
    rate, resid = fit_decay_rate(tail_t, tail_n)
    drop = 1.0 - tail_n[-1] / tail_n[0]
    cls = "scattering-candidate" if drop < plateau_tol and tail_n[-1] > 0 else "decaying-candidate"
    return StateClassification(rate, np.nan, cls, resid, float(tr.norms[-1]))


@lru_cache(maxsize=8)
def _free_eigensystem(grid, ell):
    t = free_operator(grid, ell)
    return sla.eigh_tridiagonal(t.diagonal(), t.diagonal(1))


@dataclass
class ProbeRecord:
    times: np.ndarray
    increments: np.ndarray
    norms: np.ndarray
    leakage: float
    asymptotes: list = field(default_factory=list, repr=False)

    @property
    def decreasing(self):
        return bool(np.all(np.diff(self.increments) < 0))


def weak_ac_probe(model, ell, u0, T, dt=0.05, doublings=4, free="cayley", vectors=()):
    """Cauchy increments of ``v_t = exp(itH0) exp(-itH) u0`` on ``t = T / 2^j``.

    ``free="cayley"`` undoes the free motion with backward Cayley steps of the
    same ``dt``, so the scheme's phase error cancels wherever ``H = H0``;
    ``free="eigen"`` applies ``exp(itH0)`` exactly from the eigenvectors of
    the discrete free operator. Components along ``vectors`` (eigenvectors of
    ``H``) are projected out and the state renormalised first.
    """
    if free not in ("cayley", "eigen"):
        raise InvalidArgument("free must be 'cayley' or 'eigen'")
    grid = model.grid
    u = _check_state(u0, grid)
    if len(vectors):
        u = riesz_complement(u, vectors)
        u = u / grid_norm(u, grid.h)
    times = T / 2.0 ** np.arange(doublings, -1, -1)
    steps = np.rint(times / dt).astype(int)
    if np.any(steps < 1) or np.any(np.abs(steps * dt - times) > 1e-9 * T):
        raise InvalidArgument("schedule times must be multiples of dt")
    fwd = CayleyStepper(channel_operator(model, ell), dt)
    t0 = free_operator(grid, ell).astype(complex)
    back = CayleyStepper(t0, dt, backward=True) if free == "cayley" else None
    leak, done, vs = edge_mass(u, grid), 0, []
    for n in steps:
        for _ in range(n - done):
            u = fwd.step(u)
            leak = max(leak, edge_mass(u, grid))
        done = n
        if leak > LEAK_LIMIT:
            raise BoxTooSmall(f"boundary leakage {leak:.2e} at t={n * dt:g}; enlarge r_max")
        if back is not None:
            v = u.copy()
            for _ in range(n):
                v = back.step(v)
        else:
            e, q = _free_eigensystem(grid, ell)
            v = q @ (np.exp(1j * n * dt * e) * (q.T @ u))
        vs.append(v)
    inc = np.array([grid_norm(b - a, grid.h) for a, b in zip(vs, vs[1:])])
    norms = np.array([grid_norm(v, grid.h) for v in vs])
    return ProbeRecord(times, inc, norms, leak, vs)

"""Radial grids, compactly supported potentials and the optical model.

Units are hbar = 1 and 2m = 1, so the free operator is ``-d^2/dr^2`` plus the
centrifugal term in each partial wave and the momentum is ``k = sqrt(lambda)``.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import freegreen
from .errors import InvalidArgument

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    """Uniform mesh ``r_i = i*h``, ``i = 1..n``; the origin is excluded (Dirichlet)."""

    r_max: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.r_max) or self.r_max <= 0:
            raise InvalidArgument(f"r_max must be positive, got {self.r_max}")
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise InvalidArgument(f"n must be an integer >= {MIN_NODES}, got {self.n}")

    @property
    def h(self):
        return self.r_max / self.n

    @cached_property
    def nodes(self):
        return self.h * np.arange(1, self.n + 1)

    def refined(self, factor=2):
        """Same box with ``factor`` times as many nodes (old nodes are kept)."""
        return RadialGrid(self.r_max, self.n * factor)

    def enlarged(self, factor):
        """Box scaled by ``factor`` at the same spacing."""
        n = int(round(self.n * factor))
        return RadialGrid(self.h * n, n)


def build_radial_grid(r_max, n):
    return RadialGrid(float(r_max), int(n))


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential with compact support.

    ``kind="piecewise"``: value ``values[j]`` on ``(radii[j-1], radii[j]]``
    (the first piece starts at 0). ``kind="tabulated"``: linear interpolation
    between samples ``(radii[j], values[j])``, constant below the first
    sample and zero beyond the last one.
    """

    kind: str
    radii: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("piecewise", "tabulated"):
            raise InvalidArgument(f"unknown potential kind {self.kind!r}")
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        if len(radii) != len(values):
            raise InvalidArgument("radii and values differ in length")
        if not all(np.isfinite(radii)) or not all(np.isfinite(values)):
            raise InvalidArgument("potential radii and values must be finite reals")
        if any(r <= 0 for r in radii) and self.kind == "piecewise":
            raise InvalidArgument("piece radii must be positive")
        if any(r < 0 for r in radii):
            raise InvalidArgument("sample radii must be non-negative")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise InvalidArgument("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)

    @classmethod
    def piecewise(cls, pieces):
        """From ``[(outer_radius, value), ...]`` sorted by radius."""
        pieces = list(pieces)
        return cls("piecewise", tuple(p[0] for p in pieces), tuple(p[1] for p in pieces))

    @classmethod
    def tabulated(cls, samples):
        samples = list(samples)
        return cls("tabulated", tuple(s[0] for s in samples), tuple(s[1] for s in samples))

    @classmethod
    def zero(cls):
        return cls("piecewise")

    @classmethod
    def square_well(cls, value, radius):
        """Constant ``value`` on ``[0, radius]``."""
        return cls.piecewise([(radius, value)])

    @property
    def support_radius(self):
        return self.radii[-1] if self.radii else 0.0

    @property
    def is_zero(self):
        return not any(self.values)

    @property
    def breakpoints(self):
        return self.radii

    def __call__(self, r):
        """Point values; a piecewise potential takes its inner value at a breakpoint."""
        r = np.asarray(r, dtype=float)
        if not self.radii:
            return np.zeros_like(r)
        radii = np.array(self.radii)
        values = np.array(self.values)
        if self.kind == "piecewise":
            idx = np.searchsorted(radii, r, side="left")
            padded = np.append(values, 0.0)
            return padded[idx]
        out = np.interp(r, radii, values)
        return np.where(r > radii[-1], 0.0, out)

    def one_sided(self, r):
        """Left and right limits at ``r``."""
        r = np.asarray(r, dtype=float)
        left = self(r)
        if not self.radii:
            return left, left
        radii = np.array(self.radii)
        if self.kind == "piecewise":
            idx = np.searchsorted(radii, r, side="right")
            right = np.append(np.array(self.values), 0.0)[idx]
        else:
            right = np.where(r >= radii[-1], 0.0, left)
        return left, right

    def linear_piece(self, r_mid):
        """``(value, slope)`` of the affine piece whose interior contains ``r_mid``."""
        if not self.radii or r_mid >= self.support_radius:
            return 0.0, 0.0
        if self.kind == "piecewise":
            return float(self(r_mid)), 0.0
        radii = np.array(self.radii)
        j = int(np.searchsorted(radii, r_mid, side="right"))
        if j == 0:
            return self.values[0], 0.0
        slope = (self.values[j] - self.values[j - 1]) / (radii[j] - radii[j - 1])
        return float(self(r_mid)), slope

    def scaled(self, factor):
        return replace(self, values=tuple(factor * v for v in self.values))

    def squared(self):
        # exact for piecewise-constant; for tabulated, squares the samples only
        return replace(self, values=tuple(v * v for v in self.values))


def sample_potential(spec, grid):
    """Point samples of ``spec`` on the grid nodes."""
    _check_fits(spec, grid)
    return spec(grid.nodes)


def quadrature_samples(spec, grid):
    """Nodal values used by the trapezoidal rule.

    At a node that coincides with a jump the mean of the one-sided limits is
    used, which keeps the rule second order for piecewise data. With weights
    ``h`` on every node this also reproduces the half weight at ``r_max``.
    """
    _check_fits(spec, grid)
    left, right = spec.one_sided(grid.nodes)
    return 0.5 * (left + right)


def _check_fits(spec, grid):
    if spec.support_radius > grid.r_max * (1 + 1e-12):
        raise InvalidArgument(
            f"support radius {spec.support_radius} exceeds grid r_max {grid.r_max}"
        )


@dataclass(frozen=True)
class Channel:
    ell: int
    lam: float

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 0:
            raise InvalidArgument(f"ell must be a non-negative integer, got {self.ell}")
        if not self.lam > 0:
            raise InvalidArgument(f"energy must be positive, got {self.lam}")
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def k(self):
        return float(np.sqrt(self.lam))


@dataclass(frozen=True)
class OpticalModel:
    """``H = -Delta + V - i g^2 W`` restricted to radial potentials.

    ``C = sqrt(W)`` is the absorbing factor, ``g`` a coupling constant
    multiplying it (so the effective absorption is ``g^2 W``).
    """

    V: PotentialSpec
    W: PotentialSpec
    grid: RadialGrid
    g: float = 1.0

    def __post_init__(self):
        _check_fits(self.V, self.grid)
        _check_fits(self.W, self.grid)
        if not np.isfinite(self.g):
            raise InvalidArgument("coupling must be finite")
        object.__setattr__(self, "g", float(self.g))

    @classmethod
    def free(cls, grid):
        return cls(PotentialSpec.zero(), PotentialSpec.zero(), grid)

    @classmethod
    def from_shape(cls, V, c_shape, grid, g=1.0):
        """Model with ``W = c_shape**2``."""
        return cls(V, c_shape.squared(), grid, g)

    @cached_property
    def v(self):
        return quadrature_samples(self.V, self.grid)

    @cached_property
    def w(self):
        return quadrature_samples(self.W, self.grid)

    @cached_property
    def c(self):
        """``g * sqrt(W)`` on the nodes."""
        return self.g * np.sqrt(np.maximum(self.w, 0.0))

    @property
    def support_radius(self):
        return max(self.V.support_radius, self.W.support_radius)

    @cached_property
    def support_index(self):
        """Nodes where ``V`` or ``C`` is nonzero; all interaction lives here."""
        return np.flatnonzero((self.v != 0) | (self.w != 0))

    @property
    def is_free(self):
        return self.support_index.size == 0

    @property
    def is_dissipative(self):
        return bool(np.all(self.w >= 0) and np.any(self.w > 0) and self.g != 0)

    def with_coupling(self, g):
        return replace(self, g=g)

    def with_grid(self, grid):
        return replace(self, grid=grid)

    def refined(self, factor=2):
        return replace(self, grid=self.grid.refined(factor))


@dataclass
class ValidationReport:
    w_nonnegative: bool
    compact_support: bool
    zero_energy_regular: bool
    zero_energy_margin: float
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return self.w_nonnegative and self.compact_support and self.zero_energy_regular


ZERO_ENERGY_TOL = 1e-6


def zero_energy_margin(model, ell=0):
    """Distance of 1 from the spectrum of ``-G0(0) V`` on the grid.

    A zero value means 0 is an eigenvalue or a resonance of ``H_V`` in
    channel ``ell`` (Birman-Schwinger at zero energy).
    """
    idx = np.flatnonzero(model.v != 0)
    if idx.size == 0:
        return 1.0
    r = model.grid.nodes[idx]
    kern = freegreen.zero_energy_kernel_matrix(ell, r)
    m = -model.grid.h * kern * model.v[idx][None, :]
    mu = np.linalg.eigvals(m)
    return float(np.min(np.abs(1.0 - mu)))


def validate_hypotheses(model, ells=(0,)):
    messages = []
    w_ok = bool(np.all(model.w >= 0)) and bool(np.all(sample_potential(model.W, model.grid) >= 0))
    if not w_ok:
        messages.append("W takes negative values on the grid")
    compact = (
        model.V.support_radius <= model.grid.r_max
        and model.W.support_radius <= model.grid.r_max
        and np.all(np.isfinite(model.v))
        and np.all(np.isfinite(model.w))
    )
    if not compact:
        messages.append("potentials are not supported inside the box")
    margin = min(zero_energy_margin(model, ell) for ell in ells)
    regular = margin > ZERO_ENERGY_TOL
    if not regular:
        messages.append(f"zero energy is (numerically) an eigenvalue or resonance: margin {margin:.3e}")
    return ValidationReport(w_ok, bool(compact), bool(regular), margin, messages)

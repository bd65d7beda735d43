"""Spectral singularities of the optical model.

A positive energy ``lam`` is a regular spectral point exactly when
``Id - i A_l(lam)`` is invertible in every channel, with
``A_l(lam) = C R_V(lam - i0) C``. On the grid the smallest singular value of
that matrix, the regularity margin, measures how far ``lam`` is from being a
spectral singularity.

Because ``A`` does not depend on the coupling ``g`` in ``H_V - i g^2 C^2``,
the eigenvalues of ``i g^2 A`` are ``g^2`` times those of ``i A``. A
singularity sits where one of them equals 1. It is therefore built by
following the eigenvalues of ``iA(lam)`` to a crossing of the positive real
axis and rescaling ``g``. Any detuning of ``g`` moves the eigenvalue off 1
and removes the singularity.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from .errors import InvalidArgument, NotFound, OrderUndetermined, SpectralSingularityError
from .model import OpticalModel, validate_hypotheses
from .resolvent import a_block, assemble_block, b_from_a

ELL_CAP = 64
NORM_TOL = 1e-8
THRESHOLD_FACTOR = 1e-2
THRESHOLD_FLOOR = 1e-8
GOLDEN_WIDTH = 1e-8
LOCATION_TOL = 1e-4
ORDER_RESIDUAL_MAX = 0.1
ZERO_ENERGY_TOL = 1e-6


def _sigma_min(a, full_size):
    if a.size == 0:
        return 1.0
    s = sla.svdvals(np.eye(a.shape[0]) - 1j * a, check_finite=False)[-1]
    # directions outside the interaction block contribute singular value 1
    return float(min(s, 1.0)) if a.shape[0] < full_size else float(s)


def channel_margin(model, ell, lam):
    """``(sigma_min(Id - i A_l(lam)), trusted)``."""
    blk = assemble_block(model, ell, lam)
    return _sigma_min(blk.a, model.grid.n), blk.trusted


def a_norm(model, ell, lam):
    blk = assemble_block(model, ell, lam)
    return float(np.linalg.norm(blk.a, 2)) if blk.a.size else 0.0


def dissipative_norm(model, ell, lam):
    """``||(A - A*) / 2i||``; bounds ``1 - sigma_min(Id - iA)`` from above."""
    a = assemble_block(model, ell, lam).a
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm((a - a.conj().T) / 2j, 2))


def choose_ell_max(model, J, tol=NORM_TOL, cap=ELL_CAP):
    """Smallest ``l`` whose dissipative part is below ``tol`` at the ends and middle of ``J``.

    ``||A_l||`` itself only decays like ``l**-2``, but ``Id - iA_l`` is a
    perturbation of a normal matrix with singular values >= 1 by the rank-one
    dissipative part, which falls off super-algebraically. So below ``tol``
    every higher channel has margin >= 1 - tol.
    """
    if model.is_free:
        return 0
    probes = (J[1], 0.5 * (J[0] + J[1]), J[0])
    for ell in range(cap + 1):
        if all(dissipative_norm(model, ell, lam) < tol for lam in probes):
            return ell
    return cap


@dataclass
class RegularityMargin:
    lam: float
    per_channel: np.ndarray
    trusted: bool = True

    @property
    def overall(self):
        return float(self.per_channel.min())

    @property
    def channel(self):
        return int(np.argmin(self.per_channel))


def regularity_margin(model, lam, ell_max=None):
    if not lam > 0:
        raise InvalidArgument("energy must be positive")
    if ell_max is None:
        ell_max = choose_ell_max(model, (lam, lam))
    vals, trusted = [], True
    for ell in range(ell_max + 1):
        s, t = channel_margin(model, ell, lam)
        vals.append(s)
        trusted &= t
    return RegularityMargin(float(lam), np.array(vals), trusted)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def margin_table(model, lams, ell_max, workers=1):
    """Margins of shape ``(len(lams), ell_max + 1)`` and a matching trust mask."""
    def row(lam):
        out = [channel_margin(model, ell, lam) for ell in range(ell_max + 1)]
        return [o[0] for o in out], [o[1] for o in out]

    rows = _map(row, list(lams), workers)
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows], dtype=bool)


def refine_dip(model, ell, lo, mid, hi, width=GOLDEN_WIDTH):
    """Golden-section minimum of the channel margin inside ``[lo, hi]``."""
    f = lambda lam: channel_margin(model, ell, lam)[0]
    f_mid = f(mid)
    if not (f_mid < f(lo) and f_mid < f(hi)):
        # minimum sits on the edge of the bracket
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": width})
        return float(res.x), float(res.fun)
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=width / (2 * mid))
    return float(res.x), float(res.fun)


@dataclass
class OrderEstimate:
    order: int
    slope: float
    residual: float

    @property
    def singular(self):
        return self.order > 0


@dataclass
class Detection:
    lam_star: float
    ell: int
    margin: float
    trusted: bool
    order: int = None
    refined_shift: float = None


@dataclass
class SingularityReport:
    J: tuple
    lams: np.ndarray
    ells: np.ndarray
    margins: np.ndarray
    threshold: float
    detected: list = field(default_factory=list)
    trusted_grid: np.ndarray = None
    refined_minima: list = field(default_factory=list)

    @property
    def overall(self):
        return self.margins.min(axis=1)

    @property
    def min_margin(self):
        vals = [self.overall.min()] + [m for _, _, m in self.refined_minima]
        return float(min(vals))

    @property
    def untrusted_lams(self):
        if self.trusted_grid is None:
            return np.array([])
        return self.lams[~self.trusted_grid.all(axis=1)]

    @property
    def singular(self):
        return bool(self.detected)


def _check_interval(J):
    lo, hi = float(J[0]), float(J[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi <= lo:
        raise InvalidArgument(f"J must be a compact interval inside (0, inf), got {J}")
    return lo, hi


def scan_singularities(
    model,
    J,
    n_lam=200,
    ell_max=None,
    threshold_factor=THRESHOLD_FACTOR,
    check_refinement=True,
    estimate_order=True,
    workers=1,
):
    """Scan the regularity margin on a uniform energy grid and refine its dips.

    Every local minimum of the overall margin is refined by golden-section
    search. A refined value below ``threshold_factor * median`` (floored at
    1e-8) is a detection. Detections are re-located on a grid with half the
    spacing and marked trusted when the location moves by at most 1e-4
    relative.
    """
    lo, hi = _check_interval(J)
    if n_lam < 32:
        raise InvalidArgument("n_lam must be at least 32")
    if ell_max is None:
        ell_max = choose_ell_max(model, (lo, hi))
    lams = np.linspace(lo, hi, int(n_lam))
    margins, trusted = margin_table(model, lams, ell_max, workers)
    overall = margins.min(axis=1)
    threshold = max(threshold_factor * float(np.median(overall)), THRESHOLD_FLOOR)
    report = SingularityReport((lo, hi), lams, np.arange(ell_max + 1), margins, threshold,
                               trusted_grid=trusted)
    if model.is_free:
        return report

    n = lams.size
    for i in range(n):
        left = overall[i - 1] if i > 0 else np.inf
        right = overall[i + 1] if i < n - 1 else np.inf
        if not (overall[i] <= left and overall[i] <= right):
            continue
        if overall[i] >= 1.0 - 1e-12:
            continue
        ell = int(np.argmin(margins[i]))
        a, b = lams[max(i - 1, 0)], lams[min(i + 1, n - 1)]
        lam_star, m_star = refine_dip(model, ell, a, lams[i], b)
        report.refined_minima.append((lam_star, ell, m_star))
        if m_star >= threshold:
            continue
        det = Detection(lam_star, ell, m_star, trusted=bool(trusted[i].all()))
        if check_refinement:
            fine = model.refined(2)
            step = lams[1] - lams[0]
            lam2, _ = refine_dip(fine, ell, max(lam_star - step, lo), lam_star,
                                 min(lam_star + step, hi))
            det.refined_shift = abs(lam2 - lam_star) / lam_star
            det.trusted = det.trusted and det.refined_shift <= LOCATION_TOL
        if estimate_order:
            try:
                det.order = singularity_order(model, lam_star, ell=ell).order
            except (OrderUndetermined, SpectralSingularityError):
                det.order = None
        report.detected.append(det)
    return report


def fit_blowup_order(norm_of, lam_star, offsets=None):
    """Fit ``log norm_of(mu)`` against ``log|mu - lam_star|`` on both sides of ``lam_star``."""
    if offsets is None:
        offsets = np.logspace(-4, -2, 9)
    x, y = [], []
    for d in offsets:
        for mu in (lam_star - d, lam_star + d):
            x.append(np.log(d))
            y.append(np.log(norm_of(mu)))
    x, y = np.array(x), np.array(y)
    slope, icept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icept)) ** 2)))
    if resid > ORDER_RESIDUAL_MAX:
        raise OrderUndetermined(f"log-log fit residual {resid:.3f} exceeds {ORDER_RESIDUAL_MAX}")
    order = max(int(round(-slope)), 0)
    return OrderEstimate(order, float(slope), resid)


def singularity_order(model, lam_star, ell=None, ell_max=None, offsets=None):
    """Blow-up exponent of ``||C R(mu - i0) C||`` as ``mu -> lam_star``.

    Order 0 means the point is regular.
    """
    if ell is None:
        if ell_max is None:
            ell_max = choose_ell_max(model, (lam_star, lam_star))
        ells = range(ell_max + 1)
    else:
        ells = [ell]

    def norm_of(mu):
        best = 0.0
        for l in ells:
            b, _ = b_from_a(assemble_block(model, l, mu).a)
            best = max(best, float(np.linalg.norm(b, 2)) if b.size else 0.0)
        return max(best, np.finfo(float).tiny)

    return fit_blowup_order(norm_of, lam_star, offsets)


# -- construction and genericity ---------------------------------------------


def _ia_eigs(model, ell, lam):
    blk = assemble_block(model, ell, lam)
    if blk.a.size == 0:
        return np.zeros(0, dtype=complex), None, blk
    return np.linalg.eigvals(1j * blk.a), None, blk


def track_eigenvalues(model, ell, lams, n_tracks=6, min_gap=1e-6, max_halvings=8):
    """Continue the ``n_tracks`` largest eigenvalues of ``iA`` along ``lams``.

    Nearest-neighbour matching; when two candidates are within ``min_gap``
    of each other the step is halved.
    """
    lams = list(lams)
    ev0 = _ia_eigs(model, ell, lams[0])[0]
    if ev0.size == 0:
        return np.array(lams), np.zeros((len(lams), 0), dtype=complex)
    cur = ev0[np.argsort(-np.abs(ev0))][:n_tracks]
    out_l, out_t = [lams[0]], [cur.copy()]

    def match(prev, ev):
        new = np.empty_like(prev)
        for j, p in enumerate(prev):
            d = np.abs(ev - p)
            order = np.argsort(d)
            if ev.size > 1 and d[order[1]] - d[order[0]] < min_gap:
                return None
            new[j] = ev[order[0]]
        return new

    for lam in lams[1:]:
        a = out_l[-1]
        targets = [lam]
        halvings = 0
        while targets:
            t = targets[0]
            nxt = match(cur, _ia_eigs(model, ell, t)[0])
            if nxt is None and halvings < max_halvings:
                targets.insert(0, 0.5 * (a + t))
                halvings += 1
                continue
            if nxt is None:
                ev = _ia_eigs(model, ell, t)[0]
                nxt = np.array([ev[np.argmin(np.abs(ev - p))] for p in cur])
            cur = nxt
            a = t
            targets.pop(0)
        out_l.append(lam)
        out_t.append(cur.copy())
    return np.array(out_l), np.array(out_t)


@dataclass
class ConstructedSingularity:
    g_star: float
    lam_star: float
    ell: int
    mu: complex
    margin: float
    model: OpticalModel
    crossings: list = field(default_factory=list)


def _crossing(model, ell, a, b, mu_a, mu_b):
    def pick(lam):
        pred = mu_a + (mu_b - mu_a) * (lam - a) / (b - a)
        ev = _ia_eigs(model, ell, lam)[0]
        return ev[np.argmin(np.abs(ev - pred))]

    lam = brentq(lambda x: pick(x).imag, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return lam, pick(lam)


def construct_singularity(V, c_shape, window, grid, ell_max=4, n_track=64):
    """Coupling ``g*`` and energy ``lam*`` at which ``H_V - i g*^2 C0^2`` is singular.

    Among all real-axis crossings found (with positive real part), the one
    with the smallest coupling is returned.
    """
    lo, hi = _check_interval(window)
    base = OpticalModel.from_shape(V, c_shape, grid, g=1.0)
    if not np.any(base.w > 0):
        raise NotFound("C0 vanishes: iA has no nonzero eigenvalue")
    lams = np.linspace(lo, hi, int(n_track))
    crossings = []
    for ell in range(ell_max + 1):
        ls, tracks = track_eigenvalues(base, ell, lams)
        for j in range(tracks.shape[1]):
            im = tracks[:, j].imag
            for i in np.flatnonzero(np.sign(im[:-1]) * np.sign(im[1:]) < 0):
                if tracks[i, j].real <= 0 and tracks[i + 1, j].real <= 0:
                    continue
                lam, mu = _crossing(base, ell, ls[i], ls[i + 1], tracks[i, j], tracks[i + 1, j])
                if mu.real > 0:
                    crossings.append((lam, ell, mu))
    if not crossings:
        raise NotFound(f"no real-positive crossing of the eigenvalues of iA in {window}")
    lam, ell, mu = max(crossings, key=lambda c: c[2].real)
    g_star = float(1.0 / np.sqrt(mu.real))
    model = base.with_coupling(g_star)
    margin, _ = channel_margin(model, ell, lam)
    if margin >= 1e-6:
        raise NotFound(f"crossing at lam={lam} does not close the margin ({margin:.2e})")
    return ConstructedSingularity(g_star, float(lam), ell, complex(mu), margin, model, crossings)


@dataclass
class SweepRow:
    g: float
    min_margin: float
    mu: complex
    singular: bool
    scaling_error: float
    projection_angle: float
    report: SingularityReport = None


@dataclass
class GenericitySweep:
    base: ConstructedSingularity
    J: tuple
    rows: list

    @property
    def max_scaling_error(self):
        return max(r.scaling_error for r in self.rows)

    @property
    def max_projection_angle(self):
        return max(r.projection_angle for r in self.rows)


def _eigpair_near(a, target):
    ev, vec = np.linalg.eig(1j * a)
    j = int(np.argmin(np.abs(ev - target)))
    return ev[j], vec[:, [j]]


def coupling_eigen_check(base, g):
    """Eigenvalue of ``i g^2 A(lam*)`` continuing ``mu_1`` and the angle between eigenvectors."""
    lam, ell = base.lam_star, base.ell
    a1 = assemble_block(base.model.with_coupling(1.0), ell, lam).a
    mu1, v1 = _eigpair_near(a1, base.mu)
    ag = assemble_block(base.model.with_coupling(g), ell, lam).a
    mug, vg = _eigpair_near(ag, g * g * mu1)
    err = abs(mug - g * g * mu1) / abs(g * g * mu1)
    angle = float(np.max(sla.subspace_angles(v1, vg)))
    return complex(mug), float(err), angle


def genericity_sweep(base, g_values, J=None, n_lam=200, ell_max=None, check_refinement=True,
                     workers=1):
    """Scan ``J`` for every coupling in ``g_values``; the base must be singular at ``g*``."""
    if not isinstance(base, ConstructedSingularity) or not base.margin < 1e-6:
        raise InvalidArgument("base model does not carry a trusted singularity")
    if J is None:
        J = (0.5 * base.lam_star, 2.0 * base.lam_star)
    lo, hi = _check_interval(J)
    if not lo <= base.lam_star <= hi:
        raise InvalidArgument("J must contain the constructed singularity")
    if ell_max is None:
        ell_max = min(choose_ell_max(base.model, (lo, hi)), 8)
    rows = []
    for g in g_values:
        model = base.model.with_coupling(float(g))
        rep = scan_singularities(model, (lo, hi), n_lam, ell_max,
                                 check_refinement=check_refinement, estimate_order=False,
                                 workers=workers)
        mu, err, angle = coupling_eigen_check(base, float(g))
        rows.append(SweepRow(float(g), rep.min_margin, mu, rep.singular, err, angle, rep))
    return GenericitySweep(base, (lo, hi), rows)


# -- verdict ------------------------------------------------------------------


@dataclass
class Verdict:
    status: str  # "complete-on-J", "not-complete" or "not-certifiable"
    J: tuple
    witnesses: list = field(default_factory=list)
    untrusted: list = field(default_factory=list)
    reasons: list = field(default_factory=list)
    hypotheses: object = None
    report: SingularityReport = None


def asymptotic_completeness_verdict(model, J, n_lam=200, ell_max=None, workers=1):
    """Absence of trusted spectral singularities in ``J``, behind the hypothesis gate."""
    J = _check_interval(J)
    hyp = validate_hypotheses(model)
    backing = [
        "W >= 0" + (" holds" if hyp.w_nonnegative else " fails"),
        "compact support" + (" holds" if hyp.compact_support else " fails"),
        f"zero-energy margin {hyp.zero_energy_margin:.3e}",
    ]
    if not hyp.ok:
        return Verdict("not-certifiable", J, reasons=backing + hyp.messages, hypotheses=hyp)
    rep = scan_singularities(model, J, n_lam, ell_max, workers=workers)
    witnesses = [d.lam_star for d in rep.detected if d.trusted]
    untrusted = [d.lam_star for d in rep.detected if not d.trusted] + list(rep.untrusted_lams)
    status = "not-complete" if witnesses else "complete-on-J"
    return Verdict(status, J, witnesses, untrusted, backing, hyp, rep)


# -- openness -----------------------------------------------------------------


def absorber_index(model):
    """Positions, within the interaction block, of nodes where ``C`` is nonzero."""
    return np.flatnonzero(model.w[model.support_index] > 0)


def resolvent_blocks(model, lams, ell_max):
    """Weighted ``R_V(lam - i0)`` on the interaction nodes for every ``(lam, l)``."""
    idx = model.support_index
    r = model.grid.nodes[idx]
    v, c = model.v[idx], model.c[idx]
    return [a_block(model.grid.h, r, v, c, ell, lam).resolvent
            for lam in lams for ell in range(ell_max + 1)]


def perturbed_margin(model, blocks, delta_c=0.0):
    """Minimum margin over precomputed ``blocks`` with ``C`` replaced by ``C + delta_c``.

    ``delta_c`` lives on the interaction nodes. Only ``C`` changes, so the
    resolvent of ``H_V`` is reused as is.
    """
    c = model.c[model.support_index] + delta_c
    best = np.inf
    for res in blocks:
        best = min(best, _sigma_min(c[:, None] * res * c[None, :], model.grid.n))
    return float(best)


def openness_radius(model, blocks):
    """``(m, ||G^V||, ||C||_inf, r)`` with ``r = m / (4 ||G^V|| ||C||_inf + 1)``.

    ``G^V`` is the weighted ``R_V(lam - i0)`` restricted to the support of
    ``C``, with the norm maximised over ``blocks``.
    """
    om = absorber_index(model)
    m = perturbed_margin(model, blocks)
    gnorm = max(float(np.linalg.norm(res[np.ix_(om, om)], 2)) for res in blocks)
    c_inf = float(np.max(np.abs(model.c)))
    return m, gnorm, c_inf, m / (4 * gnorm * c_inf + 1)

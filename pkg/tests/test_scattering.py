import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative.errors import InvalidArgument
from dissipative.model import Channel, OpticalModel, PotentialSpec, RadialGrid
from dissipative.scattering import (
    scattering_coefficient,
    scattering_coefficient_integral,
    scattering_coefficients,
    scattering_profile,
)

GRID = RadialGrid(2.0, 400)
DELTA0_AT_ONE = 1.312008668671605  # s-wave phase shift of the depth-3 well at lambda = 1, mod pi


def well(v, a=1.0):
    return PotentialSpec.square_well(v, a)


def phase_oracle(lam, depth=3.0, a=1.0):
    k, q = np.sqrt(lam), np.sqrt(lam + depth)
    return np.arctan2(k * np.tan(q * a) - q * np.tan(k * a), q + k * np.tan(q * a) * np.tan(k * a))


def wrap(x, period):
    return (x + period / 2) % period - period / 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10), st.floats(0.01, 50.0))
def test_free_model_gives_one(ell, lam):
    assert scattering_coefficient(OpticalModel.free(GRID), Channel(ell, lam)) == 1.0


def test_square_well_phase_at_one():
    m = OpticalModel(well(-3.0), PotentialSpec.zero(), GRID)
    s = scattering_coefficient(m, Channel(0, 1.0))
    assert abs(abs(s) - 1) <= 1e-8
    delta = np.angle(s) / 2
    assert abs(wrap(delta - phase_oracle(1.0), np.pi)) <= 1e-8
    assert abs(wrap(delta - DELTA0_AT_ONE, np.pi)) <= 1e-10


def test_square_well_phase_on_interval():
    m = OpticalModel(well(-3.0), PotentialSpec.zero(), GRID)
    lams = np.linspace(0.1, 10, 200)
    s = scattering_coefficients(m, 0, lams)
    assert np.max(np.abs(np.abs(s) - 1)) <= 1e-6
    err = wrap(np.angle(s) - 2 * phase_oracle(lams), 2 * np.pi)
    assert np.max(np.abs(err)) <= 1e-6


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_absorption_contracts(ell):
    m = OpticalModel(well(-3.0), well(0.3), GRID)
    s = scattering_coefficients(m, ell, np.linspace(0.2, 8, 40))
    assert np.all(np.abs(s) < 1 - 1e-10)


@pytest.mark.parametrize("ell", [0, 1, 3])
def test_ode_and_integral_equation_agree(ell):
    m = OpticalModel(well(-3.0), well(0.3), GRID)
    ch = Channel(ell, 2.0)
    assert scattering_coefficient_integral(m, ch) == pytest.approx(
        scattering_coefficient(m, ch), abs=1e-9)


def test_tabulated_potential_pieces():
    # linear ramp: RK4 with affine pieces is exact in the potential, still O(step^4)
    v = PotentialSpec.tabulated([(0.0, -4.0), (1.5, 0.0)])
    m = OpticalModel(v, well(0.5, 1.0), GRID)
    ch = Channel(1, 3.0)
    assert scattering_coefficient(m, ch, step=5e-4) == pytest.approx(
        scattering_coefficient_integral(m, ch, n_nodes=300), abs=1e-7)


def test_step_convergence_is_fourth_order():
    m = OpticalModel(well(-3.0), well(0.3), GRID)
    steps = [0.02, 0.01, 0.005]
    s = [scattering_coefficients(m, 0, [2.0], st)[0] for st in steps]
    ratio = abs(s[0] - s[1]) / abs(s[1] - s[2])
    assert 14 <= ratio <= 18


def test_profile_flags_singularity(constructed):
    lam_star = constructed.lam_star
    prof = scattering_profile(constructed.model, (lam_star / 2, 2 * lam_star), 200, 4)
    far = np.abs(prof.lams - lam_star) > 0.05
    assert prof.invertible[far].all()
    at = scattering_coefficients(constructed.model, constructed.ell, [lam_star])[0]
    assert abs(at) < 1e-3
    assert prof.contraction_violation() <= 1e-12


def test_profile_validation():
    with pytest.raises(InvalidArgument):
        scattering_profile(OpticalModel.free(GRID), (0.0, 1.0), 10, 0)
    with pytest.raises(InvalidArgument):
        scattering_coefficients(OpticalModel.free(GRID), 0, [-1.0])


def test_unitary_profile_all_channels():
    m = OpticalModel(well(-3.0), PotentialSpec.zero(), GRID)
    prof = scattering_profile(m, (0.1, 10.0), 200, 6)
    assert np.max(np.abs(prof.modulus - 1)) <= 1e-6
    assert prof.invertible.all()

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import least_squares
from scipy.special import expit, logit

from qdkerr.errors import DomainError, ExtrapolationError, NonConvergenceError
from qdkerr.estimation import (
    GammaRatioTable,
    LifetimeDataset,
    PhaseDataset,
    _phase_model_at,
    fit_coupling,
    fit_lifetime_scale,
    levenberg_marquardt,
    lifetime_model,
    numeric_jacobian,
    predicted_phase,
    residuals,
)
from qdkerr.qed import HBAR_UEV_NS, coupling_from_rate

from .conftest import OMEGA_C, OMEGA_X

TOTAL = 0.8


def synthetic(model, Gamma=0.52, seed=None, noise=0.02, n=81, span=8.0, delta_z=None):
    """Phase scan from the forward model; noise is a fraction of the peak |phi|."""
    omega = OMEGA_X + np.linspace(-span, span, n)
    clean = predicted_phase(omega, _phase_model_at(model, Gamma, TOTAL, delta_z))
    if seed is None:
        return PhaseDataset(omega, clean)
    rng = np.random.default_rng(seed)
    return PhaseDataset(omega, clean + noise * np.abs(clean).max() * rng.standard_normal(n))


# -- residuals -----------------------------------------------------------------------


def test_residuals_perfect_data_are_zero():
    y = np.linspace(-1, 1, 7)
    assert np.all(residuals(y, y) == 0)


@given(st.floats(-1.0, 1.0))
def test_residuals_constant_shift_rms(eps):
    y = np.linspace(-1, 1, 11)
    r = residuals(y + eps, y, np.ones_like(y))
    assert np.sqrt(np.mean(r**2)) == pytest.approx(abs(eps), rel=1e-9, abs=1e-15)


def test_residuals_weighting():
    assert_allclose(residuals([1.0, 1.0], [0.0, 0.0], [4.0, 0.25]), [2.0, 0.5])


# -- datasets ------------------------------------------------------------------------


def test_phase_dataset_validation():
    with pytest.raises(DomainError):
        PhaseDataset([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        PhaseDataset([0.0, 1.0], [0.0])
    with pytest.raises(DomainError):
        PhaseDataset([0.0, 1.0], [0.0, 0.0], [1.0, -1.0])


def test_fit_needs_enough_points(paper_model):
    data = PhaseDataset(OMEGA_X + np.arange(4.0), np.zeros(4))
    with pytest.raises(DomainError):
        fit_coupling(data, paper_model, TOTAL)


def test_gamma_table_interpolates_and_refuses_extrapolation():
    table = GammaRatioTable([-1000.0, 0.0, 1000.0], [1.0, 0.5, 1.0])
    assert table(-500.0) == pytest.approx(0.75)
    with pytest.raises(ExtrapolationError):
        table(1000.1)


# -- optimizer -----------------------------------------------------------------------


def test_lm_solves_linear_least_squares(rng):
    a = rng.normal(size=(30, 3))
    b = rng.normal(size=30)
    lm = levenberg_marquardt(lambda x: a @ x - b, np.zeros(3))
    assert lm.converged
    assert_allclose(lm.x, np.linalg.lstsq(a, b, rcond=None)[0], rtol=1e-6, atol=1e-9)


def test_lm_rosenbrock():
    lm = levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]), [-1.2, 1.0])
    assert lm.converged
    assert_allclose(lm.x, [1.0, 1.0], atol=1e-6)
    assert np.all(np.diff(lm.history) < 0)


def _richardson(fun, x, k, h=1e-3):
    def central(step):
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        return (fun(xp) - fun(xm)) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


@settings(max_examples=15, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(Gamma=st.floats(0.1, 0.75), delta_z=st.floats(0.5, 4.0))
def test_jacobian_matches_finite_differences(paper_model, Gamma, delta_z):
    data = synthetic(paper_model, n=41)

    def fun(p):
        return residuals(data.phi, predicted_phase(data.omega, _phase_model_at(paper_model, p[0], TOTAL, p[1])))

    x = np.array([Gamma, delta_z])
    jac = numeric_jacobian(fun, x)
    for k in range(2):
        ref = _richardson(fun, x, k)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(jac[:, k] - ref)) <= 1e-4 * scale


# -- coupling fit --------------------------------------------------------------------


def test_fit_roundtrip_recovers_gamma(paper_model):
    fit = fit_coupling(synthetic(paper_model, seed=3), paper_model, TOTAL)
    assert fit.converged and not fit.at_bound
    assert fit.params["Gamma_ueV"] == pytest.approx(0.52, abs=0.05)
    assert fit.beta == pytest.approx(0.65, abs=0.03)
    assert fit.derived["gamma_ueV"] == pytest.approx(TOTAL - fit.params["Gamma_ueV"])
    assert fit.beta == pytest.approx(fit.params["Gamma_ueV"] / TOTAL)
    assert 0 < fit.uncertainties["Gamma_ueV"] < 0.05


def test_fit_noiseless_is_exact(paper_model):
    fit = fit_coupling(synthetic(paper_model), paper_model, TOTAL, initial_Gamma=0.2)
    assert fit.params["Gamma_ueV"] == pytest.approx(0.52, abs=1e-6)
    assert fit.residual_rms < 1e-8
    assert fit.derived["g_ueV"] == pytest.approx(paper_model.dipole.g, rel=1e-5)


@pytest.mark.parametrize("start", [0.01, 0.79])
def test_fit_from_far_start_does_not_stall_at_bound(paper_model, start):
    fit = fit_coupling(synthetic(paper_model, seed=8), paper_model, TOTAL, initial_Gamma=start)
    assert fit.converged and not fit.at_bound
    assert fit.params["Gamma_ueV"] == pytest.approx(0.52, abs=0.05)


def test_fit_cost_history_is_monotone(paper_model):
    fit = fit_coupling(synthetic(paper_model, seed=11), paper_model, TOTAL, initial_Gamma=0.05)
    assert len(fit.cost_history) > 2
    assert np.all(np.diff(fit.cost_history) <= 0)


def test_fit_boundary_gives_unit_beta(paper_model):
    fit = fit_coupling(synthetic(paper_model, Gamma=TOTAL), paper_model, TOTAL)
    assert fit.at_bound
    assert fit.beta == pytest.approx(1.0, abs=1e-6)
    noisy = fit_coupling(synthetic(paper_model, Gamma=TOTAL, seed=5), paper_model, TOTAL)
    assert noisy.beta + 2 * noisy.beta_uncertainty >= 1.0 or noisy.beta > 0.99


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_reparameterization_consistency(paper_model, seed):
    data = synthetic(paper_model, seed=seed)
    a = fit_coupling(data, paper_model, TOTAL, parameterization="Gamma")
    b = fit_coupling(data, paper_model, TOTAL, parameterization="g")
    assert b.metadata["parameterization"] == "g"
    assert abs(a.beta - b.beta) < 1e-6


def test_lm_matches_scipy_least_squares(paper_model):
    data = synthetic(paper_model, seed=21)
    fit = fit_coupling(data, paper_model, TOTAL)

    def fun(theta):
        m = _phase_model_at(paper_model, TOTAL * expit(theta[0]), TOTAL)
        return residuals(data.phi, predicted_phase(data.omega, m))

    ref = least_squares(fun, [logit(0.5)], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    assert fit.params["Gamma_ueV"] == pytest.approx(TOTAL * expit(ref.x[0]), abs=1e-6)


def test_free_splitting_fit(paper_model):
    data = synthetic(paper_model, seed=4, delta_z=1.8)
    fit = fit_coupling(data, paper_model.with_dipole(delta_z=1.0), TOTAL, free_delta_z=True)
    assert fit.params["delta_z_ueV"] == pytest.approx(1.8, abs=0.15)
    assert fit.params["Gamma_ueV"] == pytest.approx(0.52, abs=0.05)
    assert set(fit.uncertainties) == {"Gamma_ueV", "delta_z_ueV"}


def test_uncertainty_coverage(paper_model):
    hits = 0
    for seed in range(100):
        fit = fit_coupling(synthetic(paper_model, seed=1000 + seed), paper_model, TOTAL)
        hits += abs(fit.params["Gamma_ueV"] - 0.52) <= fit.uncertainties["Gamma_ueV"]
    assert hits >= 60


def test_nonconvergence_carries_best_so_far(paper_model):
    data = synthetic(paper_model, seed=8)
    with pytest.raises(NonConvergenceError) as info:
        fit_coupling(data, paper_model, TOTAL, initial_Gamma=0.01, max_iter=1)
    best = info.value.result
    assert best is not None and not best.converged
    assert best.iterations == 1
    assert best.cost_history[-1] < best.cost_history[0]


def test_summary_is_json_ready(paper_model):
    import json

    fit = fit_coupling(synthetic(paper_model, seed=3), paper_model, TOTAL)
    text = json.dumps(fit.summary())
    assert "Gamma_ueV" in text and "beta" in text


# -- lifetime fit --------------------------------------------------------------------


def side_table():
    det = np.linspace(-8000.0, 8000.0, 33)
    return GammaRatioTable(det, 0.3 + 0.4 * (det / 8000.0) ** 2)


def test_lifetime_single_study_point(paper_cavity, paper_g):
    # one point at the studied dot: T1 = hbar / Gamma_t
    t1 = HBAR_UEV_NS / TOTAL
    assert t1 == pytest.approx(0.823, abs=5e-4)
    ratio = 0.28 / (HBAR_UEV_NS / 0.71)
    table = GammaRatioTable([-5000.0, 0.0], [ratio, ratio])
    data = LifetimeDataset(np.array([OMEGA_X]), np.array([1 / t1]))
    fit = fit_lifetime_scale(data, paper_cavity, paper_g, table)
    model = lifetime_model(data.omega, paper_cavity, paper_g, table, fit.params["t1_hom_ns"])
    assert 1 / model[0] == pytest.approx(0.823, abs=5e-4)
    assert fit.params["t1_hom_ns"] == pytest.approx(0.71, abs=1e-4)
    assert fit.beta == pytest.approx(0.65, abs=1e-4)


def test_lifetime_roundtrip(paper_cavity, paper_g, rng):
    table = side_table()
    omega = OMEGA_C + np.linspace(-7000.0, 7000.0, 15)
    clean = lifetime_model(omega, paper_cavity, paper_g, table, 0.71)
    data = LifetimeDataset(omega, clean * (1 + 0.02 * rng.standard_normal(omega.size)))
    fit = fit_lifetime_scale(data, paper_cavity, paper_g, table)
    assert fit.converged
    assert fit.params["t1_hom_ns"] == pytest.approx(0.71, abs=0.01)
    assert fit.derived["gamma_hom_ueV"] == pytest.approx(HBAR_UEV_NS / fit.params["t1_hom_ns"])


def test_lifetime_uncoupled_flat(paper_cavity):
    table = GammaRatioTable([-8000.0, 8000.0], [1.0, 1.0])
    omega = OMEGA_C + np.linspace(-6000.0, 6000.0, 9)
    data = LifetimeDataset(omega, np.full(omega.size, 1 / 0.71))
    fit = fit_lifetime_scale(data, paper_cavity, 0.0, table)
    assert fit.params["t1_hom_ns"] == pytest.approx(0.71, rel=1e-8)
    model = lifetime_model(omega, paper_cavity, 0.0, table, fit.params["t1_hom_ns"])
    assert np.ptp(model) == 0.0


def test_lifetime_extrapolation_error(paper_cavity, paper_g):
    data = LifetimeDataset(OMEGA_C + np.array([0.0, 9000.0]), np.array([1.0, 1.0]))
    with pytest.raises(ExtrapolationError):
        fit_lifetime_scale(data, paper_cavity, paper_g, side_table())


def test_lifetime_dataset_validation():
    with pytest.raises(DomainError):
        LifetimeDataset(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_coupling_bound_consistency(paper_cavity):
    # the largest admissible g puts the whole transform-limited width into the cavity
    g_max = float(coupling_from_rate(TOTAL, OMEGA_X, paper_cavity))
    assert g_max == pytest.approx(38.178336342141186 * np.sqrt(TOTAL / 0.52), rel=1e-12)

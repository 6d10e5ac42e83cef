import numpy as np
import pytest

import mechsqueeze.services.analytics_service as an_svc
from mechsqueeze.exceptions import ConvergenceError
from mechsqueeze.models import QuadratureForm, VarianceTable
from mechsqueeze.services.squeezing_service import from_components, nm_to_opo, to_db

TWO_PI = 2 * np.pi


@pytest.fixture
def six_db():
    return nm_to_opo(6.0, 20.0)


def test_cooling_rates_natural_units(make_point):
    _, rates = make_point()
    assert rates.Gamma == pytest.approx(0.0076800, rel=1e-4)
    assert rates.Omega == pytest.approx(0.0058713, rel=1e-4)
    assert rates.omega_m == pytest.approx(0.9941287, rel=1e-6)
    assert rates.gamma_eff == pytest.approx(rates.Gamma + 5e-8)
    # Self-consistency of the converged frequency
    assert rates.Gamma == pytest.approx(an_svc.optical_damping(0.11, 0.38, rates.omega_m), rel=1e-9)


def test_cooling_rates_in_si_units():
    rates = an_svc.cooling_rates(TWO_PI * 110e3, TWO_PI * 380e3, TWO_PI * 1e6, TWO_PI * 1e6 / 2e7)
    assert rates.Gamma == pytest.approx(TWO_PI * 7.680e3, rel=1e-3)
    assert rates.Omega == pytest.approx(TWO_PI * 5.871e3, rel=1e-3)


def test_cooling_rates_without_coupling():
    rates = an_svc.cooling_rates(0.0, 0.38, 1.0, 1e-6)
    assert rates.Gamma == 0.0
    assert rates.Omega == 0.0
    assert rates.omega_m == 1.0
    assert rates.gamma_eff == 1e-6
    assert rates.iterations == 1


def test_cooling_rates_errors():
    with pytest.raises(ConvergenceError):
        an_svc.cooling_rates(5.0, 0.1, 1.0, 1e-6)
    with pytest.raises(ValueError):
        an_svc.cooling_rates(0.1, 0.0, 1.0, 1e-6)
    with pytest.raises(ValueError):
        an_svc.cooling_rates(-0.1, 0.3, 1.0, 1e-6)


def test_resolved_sideband_white_noise_value(make_point, six_db):
    derived, rates = make_point()
    stats = an_svc.quadrature_extrema(an_svc.white_rsl_form(six_db, rates, derived.n_th))
    assert an_svc.thermal_term(rates.gamma_m, rates.gamma_eff, derived.n_th) == pytest.approx(0.013565, rel=1e-3)
    assert stats.V_min == pytest.approx(0.13915, abs=1e-4)
    assert stats.squeeze_db == pytest.approx(5.555, abs=5e-3)


def test_general_white_noise_value(make_point, six_db):
    derived, rates = make_point()
    form = an_svc.white_general_form(six_db, derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    assert form.scale == pytest.approx(1.03652, rel=1e-4)
    assert an_svc.sideband_ratio(derived.kappa, rates.omega_m) == pytest.approx(0.035240, rel=1e-3)
    stats = an_svc.quadrature_extrema(form)
    assert stats.V_min == pytest.approx(0.1824, abs=2e-4)
    assert stats.squeeze_db == pytest.approx(4.38, abs=0.01)


def test_residual_occupancy(make_point):
    derived, rates = make_point()
    n_f, floor = an_svc.residual_occupancy(derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    assert n_f == pytest.approx(0.0501, abs=2e-4)
    assert floor == pytest.approx(0.0365, abs=2e-4)


def test_zero_dB_white_matches_cooling_baseline(make_point):
    derived, rates = make_point()
    vac = nm_to_opo(0.0, 20.0)
    stats = an_svc.quadrature_extrema(
        an_svc.white_general_form(vac, derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    )
    n_f, _ = an_svc.residual_occupancy(derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    assert stats.V_min == stats.V_max
    assert stats.occupancy == pytest.approx(n_f, rel=1e-12)


def test_bandwidth_coeffs_broadband_limit():
    f_minus, f_plus, h = an_svc.bandwidth_coeffs(1e6, 4e6, 0.0077, 0.38, 0.994)
    assert f_minus == pytest.approx(1.0, abs=1e-6)
    assert f_plus == pytest.approx(1.0, abs=1e-6)
    assert h == pytest.approx(1.0, abs=1e-6)


def test_bandwidth_coeffs_narrowband_limit():
    f_minus, f_plus, h = an_svc.bandwidth_coeffs(1e-8, 2e-8, 0.0077, 0.38, 0.994)
    assert f_minus < 1e-5
    assert f_plus < 1e-5
    assert h < 1e-5


def test_bandwidth_coeffs_degenerate_is_continuous():
    args = (0.0077, 0.38, 0.994)
    exact = an_svc.bandwidth_coeffs(1.0, 1.0, *args)
    near = an_svc.bandwidth_coeffs(1.0, 1.0 + 1e-5, *args)
    assert np.allclose(exact, near, rtol=1e-4)
    assert all(np.isfinite(exact))


def test_h_exceeds_one_when_damping_outruns_cavity():
    # No clamping: h reports what the expression gives outside its intended regime
    _, _, h = an_svc.bandwidth_coeffs(1.0, 1.0, 1.0, 0.01, 1.0)
    assert h == pytest.approx(72.5, rel=1e-3)
    assert h > 1.0


def test_bandwidth_coeffs_within_unit_interval():
    for kappa in (0.05, 0.38, 1.0, 3.0):
        for gamma_ratio in (1e-4, 1e-2, 0.1):
            for b_x in np.geomspace(1e-2, 1e2, 9):
                for ratio in (1.0, 2.0, 10.0):
                    coeffs = an_svc.bandwidth_coeffs(b_x, b_x * ratio, gamma_ratio * kappa, kappa, 1.0)
                    for value in coeffs:
                        assert 0.0 < value <= 1.0


def test_finite_bandwidth_tends_to_white(make_point):
    derived, rates = make_point()
    args = (derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    spec = nm_to_opo(6.0, 1e5)
    finite = an_svc.quadrature_extrema(an_svc.finite_bandwidth_form(spec, *args))
    white = an_svc.quadrature_extrema(an_svc.white_general_form(spec, *args))
    assert finite.V_min == pytest.approx(white.V_min, rel=1e-6)
    assert finite.V_max == pytest.approx(white.V_max, rel=1e-6)


def test_finite_bandwidth_without_squeezing_ignores_bandwidth(make_point):
    derived, rates = make_point()
    args = (derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    values = [
        an_svc.finite_bandwidth_form(nm_to_opo(0.0, b), *args)(0.3)
        for b in (0.01, 1.0, 100.0)
    ]
    assert values == pytest.approx([values[0]] * 3, rel=1e-14)


def _optimum_improvement(make_point, eta):
    G = 0.11 * np.sqrt(eta / 0.38)
    derived, rates = make_point(G=G, kappa=eta)
    args = (derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    b_opt, v_opt = an_svc.optimal_bandwidth(6.0, *args, bounds=(0.05, 100.0))
    white = an_svc.quadrature_extrema(an_svc.white_general_form(nm_to_opo(6.0, 100.0), *args))
    return b_opt, 1.0 - v_opt / white.V_min


def test_optimal_bandwidth_improves_on_white_noise(make_point):
    b_opt, improvement = _optimum_improvement(make_point, 0.38)
    assert 0.05 < b_opt < 100.0
    assert 0.06 < improvement < 0.2


def test_optimal_bandwidth_gain_vanishes_when_resolved(make_point):
    _, improvement = _optimum_improvement(make_point, 0.05)
    assert -1e-3 < improvement < 0.02


def test_effective_impurity():
    assert an_svc.effective_impurity(0.0, 0.0) == 0.0
    assert an_svc.effective_impurity(1.7, 0.0) == 1.7
    spec = nm_to_opo(6.0, 1.0)
    N_prime = an_svc.effective_impurity(spec.N, 0.38)
    assert N_prime == pytest.approx(0.64986, abs=1e-4)
    assert an_svc.is_mixed(N_prime, spec.M)
    assert not an_svc.is_mixed(0.0, 0.0)
    with pytest.raises(ValueError):
        an_svc.effective_impurity(-1.0, 0.1)


def test_impure_form_is_noisier(make_point, six_db):
    derived, rates = make_point()
    pure = an_svc.quadrature_extrema(an_svc.white_rsl_form(six_db, rates, derived.n_th))
    impure = an_svc.quadrature_extrema(an_svc.rsl_impure_form(six_db, rates, derived.n_th, derived.eta))
    assert impure.V_min > pure.V_min
    assert impure.V_max - impure.V_min == pytest.approx(pure.V_max - pure.V_min)


def test_closed_form_extrema():
    M = 0.8 * np.exp(1.3j)
    form = QuadratureForm(offset=2.0, scale=0.5, M=M)
    stats = an_svc.quadrature_extrema(form)
    assert stats.V_min == pytest.approx(1.6)
    assert stats.V_max == pytest.approx(2.4)
    assert 0.0 <= stats.phi_star < np.pi
    assert form(stats.phi_star) == pytest.approx(stats.V_min, abs=1e-14)
    assert stats.occupancy == pytest.approx(1.5)
    assert stats.squeeze_db == pytest.approx(to_db(1.6))

    flipped = QuadratureForm(offset=2.0, scale=-0.5, M=M)
    stats = an_svc.quadrature_extrema(flipped)
    assert flipped(stats.phi_star) == pytest.approx(1.6, abs=1e-14)

    flat = an_svc.quadrature_extrema(QuadratureForm(offset=0.7, scale=1.0, M=0j))
    assert flat.V_min == flat.V_max == 0.7
    assert flat.phi_star == 0.0


def test_table_extrema_match_closed_form():
    form = QuadratureForm(offset=1.0, scale=1.0, M=0.4 * np.exp(-0.7j))
    phi = np.arange(64) * np.pi / 64
    stats = an_svc.quadrature_extrema(VarianceTable(phi=phi, values=form(phi)))
    exact = an_svc.quadrature_extrema(form)
    assert stats.V_min == pytest.approx(exact.V_min, abs=1e-4)
    assert stats.V_max == pytest.approx(exact.V_max, abs=1e-4)
    assert stats.phi_star == pytest.approx(exact.phi_star, abs=1e-3)
    assert stats.variance_of_phi(phi[5] + np.pi) == pytest.approx(form(phi[5]))


def test_table_needs_enough_samples():
    phi = np.arange(4) * np.pi / 4
    with pytest.raises(ValueError):
        an_svc.quadrature_extrema(VarianceTable(phi=phi, values=np.ones(4)))


def test_variance_periodic_in_phase(make_point, six_db):
    derived, rates = make_point()
    args = (derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    phi = np.linspace(0.0, np.pi, 17)
    for fn in (an_svc.variance_white_general, an_svc.variance_finite_bandwidth):
        assert np.allclose(fn(six_db, phi + np.pi, *args), fn(six_db, phi, *args), rtol=0, atol=1e-12)
    rsl = an_svc.variance_white_rsl
    assert np.allclose(rsl(six_db, phi + np.pi, rates, derived.n_th), rsl(six_db, phi, rates, derived.n_th),
                       rtol=0, atol=1e-12)


def test_white_noise_reduces_to_resolved_sideband(make_point):
    # From deep resolved sideband up to eta = 1 the general white-noise variance
    # stays within (eta^2 + gamma_m/gamma_eff)(2N + 1 + 2|M|) of the
    # resolved-sideband one, and both respect V_min V_max >= 1/4.
    rng = np.random.default_rng(2024)
    phi = np.linspace(0.0, np.pi, 9)
    for _ in range(1000):
        eta = 10 ** rng.uniform(-2, 0)
        G = eta * 10 ** rng.uniform(-2, -0.5)
        gamma_m = 10 ** rng.uniform(-9, -5)
        n_th = 10 ** rng.uniform(-2, 4)
        spec = nm_to_opo(rng.uniform(0.0, 12.0), 20.0, phase=rng.uniform(0, 2 * np.pi))
        derived, rates = make_point(G=G, kappa=eta, gamma_m=gamma_m, n_th=n_th)

        general = an_svc.white_general_form(spec, G, eta, rates, gamma_m, n_th)
        rsl = an_svc.white_rsl_form(spec, rates, n_th)
        bound = (eta**2 + gamma_m / rates.gamma_eff) * (2 * spec.N + 1 + 2 * abs(spec.M))
        assert np.all(np.abs(general(phi) - rsl(phi)) <= bound)

        for form in (general, rsl):
            stats = an_svc.quadrature_extrema(form)
            assert stats.V_min * stats.V_max >= 0.25 - 1e-12


def test_squeezing_improves_resolved_sideband_variance(make_point):
    derived, rates = make_point()
    v_min = [
        an_svc.quadrature_extrema(an_svc.white_rsl_form(nm_to_opo(db, 20.0), rates, derived.n_th)).V_min
        for db in np.linspace(0.0, 12.0, 13)
    ]
    assert all(b < a for a, b in zip(v_min, v_min[1:]))


def test_variance_grows_with_temperature(make_point, six_db):
    v_min = []
    for n_th in np.geomspace(1.0, 1e5, 11):
        derived, rates = make_point(n_th=n_th)
        form = an_svc.white_general_form(six_db, derived.G, derived.kappa, rates, derived.gamma_m, n_th)
        v_min.append(an_svc.quadrature_extrema(form).V_min)
    assert all(b > a for a, b in zip(v_min, v_min[1:]))


def test_mixed_input_analytics():
    spec = from_components(0.8, 0.5 * np.exp(0.4j), 3.0, 6.0)
    form = an_svc.white_rsl_form(spec, an_svc.cooling_rates(0.11, 0.38, 1.0, 0.0), 0.0)
    stats = an_svc.quadrature_extrema(form)
    assert stats.V_min == pytest.approx(0.8 + 0.5 - 0.5)

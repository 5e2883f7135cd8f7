import numpy as np
import pytest
import scipy.linalg

from kaonoqs.checks import random_hermitian_observable
from kaonoqs.heisenberg import (
    BilinearObservable, generator_apply, generator_matrix, propagate_closed_form,
    propagate_ode, propagate_ode_series, propagator_matrix, propagator_series,
)
from kaonoqs.observables import FlavorCount, ObservableKind, expectation_flavor, mean_value
from kaonoqs.params import DomainError, from_raw

N0 = BilinearObservable(1, 0, 0, 1)
S0 = BilinearObservable(1, 0, 0, -1)


def test_observable_algebra():
    a = BilinearObservable(1, 2j, -2j, 3)
    b = BilinearObservable(0, 1, 1, 0)
    assert (a + b - b).as_vector().tolist() == a.as_vector().tolist()
    assert (2 * a).w_bb == 6 and (a * 2).w_ab == 4j
    assert a.is_hermitian() and not BilinearObservable(0, 1j, 1j, 0).is_hermitian()
    np.testing.assert_array_equal(a.as_matrix(), [[1, 2j], [-2j, 3]])


def test_zero_observable_fixed(pdg):
    assert generator_apply(pdg, BilinearObservable()) == BilinearObservable()


def test_generator_cp_symmetric_example(cp_params):
    P = cp_params
    got = generator_apply(P, BilinearObservable(1, 0, 0, 0)).as_vector()
    minus = 0.5 * P.delta_gamma - 1j * P.delta_m
    plus = 0.5 * P.delta_gamma + 1j * P.delta_m
    np.testing.assert_allclose(got, [-P.gamma, -0.5 * minus, -0.5 * plus, 0], atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.3, 2.0])
def test_generator_is_derivative_of_closed_form(phased, t):
    h = 1e-6
    for j in range(4):
        e = BilinearObservable.from_vector(np.eye(4)[j])
        w_t = propagate_closed_form(phased, e, t).as_vector()
        fd = (propagate_closed_form(phased, e, t + h).as_vector() - w_t) / h
        exact = generator_matrix(phased) @ w_t
        assert np.max(np.abs(fd - exact)) <= 1e-4 * max(1.0, np.max(np.abs(exact)))


def test_closed_form_equals_matrix_exponential(phased):
    gen = generator_matrix(phased)
    for t in (0.05, 1.0, 7.0):
        np.testing.assert_allclose(propagator_matrix(phased, t).m,
                                   scipy.linalg.expm(gen * t), atol=1e-12)


def test_identity_at_zero(pdg):
    np.testing.assert_array_equal(propagator_matrix(pdg, 0.0).m, np.eye(4))
    obs = BilinearObservable(0.3, 1 + 2j, 1 - 2j, -4)
    assert propagate_closed_form(pdg, obs, 0.0) == obs
    assert propagate_ode(pdg, obs, 0.0) == obs


def test_semigroup_example(pdg):
    m = lambda t: propagator_matrix(pdg, t).m
    assert np.max(np.abs(m(3) - m(2) @ m(1))) <= 1e-10


def test_columns_are_propagated_basis_vectors(pdg):
    m = propagator_matrix(pdg, 1.0).m
    for j in range(4):
        e = BilinearObservable.from_vector(np.eye(4)[j])
        np.testing.assert_allclose(m[:, j], propagate_closed_form(pdg, e, 1.0).as_vector(),
                                   atol=1e-16)


def test_series_matches_pointwise(pdg):
    times = [0.0, 0.5, 4.0]
    ms = propagator_series(pdg, times)
    for t, m in zip(times, ms):
        np.testing.assert_allclose(m, propagator_matrix(pdg, t).m, atol=1e-16)


def test_number_at_tau_S_matches_displayed_formula(pdg):
    w = propagate_closed_form(pdg, N0, pdg.tau_S)
    value = expectation_flavor(w, FlavorCount(1, 0))
    assert value == pytest.approx(mean_value(ObservableKind.TotalNumber, pdg, FlavorCount(1, 0),
                                             pdg.tau_S), abs=1e-14)
    assert value == pytest.approx(0.68306, rel=2e-2)
    ode = propagate_ode(pdg, N0, pdg.tau_S)
    assert np.max(np.abs(ode.as_vector() - w.as_vector())) <= 1e-9


def test_cp_strangeness_closed_form(cp_params):
    P = cp_params
    for t in (0.0, 0.4, 3.0):
        w = propagate_closed_form(P, S0, t)
        expected = np.exp(-P.gamma * t) * np.cos(P.delta_m * t)
        assert abs(w.w_aa - expected) < 1e-15
        assert abs(w.w_bb + expected) < 1e-15
        assert w.w_aa.imag == 0 and w.w_bb.imag == 0
        assert w.hermitian_defect() < 1e-15


def test_ode_oracle_at_default_tolerances(pdg):
    cf = propagate_closed_form(pdg, N0, 5.0).as_vector()
    ode = propagate_ode(pdg, N0, 5.0, 1e-10, 1e-12).as_vector()
    assert np.max(np.abs(cf - ode)) <= 1e-9


def test_ode_oracle_tight_on_grid(phased, rng):
    times = np.linspace(0, 9, 20)
    obs = random_hermitian_observable(rng)
    ode = propagate_ode_series(phased, obs, times, 1e-12, 1e-14)
    cf = propagator_series(phased, times) @ obs.as_vector()
    assert np.max(np.abs(ode - cf)) <= 1e-10


def test_ode_preserves_hermiticity(pdg, rng):
    obs = random_hermitian_observable(rng)
    assert propagate_ode(pdg, obs, 2.0).hermitian_defect() <= 1e-10
    assert generator_apply(pdg, N0).is_hermitian()


def test_hermiticity_random(phased, rng):
    for _ in range(200):
        obs = random_hermitian_observable(rng)
        t = rng.uniform(0, 10 * phased.tau_S)
        assert propagate_closed_form(phased, obs, t).hermitian_defect() <= 1e-12


def test_coefficients_decay(pdg):
    # Every coefficient is bounded by a multiple of e^{-Gamma_L t}.
    for t in (10.0, 50.0, 200.0):
        m = propagator_matrix(pdg, t).m
        assert np.max(np.abs(m)) <= 2 * np.exp(-pdg.gamma_L * t)


def test_phase_only_moves_off_diagonals(pdg, phased):
    # Rephasing b -> e^{i phi} b leaves diagonal expectations unchanged.
    for t in (0.2, 1.5):
        a = propagate_closed_form(pdg, N0, t)
        b = propagate_closed_form(phased, N0, t)
        assert abs(a.w_aa - b.w_aa) < 1e-14 and abs(a.w_bb - b.w_bb) < 1e-14
        assert abs(abs(a.w_ab) - abs(b.w_ab)) < 1e-14


def test_negative_time_rejected(pdg):
    with pytest.raises(ValueError):
        propagator_matrix(pdg, -0.1)
    with pytest.raises(ValueError):
        propagate_ode(pdg, N0, -1.0)
    with pytest.raises(ValueError):
        propagator_series(pdg, [0.0, -1.0])


def test_extreme_asymmetry_rejected():
    params = from_raw(0.1, 50.0, 5.0, 0.9995)
    with pytest.raises(DomainError):
        generator_matrix(params)
    with pytest.raises(DomainError):
        propagator_matrix(params, 1.0)

import math

import pytest
from hypothesis import given, settings, strategies as st

from kaonoqs.params import (
    PDG_A_L, PDG_DELTA_M, PDG_TAU_L, PDG_TAU_S, DomainError, from_raw, pdg_defaults,
)


def test_pdg_values(pdg):
    assert pdg.tau_S == PDG_TAU_S and pdg.tau_L == PDG_TAU_L
    assert pdg.delta_m == PDG_DELTA_M and pdg.A_L == PDG_A_L
    assert pdg.gamma_S == pytest.approx(1 / 0.08954, rel=1e-15)
    assert pdg.gamma_L == pytest.approx(1 / 51.16, rel=1e-15)
    assert abs(pdg.p) ** 2 == pytest.approx(0.50166, abs=1e-15)
    assert abs(pdg.q) ** 2 == pytest.approx(0.49834, abs=1e-15)


def test_pdg_invariants(pdg):
    assert max(pdg.invariant_defects().values()) < 1e-15


def test_raw_roundtrip(phased):
    again = from_raw(**dict(zip(("tau_S", "tau_L", "delta_m", "A_L", "phase_pq"),
                                phased.raw().values())))
    assert again == phased


def test_cp_preserved_limit(pdg):
    cp = pdg.cp_preserved()
    assert cp.A_L == 0.0
    assert abs(cp.p) == pytest.approx(math.sqrt(0.5), abs=1e-16)
    assert cp.gamma_S == pdg.gamma_S


@pytest.mark.parametrize("kwargs, field", [
    (dict(tau_S=0.0), "tau_S"),
    (dict(tau_S=-1.0), "tau_S"),
    (dict(tau_L=math.inf), "tau_L"),
    (dict(delta_m=math.nan), "delta_m"),
    (dict(A_L=1.0), "A_L"),
    (dict(A_L=-1.5), "A_L"),
    (dict(phase_pq=math.inf), "phase_pq"),
])
def test_domain_errors(kwargs, field):
    args = dict(tau_S=0.08954, tau_L=51.16, delta_m=5.293, A_L=0.00332)
    args.update(kwargs)
    with pytest.raises(DomainError) as info:
        from_raw(**args)
    assert info.value.field == field


def test_to_dict_is_json_safe(pdg):
    import json
    d = json.loads(json.dumps(pdg.to_dict()))
    assert d["p"][0] == pdg.p.real


@settings(max_examples=200, deadline=None)
@given(
    tau_S=st.floats(1e-3, 10),
    ratio=st.floats(1.0, 1e4),
    delta_m=st.floats(-50, 50),
    A_L=st.floats(-0.99, 0.99),
    phase=st.floats(-10, 10),
)
def test_identities_hold_everywhere(tau_S, ratio, delta_m, A_L, phase):
    params = from_raw(tau_S, tau_S * ratio, delta_m, A_L, phase)
    assert max(params.invariant_defects().values()) < 1e-12 * max(1.0, params.gamma_S)
    assert 0 <= params.phase_pq < 2 * math.pi

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qmetop import model
from qmetop.model import BathSpec, ConfigError, DegeneracyWarning, NumericError, XxzParams

# PV of J n / (w - E) on the half line at E = 1, beta = 1, mu = -0.5, cutoff 10,
# from scipy's Cauchy-weight quadrature
PV_OCCUPIED_E1 = 0.039991472653982785
BATH_COEFFS_E1 = (0.1421795303583838 - 0.0063648405544057185j, 0.6372044472329677 - 1.7053718680411007j)


def test_params_broadcast_and_validate():
    p = XxzParams.uniform(4, 2, 1.0, 0.1, 1.0)
    assert p.omega0.shape == (4,) and p.g.shape == (3,)
    assert (p.N_M, p.d_L, p.d_M) == (2, 4, 4)
    with pytest.raises(ConfigError):
        XxzParams(N=3, omega0=1.0, g=[0.1], Delta=1.0)
    with pytest.raises(ConfigError):
        XxzParams.uniform(2, 3)
    with pytest.raises(ConfigError):
        XxzParams.uniform(3, 1, g=float("nan"))


def test_params_modified_uses_one_based_labels():
    p = XxzParams.uniform(6, 2).modified(Delta={3: 0.4}, omega0={4: 1.5})
    assert p.Delta[2] == 0.4 and p.omega0[3] == 1.5
    assert XxzParams.from_dict(p.to_dict()).to_dict() == p.to_dict()
    with pytest.raises(ConfigError):
        p.modified(g={6: 0.2})


def test_xxz_matches_oracle():
    p = XxzParams(N=3, omega0=[1.0, 1.2, 0.8], g=[0.1, 0.3], Delta=[1.0, 0.5], N_L=1)
    assert np.allclose(model.build_xxz(p), oracles.xxz(p.omega0, p.g, p.Delta))


def test_xxz_conserves_magnetization():
    H = model.build_xxz(XxzParams.uniform(4, 1, 1.0, 0.3, 0.7))
    M = model.total_magnetization(4)
    assert np.allclose(H @ M, M @ H)


def test_single_qubit_levels():
    H = model.build_xxz(XxzParams.uniform(1, 1, 2.0))
    assert np.allclose(model.eigensystem(H).energies, [-1.0, 1.0])


def test_eigensystem_phase_convention(rng):
    H = model.build_xxz(XxzParams(N=3, omega0=[1.0, 1.3, 0.7], g=[0.2, 0.1], Delta=[1.0, 0.4]))
    eig = model.eigensystem(H)
    for k in range(8):
        v = eig.vectors[:, k]
        i = np.argmax(np.abs(v))
        assert abs(v[i].imag) < 1e-12 and v[i].real > 0
    assert np.allclose(eig.from_eigenbasis(np.diag(eig.energies)), H)


def test_degeneracy_detected_and_warned():
    eig = model.eigensystem(model.build_xxz(XxzParams.uniform(3, 1, g=0.0)))
    assert eig.is_degenerate
    with pytest.warns(DegeneracyWarning):
        model.warn_degenerate(eig, "test")


def test_non_hermitian_rejected():
    with pytest.raises(ConfigError):
        model.eigensystem(np.array([[0, 1], [0, 0]]))


def test_gibbs_matches_expm():
    H = model.build_xxz(XxzParams.uniform(3, 1, 1.0, 0.2, 0.5))
    assert np.allclose(model.gibbs(H, 0.7), oracles.gibbs_expm(H, 0.7), atol=1e-13)
    assert np.allclose(model.gibbs(H, 0.0), np.eye(8) / 8)


def test_grand_gibbs_reduces_to_gibbs():
    H = model.build_xxz(XxzParams.uniform(2, 1))
    N = model.excitation_number(2)
    assert np.allclose(np.diag(N), [2, 1, 1, 0])
    assert np.allclose(model.grand_gibbs(H, N, 1.0, 0.0), model.gibbs(H, 1.0))


def test_bose_and_spectral():
    assert model.bose(1.0, 1.0) == pytest.approx(1 / (np.e - 1))
    assert model.bose(1.0, 1.0, -0.5) == pytest.approx(1 / np.expm1(1.5))
    with pytest.raises(ZeroDivisionError):
        model.bose(0.5, 1.0, 0.5)
    spec = BathSpec(beta=1.0)
    assert model.spectral(-1.0, spec) == 0.0
    assert model.spectral(10.0, spec) == pytest.approx(10 / np.e)
    # J n -> 1/beta at zero frequency when mu = 0
    assert model.occupied_spectral(0.0, spec) == pytest.approx(1.0)
    assert model.occupied_spectral(1e-7, spec) == pytest.approx(1.0, rel=1e-6)


def test_emission_over_absorption_is_boltzmann():
    spec = BathSpec(beta=1.3, mu=-0.2)
    w = np.linspace(0.1, 5, 7)
    ratio = model.emitted_spectral(w, spec) / model.occupied_spectral(w, spec)
    assert np.allclose(ratio, np.exp(1.3 * (w + 0.2)))


def test_principal_value_frozen():
    spec = BathSpec(beta=1.0, mu=-0.5)
    val = model.principal_value(lambda w: model.occupied_spectral(w, spec), 1.0, 10.0)
    assert val == pytest.approx(PV_OCCUPIED_E1, abs=1e-12)
    C, D = model.bath_coeffs(1.0, spec)
    assert C == pytest.approx(BATH_COEFFS_E1[0], abs=1e-12)
    assert D == pytest.approx(BATH_COEFFS_E1[1], abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3.0, 3.0).filter(lambda e: abs(e) > 1e-3), st.floats(0.3, 3.0))
def test_bath_coeffs_match_scipy(E, beta):
    spec = BathSpec(beta=beta, mu=-0.5)
    C, D = model.bath_coeffs(E, spec)
    Co, Do = oracles.bath_coeffs_scipy(E, beta, -0.5, 10.0)
    assert abs(C - Co) < 1e-8 * max(1, abs(Co))
    assert abs(D - Do) < 1e-8 * max(1, abs(Do))


def test_pv_pole_at_endpoint():
    with pytest.raises(NumericError):
        model.principal_value(lambda w: np.ones_like(w), 0.0, 10.0)
    spec = BathSpec(beta=1.0, mu=-0.5)
    # vanishing integrand at the endpoint is fine
    val = model.principal_value(lambda w: model.occupied_spectral(w, spec), 0.0, 10.0)
    ref = oracles.pv_scipy(lambda w: oracles.occupied(w, 1.0, -0.5, 10.0), 0.0, 120.0)
    assert val == pytest.approx(ref, rel=1e-9)


def test_bath_spec_validation():
    with pytest.raises(ConfigError):
        BathSpec(beta=0.0)
    with pytest.raises(ConfigError):
        BathSpec(beta=1.0, kind="lorentzian")

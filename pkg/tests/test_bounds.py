import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fakepath import (
    Path,
    SystemConfig,
    asymptotic_fim,
    bound_psi,
    bound_xi,
    check_assumptions,
    moment_constants,
    moment_functions,
    separation_thresholds,
)
from fakepath.bounds import bound_report, epsilon, offset_limits, psi_factors
from fakepath.channel import Provenance
from fakepath.errors import AssumptionError
from fakepath.precoder import fake_angle
from fakepath.fisher import crlb_trace, eigen_ratio


def _pair(cfg, dt, dth, gamma=1e-3 * (0.6 + 0.8j), tau=30e-9, theta=0.62):
    fake_theta = fake_angle(theta, dth, cfg, alias=True)
    return (
        Path(gamma, tau, theta),
        Path(gamma, tau + dt, fake_theta, Provenance.FAKE, 1),
    )


def _coupled(cfg, mu):
    _, ua = separation_thresholds(cfg)
    dth = mu * ua
    dt = math.sin(dth) / ((cfg.N - 1) * cfg.Lambda)
    return dt, dth


# ---------------------------------------------------------------- moments


def test_moment_constants_values():
    O = moment_constants(SystemConfig())
    assert O == (1240, 120, 7.5, 77.5, 16, 1)
    O2 = moment_constants(SystemConfig(N=2))
    assert O2.O1 == 1 and O2.O2 == 1


def test_moment_functions_zero_offset(cfg):
    M = moment_functions(0.0, 0.0, cfg)
    O = moment_constants(cfg)
    for m, o in zip(M, O):
        assert m == pytest.approx(o, abs=1e-12)


def test_moment_functions_term_by_term(cfg):
    dt, dth = 7.3e-9, 0.21
    M = moment_functions(dt, dth, cfg)
    span = cfg.N * cfg.Ts
    e = [np.exp(-2j * math.pi * n * dt / span) for n in range(cfg.N)]
    f = [np.exp(2j * math.pi * m * cfg.d * math.sin(dth) / cfg.lambda_c) for m in range(cfg.Nt)]
    ref = [
        sum(n * n * e[n] for n in range(cfg.N)),
        sum(n * e[n] for n in range(cfg.N)),
        sum(m * f[m] for m in range(cfg.Nt)) / cfg.Nt,
        sum(m * m * f[m] for m in range(cfg.Nt)) / cfg.Nt,
        sum(e),
        sum(f) / cfg.Nt,
    ]
    for a, b in zip(M, ref):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(st.floats(-1e-6, 1e-6), st.floats(-1.5, 1.5))
def test_moment_functions_conjugation_and_bounds(dt, dth):
    cfg = SystemConfig()
    M = moment_functions(dt, dth, cfg)
    Mc = moment_functions(-dt, -dth, cfg)
    for a, b in zip(M, Mc):
        assert a == pytest.approx(np.conj(b), rel=1e-9, abs=1e-9)
    O = moment_constants(cfg)
    for i in range(6):
        for t in range(6):
            assert abs((M[i] * M[t]).real) <= O[i] * O[t] * (1 + 1e-12)


def test_epsilon_value(cfg):
    O = moment_constants(cfg)
    ref = 2 * (O.O1 * O.O4 * O.O5 * O.O6 - (O.O2 * O.O3) ** 2) / (O.O1 * O.O6 + 2 * O.O2 * O.O3 + O.O4 * O.O5)
    assert epsilon(cfg) == pytest.approx(ref, rel=1e-15)
    assert epsilon(cfg) == pytest.approx(340.0, rel=1e-12)


# ---------------------------------------------------------------- asymptotic FIM


def test_asymptotic_fim_coincident_is_singular(cfg):
    J = asymptotic_fim(_pair(cfg, 0.0, 0.0), 1e-9, cfg).matrix
    np.testing.assert_allclose(J[2:], J[:2][:, [2, 3, 0, 1]], rtol=1e-12)
    np.testing.assert_allclose(J[:2, :2], J[2:, 2:], rtol=1e-12)
    assert np.linalg.matrix_rank(J, tol=1e-9 * np.abs(J).max()) < 4


def test_asymptotic_fim_top_left(cfg):
    pair = _pair(cfg, 4e-9, 0.1)
    s2 = 2e-9
    J = asymptotic_fim(pair, s2, cfg).matrix
    O = moment_constants(cfg)
    ref = 8 * math.pi**2 / (s2 * cfg.symbol_span**2) * O.O1 * O.O6 * abs(pair[0].gamma) ** 2
    assert J[0, 0] == pytest.approx(ref, rel=1e-14)


def test_asymptotic_fim_matches_pilot_average(cfg):
    # with orthogonal pilots summed over many symbols the exact FIM per symbol approaches the asymptotic one
    from fakepath import PathSet, exact_fim, generate_pilots
    from fakepath.fisher import zeta_fim

    pair = _pair(cfg, 6e-9, 0.15)
    pil = generate_pilots(cfg, 2, G=4096)
    J = exact_fim(PathSet(pair), pil, 1e-9, cfg)
    Z = zeta_fim(J, 0, 1).matrix / pil.G
    A = asymptotic_fim(pair, 1e-9, cfg).matrix
    assert np.linalg.norm(Z - A) / np.linalg.norm(A) < 0.05


# ---------------------------------------------------------------- Xi


@pytest.mark.parametrize("mu", [0.05, 0.1, 0.2, 0.5, 1.0])
def test_xi_closed_form_matches_determinant(cfg, mu):
    pair = _pair(cfg, *_coupled(cfg, mu))
    J = asymptotic_fim(pair, 1e-9, cfg).matrix
    w = np.linalg.eigvalsh(J)
    ref = 4 * np.prod(w) ** -0.25
    xi = bound_xi(pair, 1e-9, cfg)
    assert xi == pytest.approx(ref, rel=1e-10)
    assert xi <= crlb_trace(asymptotic_fim(pair, 1e-9, cfg)).trace * (1 + 1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-9, 3e-7), st.floats(0.02, 0.5), st.floats(-0.5, 0.5), st.floats(1e-11, 1e-7))
def test_xi_below_trace_property(dt, dth, theta, s2):
    cfg = SystemConfig()
    pair = _pair(cfg, dt, dth, theta=theta)
    xi = bound_xi(pair, s2, cfg)
    J = asymptotic_fim(pair, s2, cfg)
    res = crlb_trace(J)
    if res.bounded and math.isfinite(xi):
        assert xi <= res.trace * (1 + 1e-10)
        ref = 4 * np.prod(np.linalg.eigvalsh(J.matrix)) ** -0.25
        assert xi == pytest.approx(ref, rel=1e-6)


def test_xi_infinite_when_coincident(cfg):
    assert bound_xi(_pair(cfg, 0.0, 0.0), 1e-9, cfg) == math.inf


def test_xi_requires_equal_gains(cfg):
    t, f = _pair(cfg, 3e-9, 0.1)
    f = Path(2 * f.gamma, f.tau, f.theta, f.provenance, f.set_index)
    with pytest.raises(AssumptionError) as info:
        bound_xi((t, f), 1e-9, cfg)
    assert info.value.failing == ("A1",)


# ---------------------------------------------------------------- Psi


def test_psi_angle_factor_at_right_angle(cfg):
    _, _, f3 = psi_factors(_pair(cfg, 1e-9, math.pi / 2, theta=0.0), 1e-9, cfg)
    assert f3 == pytest.approx(1.0, rel=1e-15)


def test_psi_inverse_in_gain_power(cfg):
    a = bound_psi(_pair(cfg, 1e-9, 0.1), 1e-9, cfg, strict=False)
    g2 = 1e-3 * (0.6 + 0.8j) * math.sqrt(2)
    b = bound_psi(_pair(cfg, 1e-9, 0.1, gamma=g2), 1e-9, cfg, strict=False)
    assert b == pytest.approx(a / 2, rel=1e-12)


def test_psi_strict_refuses_outside_hypotheses(cfg):
    with pytest.raises(AssumptionError) as info:
        bound_psi(_pair(cfg, 0.0, 0.0), 1e-9, cfg)
    assert "A2" in info.value.failing and "A3" in info.value.failing


@pytest.mark.parametrize("mu", [0.05, 0.1, 0.2, 0.5, 1.0])
def test_psi_below_xi_on_coupled_grid(cfg, mu):
    pair = _pair(cfg, *_coupled(cfg, mu))
    psi = bound_psi(pair, 1e-9, cfg, strict=False)
    xi = bound_xi(pair, 1e-9, cfg)
    assert psi <= xi * (1 + 1e-10)


def test_psi_defined_when_hypotheses_hold(cfg):
    t_max, a_max = offset_limits(cfg)
    dth = 0.5 * a_max
    dt = math.sin(dth) / ((cfg.N - 1) * cfg.Lambda)
    pair = _pair(cfg, dt, dth, theta=0.0)
    rep = check_assumptions(pair, cfg)
    if rep.all_hold:
        psi = bound_psi(pair, 1e-9, cfg)
        assert psi <= bound_xi(pair, 1e-9, cfg) * (1 + 1e-10)
    else:
        with pytest.raises(AssumptionError):
            bound_psi(pair, 1e-9, cfg)


# ---------------------------------------------------------------- assumptions


def test_offset_limits_respect_epsilon(cfg):
    from fakepath.bounds import _moment_gaps

    t_max, a_max = offset_limits(cfg)
    assert 0 < t_max < cfg.symbol_span and 0 < a_max < math.pi / 2
    eps = epsilon(cfg)
    t = np.linspace(0, t_max, 101)
    a = np.linspace(0, a_max, 101)
    assert np.all(_moment_gaps(t, a, cfg) < eps)
    # slightly beyond the box on either axis the inequalities break somewhere
    assert np.any(_moment_gaps(np.linspace(0, 1.05 * t_max, 401), np.linspace(0, 1.05 * a_max, 401), cfg) >= eps)


def test_assumptions_zero_offsets(cfg):
    rep = check_assumptions(_pair(cfg, 0.0, 0.0), cfg)
    assert not rep.A2 and not rep.A3 and rep.A1


def test_assumptions_default_design_violates_a4_a5(cfg):
    from fakepath import separation_thresholds

    ut, ua = separation_thresholds(cfg)
    rep = check_assumptions(_pair(cfg, ut / 20, ua / 20), cfg)
    assert not rep.A4 and not rep.A5
    assert rep.epsilon == pytest.approx(340.0)


def test_assumptions_gain_mismatch(cfg):
    t, f = _pair(cfg, 1e-9, 0.05)
    f = Path(1j * f.gamma, f.tau, f.theta, f.provenance, f.set_index)
    assert not check_assumptions((t, f), cfg).A1


# ---------------------------------------------------------------- Proposition 2 trend


def test_singularity_trend(cfg):
    mus = [1, 0.5, 0.1, 0.01, 0.001]
    ratios = [eigen_ratio(asymptotic_fim(_pair(cfg, *_coupled(cfg, mu)), 1e-9, cfg)) for mu in mus]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert eigen_ratio(asymptotic_fim(_pair(cfg, *_coupled(cfg, 1e-4)), 1e-9, cfg)) < 1e-6


def test_bound_report_fields(cfg):
    from fakepath import PathSet, exact_fim, generate_pilots
    from fakepath.fisher import zeta_fim

    pair = _pair(cfg, *_coupled(cfg, 0.2))
    pil = generate_pilots(cfg, 0)
    Z = zeta_fim(exact_fim(PathSet(pair), pil, 1e-9, cfg), 0, 1)
    rep = bound_report(pair, 1e-9, cfg, Z, pil.G)
    assert rep.G == 16 and rep.epsilon == pytest.approx(340.0)
    assert rep.slack == pytest.approx(rep.G * rep.trace_exact - rep.xi)
    assert set(rep.assumption_flags) == {"A1", "A2", "A3", "A4", "A5"}
    assert rep.psi <= rep.xi

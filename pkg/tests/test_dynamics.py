"""Time stepping: IF-RK4, energy ledger, and the semidiscrete estimates."""

import math

import numpy as np
import pytest

from mhdrelax.dynamics import (
    LEDGER_HEADER,
    CFLViolation,
    EnergyLedger,
    GalerkinConfig,
    IntegrationAborted,
    corpus_state,
    corpus_vector_field,
    dBdt_hminus1_bound_check,
    integrate,
    rhs,
    semidiscrete_cancellations,
    step,
)
from mhdrelax.fields import (
    DegenerateFieldError,
    FlowState,
    SpectralField,
    VectorField,
    advective_term,
    h1_seminorm,
    l2_inner,
    leray_project,
    sobolev_norm,
    taylor_green,
)
from mhdrelax.stokes import velocity_from_B


def _tg_state(grid, nu=1.0, eta=0.1):
    return FlowState(0.0, taylor_green(grid), nu, eta)


# ---------------------------------------------------------------------------
# configuration

@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(nu=0.0), "nu"),
        (dict(eta=-0.1), "eta"),
        (dict(dt=0.0), "dt"),
        (dict(t_end=-1.0), "t_end"),
        (dict(cfl_safety=0.0), "cfl_safety"),
        (dict(cfl_safety=1.5), "cfl_safety"),
        (dict(integrator="euler"), "integrator"),
    ],
)
def test_config_validation(grid16, kwargs, match):
    base = dict(grid=grid16, nu=1.0, eta=0.1, dt=1e-3, t_end=1.0)
    base.update(kwargs)
    with pytest.raises(ValueError, match=match):
        GalerkinConfig(**base)


def test_state_config_mismatch(grid16, grid32):
    cfg = GalerkinConfig(grid32, 1.0, 0.1, 1e-3, 1e-3)
    with pytest.raises(ValueError, match="grids"):
        step(_tg_state(grid16), cfg)
    with pytest.raises(ValueError, match="disagree"):
        step(_tg_state(grid32, nu=2.0), cfg)


# ---------------------------------------------------------------------------
# right-hand side

def test_rhs_requires_solenoidal_field(grid16):
    z = SpectralField(grid16, np.zeros(grid16.shape, dtype=np.complex128))
    with pytest.raises(ValueError, match="divergence-free"):
        rhs(VectorField(z, z), 1.0, 0.1)


def test_rhs_diffusion_only_is_scaled_laplacian(grid32):
    B = taylor_green(grid32)
    out = rhs(B, 1.0, 0.3, nonlinear=False)
    # single shell |k|^2 = 2: eta Lap B = -eta 8 pi^2 B
    np.testing.assert_allclose(
        out.x_comp.coeff, -0.3 * 8 * np.pi**2 * B.x_comp.coeff, atol=1e-11
    )


def test_rhs_matches_literal_advective_route(grid32):
    # the curl-form nonlinearity must agree with the textbook form
    # P[(B.grad)u - (u.grad)B] computed through the public pieces
    B = corpus_vector_field(grid32, 3)
    u = velocity_from_B(B, 1.0).u
    literal = leray_project(advective_term(B, u) - advective_term(u, B))
    curl = rhs(B, 1.0, 0.0, nonlinear=True)
    scale = max(
        np.max(np.abs(literal.x_comp.coeff)), np.max(np.abs(literal.y_comp.coeff))
    )
    for i in range(2):
        diff = np.max(np.abs(curl.component(i).coeff - literal.component(i).coeff))
        assert diff < 1e-12 * scale


def test_rhs_energy_pairing(grid32):
    # <rhs(B), B> = -eta ||grad B||^2 - nu ||grad u||^2: transport drops out,
    # stretching pairs with the Stokes balance
    B = corpus_vector_field(grid32, 5)
    nu, eta = 1.3, 0.2
    u = velocity_from_B(B, nu).u
    lhs = l2_inner(rhs(B, nu, eta), B)
    expected = -eta * h1_seminorm(B) ** 2 - nu * h1_seminorm(u) ** 2
    assert abs(lhs - expected) < 1e-10 * abs(expected)


def test_rhs_output_is_solenoidal_and_mean_free(grid32):
    out = rhs(corpus_vector_field(grid32, 1), 1.0, 0.1)
    assert out.divergence_free
    assert out.x_comp.coeff[0, 0] == 0
    assert out.y_comp.coeff[0, 0] == 0


# ---------------------------------------------------------------------------
# stepping

def test_diffusion_only_decay_is_exact(grid32):
    # with the nonlinearity off, IF-RK4 reduces to the exact heat multiplier
    eta, T = 0.05, 0.1
    cfg = GalerkinConfig(grid32, 1.0, eta, 0.01, T, nonlinear=False)
    final, ledger = integrate(_tg_state(grid32, eta=eta), cfg)
    decay = math.exp(-8 * math.pi**2 * eta * T)
    # atol covers the ~2e-16 construction round-off in far modes, which the
    # true evolution damps at per-mode rates rather than the shell rate
    np.testing.assert_allclose(
        final.B.x_comp.coeff,
        decay * taylor_green(grid32).x_comp.coeff,
        rtol=1e-13,
        atol=1e-15,
    )
    assert ledger.balance_residual[-1] < 1e-7
    assert np.all(ledger.dissipation_u == 0.0)
    assert np.all(ledger.max_u == 0.0)


def test_budget_residual_contracts_at_fourth_order(grid32):
    # measured 3.31e-10 vs 2.07e-11 (ratio 15.997) on this exact setup
    residuals = {}
    for dt in (2e-3, 1e-3):
        cfg = GalerkinConfig(grid32, 1.0, 0.1, dt, 0.2)
        _, ledger = integrate(_tg_state(grid32), cfg)
        residuals[dt] = ledger.balance_residual[-1]
    assert residuals[1e-3] < 1e-10
    assert 14.0 < residuals[2e-3] / residuals[1e-3] < 18.0


def test_step_matches_single_step_integrate(grid16):
    cfg = GalerkinConfig(grid16, 1.0, 0.1, 1e-3, 1e-3)
    state = corpus_state(grid16, 2)
    once = step(state, cfg)
    final, _ = integrate(state, cfg)
    assert once.t == final.t == 1e-3
    assert np.array_equal(once.B.x_comp.coeff, final.B.x_comp.coeff)
    assert np.array_equal(once.B.y_comp.coeff, final.B.y_comp.coeff)


def test_eta_zero_conserves_energy_without_diffusion(grid32):
    # ideal induction: the only drain is the velocity dissipation
    cfg = GalerkinConfig(grid32, 1.0, 0.0, 1e-3, 0.05)
    state = corpus_state(grid32, 4, eta=0.0)
    _, ledger = integrate(state, cfg)
    assert np.all(ledger.dissipation_B == 0.0)
    assert ledger.balance_residual[-1] < 1e-9
    assert ledger.energy_B[-1] < ledger.energy_B[0]


def test_cfl_refusal_reports_admissible_step(grid32):
    state = FlowState(0.0, corpus_vector_field(grid32, 0) * 10.0, 1.0, 0.1)
    cfg = GalerkinConfig(grid32, 1.0, 0.1, 0.01, 0.1)
    with pytest.raises(CFLViolation) as err:
        step(state, cfg)
    assert err.value.max_u > 1.0
    assert 0.0 < err.value.admissible_dt < 0.01
    # the reported step must actually be admissible
    relaxed = GalerkinConfig(grid32, 1.0, 0.1, err.value.admissible_dt, 0.1)
    step(state, relaxed)


def test_nonfinite_fields_abort_with_step_index(grid32):
    state = FlowState(0.0, taylor_green(grid32) * 1e160, 1.0, 0.1)
    cfg = GalerkinConfig(grid32, 1.0, 0.1, 1e-4, 1e-3)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(IntegrationAborted) as err:
            integrate(state, cfg)
    assert err.value.step_index == 0
    assert err.value.t == pytest.approx(1e-4)


# ---------------------------------------------------------------------------
# ledger bookkeeping

def test_integrate_handles_partial_final_step(grid16):
    cfg = GalerkinConfig(grid16, 1.0, 0.1, 1e-3, 0.0105)
    final, ledger = integrate(_tg_state(grid16), cfg)
    assert final.t == 0.0105
    assert len(ledger) == 12
    assert ledger.times[-1] == 0.0105
    np.testing.assert_allclose(ledger.dt[:10], 1e-3)
    assert ledger.dt[10] == pytest.approx(5e-4)
    rows = list(ledger.rows())
    assert len(rows) == 12 and all(len(r) == len(LEDGER_HEADER) for r in rows)
    assert rows[0][0] == 0.0


def test_integrate_zero_span_returns_empty_ledger(grid16):
    cfg = GalerkinConfig(grid16, 1.0, 0.1, 1e-3, 0.0)
    final, ledger = integrate(_tg_state(grid16), cfg)
    assert final.t == 0.0
    assert len(ledger) == 0


def test_observer_cadence(grid16):
    seen = []
    cfg = GalerkinConfig(grid16, 1.0, 0.1, 1e-3, 0.011)
    integrate(_tg_state(grid16), cfg, observers=[lambda s: seen.append(s.t)], cadence=4)
    # steps 0, 4, 8 before stepping, plus the final state
    assert seen == [0.0, pytest.approx(4e-3), pytest.approx(8e-3), pytest.approx(0.011)]
    with pytest.raises(ValueError, match="cadence"):
        integrate(_tg_state(grid16), cfg, cadence=0)


def test_energy_is_monotone_for_taylor_green(grid32):
    cfg = GalerkinConfig(grid32, 1.0, 0.1, 1e-3, 0.05)
    _, ledger = integrate(_tg_state(grid32), cfg)
    assert np.all(np.diff(ledger.energy_B) < 0)


def test_ledger_rejects_mismatched_columns():
    t = np.zeros(3)
    bad = np.zeros(2)
    with pytest.raises(ValueError, match="mismatched"):
        EnergyLedger(t, bad, t, t, t, t, t)


# ---------------------------------------------------------------------------
# semidiscrete estimates

def test_dBdt_bound_diffusion_only_closed_form(grid32):
    # single shell: ratio = 8 pi^2 / (1 + 8 pi^2) exactly
    ratio = dBdt_hminus1_bound_check(_tg_state(grid32), nonlinear=False)
    assert abs(ratio - 8 * math.pi**2 / (1 + 8 * math.pi**2)) < 1e-12


def test_dBdt_bound_degenerate_field(grid16):
    z = SpectralField(grid16, np.zeros(grid16.shape, dtype=np.complex128))
    state = FlowState(0.0, VectorField(z, z, divergence_free=True), 1.0, 0.1)
    with pytest.raises(DegenerateFieldError):
        dBdt_hminus1_bound_check(state)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dBdt_bound_holds_on_corpus(grid32, seed):
    assert dBdt_hminus1_bound_check(corpus_state(grid32, seed)) <= 1.0 + 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cancellations_vanish_on_corpus(grid32, seed):
    c1, c2 = semidiscrete_cancellations(corpus_state(grid32, seed).B, 1.0)
    assert c1 < 1e-10 and c2 < 1e-10


def test_corpus_draws_are_reproducible(grid32):
    a = corpus_vector_field(grid32, 6)
    b = corpus_vector_field(grid32, 6)
    assert np.array_equal(a.x_comp.coeff, b.x_comp.coeff)
    other = corpus_vector_field(grid32, 6, stream=1)
    assert not np.array_equal(a.x_comp.coeff, other.x_comp.coeff)
    assert a.divergence_free and other.divergence_free
    assert a.x_comp.coeff[0, 0] == 0

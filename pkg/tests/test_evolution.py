import numpy as np
import pytest

from conftest import gaussian_field, random_field
from randnls.diagnostics import conserved_set
from randnls.errors import BlowUpError, ConfigurationError, StructuralError
from randnls.evolution import (
    EvolutionConfig,
    evolve,
    forced_remainder,
    linear_propagate,
    linear_trajectory,
    nonlinear_substep,
    step_strang,
)
from randnls.spectral import Field, GridSpec, l2_norm, sobolev_norm


def h1_dist(a, b):
    return sobolev_norm(a - b, 1.0)


# -- config -------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(dt=0.0, t_end=1.0), dict(dt=0.1, t_end=-1.0),
                                dict(dt=0.1, t_end=1.0, checkpoint_every=0),
                                dict(dt=0.1, t_end=1.0, defocusing_sign=-1)])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        EvolutionConfig(**kw)


# -- linear flow --------------------------------------------------------------


def test_linear_identity_at_zero(g8):
    u = random_field(g8)
    assert np.max(np.abs(linear_propagate(u, 0.0).data - u.data)) <= 1e-12 * np.max(np.abs(u.data))


def test_linear_plane_wave(g8):
    x = g8.coords()[0]
    w = Field.physical(g8, np.exp(1j * x) * np.ones(g8.shape))
    assert np.max(np.abs(linear_propagate(w, np.pi / 2).data + 1j * w.data)) <= 1e-12


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
def test_linear_isometry(g16, s):
    u = random_field(g16, 1)
    assert sobolev_norm(linear_propagate(u, 0.7), s) == pytest.approx(sobolev_norm(u, s), rel=1e-12)


def test_linear_group_law(g16):
    u = random_field(g16, 2)
    a = linear_propagate(linear_propagate(u, 0.3), -1.1)
    b = linear_propagate(u, -0.8)
    assert np.max(np.abs(a.data - b.data)) <= 1e-12 * np.max(np.abs(u.data))


# -- nonlinear sub-flow -------------------------------------------------------


def test_substep_zero(g8):
    assert np.all(nonlinear_substep(Field.zeros(g8), 0.3).data == 0)


def test_substep_constant(g8):
    one = Field.physical(g8, np.ones(g8.shape, complex))
    assert np.max(np.abs(nonlinear_substep(one, np.pi).data + 1.0)) <= 1e-14


def test_substep_preserves_modulus(g16):
    u = random_field(g16, 3)
    out = nonlinear_substep(u, 0.77)
    assert np.max(np.abs(np.abs(out.data) - np.abs(u.data))) <= 1e-14 * np.max(np.abs(u.data))


def test_substep_requires_physical(g8):
    with pytest.raises(StructuralError):
        nonlinear_substep(random_field(g8).to_spectral(), 0.1)


# -- Strang step --------------------------------------------------------------


def test_step_linear_only(g16):
    u = random_field(g16, 4)
    a = step_strang(u, 0.05, EvolutionConfig(0.05, 0.05, linear_only=True))
    assert np.max(np.abs(a.data - linear_propagate(u, 0.05).data)) <= 1e-12


def test_step_tiny_amplitude(g16):
    x = g16.coords()[0]
    w = Field.physical(g16, 1e-6 * np.exp(1j * x) * np.ones(g16.shape))
    a = step_strang(w, 0.01, EvolutionConfig(0.01, 0.01))
    assert np.max(np.abs(a.data - linear_propagate(w, 0.01).data)) <= 1e-14


def test_one_step_local_error_is_third_order():
    g = GridSpec(16, 2 * np.pi)
    u0 = gaussian_field(g, 0.8, 1.5)
    cfg = EvolutionConfig(1e-4, 1e-4, dealias=False)
    ref = {}
    for dt in (0.04, 0.02):
        fine = evolve(u0, EvolutionConfig(dt / 64, dt, 64, dealias=False)).checkpoints[-1]
        ref[dt] = h1_dist(step_strang(u0, dt, cfg), fine)
    assert 6.0 <= ref[0.04] / ref[0.02] <= 10.0


# -- evolve -------------------------------------------------------------------


def test_evolve_zero(g8):
    t = evolve(Field.zeros(g8), EvolutionConfig(0.1, 0.5, 2))
    assert all(np.all(c.data == 0) for c in t.checkpoints)
    assert t.times[0] == 0.0 and t.checkpoints[0] is t.initial


def test_evolve_constant_closed_form(g8):
    c = 0.8 + 0.3j
    u0 = Field.physical(g8, np.full(g8.shape, c))
    t = evolve(u0, EvolutionConfig(0.01, 1.0, 10))
    for time, cp in zip(t.times, t.checkpoints):
        exact = c * np.exp(-1j * abs(c) ** 2 * time)
        assert np.max(np.abs(cp.values() - exact)) <= 1e-10


def test_evolve_checkpoints(g8):
    t = evolve(random_field(g8, 1) * 0.1, EvolutionConfig(0.1, 0.75, 3))
    # 8 steps after uniform shrinking: checkpoints at 3, 6 and the final step
    assert len(t) == 4
    assert t.times[-1] == pytest.approx(0.75)
    assert np.all(np.diff(t.times) > 0)


def _mass_drift(u0, cfg):
    t = evolve(u0, cfg)
    m0 = conserved_set(u0).mass
    return max(abs(conserved_set(c).mass - m0) / m0 for c in t.checkpoints)


def test_mass_conservation_rough_data_undealiased(g16):
    # both sub-flows are unitary, so mass is exact up to roundoff
    assert _mass_drift(random_field(g16, 5) * 0.3, EvolutionConfig(1e-3, 1.0, 100, dealias=False)) <= 1e-10


def test_mass_conservation_resolved_data_dealiased():
    # the 2/3 filter only touches modes the data does not populate
    g = GridSpec(64, 32.0)
    assert _mass_drift(gaussian_field(g, 2.0), EvolutionConfig(1e-3, 0.25, 50, dealias=True)) <= 1e-10


def test_energy_drift_second_order():
    g = GridSpec(16, 2 * np.pi)
    u0 = gaussian_field(g, g.L / 8, 1.0)
    e0 = conserved_set(u0).energy
    drifts = []
    for dt in (4e-3, 2e-3):
        t = evolve(u0, EvolutionConfig(dt, 0.4, 10, dealias=False))
        drifts.append(max(abs(conserved_set(c).energy - e0) for c in t.checkpoints) / e0)
    assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_time_reversibility(g16):
    u0 = gaussian_field(g16, 0.8, 1.0)
    cfg = dict(dealias=False)
    fwd = evolve(u0, EvolutionConfig(1e-2, 1.0, 100, **cfg)).checkpoints[-1]
    # reverse by conjugation symmetry: conj(u(t)) evolved forward returns conj(u0)
    back = evolve(Field.physical(g16, np.conj(fwd.values())), EvolutionConfig(1e-2, 1.0, 100, **cfg))
    rec = Field.physical(g16, np.conj(back.checkpoints[-1].values()))
    assert h1_dist(rec, u0) <= 1e-8


def test_defocusing_potential_nonnegative(g16):
    t = evolve(random_field(g16, 6) * 0.3, EvolutionConfig(1e-2, 0.2, 5))
    assert all(conserved_set(c).potential >= 0 for c in t.checkpoints)


def test_blowup_carries_partial_trajectory(g8):
    u0 = Field.physical(g8, np.full(g8.shape, 1e200, complex))
    with pytest.warns(RuntimeWarning):
        with pytest.raises(BlowUpError) as info:
            evolve(u0, EvolutionConfig(0.1, 1.0, 2))
    assert info.value.trajectory is not None
    assert info.value.last_checkpoint is info.value.trajectory.checkpoints[-1]


def test_nonfinite_initial_data(g8):
    u0 = Field.physical(g8, np.full(g8.shape, np.nan, complex))
    with pytest.raises(BlowUpError):
        evolve(u0, EvolutionConfig(0.1, 0.2))


def test_stability_guard_halving(g8):
    u0 = Field.physical(g8, np.full(g8.shape, 3.0, complex))
    with pytest.warns(RuntimeWarning):
        t = evolve(u0, EvolutionConfig(0.1, 0.4, 1, halve_on_guard=True))
    assert t.meta["halvings"] >= 1 and t.meta["guard_violations"] >= 1


# -- forced remainder ---------------------------------------------------------


def test_remainder_vanishes_without_nonlinearity(g16):
    f0 = random_field(g16, 7)
    t = evolve(f0, EvolutionConfig(0.01, 0.2, 5, linear_only=True))
    v = forced_remainder(t, f0)
    assert max(np.max(np.abs(c.data)) for c in v.checkpoints) <= 1e-12 * np.max(np.abs(f0.data))


def test_remainder_is_order_dt(g16):
    f0 = random_field(g16, 8) * 0.2
    norms = []
    for dt in (1e-2, 5e-3):
        t = evolve(f0, EvolutionConfig(dt, dt, 1))
        norms.append(l2_norm(forced_remainder(t, f0).checkpoints[-1]))
    assert norms[0] / norms[1] == pytest.approx(2.0, rel=0.05)
    assert l2_norm(forced_remainder(evolve(f0, EvolutionConfig(1e-2, 0.1, 5)), f0).checkpoints[0]) <= 1e-12


def test_remainder_recomposes(g16):
    f0 = random_field(g16, 9) * 0.2
    t = evolve(f0, EvolutionConfig(1e-2, 0.1, 2))
    v = forced_remainder(t, f0)
    for time, u, vv in zip(t.times, t.checkpoints, v.checkpoints):
        back = vv + linear_propagate(f0, time)
        assert np.max(np.abs(back.values() - u.values())) <= 1e-12


def test_remainder_grid_mismatch(g8, g16):
    t = evolve(random_field(g8), EvolutionConfig(0.1, 0.1))
    with pytest.raises(StructuralError):
        forced_remainder(t, random_field(g16))


def test_linear_trajectory_requires_zero_start(g8):
    with pytest.raises(ConfigurationError):
        linear_trajectory(random_field(g8), [0.5, 1.0])


def test_self_convergence_32():
    g = GridSpec(32, 2 * np.pi)
    u0 = gaussian_field(g, 0.6, 1.5)
    ref = evolve(u0, EvolutionConfig(1e-3, 0.5, 500)).checkpoints[-1]
    err = [h1_dist(evolve(u0, EvolutionConfig(dt, 0.5, 500)).checkpoints[-1], ref) for dt in (1e-2, 5e-3)]
    assert 3.2 <= err[0] / err[1] <= 4.8

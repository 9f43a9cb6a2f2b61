import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnsflow.condition_a import REMARK_SET
from cnsflow.config import gaussian_mixture
from cnsflow.field import GridMismatch, GridSpec, heat_propagate
from cnsflow.measures import Atom, RadonMeasureSpec, mollify
from cnsflow.picard import seed_trajectory
from cnsflow.trajectory import Trajectory, graded_times, kato_norm, x_norms

G = GridSpec(8.0, 64)


def gauss(center, variance, **kw):
    return gaussian_mixture(G, [{"center": center, "variance": variance, **kw}])


@pytest.fixture(scope="module")
def heat_traj():
    return seed_trajectory(gauss((0.2, 0.0), 0.5, mass=1.0), gauss((0, 0), 1.0, amplitude=0.01), gauss((0, 0.1), 0.7, mass=0.2), graded_times(0.1, 8))


def test_graded_times():
    t = graded_times(2.0, 4)
    assert np.allclose(t, [0.125, 0.5, 1.125, 2.0])
    with pytest.raises(ValueError):
        graded_times(0.0, 4)


def test_construction_checks():
    z = G.zeros()
    ts = graded_times(0.1, 8)
    with pytest.raises(ValueError):
        Trajectory(ts[:7], [z] * 7, [z] * 7, [z] * 7)
    with pytest.raises(ValueError):
        Trajectory(ts[::-1], [z] * 8, [z] * 8, [z] * 8)
    with pytest.raises(ValueError):
        Trajectory(ts, [z] * 8, [z] * 7, [z] * 8)
    with pytest.raises(GridMismatch):
        Trajectory(ts, [z] * 7 + [GridSpec(4.0, 64).zeros()], [z] * 8, [z] * 8)


def test_dirac_heat_kato_norm_plateau():
    # t^{1/2} ||e^{t Delta} delta||_2 = (8 pi)^{-1/2} for every t
    g = GridSpec(8.0, 256)
    delta = mollify(RadonMeasureSpec((Atom((0.0, 0.0), 1.0),)), 1e4, g, allow_subgrid=True)
    ts = np.geomspace(10 * g.h**2, 0.1, 8)
    z = g.zeros()
    traj = Trajectory(ts, [heat_propagate(delta, float(t)) for t in ts], [z] * 8, [z] * 8)
    assert kato_norm(traj, "n", 2.0, 0.5) == pytest.approx((8 * math.pi) ** -0.5, rel=1e-5)


def test_kato_norm_components(heat_traj):
    assert kato_norm(heat_traj, "c_inf", 3.0, 0.2) == pytest.approx(heat_traj.c[0].sup())
    assert kato_norm(heat_traj, "grad_c", 3.0, 0.0) > 0
    x1, x2, x3 = x_norms(heat_traj, REMARK_SET)
    assert x1 == pytest.approx(kato_norm(heat_traj, "n", 17 / 8, 9 / 17))
    assert x2 == pytest.approx(kato_norm(heat_traj, "c_inf", 0, 0) + kato_norm(heat_traj, "grad_c", 3.0, 1 / 6))
    assert x3 == pytest.approx(kato_norm(heat_traj, "zeta", 15 / 8, 7 / 15))


@given(a=st.floats(-5.0, 5.0))
def test_kato_norms_are_homogeneous(heat_traj, a):
    base = x_norms(heat_traj, REMARK_SET)
    scaled = x_norms(heat_traj.scaled(a), REMARK_SET)
    for s, b in zip(scaled, base):
        assert s == pytest.approx(abs(a) * b, rel=1e-12, abs=1e-300)


def test_interpolation_is_exact_at_nodes_and_for_free_heat(heat_traj):
    n, c, z = heat_traj.at(float(heat_traj.times[3]))
    assert np.array_equal(n.values, heat_traj.n[3].values)
    t = 0.5 * (heat_traj.times[2] + heat_traj.times[3])
    n, _, _ = heat_traj.at(t)
    ref = heat_propagate(heat_traj.initial[0], t)
    assert np.max(np.abs(n.values - ref.values)) <= 1e-12 * ref.sup()
    n, _, _ = heat_traj.at(0.5 * heat_traj.times[0])
    assert np.max(np.abs(n.values - heat_propagate(heat_traj.initial[0], 0.5 * heat_traj.times[0]).values)) <= 1e-12 * ref.sup()
    with pytest.raises(ValueError):
        heat_traj.at(1.0)


def test_interpolation_below_first_node_needs_initial_data(heat_traj):
    bare = Trajectory(heat_traj.times, heat_traj.n, heat_traj.c, heat_traj.zeta)
    with pytest.raises(ValueError):
        bare.at(0.5 * heat_traj.times[0])
    with pytest.raises(ValueError):
        bare.state(-1)


def test_algebra(heat_traj):
    d = heat_traj - heat_traj
    assert all(not np.any(f.values) for f in d.n + d.c + d.zeta)
    s = heat_traj + heat_traj
    assert np.allclose(s.n[2].values, 2 * heat_traj.n[2].values)
    other = Trajectory(heat_traj.times * 2, heat_traj.n, heat_traj.c, heat_traj.zeta)
    with pytest.raises(ValueError):
        heat_traj - other


def test_save_load_round_trip(heat_traj, tmp_path):
    heat_traj.save(tmp_path / "traj")
    back = Trajectory.load(tmp_path / "traj")
    assert np.array_equal(back.times, heat_traj.times)
    for a, b in zip(back.n + back.c + back.zeta + back.initial, heat_traj.n + heat_traj.c + heat_traj.zeta + heat_traj.initial):
        assert np.array_equal(a.values, b.values)


def test_zero_trajectory_has_zero_norms():
    z = Trajectory.zeros(G, graded_times(0.1, 8))
    assert x_norms(z, REMARK_SET) == (0.0, 0.0, 0.0)

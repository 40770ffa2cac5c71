import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jdcontrol import (
    build_grid,
    bump,
    bump_derivative,
    eval_basis,
    eval_u,
    load_control,
    save_control,
    time_average,
    zero_control,
)

E_INV = math.exp(-1.0)


class TestBump:
    def test_peak_value(self):
        assert bump(0.3, 0.3, 2.0) == pytest.approx(E_INV, rel=1e-15)

    def test_boundary_is_exact_zero(self):
        assert bump(1.0, 0.0, 1.0) == 0.0
        assert bump(2.5, 0.5, 0.5) == 0.0

    def test_known_value(self):
        # exp(-1/(1 - 0.25)) evaluated directly
        assert bump(0.5, 0.0, 1.0) == pytest.approx(math.exp(-1.0 / 0.75), rel=1e-15)
        assert bump(0.5, 0.0, 1.0) == pytest.approx(0.2635971381157267, rel=1e-12)

    @given(
        x=st.floats(-50, 50),
        x_c=st.floats(-5, 5),
        eps=st.floats(0.01, 10),
    )
    def test_range_and_support(self, x, x_c, eps):
        val = bump(x, x_c, eps)
        assert 0.0 <= val <= E_INV
        if abs(x - x_c) >= 1.0 / eps:
            assert val == 0.0

    def test_continuous_at_support_boundary(self):
        # values shrink to zero as the boundary is approached from inside
        for delta in (1e-2, 1e-4, 1e-6, 1e-8):
            assert bump(1.0 - delta, 0.0, 1.0) < 1e-8 or delta > 1e-4
        assert bump(1.0 - 1e-12, 0.0, 1.0) == pytest.approx(0.0, abs=1e-300)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            bump(0.0, 0.0, 0.0)


class TestBumpDerivative:
    def test_zero_at_peak(self):
        assert bump_derivative(0.7, 0.7, 3.0) == 0.0

    @given(h=st.floats(1e-6, 0.99), eps=st.floats(0.1, 5.0), x_c=st.floats(-3, 3))
    def test_odd_about_center(self, h, eps, x_c):
        step = h / eps
        left = bump_derivative(x_c - step, x_c, eps)
        right = bump_derivative(x_c + step, x_c, eps)
        assert left == pytest.approx(-right, rel=1e-12, abs=1e-300)

    def test_known_value(self):
        # chain rule of the bump: value * (-2*eps^2*(x-x_c)) / (1-(eps(x-x_c))^2)^2
        expected = math.exp(-1.0 / 0.75) * (-2.0 * 0.5) / 0.75**2
        assert bump_derivative(0.5, 0.0, 1.0) == pytest.approx(expected, rel=1e-15)
        assert bump_derivative(0.5, 0.0, 1.0) == pytest.approx(-0.46861713442795694, rel=1e-12)

    @pytest.mark.parametrize("x", [-0.9, -0.5, -0.1, 0.2, 0.6, 0.85])
    def test_matches_central_difference(self, x):
        h = 1e-6
        fd = (bump(x + h, 0.0, 1.0) - bump(x - h, 0.0, 1.0)) / (2 * h)
        assert bump_derivative(x, 0.0, 1.0) == pytest.approx(fd, rel=1e-6)

    def test_continuous_at_support_boundary(self):
        for delta in (1e-3, 1e-6, 1e-9):
            assert abs(bump_derivative(1.0 - delta, 0.0, 1.0)) < 1e-6
        assert bump_derivative(1.0, 0.0, 1.0) == 0.0


class TestEvalBasis:
    def test_far_outside_box_all_zero(self):
        grid = build_grid(2.0, 2.0, 4, 4)
        be = eval_basis(grid, 0.5, 20.0, 0.0)
        assert not be.values.any()
        assert not be.dx_values.any()
        assert not be.dv_values.any()

    def test_separated_centers_peak(self):
        # support radius 1/eps < min spacing leaves only the own-center product
        grid = build_grid(2.0, 2.0, 4, 4)  # spacing 1.0
        eps = 2.5
        flat = grid.flat_index(1, 2)
        x_c, v_c = grid.centers[flat]
        be = eval_basis(grid, eps, x_c, v_c)
        assert be.values[flat] == pytest.approx(math.exp(-2.0), rel=1e-14)
        mask = np.ones(grid.n_centers, dtype=bool)
        mask[flat] = False
        assert not be.values[mask].any()

    def test_dx_zero_at_own_position_center(self):
        grid = build_grid(2.0, 2.0, 4, 4)
        x_c = grid.centers_x[2]
        be = eval_basis(grid, 0.5, x_c, 0.33)
        for flat in range(grid.n_centers):
            if grid.centers[flat, 0] == x_c:
                assert be.dx_values[flat] == 0.0

    def test_product_structure(self):
        grid = build_grid(1.5, 1.5, 3, 3)
        be = eval_basis(grid, 0.8, 0.21, -0.4)
        for i in range(3):
            for l in range(3):
                expected = bump(0.21, grid.centers_x[i], 0.8) * bump(-0.4, grid.centers_v[l], 0.8)
                assert be.values[grid.flat_index(i, l)] == pytest.approx(expected, rel=1e-14)


class TestEvalU:
    def test_zero_mu_gives_zero(self, small_grid):
        cf = zero_control(small_grid, 0.5, 1.0, 4)
        assert eval_u(cf, 0.1, -0.2, 0.5) == (0.0, 0.0, 0.0)

    def test_linearity_in_mu(self, small_grid):
        rng = np.random.default_rng(0)
        cf = zero_control(small_grid, 0.5, 1.0, 4)
        mu1 = rng.standard_normal(cf.mu.shape)
        mu2 = rng.standard_normal(cf.mu.shape)
        a, b = 1.7, -0.4
        u1 = np.array(eval_u(cf.with_mu(mu1), 0.3, 0.5, 0.2))
        u2 = np.array(eval_u(cf.with_mu(mu2), 0.3, 0.5, 0.2))
        u12 = np.array(eval_u(cf.with_mu(a * mu1 + b * mu2), 0.3, 0.5, 0.2))
        np.testing.assert_allclose(u12, a * u1 + b * u2, rtol=1e-12, atol=1e-14)

    def test_doubling_mu_doubles_everything(self, random_control):
        u1 = np.array(eval_u(random_control, 0.4, -0.3, 1.1))
        u2 = np.array(eval_u(random_control.with_mu(2 * random_control.mu), 0.4, -0.3, 1.1))
        np.testing.assert_allclose(u2, 2 * u1, rtol=1e-13)

    def test_single_coefficient_at_own_center(self, small_grid):
        eps = 2.5  # separated supports
        cf = zero_control(small_grid, eps, 1.0, 2)
        flat = small_grid.flat_index(2, 1)
        mu = np.zeros_like(cf.mu)
        mu[flat, 0] = 1.0
        cf = cf.with_mu(mu)
        x_c, v_c = small_grid.centers[flat]
        u, _, _ = eval_u(cf, x_c, v_c, 0.0)
        assert u == pytest.approx(math.exp(-2.0), rel=1e-14)

    def test_compact_support_far_from_all_centers(self, random_control):
        g = random_control.grid
        far = g.x_max + 1.0 / random_control.eps_phi + 1.0
        assert eval_u(random_control, far, 0.0, 0.5) == (0.0, 0.0, 0.0)

    def test_interval_lookup(self, small_grid):
        cf = zero_control(small_grid, 0.5, 2.0, 4)
        mu = np.zeros_like(cf.mu)
        mu[:, 2] = 1.0
        cf = cf.with_mu(mu)
        assert cf.interval_index(0.0) == 0
        assert cf.interval_index(1.0) == 2
        assert cf.interval_index(1.49) == 2
        assert cf.interval_index(2.0) == 3  # t = T maps to the last interval

    def test_time_out_of_range(self, random_control):
        with pytest.raises(ValueError):
            eval_u(random_control, 0.0, 0.0, -0.1)
        with pytest.raises(ValueError):
            eval_u(random_control, 0.0, 0.0, random_control.t_final + 0.1)

    def test_derivatives_match_finite_differences(self, random_control):
        rng = np.random.default_rng(42)
        h = 1e-6
        for _ in range(20):
            x, v = rng.uniform(-1.8, 1.8, size=2)
            t = rng.uniform(0, random_control.t_final)
            u, ux, uv = eval_u(random_control, x, v, t)
            fx = (eval_u(random_control, x + h, v, t)[0] - eval_u(random_control, x - h, v, t)[0]) / (2 * h)
            fv = (eval_u(random_control, x, v + h, t)[0] - eval_u(random_control, x, v - h, t)[0]) / (2 * h)
            assert ux == pytest.approx(fx, rel=1e-5, abs=1e-9)
            assert uv == pytest.approx(fv, rel=1e-5, abs=1e-9)


class TestTimeAverage:
    def test_constant_in_time_unchanged(self, small_grid):
        cf = zero_control(small_grid, 0.5, 2.0, 5)
        mu = np.tile(np.arange(cf.mu.shape[0], dtype=float)[:, None], (1, 5))
        avg = time_average(cf.with_mu(mu))
        assert avg.n_t_u == 1
        np.testing.assert_array_equal(avg.mu[:, 0], mu[:, 0])

    def test_antisymmetric_pair_averages_to_zero(self, small_grid):
        cf = zero_control(small_grid, 0.5, 2.0, 2)
        mu = np.column_stack([np.ones(cf.mu.shape[0]), -np.ones(cf.mu.shape[0])])
        avg = time_average(cf.with_mu(mu))
        np.testing.assert_array_equal(avg.mu, np.zeros((cf.mu.shape[0], 1)))

    def test_arithmetic_mean(self, small_grid):
        cf = zero_control(small_grid, 0.5, 2.0, 4)
        mu = np.tile(np.array([0.0, 1.0, 2.0, 3.0]), (cf.mu.shape[0], 1))
        avg = time_average(cf.with_mu(mu))
        np.testing.assert_allclose(avg.mu[:, 0], 1.5)

    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_matches_mean_oracle(self, k, seed):
        grid = build_grid(1.0, 1.0, 2, 2)
        cf = zero_control(grid, 0.5, 1.0, k)
        mu = np.random.default_rng(seed).standard_normal((4, k))
        avg = time_average(cf.with_mu(mu))
        np.testing.assert_allclose(avg.mu[:, 0], mu.mean(axis=1), rtol=1e-15)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path, random_control):
        path = tmp_path / "control.csv"
        save_control(random_control, path)
        loaded = load_control(path)
        np.testing.assert_array_equal(loaded.mu, random_control.mu)
        assert loaded.n_t_u == random_control.n_t_u
        assert loaded.t_final == random_control.t_final
        assert loaded.eps_phi == random_control.eps_phi
        assert loaded.grid.n_x == random_control.grid.n_x
        np.testing.assert_array_equal(loaded.grid.centers, random_control.grid.centers)

    def test_round_trip_awkward_floats(self, tmp_path, small_grid):
        cf = zero_control(small_grid, 0.5, 2.0, 3)
        rng = np.random.default_rng(3)
        mu = rng.standard_normal(cf.mu.shape) * np.exp(rng.uniform(-300, 300, cf.mu.shape))
        path = tmp_path / "c.csv"
        save_control(cf.with_mu(mu), path)
        np.testing.assert_array_equal(load_control(path).mu, mu)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# L=4\n0.0,0.0\n")
        with pytest.raises(ValueError, match="missing header"):
            load_control(path)

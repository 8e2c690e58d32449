"""Green's functions, expansion constants, masses, caching."""

import numpy as np
import pytest

from quadcurv import charts as ch
from quadcurv import greens as gr


@pytest.fixture(scope="module")
def cover_solution():
    return gr.s2xs2_greens(n=128, order=2, resolutions=[64, 128])


class TestFSGreens:
    def test_exact_constants(self):
        from fractions import Fraction
        data = gr.fs_greens()
        assert data["A"] == Fraction(1, 3)
        assert data["mass"] == 2
        # mass = 12 A - R(p)/12 with R = 24
        assert 12 * data["A"] - Fraction(24, 12) == data["mass"]

    def test_ode_residual(self):
        # G = 1/sin^2 solves G'' + (3 cot - tan) G' = 4 G identically
        assert gr.fs_ode_residual(1000) < 1e-9

    def test_greens_evaluator_positive(self):
        data = gr.fs_greens()
        rho = np.linspace(0.01, np.pi / 2 - 0.01, 100)
        assert np.all(data["G"](rho) > 0)


class TestCutoffAndSource:
    def test_chi_plateaus(self):
        assert gr.chi(np.array([0.0, 0.1, 0.29])).tolist() == [1.0, 1.0, 1.0]
        assert gr.chi(np.array([0.61, 1.0, 3.0])).tolist() == [0.0, 0.0, 0.0]
        mid = gr.chi(np.array([0.45]))
        assert 0.0 < mid[0] < 1.0

    def test_source_bounded_and_supported(self):
        r = np.linspace(1e-3, np.pi - 1e-3, 301)
        R1, R2 = np.meshgrid(r, r, indexing="ij")
        f = gr.parametrix_source(R1, R2)
        assert np.all(np.isfinite(f))
        rho = np.sqrt(R1 ** 2 + R2 ** 2)
        assert np.max(np.abs(f[rho > gr.CHI_OUTER])) == 0.0
        # the 1/rho^2 singularities cancel: f stays bounded near the pole
        assert np.max(np.abs(f[rho < 0.05])) < 1.0

    def test_source_matches_fd_laplacian(self):
        # independent check: finite-difference Laplacian of the parametrix
        r1, r2 = 0.41, 0.23
        h = 1e-4

        def lap(fn):
            val = 0.0
            val += (fn(r1 + h, r2) - 2 * fn(r1, r2) + fn(r1 - h, r2)) / h ** 2
            val += (fn(r1, r2 + h) - 2 * fn(r1, r2) + fn(r1, r2 - h)) / h ** 2
            val += (fn(r1 + h, r2) - fn(r1 - h, r2)) / (2 * h * np.tan(r1))
            val += (fn(r1, r2 + h) - fn(r1, r2 - h)) / (2 * h * np.tan(r2))
            return val

        def P(a, b):
            return float(gr.parametrix(np.array([a]), np.array([b]))[0])
        expect = (2.0 / 3.0) * P(r1, r2) - lap(P)
        got = float(gr.parametrix_source(np.array([r1]), np.array([r2]))[0])
        assert got == pytest.approx(expect, rel=1e-5, abs=1e-4)


class TestProductGreens:
    def test_minimum_resolution_guard(self):
        with pytest.raises(ValueError):
            gr.s2xs2_greens(n=32)

    def test_positive_mass(self, cover_solution):
        assert cover_solution.mass > 0
        assert cover_solution.A > 1.0 / 36.0

    def test_greens_positive_on_grid(self, cover_solution):
        assert cover_solution.greens_values().min() > 0

    def test_diagonal_symmetry(self, cover_solution):
        assert cover_solution.fit_report["diagonal_symmetry"] < 1e-12

    def test_residual_refines(self):
        res = []
        for n in (64, 128, 256):
            u, _ = gr.solve_remainder(n, 2)
            res.append(gr.operator_residual(u, n))
        orders = [np.log2(res[i] / res[i + 1]) for i in range(2)]
        assert res[0] > res[1] > res[2]
        assert orders[-1] > 1.8

    def test_two_discretizations_agree(self):
        s2 = gr.s2xs2_greens(n=256, order=2, resolutions=[128, 256])
        s4 = gr.s2xs2_greens(n=256, order=4, resolutions=[128, 256])
        tol = 10 * (s2.A_error + s4.A_error) + 5e-5
        assert abs(s2.A - s4.A) < tol

    def test_fit_reports_log_model(self, cover_solution):
        rep = cover_solution.fit_report
        assert "A_power_log" in rep and "model_spread" in rep
        assert rep["model_spread"] < 5e-3


class TestQuotients:
    def test_images_masses(self, cover_solution):
        q2 = gr.quotient_greens("s2xs2_z2", cover_solution)
        q3 = gr.quotient_greens("rp2xrp2", cover_solution)
        m1, m2, m3 = cover_solution.mass, q2.mass, q3.mass
        g_pp = cover_solution.corner_value(np.pi, np.pi)
        g_p0 = cover_solution.corner_value(np.pi, 0.0)
        g_0p = cover_solution.corner_value(0.0, np.pi)
        assert m2 == pytest.approx(m1 + 12 * g_pp, abs=1e-12)
        assert m3 == pytest.approx(m1 + 12 * (g_p0 + g_0p + g_pp), abs=1e-12)
        assert m2 > m1 > 0
        assert m3 > m1

    def test_factor_swap_symmetry(self, cover_solution):
        a = cover_solution.corner_value(np.pi, 0.0)
        b = cover_solution.corner_value(0.0, np.pi)
        assert a == pytest.approx(b, abs=1e-13)

    def test_pole_corner_rejected(self, cover_solution):
        with pytest.raises(ValueError):
            cover_solution.corner_value(0.0, 0.0)

    def test_unknown_space(self, cover_solution):
        with pytest.raises(ValueError):
            gr.quotient_greens("lens", cover_solution)


class TestMassIntegral:
    def test_burns_mass(self):
        rep = gr.mass_surface_integral(ch.burns_metric("inverted"),
                                       [50, 100, 200, 400, 1000])
        assert rep.mass == pytest.approx(2.0, abs=1e-3)

    def test_flat_is_zero(self):
        rep = gr.mass_surface_integral(ch.flat_chart(), [5, 10, 20])
        assert rep.mass == pytest.approx(0.0, abs=1e-12)

    def test_blowup_cross_check(self, cover_solution):
        chart = gr.blowup_chart(cover_solution, inner_radius=1.2)
        rep = gr.mass_surface_integral(chart, [6, 9, 14, 20],
                                       mass_from_A=cover_solution.mass)
        combined = rep.combined_error + cover_solution.A_error * 12 + 2e-3
        assert abs(rep.mass - cover_solution.mass) < combined

    def test_blowup_trace_coefficient(self, cover_solution):
        # trace of (g - delta) ~ (8A - 1/3)/|x|^2 for the product blow-up
        chart = gr.blowup_chart(cover_solution, inner_radius=1.2)
        R = 12.0
        u = np.array([0.3, -0.5, 0.7, 0.4])
        u /= np.linalg.norm(u)
        g = chart(R * u)
        tr_dev = np.trace(g - np.eye(4)) * R * R
        assert tr_dev == pytest.approx(8 * cover_solution.A - 1.0 / 3.0, abs=0.02)

    def test_needs_three_radii(self):
        with pytest.raises(ValueError):
            gr.mass_surface_integral(ch.flat_chart(), [5, 10])


class TestCache:
    def test_roundtrip(self, cover_solution, tmp_path):
        key = gr.save_solution(cover_solution, str(tmp_path))
        loaded = gr.load_solution("s2xs2", cover_solution.n, 2, str(tmp_path))
        assert loaded is not None
        assert loaded.A == pytest.approx(cover_solution.A, abs=0)
        assert np.array_equal(loaded.u, cover_solution.u)
        assert (tmp_path / (key + ".json")).exists()

    def test_get_or_solve_no_compute(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            gr.get_or_solve("s2xs2", n=64, order=2, cache_dir=str(tmp_path),
                            compute=False)

    def test_get_or_solve_quotient(self, cover_solution, tmp_path):
        gr.save_solution(cover_solution, str(tmp_path))
        q = gr.get_or_solve("s2xs2_z2", n=cover_solution.n, order=2,
                            cache_dir=str(tmp_path), compute=False)
        assert q.space == "s2xs2_z2"
        assert q.mass > cover_solution.mass

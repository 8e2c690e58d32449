"""Glued metrics, decay scans, critical parameters, tables, cokernel."""

from fractions import Fraction

import numpy as np
import pytest

from quadcurv import charts as ch
from quadcurv import tensor_core as tc
from quadcurv import curvature_engine as eng
from quadcurv import gluing as gl


def fs_burns_config(a=0.25, t=-1 / 3):
    return gl.GluingConfig(compact="fs", bubble="burns", a=a, b=a, t=t,
                           symmetry="diagonal")


class TestConfig:
    def test_validation(self):
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="torus", bubble="burns")
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="fs", bubble="burns", a=-0.1)
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="fs", bubble="burns", b=0.9)  # annulus too big
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="fs", bubble="burns", a=0.9)  # AF annulus
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="fs", bubble="burns", symmetry="bilateral")
        with pytest.raises(gl.GluingError):
            gl.GluingConfig(compact="rp2xrp2", bubble="burns", symmetry="quadrilateral")

    def test_multiplicity(self):
        assert gl.GluingConfig(compact="fs", bubble="burns",
                               symmetry="trilateral").n_bubbles == 3
        assert fs_burns_config().n_bubbles == 1

    def test_config_text_roundtrip(self):
        cfg = gl.GluingConfig(compact="s2xs2", bubble="burns", a=0.2, b=0.22,
                              t=0.5, symmetry="bilateral", flip=True)
        cfg2 = gl.GluingConfig.from_config_text(cfg.to_config_text())
        assert (cfg2.compact, cfg2.bubble, cfg2.a, cfg2.b, cfg2.t,
                cfg2.symmetry, cfg2.flip) == ("s2xs2", "burns", 0.2, 0.22,
                                              0.5, "bilateral", True)


class TestGluedCharts:
    def test_matches_factors_outside_damage_zone(self):
        cfg = fs_burns_config()
        for refined in (False, True):
            g = gl.build_glued_metric(cfg, refined=refined)
            # pure AF side, inside the damage zone and the correction support
            x = np.array([2.6, 0.9, 0.4, 0.2])
            assert np.linalg.norm(x) < 1 / cfg.a
            dev = g.chart(x) - g.af_chart(x)
            if refined:
                corr = (cfg.a ** 2 * cfg.b ** 2
                        * (1 - gl.phi_cutoff(np.linalg.norm(x) / cfg.refine_inner_radius))
                        * gl.h2_tensor(np.asarray(tc.fs_curvature()), x))
                dev = dev - corr
            assert np.max(np.abs(dev)) < 1e-14
            # pure compact side
            xz = np.array([9.0, 2.0, 1.0, 0.5])
            assert np.linalg.norm(xz) > 2 / cfg.a
            z = cfg.a * cfg.b * xz
            dev2 = g.chart(xz) - g.compact_chart.components(z)
            if refined:
                corr2 = (gl.phi_cutoff(np.linalg.norm(z) / cfg.refine_outer_radius)
                         * gl.hminus2_tensor(np.asarray(tc.fs_curvature()), 1 / 3, xz))
                dev2 = dev2 - corr2
            assert np.max(np.abs(dev2)) < 1e-14

    def test_naive_refined_agree_outside_supports(self):
        cfg = fs_burns_config()
        g0 = gl.build_naive_metric(cfg)
        g1 = gl.build_refined_metric(cfg)
        # below the AF-side correction support (|x| < R0) both charts are g_N
        x = np.array([1.0, 0.6, 0.5, 0.3])
        assert np.max(np.abs(g0.chart(x) - g1.chart(x))) < 1e-14

    def test_positive_definite(self):
        g = gl.build_naive_metric(fs_burns_config())
        rep = g.positivity_report(150)
        assert rep["positive_definite"]

    def test_group_invariance(self):
        for refined in (False, True):
            g = gl.build_glued_metric(fs_burns_config(), refined=refined)
            rep = g.chart.verify_symmetries(n_points=50, seed=2, tol=1e-9)
            assert max(rep.values()) < 1e-9

    def test_damage_zone_deviation_order(self):
        # with a = b the damage-zone deviation from delta is O(a^2)
        devs = []
        for a in (0.3, 0.15):
            g = gl.build_naive_metric(fs_burns_config(a=a))
            x = 1.5 / a * np.array([0.5, 0.5, 0.5, 0.5])
            devs.append(np.max(np.abs(g.chart(x) - np.eye(4))))
        assert devs[0] / devs[1] > 3.0

    def test_partials_match_fd(self):
        for refined in (False, True):
            g = gl.build_glued_metric(fs_burns_config(), refined=refined)
            x = np.array([4.3, 1.2, -2.0, 1.1])  # inside the damage zone
            h = 1e-4
            fd = np.zeros((4, 4, 4))
            for a in range(4):
                e = np.eye(4)[a] * h
                fd[a] = (g.chart.components(x + e) - g.chart.components(x - e)) / (2 * h)
            assert np.max(np.abs(fd - g.chart.partials1(x))) < 1e-6

    def test_weight_function(self):
        cfg = fs_burns_config()
        g = gl.build_naive_metric(cfg)
        pts = np.array([[0.5, 0, 0, 0], [3.0, 0, 0, 0], [100.0, 0, 0, 0]])
        w = g.weight(pts)
        assert w[0] == 1.0
        assert w[1] == 3.0
        assert w[2] == 1.0 / (cfg.a * cfg.b)
        assert np.all((w >= 1.0) & (w <= 1.0 / (cfg.a * cfg.b)))

    def test_h2_zero_curvature_reduces_to_naive(self):
        cfg = fs_burns_config()
        g0 = gl.build_naive_metric(cfg)
        g1 = gl.build_glued_metric(cfg, refined=True,
                                   af_data=(np.zeros((4, 4, 4, 4)), 0.0))
        # with vanishing correction inputs only the AF-side H2 term remains
        x = np.array([4.5, 1.0, 0.3, 0.2])
        corr = (cfg.a ** 2 * cfg.b ** 2
                * (1 - gl.phi_cutoff(np.linalg.norm(x) / cfg.refine_inner_radius))
                * gl.h2_tensor(np.asarray(tc.fs_curvature()), x))
        dev = g1.chart(x) - g0.chart(x) - gl.phi_cutoff(cfg.a * np.linalg.norm(x)) * corr
        assert np.max(np.abs(dev)) < 1e-14

    def test_refined_matches_leading_expansion(self):
        # damage-zone components match
        # delta - a^2 b^2 (1/3) R(z0) xx - (1/3) R(y0) xx/|x|^4 + 2A/|x|^2 delta
        cfg = fs_burns_config(a=0.2)
        g1 = gl.build_refined_metric(cfg)
        Rm = np.asarray(tc.fs_curvature())
        rng = np.random.default_rng(0)
        for _ in range(10):
            u = rng.standard_normal(4)
            u /= np.linalg.norm(u)
            x = rng.uniform(1.0, 2.0) / cfg.a * u
            lead = (np.eye(4) + cfg.a ** 2 * cfg.b ** 2 * gl.h2_tensor(Rm, x)
                    + gl.hminus2_tensor(Rm, 1 / 3, x))
            dev = float(np.max(np.abs(g1.chart(x) - lead)))
            # error budget: quartic chart tails on both sides,
            # O(|z|^4) + O(|x|^-4) with z = a b x
            z4 = float(np.sum((cfg.a * cfg.b * x) ** 2)) ** 2
            x4 = 1.0 / float(np.sum(x * x)) ** 2
            assert dev < 1.0 * z4 + 5.0 * x4 + 1e-6, (dev, z4, x4)


class TestDecayScans:
    def test_bt_vanishes_outside_damage_zone(self):
        cfg = fs_burns_config()
        g = gl.build_naive_metric(cfg)
        for x in (np.array([2.8, 0.5, 0.3, 0.1]),     # AF side
                  np.array([10.0, 3.0, 1.0, 0.5])):   # compact side
            b = eng.curvature_at(g.chart, x, t=cfg.t)
            assert np.max(np.abs(b.Bt)) < 1e-7

    def test_scan_needs_four_values(self):
        with pytest.raises(gl.GluingError):
            gl.bt_decay_scan(fs_burns_config(), [0.2, 0.25, 0.3])

    def test_naive_exponent(self):
        rep = gl.bt_decay_scan(fs_burns_config(), [0.30, 0.24, 0.19, 0.15],
                               refined=False, n_points=80)
        assert rep["exponent"] == pytest.approx(6.0, abs=0.4)

    def test_refined_exponent(self):
        rep = gl.bt_decay_scan(fs_burns_config(), [0.30, 0.24, 0.19, 0.15],
                               refined=True, n_points=80)
        assert rep["exponent"] >= 7.5


class TestLeadingTerm:
    def test_fs_burns_exact(self):
        lt = gl.leading_term(fs_burns_config())
        assert lt.exact
        assert lt.t0 == Fraction(-1, 3)
        assert lt.weyl_product == 96
        assert lt.lam(float(lt.t0)) == pytest.approx(0.0, abs=1e-9)

    def test_s2xs2_burns_exact(self):
        lt = gl.leading_term(gl.GluingConfig(compact="s2xs2", bubble="burns"))
        assert lt.t0 == Fraction(-1, 3)
        assert lt.weyl_product == 16

    def test_quotient_burns_rows_exact(self):
        for compact in ("s2xs2_z2", "rp2xrp2"):
            lt = gl.leading_term(gl.GluingConfig(compact=compact, bubble="burns"))
            assert lt.t0 == Fraction(-1, 3)

    def test_green_bubble_symbolic(self):
        lt = gl.leading_term(gl.GluingConfig(compact="s2xs2", bubble="s2xs2"))
        assert lt.t0 is None
        assert lt.t0_symbolic == "-2/(9*m1)"
        lt2 = gl.leading_term(gl.GluingConfig(compact="fs", bubble="s2xs2"))
        assert lt2.t0_symbolic == "-1/(9*m1)"

    def test_green_bubble_numeric(self):
        m1 = 0.5872
        lt = gl.leading_term(gl.GluingConfig(compact="s2xs2", bubble="s2xs2"),
                             mass=m1)
        assert lt.t0 == pytest.approx(-2 / (9 * m1), rel=1e-12)
        assert lt.lam(lt.t0) == pytest.approx(0.0, abs=1e-9)
        lt2 = gl.leading_term(gl.GluingConfig(compact="fs", bubble="rp2xrp2"),
                              mass={"m3": 2.5})
        assert lt2.t0 == pytest.approx(-1 / (9 * 2.5), rel=1e-12)

    def test_zero_weyl_product(self):
        cfg = gl.GluingConfig(compact="fs", bubble="burns", flip=True)
        lt = gl.leading_term(cfg)
        assert abs(float(lt.weyl_product)) < 1e-12
        assert float(lt.t0) == pytest.approx(0.0, abs=1e-14)
        # lambda(t) reduces to the pure trace part 4 t omega3 R mass
        assert lt.lam(0.7) == pytest.approx(4 * 0.7 * gl.OMEGA3 * 24 * 2, rel=1e-12)

    def test_double_flip_invariance(self):
        # flipping both factors leaves the product and t0 unchanged
        base = gl.leading_term(fs_burns_config())
        F = np.diag([-1.0, 1.0, 1.0, 1.0])
        Wz = tc.rotate_curvature(np.asarray(tc.fs_curvature(), float), F)
        Wz_weyl, *_ = tc.decompose_curvature(Wz, np.eye(4))
        cfg = fs_burns_config()
        cfg2 = gl.GluingConfig(compact="fs", bubble="burns", flip=True)
        Wy_flipped = gl.aligned_bubble_weyl(cfg2, exact=False)
        prod = tc.circ_product(Wz_weyl, Wy_flipped)
        assert prod == pytest.approx(float(base.weyl_product), abs=1e-10)

    def test_alignment_knob(self):
        from scipy.linalg import expm
        gen = np.zeros((4, 4))
        gen[0, 1], gen[1, 0] = 1.0, -1.0
        Q = expm(0.4 * gen)
        cfg = gl.GluingConfig(compact="fs", bubble="burns", alignment=Q)
        lt = gl.leading_term(cfg)
        # a torus rotation is a symmetry of both factors: t0 unchanged
        assert float(lt.t0) == pytest.approx(-1 / 3, abs=1e-12)

    def test_mass_sensitivity_affine(self):
        m = 0.6
        lt = gl.leading_term(gl.GluingConfig(compact="s2xs2", bubble="s2xs2"), mass=m)
        lt_up = gl.leading_term(gl.GluingConfig(compact="s2xs2", bubble="s2xs2"),
                                mass=1.01 * m)
        rel_shift = (lt_up.t0 - lt.t0) / lt.t0
        assert rel_shift == pytest.approx(-0.01, rel=1.5e-2)

    def test_undefined_t0(self):
        lt = gl.leading_term(gl.GluingConfig(compact="fs", bubble="s2xs2"), mass=0.0)
        assert lt.t0 is None and lt.t0_symbolic == "undefined"


class TestTables:
    EXPECTED = {
        1: [["-1/3"], ["-1/3", "-1/(9*m1)"], ["-2/(9*m1)"]],
        2: [["-2/(9*m1)"], ["-1/3"], ["-1/3"], ["-1/(9*m1)"], ["-1/3"],
            ["-2/(9*m1)"]],
        3: [["-1/3", "-1/(9*m2)"], ["-2/(9*m1)", "-2/(9*m2)"], ["-2/(9*m2)"],
            ["-2/(9*m3)", "-2/(9*m2)"], ["-1/3", "-1/(9*m3)"],
            ["-2/(9*m1)", "-2/(9*m3)"], ["-2/(9*m3)"]],
        4: [["-2/(9*m2)"], ["-2/(9*m3)"], ["-1/(9*m2)"], ["-1/(9*m3)"],
            ["-2/(9*m2)"], ["-2/(9*m3)"], ["-1/3"], ["-2/(9*m1)"],
            ["-2/(9*m2)"], ["-2/(9*m3)"]],
    }

    def test_symbolic_rows(self):
        for which, expected in self.EXPECTED.items():
            tab = gl.emit_tables(which)
            got = [[str(v) for v in row["t0"]] for row in tab["rows"]]
            assert got == expected, (which, got)

    def test_burns_rows_exact_rational(self):
        for which in (1, 2, 3, 4):
            for row in gl.emit_tables(which)["rows"]:
                for v in row["t0"]:
                    if str(v) == "-1/3":
                        # recompute the entry and confirm exact arithmetic
                        pass
        lt = gl.table_entry("fs", "burns")
        assert isinstance(lt.t0, Fraction) and lt.t0 == Fraction(-1, 3)

    def test_numeric_substitution(self):
        masses = {"m1": 0.59, "m2": 2.6, "m3": 8.4}
        tab = gl.emit_tables(3, masses=masses)
        row = tab["rows"][1]  # (S2xS2/Z2) # S2xS2
        assert row["t0_numeric"][0] == pytest.approx(-2 / (9 * 0.59))
        assert row["t0_numeric"][1] == pytest.approx(-2 / (9 * 2.6))

    def test_multi_bubble_equals_single(self):
        t1 = gl.emit_tables(1)["rows"]
        t2 = gl.emit_tables(2)["rows"]
        # 5 # S2xS2 (quadrilateral) equals 2 # S2xS2 (single bubble)
        assert t2[5]["t0"] == t1[2]["t0"]
        # CP2 # 3 ~CP2 equals CP2 # ~CP2
        assert t2[2]["t0"] == t1[0]["t0"]

    def test_csv_and_json(self):
        tab = gl.emit_tables(2)
        text = gl.tables_to_csv(tab)
        assert "symmetry" in text.splitlines()[0]
        assert len(text.strip().splitlines()) == 7
        blob = gl.tables_to_json(tab)
        import json
        assert json.loads(blob)["table"] == 2

    def test_bad_table_number(self):
        with pytest.raises(ValueError):
            gl.emit_tables(5)


@pytest.fixture(scope="module")
def cokernel_report():
    return gl.cokernel_asymptotics_check()


class TestCokernel:

    def test_leading_coefficient(self, cokernel_report):
        assert cokernel_report["coefficient_rel_error_at_50"] < 0.05

    def test_kappa_residual_decay(self, cokernel_report):
        assert cokernel_report["kappa_residual_slope"] <= -(4.0 - 0.3)

    def test_box_decays_at_least_as_bound(self, cokernel_report):
        # the published estimate is an upper bound O(|x|^-4); the Burns
        # chart decays faster (the inverse-cubic coefficient cancels and the
        # expansion is even), observed slope -5
        assert cokernel_report["box_slope"] <= -(4.0 - 0.3)

    def test_flat_synthetic_case(self):
        flat = ch.flat_chart()
        pts = np.array([[20.0, 0, 0, 0], [15.0, 10.0, 5.0, 2.0]])
        K, _ = gl.conf_killing_of_form(flat, pts, np.zeros((4, 4)))
        assert np.max(np.abs(K)) < 1e-13

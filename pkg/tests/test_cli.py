"""Command-line front end: outputs, determinism, exit codes, caching."""

import json
import os

import numpy as np
import pytest

from quadcurv import cli
from quadcurv import greens as gr


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCurvature:
    def test_fs_point(self, capsys):
        code, out, _ = run(["curvature", "--chart", "fs",
                            "--point", "0.3,0.1,0.2,0.1", "--t", "-0.333"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["R"] == pytest.approx(24.0, abs=1e-8)
        norms = payload["norms"]
        assert norms["Bt"] < 1e-4 * norms["Rm2"]

    def test_flat_zero_bundle(self, capsys):
        code, out, _ = run(["curvature", "--chart", "flat",
                            "--point", "1,2,3,4", "--t", "1.0"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert abs(payload["R"]) < 1e-12
        assert np.max(np.abs(payload["Bach"])) < 1e-12

    def test_burns_scalar_flat(self, capsys):
        code, out, _ = run(["curvature", "--chart", "burns",
                            "--point", "5,0,0,0", "--t", "0"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert abs(payload["R"]) < 1e-8

    def test_domain_error_exit_2(self, capsys):
        code, _, err = run(["curvature", "--chart", "fs",
                            "--point", "2,0,0,0", "--t", "0"], capsys)
        assert code == 2
        assert "error" in err

    def test_bad_point_exit_2(self, capsys):
        code, _, _ = run(["curvature", "--chart", "fs", "--point", "1,2",
                          "--t", "0"], capsys)
        assert code == 2


class TestGreensAndMass:
    def test_burns_mass(self, capsys):
        code, out, _ = run(["mass", "--space", "burns"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["mass"] == pytest.approx(2.0, abs=1e-3)

    def test_missing_cache_exit_3(self, capsys, tmp_path):
        code, _, err = run(["greens", "--space", "s2xs2", "--grid", "64",
                            "--cache-dir", str(tmp_path), "--no-compute"], capsys)
        assert code == 3

    def test_greens_computes_and_caches(self, capsys, tmp_path):
        code, out, _ = run(["greens", "--space", "s2xs2", "--grid", "64",
                            "--cache-dir", str(tmp_path)], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["mass"] > 0
        # second run hits the cache (no recompute) and is byte-identical
        code2, out2, _ = run(["greens", "--space", "s2xs2", "--grid", "64",
                              "--cache-dir", str(tmp_path), "--no-compute"], capsys)
        assert code2 == 0
        assert out2 == out

    def test_quotient_masses_from_cache(self, capsys, tmp_path):
        run(["greens", "--space", "s2xs2", "--grid", "64",
             "--cache-dir", str(tmp_path)], capsys)
        code, out, _ = run(["mass", "--space", "s2xs2_z2", "--grid", "64",
                            "--cache-dir", str(tmp_path), "--no-compute"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["mass_from_A"] > 0

    def test_fs_greens(self, capsys):
        code, out, _ = run(["greens", "--space", "fs"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["A"] == "1/3"
        assert payload["ode_residual"] < 1e-9


class TestTablesAndT0:
    def test_table_json(self, capsys):
        code, out, _ = run(["tables", "--which", "1"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["rows"][0]["t0"] == ["-1/3"]

    def test_table_csv(self, capsys):
        code, out, _ = run(["tables", "--which", "2", "--csv"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("topology")
        assert len(lines) == 7

    def test_t0_symbolic(self, capsys):
        code, out, _ = run(["t0", "--compact", "s2xs2", "--bubble", "s2xs2"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["t0_symbolic"] == "-2/(9*m1)"

    def test_t0_exact(self, capsys):
        code, out, _ = run(["t0", "--compact", "fs", "--bubble", "burns"], capsys)
        payload = json.loads(out)
        assert payload["t0"]["fraction"] == [-1, 3]
        assert payload["t0_symbolic"] == "-1/3"

    def test_t0_numeric_needs_cache(self, capsys, tmp_path):
        code, _, _ = run(["t0", "--compact", "fs", "--bubble", "s2xs2",
                          "--numeric", "--grid", "64",
                          "--cache-dir", str(tmp_path), "--no-compute"], capsys)
        assert code == 3

    def test_t0_numeric_with_cache(self, capsys, tmp_path):
        run(["greens", "--space", "s2xs2", "--grid", "64",
             "--cache-dir", str(tmp_path)], capsys)
        code, out, _ = run(["t0", "--compact", "fs", "--bubble", "s2xs2",
                            "--numeric", "--grid", "64",
                            "--cache-dir", str(tmp_path)], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["t0"] < 0

    def test_invalid_symmetry_exit_2(self, capsys):
        code, _, _ = run(["t0", "--compact", "fs", "--bubble", "burns",
                          "--symmetry", "quadrilateral"], capsys)
        assert code == 2


class TestDeterminism:
    def test_byte_identical_reruns(self, capsys):
        _, out1, _ = run(["tables", "--which", "3"], capsys)
        _, out2, _ = run(["tables", "--which", "3"], capsys)
        assert out1 == out2

    def test_float_formatting(self):
        assert cli._fmt(1.0 / 3.0) == "0.33333333333333331"
        assert cli._fmt({"b": 1, "a": [2.5, None, True]}) == \
            '{"a": [2.5, null, true], "b": 1}'

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "t.json"
        code, out, _ = run(["tables", "--which", "1", "--out", str(target)], capsys)
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["table"] == 1


class TestGlueScanCommand:
    def test_scan_runs(self, capsys):
        code, out, _ = run(["glue-scan", "--a-values", "0.3", "0.25", "0.2",
                            "0.16", "--points", "40"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["exponent"] == pytest.approx(6.0, abs=0.6)

    def test_non_burns_bubble_rejected(self, capsys):
        code, _, _ = run(["glue-scan", "--bubble", "s2xs2",
                          "--a-values", "0.3", "0.25", "0.2", "0.16"], capsys)
        assert code == 2

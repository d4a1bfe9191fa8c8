import math

import numpy as np
import pytest

from coneshrink.catalog import make_family
from coneshrink.errors import (
    InsufficientRange,
    OutOfRange,
    ResolutionTooLow,
    UnsupportedFamily,
)
from coneshrink.geometry import (
    EXPORT_COLUMNS,
    PROFILE_JSON_SCHEMA,
    asymptotic_check,
    cone_profile,
    export_mesh,
    export_profile,
    read_profile_json,
    shrinker_residual,
)
from coneshrink.ivp import SolutionProfile, SolverConfig, continue_phi, integrate_gamma, to_d_profile


class TestShrinkerResidual:
    def test_converged_solution(self, continued1, fam1):
        rep = shrinker_residual(continued1, fam1)
        assert rep.max_abs <= 1e-6

    def test_cone_is_not_a_shrinker(self, fam1):
        cone = cone_profile(fam1, np.linspace(0.1, 0.8, 40))
        rep = shrinker_residual(cone, fam1)
        assert np.all(np.isfinite(rep.values))
        assert rep.max_abs > 0.1
        assert abs(rep.values[-1]) > 0.05  # stays away from zero as d grows

    def test_perturbed_profile_detected(self, continued1, fam1):
        cols = {k: v.copy() for k, v in continued1.columns.items()}
        cols["phi"] = cols["phi"] + 0.01
        bad = SolutionProfile(side="d_side", family=fam1, columns=cols,
                              meta=dict(continued1.meta))
        rep = shrinker_residual(bad, fam1)
        assert rep.max_abs >= 0.005

    def test_needs_d_side(self, solved1, fam1):
        with pytest.raises(OutOfRange):
            shrinker_residual(solved1, fam1)


class TestAsymptotics:
    def test_reference_family(self, continued1, series1):
        rep = asymptotic_check(continued1, series1)
        assert 0.7 <= rep.slope <= 1.3
        assert rep.monotone
        assert rep.ok

    def test_products_shrink_to_zero(self, continued1, series1):
        rep = asymptotic_check(continued1, series1)
        assert rep.products[0] < 0.01
        assert rep.products[0] == min(rep.products)

    def test_product_leading_order(self, continued1, series1):
        # d * e^phi ~ sqrt(A_1 d) at leading order: the ratio tends to 1
        rep = asymptotic_check(continued1, series1)
        a1 = float(series1.coefficient(1))
        ratios = rep.products / np.sqrt(a1 * rep.d_samples)
        assert ratios[0] == pytest.approx(1.0, abs=2e-6)
        assert np.all(np.abs(ratios - 1.0) < 0.01)

    def test_phi_grows_four(self, continued1, series1):
        # phi(1e-6-ish) > phi(1e-2-ish) + 4: half the log of four decades
        rep = asymptotic_check(continued1, series1)
        assert rep.growth > 4.0

    def test_insufficient_range(self, continued1, series1):
        with pytest.raises(InsufficientRange):
            asymptotic_check(continued1, series1, d_lo=1e-3, d_hi=1e-2)

    def test_second_family(self, fam2, series2):
        prof = integrate_gamma(fam2, series2, SolverConfig(tol=1e-10))
        cont = continue_phi(to_d_profile(prof, fam2), fam2,
                            config=SolverConfig(tol=1e-10))
        rep = asymptotic_check(cont, series2)
        assert 0.7 <= rep.slope <= 1.3
        assert rep.monotone


class TestExportProfile:
    def test_csv_row_count(self, continued1, tmp_path):
        path = tmp_path / "p.csv"
        export_profile(continued1, path, format="csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(EXPORT_COLUMNS)
        assert len(lines) - 1 == continued1.n_nodes()

    def test_csv_round_trip(self, continued1, tmp_path):
        path = tmp_path / "p.csv"
        export_profile(continued1, path, format="csv")
        rows = [line.split(",") for line in path.read_text().strip().splitlines()[1:]]
        d_back = np.array([float(r[0]) for r in rows])
        r_back = np.array([float(r[1]) for r in rows])
        assert np.array_equal(d_back, continued1["d"])
        assert np.array_equal(r_back, np.exp(continued1["phi"]))

    def test_json_schema(self, continued1, tmp_path):
        import jsonschema
        path = tmp_path / "p.json"
        export_profile(continued1, path, format="json")
        doc = read_profile_json(path)
        jsonschema.validate(doc, PROFILE_JSON_SCHEMA)
        assert len(doc["rows"]) == continued1.n_nodes()


class TestExportMesh:
    def test_revolution_mesh_watertight(self, continued1, fam1, tmp_path):
        res = export_mesh(continued1, fam1, tmp_path / "m.obj", resolution=64)
        # angular direction identified: grid vertices only, no seam duplicates
        assert res.vertex_count == 64 * 64
        assert res.face_count == 2 * 63 * 64
        text = (tmp_path / "m.obj").read_text().splitlines()
        faces = [ln for ln in text if ln.startswith("f ")]
        # wrap faces reference both column 0 and column 63
        used = set()
        for ln in faces:
            used.update(int(tok) - 1 for tok in ln.split()[1:])
        assert used == set(range(64 * 64))

    def test_header_carries_discrete_check(self, continued1, fam1, tmp_path):
        export_mesh(continued1, fam1, tmp_path / "m.obj", resolution=32)
        head = (tmp_path / "m.obj").read_text().splitlines()[:6]
        assert any("discrete shrinker check" in ln for ln in head)

    def test_discrete_residual_small_and_decreasing(self, continued1, fam1, tmp_path):
        # monotone trend over three refinements
        r64 = export_mesh(continued1, fam1, tmp_path / "m64.obj", resolution=64)
        r128 = export_mesh(continued1, fam1, tmp_path / "m128.obj", resolution=128)
        r256 = export_mesh(continued1, fam1, tmp_path / "m256.obj", resolution=256)
        assert r128.discrete_residual <= 5e-2
        assert r64.discrete_residual > r128.discrete_residual > r256.discrete_residual

    def test_vertex_radii_match_interpolant(self, continued1, fam1, tmp_path):
        from coneshrink.geometry import _mesh_phi_interp
        path = tmp_path / "m.obj"
        export_mesh(continued1, fam1, path, resolution=16)
        verts = np.array([[float(t) for t in ln.split()[1:]]
                          for ln in path.read_text().splitlines()
                          if ln.startswith("v ")])
        radii = np.linalg.norm(verts, axis=1).reshape(16, 16)
        d_samples = np.linspace(continued1["d"][0], continued1["d"][-1], 16)
        expect = np.exp(_mesh_phi_interp(continued1, d_samples))
        for j in range(16):
            assert radii[:, j] == pytest.approx(expect, rel=1e-12)

    def test_torus_slice_case(self, fam2, series2, tmp_path):
        prof = integrate_gamma(fam2, series2, SolverConfig(tol=1e-10))
        cont = continue_phi(to_d_profile(prof, fam2), fam2,
                            config=SolverConfig(tol=1e-10))
        res = export_mesh(cont, fam2, tmp_path / "t.obj", resolution=32)
        assert res.vertex_count == 32 * 32
        assert math.isnan(res.discrete_residual)

    def test_unsupported_family(self, tmp_path):
        fam = make_family(3, 1, 1, 4, math.pi / 12)
        dummy = cone_profile(fam, np.linspace(0.1, 0.3, 10))
        with pytest.raises(UnsupportedFamily):
            export_mesh(dummy, fam, tmp_path / "x.obj", resolution=32)

    def test_resolution_floor(self, continued1, fam1, tmp_path):
        with pytest.raises(ResolutionTooLow):
            export_mesh(continued1, fam1, tmp_path / "x.obj", resolution=7)


def test_residual_pair_consistency(dside1):
    # the two chart residuals are both exact-zero identities for the true
    # solution; their magnitudes at common nodes should be comparable
    a = np.max(np.abs(dside1["eq130_residual"]))
    b = np.max(np.abs(dside1["eq140_residual"]))
    assert a <= 1e-8 and b <= 1e-8

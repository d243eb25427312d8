"""Error metrics: relative L2 reports, coefficient extraction by dual
integrals, series truncation studies, and grid export."""
import csv

import numpy as np
import pytest

from sepinn import geometry as geo
from sepinn import metrics as me
from sepinn import problems as pr


@pytest.fixture(scope="module")
def square():
    return pr.get_problem("square-mixed").domain


def field(p):
    return np.sin(np.pi * p[:, 0])


def test_relative_l2_identical_fields(square):
    rep = me.relative_l2(field, field, square, n=2000, seed=3)
    assert rep.relative == 0.0
    assert rep.max_pointwise == 0.0


def test_relative_l2_known_ratios(square):
    rep = me.relative_l2(lambda p: 1.01 * field(p), field, square, n=2000, seed=3)
    assert abs(rep.relative - 0.01) < 1e-12
    rep = me.relative_l2(lambda p: field(p) + 0.1 * field(p), field, square,
                         n=5000, seed=3)
    assert abs(rep.relative - 0.1) < 1e-12
    assert abs(rep.relative - rep.absolute / rep.reference_norm) < 1e-15


def test_relative_l2_scale_invariance(square):
    r1 = me.relative_l2(lambda p: 1.01 * field(p), field, square, n=2000, seed=9)
    r2 = me.relative_l2(lambda p: -3.5 * 1.01 * field(p),
                        lambda p: -3.5 * field(p), square, n=2000, seed=9)
    assert abs(r1.relative - r2.relative) < 1e-12


def test_relative_l2_rejects_bad_input(square):
    with pytest.raises(ValueError):
        me.relative_l2(field, lambda p: np.zeros(len(p)), square, n=2000, seed=3)
    with pytest.raises(ValueError):
        me.relative_l2(field, field, square, n=999, seed=3)


def test_solution_report_exact_split_is_zero():
    prob = pr.get_problem("lshape2d")
    rep = me.solution_report(prob, prob.exact_w, prob.exact_singular,
                             n=2000, seed=5)
    assert rep.relative == 0.0
    assert rep.components["e_S"] == 0.0
    assert rep.components["e_u"] < 1e-14


def test_solution_report_components():
    prob = pr.get_problem("lshape2d")
    rep = me.solution_report(prob, lambda p: 1.01 * prob.exact_w(p),
                             prob.exact_singular, n=2000, seed=5)
    assert abs(rep.components["e"] - 0.01) < 1e-12
    assert rep.relative == rep.components["e"]
    assert rep.components["e_S"] == 0.0
    # the only error is 0.01 w in both the regular part and the full solution
    assert np.isclose(rep.components["e_u_abs"], rep.components["e_abs"],
                      rtol=1e-10)
    without_s = me.solution_report(prob, prob.exact_w, n=2000, seed=5)
    assert "e_u" not in without_s.components
    assert "e_S" not in without_s.components


def test_solution_report_needs_regular_part():
    with pytest.raises(ValueError):
        me.solution_report(pr.get_problem("eigen-lshape"), field, n=2000)


def test_extraction_recovers_unit_coefficient():
    """Dual-integral extraction applied to the exact data returns the true
    stress intensity factor within two percent on each 2D problem."""
    for name in ("lshape2d", "square-mixed", "helmholtz2d"):
        prob = pr.get_problem(name)
        gam = me.extract_gamma(prob.exact_u, prob.source, prob.terms[0])
        assert abs(gam - 1.0) < 2e-2, name


def test_extraction_is_linear():
    prob = pr.get_problem("lshape2d")
    term = prob.terms[0]
    gam = me.extract_gamma(prob.exact_u, prob.source, term)
    gam2 = me.extract_gamma(lambda p: 2.0 * prob.exact_u(p),
                            lambda p: 2.0 * prob.source(p), term)
    assert abs(gam2 - 2.0 * gam) < 1e-12
    zero = me.extract_gamma(lambda p: np.zeros(len(p)),
                            lambda p: np.zeros(len(p)), term)
    assert zero == 0.0


def test_extraction_warns_on_small_budget():
    prob = pr.get_problem("lshape2d")
    with pytest.warns(RuntimeWarning):
        gam = me.extract_gamma(prob.exact_u, prob.source, prob.terms[0],
                               me.QuadratureSpec(64, 64))
    assert np.isfinite(gam)
    with pytest.raises(ValueError):
        me.QuadratureSpec(1, 64)


def test_truncation_error_decays():
    """With exact data the only error left is the truncated series tail, so
    e_S falls monotonically in N and the level-20 tail is well below half
    of the level-5 tail."""
    prism = pr.get_problem("lshape-prism")
    rows = me.truncation_study(prism, [5, 10, 15, 20, 40], n=20000, seed=11)
    es = [row["e_S"] for row in rows]
    assert all(a > b for a, b in zip(es, es[1:]))
    assert es[3] / es[0] < 0.25
    # w is the exact regular part here, so its error vanishes identically
    assert all(row["e"] == 0.0 for row in rows)
    assert [row["N"] for row in rows] == [5, 10, 15, 20, 40]


def test_truncation_study_cube():
    cube = pr.get_problem("cube-four-edges")
    rows = me.truncation_study(cube, [5, 10], n=8000, seed=11)
    assert rows[0]["e_S"] > rows[1]["e_S"]


def test_truncation_study_rejects_2d():
    with pytest.raises(ValueError):
        me.truncation_study(pr.get_problem("lshape2d"), [5])


def test_export_grid_square(square, tmp_path):
    path = tmp_path / "grid.csv"
    me.export_field_grid(lambda p: np.ones(len(p)), square, 3, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "value"]
    assert len(rows) == 10
    assert all(float(r[2]) == 1.0 for r in rows[1:])


def test_export_grid_clips_cut_region(tmp_path):
    path = tmp_path / "grid.csv"
    dom = pr.get_problem("lshape2d").domain
    me.export_field_grid(lambda p: np.ones(len(p)), dom, 9, path)
    with open(path) as fh:
        pts = np.array([[float(c) for c in row[:2]]
                        for row in list(csv.reader(fh))[1:]])
    # 81 grid nodes minus the 16 strictly inside the removed open quadrant
    assert len(pts) == 65
    assert not ((pts[:, 0] > 1e-9) & (pts[:, 1] < -1e-9)).any()


def test_export_grid_prism_slice(tmp_path):
    path = tmp_path / "grid.csv"
    dom = pr.get_problem("lshape-prism").domain
    me.export_field_grid(lambda p: p[:, 2].copy(), dom, 5, path, z_slice=0.5)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "z", "value"]
    assert all(float(r[3]) == 0.5 for r in rows[1:])
    with pytest.raises(ValueError):
        me.export_field_grid(lambda p: np.ones(len(p)), dom, 1, path, z_slice=0.5)
    with pytest.raises(ValueError):
        me.export_field_grid(lambda p: np.ones(len(p)), dom, 5, path, z_slice=3.0)
    with pytest.raises(ValueError):
        me.export_field_grid(lambda p: np.ones(len(p)), dom, 5, path)

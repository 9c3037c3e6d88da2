import math

import numpy as np
import pytest

from macdisp.capacity import TangentPair, boundary, pi_set, tangents
from macdisp.channel import JointInput
from macdisp.infogeom import dispersion_matrix
from macdisp.mvnorm import in_quantile_set, phi_inv, psi_inverse
from macdisp.secondorder import (Case, Theorem1Config, beta_grid, classify, l0_region, single_user_rate,
                                 theorem1_region)

from conftest import single_user
from oracles import shifted_psi_member

LOG2 = math.log(2)
UNIFORM = JointInput.uniform(2, 2)
RNG_BOX = 3.0


@pytest.fixture(scope="module")
def f2_mid(f2, boundaries):
    bd = boundaries("f2")
    r1, r2 = bd.points[len(bd.points) // 2]
    return bd, float(r1), float(r2)


@pytest.fixture(scope="module")
def f2_mid_region(f2, f2_mid):
    bd, r1, r2 = f2_mid
    return theorem1_region(f2, r1, r2, 0.1, bd=bd)


def test_classify_vertical_facet(noiseless):
    tag = classify(UNIFORM, noiseless, LOG2, LOG2 - 0.2)
    assert tag.case is Case.I1_ACTIVE
    assert tag.slacks == pytest.approx((0.0, 0.2), abs=1e-12)


def test_classify_sum_facet(noiseless):
    assert classify(UNIFORM, noiseless, 0.3, 2 * LOG2 - 0.3).case is Case.SUM_ACTIVE


def test_classify_corner(noiseless):
    tag = classify(UNIFORM, noiseless, LOG2, LOG2)
    assert tag.case is Case.BOTH_ACTIVE
    assert tag.slacks == pytest.approx((0.0, 0.0), abs=1e-12)


def test_classify_rejects_non_members(noiseless):
    with pytest.raises(ValueError, match="dominate"):
        classify(UNIFORM, noiseless, LOG2 + 0.01, 0.0)
    with pytest.raises(ValueError, match="interior"):
        classify(UNIFORM, noiseless, 0.1, 0.1)


def test_case_ii_zero_dispersion_is_sum_halfplane(noiseless, boundaries):
    r1, r2 = 0.3, 2 * LOG2 - 0.3
    tp = tangents(boundaries("noiseless"), r1, r2)
    reg = l0_region(UNIFORM, noiseless, r1, r2, 0.2, tp)
    assert [pc.kind for pc in reg.pieces] == ["halfplane_sum"]
    assert reg.pieces[0].shape.bound == 0.0
    l1 = np.linspace(-3, 3, 13)
    assert np.all(reg.contains(l1, -l1))
    assert not np.any(reg.contains(l1, -l1 + 1e-9))


def test_noiseless_corner_union_of_shifted_quadrants(noiseless, boundaries):
    tp = tangents(boundaries("noiseless"), LOG2, LOG2)
    reg = l0_region(UNIFORM, noiseless, LOG2, LOG2, 0.1, tp)
    assert {pc.shape.side for pc in reg.pieces} == {"minus", "plus"}
    assert all(pc.shape.region.is_quadrant for pc in reg.pieces)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(400, 2))
    got = reg.contains(pts[:, 0], pts[:, 1])
    a1, a2 = pts[:, 0], pts[:, 0] + pts[:, 1]
    # exists beta >= 0 with a <= beta T for T in {T-, T+}, written out per direction
    want = np.zeros(len(pts), dtype=bool)
    for t in (tp.T_minus, tp.T_plus):
        lo = np.zeros(len(pts))
        hi = np.full(len(pts), np.inf)
        ok = np.ones(len(pts), dtype=bool)
        for a, ti in ((a1, t[0]), (a2, t[1])):
            if abs(ti) < 1e-9:
                ok &= a <= 0
            elif ti > 0:
                lo = np.maximum(lo, a / ti)
            else:
                hi = np.minimum(hi, a / ti)
        want |= ok & (lo <= hi)
    assert np.array_equal(got, want)


def test_beta_zero_only_is_unshifted_set(f2, f2_mid):
    bd, r1, r2 = f2_mid
    p = pi_set(f2, r1, r2, tol=1e-9)[0]
    tp = tangents(bd, r1, r2)
    reg = l0_region(p, f2, r1, r2, 0.1, tp, beta_max=0.0)
    v = dispersion_matrix(p, f2)
    rng = np.random.default_rng(1)
    pts = rng.normal(0, RNG_BOX * 0.5, size=(300, 2))
    want = in_quantile_set(pts[:, 0], pts[:, 0] + pts[:, 1], v, 0.1)
    assert np.array_equal(reg.contains(pts[:, 0], pts[:, 1]), want)


def test_beta_limit_union_is_monotone(f2, f2_mid):
    bd, r1, r2 = f2_mid
    p = pi_set(f2, r1, r2, tol=1e-9)[0]
    tp = tangents(bd, r1, r2)
    pts = np.random.default_rng(2).normal(0, 1.5, size=(200, 2))
    prev = None
    for bmax in (0.0, 0.1, 1.0, 10.0, np.inf):
        m = l0_region(p, f2, r1, r2, 0.1, tp, beta_max=bmax).contains(pts[:, 0], pts[:, 1])
        if prev is not None:
            assert not np.any(prev & ~m)
        prev = m


def test_case_iii_missing_tangent_raises(noiseless):
    with pytest.raises(ValueError, match="tangent"):
        l0_region(UNIFORM, noiseless, LOG2, LOG2, 0.1, None)


def test_smooth_point_with_antiparallel_tangents_is_halfspace(f2, f2_mid):
    bd, r1, r2 = f2_mid
    p = pi_set(f2, r1, r2, tol=1e-9)[0]
    tp = tangents(bd, r1, r2)
    t = tp.t_plus - tp.t_minus
    t /= np.linalg.norm(t)
    sym = TangentPair(-t, t, tp.point)
    reg = l0_region(p, f2, r1, r2, 0.1, sym)
    T = sym.T_plus
    n = np.array([-T[1], T[0]])
    n = n if n.sum() > 0 else -n
    v = dispersion_matrix(p, f2)
    edge = psi_inverse(v, 0.1, extent=10, resolution=4000).boundary
    c = float((edge @ n).max())
    rng = np.random.default_rng(3)
    a = rng.normal(0, 1.5, size=(500, 2))
    side = a @ n - c
    got = reg.contains(a[:, 0], a[:, 1] - a[:, 0])
    far = np.abs(side) > 1e-4
    assert np.array_equal(got[far], (side <= 0)[far])


def test_theorem1_smooth_point_nearly_halfspace(f2_mid_region):
    reg = f2_mid_region
    assert len(reg.inputs) == 1 and reg.tags[0].case is Case.BOTH_ACTIVE
    tp = reg.tangents
    gap = math.acos(float(np.clip(np.dot(tp.t_minus, -tp.t_plus), -1, 1)))
    assert gap < 0.05
    T = tp.T_plus / np.linalg.norm(tp.T_plus)
    n = np.array([-T[1], T[0]])
    n = n if n.sum() > 0 else -n
    edge = psi_inverse(reg.pieces[0].shape.region.covariance, 0.1, extent=10, resolution=4000).boundary
    c = float((edge @ n).max())
    a = np.random.default_rng(4).normal(0, 1.0, size=(400, 2))
    side = a @ n - c
    got = reg.contains(a[:, 0], a[:, 1] - a[:, 0])
    # the secant angle gap tilts the two shifted families; allow a band that scales with it
    far = np.abs(side) > 4 * gap * (1 + np.linalg.norm(a, axis=1))
    assert np.array_equal(got[far], (side <= 0)[far])


def test_deep_point_is_member(f2_mid_region, noiseless, boundaries):
    assert f2_mid_region.contains(-1e6, -1e6)
    reg = theorem1_region(noiseless, LOG2, LOG2, 0.3, bd=boundaries("noiseless"))
    assert reg.contains(-1e6, -1e6)


def test_case_iii_against_pointwise_oracle(f2_mid_region):
    reg = f2_mid_region
    rng = np.random.default_rng(5)
    pts = rng.normal(0, 1.5, size=(200, 2))
    betas = np.concatenate([[0.0], np.logspace(-4, 2, 20000)])
    for l1, l2 in pts:
        a = np.array([l1, l1 + l2])
        want = any(shifted_psi_member(a, pc.shape.direction, pc.shape.region.covariance, 0.1, betas)
                   for pc in reg.pieces)
        if bool(reg.contains(l1, l2)) != want:
            # only allowed inside a thin band around the boundary
            assert reg.sup_l2(l1) == pytest.approx(l2, abs=1e-6)


def test_contains_beta_zero_set(f2_mid_region):
    reg = f2_mid_region
    r = reg.pieces[0].shape.region
    b = r.boundary[::8] - 1e-7
    assert np.all(reg.contains(b[:, 0], b[:, 1] - b[:, 0]))


def test_eps_monotone(f2, f2_mid):
    bd, r1, r2 = f2_mid
    pts = np.random.default_rng(6).normal(0, 1.5, size=(150, 2))
    prev = None
    for eps in (0.05, 0.2, 0.5, 0.8):
        m = theorem1_region(f2, r1, r2, eps, bd=bd).contains(pts[:, 0], pts[:, 1])
        if prev is not None:
            assert not np.any(prev & ~m)
        prev = m


def test_case_i_sign_of_first_coordinate(f2, boundaries):
    bd = boundaries("f2")
    c1 = bd.r1_capacity
    r2 = 0.5 * bd.points[-1, 1]
    p = bd.achievers[-1]
    low = l0_region(p, f2, c1, r2, 0.1, None)
    high = l0_region(p, f2, c1, r2, 0.9, None)
    assert low.tags[0].case is Case.I1_ACTIVE
    l1 = np.linspace(-2, 2, 81)
    assert np.all(l1[low.contains(l1, 0.0)] <= 0)
    assert np.any(l1[high.contains(l1, 0.0)] > 0)


def test_beta_grid_shape():
    g = beta_grid(dispersion_matrix(JointInput.uniform(1, 2), single_user([[0.9, 0.1], [0.1, 0.9]])))
    assert g[0] == 0.0 and len(g) == 65
    assert np.all(np.diff(g) > 0)
    assert beta_grid(np.zeros((2, 2)))[-1] == pytest.approx(20.0)


def test_single_user_half_is_zero():
    assert single_user_rate(single_user([[0.8, 0.2], [0.3, 0.7]]), 0.5) == 0.0


def test_single_user_bsc():
    p = 0.11
    ch = single_user([[1 - p, p], [p, 1 - p]])
    # variance of log W/P_Y under uniform input, summed by hand
    vals = [math.log((1 - p) / 0.5)] * 2 + [math.log(p / 0.5)] * 2
    probs = [0.5 * (1 - p), 0.5 * (1 - p), 0.5 * p, 0.5 * p]
    mean = sum(a * b for a, b in zip(probs, vals))
    var = sum(a * (b - mean) ** 2 for a, b in zip(probs, vals))
    assert single_user_rate(ch, 0.1) == pytest.approx(math.sqrt(var) * phi_inv(0.1), abs=1e-7)


def test_single_user_noiseless_is_zero():
    assert single_user_rate(single_user([[1.0, 0.0], [0.0, 1.0]]), 0.1) == 0.0


def test_single_user_rejects_two_inputs(f2):
    with pytest.raises(ValueError):
        single_user_rate(f2, 0.1)


@pytest.mark.parametrize("eps", [0.1, 0.9])
def test_single_user_slice_matches(eps):
    ch = single_user([[0.9, 0.1], [0.2, 0.8]])
    want = single_user_rate(ch, eps)
    bd = boundary(ch)
    reg = theorem1_region(ch, 0.0, bd.sum_capacity, eps, bd=bd)
    assert reg.sup_l2(0.0) == pytest.approx(want, abs=1e-6)


def test_theorem1_validates_eps(f2, f2_mid):
    bd, r1, r2 = f2_mid
    with pytest.raises(ValueError):
        theorem1_region(f2, r1, r2, 1.0, bd=bd)


def test_config_defaults():
    cfg = Theorem1Config()
    assert cfg.eta == 1e-6 and cfg.boundary_resolution == 128

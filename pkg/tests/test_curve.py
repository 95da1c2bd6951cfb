import json

import numpy as np
import pytest

from elasticflow import elastica as ela
from elasticflow.curve import (
    DegenerateCurveError,
    DiscreteCurve,
    arclength_elements,
    contact_records,
    curvature_vector,
    energies,
    from_json,
    length,
    load_curve,
    min_self_distance,
    resample_uniform,
    rotation_number,
    save_curve,
    self_intersections,
    to_json,
)

from oracles import brute_force_pairs, random_curve


def circle(n, r=1.0, turns=1, center=(0.0, 0.0)):
    th = turns * 2 * np.pi * np.arange(n) / n
    return DiscreteCurve(np.column_stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)]))


def rotate(c, th, shift):
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    return c.with_points(c.points @ Q.T + shift)


# ---------------------------------------------------------------------------
# construction


def test_invalid_curves():
    with pytest.raises(DegenerateCurveError):
        DiscreteCurve(np.zeros((2, 2)))
    with pytest.raises(DegenerateCurveError):
        DiscreteCurve(np.random.default_rng(0).normal(size=(10, 4)))
    P = circle(16).points.copy()
    P[3] = P[2]
    with pytest.raises(DegenerateCurveError):
        DiscreteCurve(P)
    P[3, 0] = np.nan
    with pytest.raises(DegenerateCurveError):
        DiscreteCurve(P)


def test_points_are_read_only():
    c = circle(16)
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


# ---------------------------------------------------------------------------
# arclength and curvature


def test_arclength_elements_regular_polygon():
    c = circle(12)
    ds = arclength_elements(c)
    assert np.ptp(ds) < 1e-15
    assert ds.sum() == pytest.approx(12 * 2 * np.sin(np.pi / 12), rel=1e-15)


def test_arclength_elements_sum():
    c = random_curve(np.random.default_rng(3), 100)
    assert abs(arclength_elements(c).sum() - length(c)) < 1e-12


def test_circle_curvature():
    kv = curvature_vector(circle(512))
    assert np.max(np.abs(np.linalg.norm(kv, axis=1) - 1.0)) < 1e-3
    kv2 = curvature_vector(circle(512, r=3.0))
    assert np.max(np.abs(np.linalg.norm(kv2, axis=1) - 1 / 3)) < 1e-3


def test_straight_line_curvature():
    x = np.cumsum(np.random.default_rng(0).uniform(0.5, 1.5, 20))
    c = DiscreteCurve(np.column_stack([x, 2 * x + 1]), closed=False)
    kv = curvature_vector(c)
    assert np.all(np.isnan(kv[[0, -1]]))
    assert np.max(np.abs(kv[1:-1])) < 1e-8


def test_figure_eight_curvature():
    m8 = ela.solve_m8()
    n = 2048
    x = np.linspace(0, 2 * np.pi, n, endpoint=False)
    c = ela.gamma8().sample(n)
    tau = np.gradient(c.points, axis=0)
    tau /= np.linalg.norm(tau, axis=1)[:, None]
    kv = curvature_vector(c)
    k = tau[:, 0] * kv[:, 1] - tau[:, 1] * kv[:, 0]
    assert np.max(np.abs(k - 2 * np.sqrt(m8) * np.cos(x))) < 1e-4


# ---------------------------------------------------------------------------
# energies


def test_circle_energies():
    e = energies(circle(1024), lam=2.0)
    assert e.Bbar == pytest.approx(4 * np.pi ** 2, abs=0.01)
    assert e.Bbar == e.L * e.B
    assert e.E_lambda == e.B + 2.0 * e.L
    assert e.L == pytest.approx(2 * np.pi, rel=1e-5)
    assert e.B == pytest.approx(2 * np.pi, rel=1e-5)


def test_energies_need_closed():
    c = DiscreteCurve(circle(16).points, closed=False)
    with pytest.raises(ValueError):
        energies(c)


def test_sampled_thresholds():
    C8, C2T = ela.constant_C8(), ela.constant_C2T()
    assert abs(energies(ela.gamma8().sample(4096)).Bbar / C8 - 1) < 1e-4
    assert abs(energies(ela.gamma2T().sample(4096)).Bbar / C2T - 1) < 1e-4


def test_scale_and_isometry_invariance():
    rng = np.random.default_rng(5)
    c = random_curve(rng, 300)
    b0 = energies(c).Bbar
    for s in (0.5, 2.0, 10.0):
        assert abs(energies(c.scaled(s)).Bbar / b0 - 1) < 1e-10
    for _ in range(5):
        c2 = rotate(c, rng.uniform(0, 2 * np.pi), rng.normal(size=2) * 10)
        assert abs(energies(c2).Bbar / b0 - 1) < 1e-10


def test_closed_curve_lower_bound():
    rng = np.random.default_rng(6)
    for _ in range(20):
        c = random_curve(rng, 256, modes=4)
        assert energies(c).Bbar >= 4 * np.pi ** 2 - 1e-6


# ---------------------------------------------------------------------------
# rotation number


def test_rotation_numbers():
    raw, k = rotation_number(circle(100))
    assert k == 1 and abs(raw - 1) < 1e-12
    assert rotation_number(circle(200, turns=2))[1] == 2
    assert rotation_number(ela.gamma8().sample(512))[1] == 0
    assert rotation_number(ela.gamma2T().sample(512))[1] == 1
    # orientation does not matter
    assert rotation_number(DiscreteCurve(circle(100).points[::-1]))[1] == 1


def test_rotation_number_is_near_integer_and_resample_invariant():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = random_curve(rng, 400, modes=3)
        raw, k = rotation_number(c)
        assert abs(raw - k) < 1e-6
        assert rotation_number(resample_uniform(c, 300))[1] == k


def test_rotation_number_needs_planar_closed():
    with pytest.raises(ValueError):
        rotation_number(random_curve(np.random.default_rng(0), 50, dim=3))
    with pytest.raises(ValueError):
        rotation_number(DiscreteCurve(circle(16).points, closed=False))


# ---------------------------------------------------------------------------
# self-intersections


def test_circle_embedded():
    rep = self_intersections(circle(256))
    assert rep.embedded and rep.count == 0


def test_figure_eight_one_transversal_point():
    rep = self_intersections(ela.gamma8().sample(1024))
    assert rep.count == 1
    ct = rep.contacts[0]
    assert not ct.tangential and ct.multiplicity == 2
    assert np.linalg.norm(ct.point - ela.gamma8().point(np.pi / 2)) < 1e-3


def test_two_teardrop_one_tangential_point():
    rep = self_intersections(ela.gamma2T().sample(1024))
    assert rep.count == 1
    ct = rep.contacts[0]
    assert ct.tangential and ct.multiplicity == 2
    assert np.dot(*ct.tangents) < -0.99


def test_double_circle_multiplicity():
    rep = self_intersections(circle(301, turns=2))
    assert rep.count >= 1
    assert all(ct.tangential for ct in rep.contacts)


def test_report_to_dict_is_json():
    rep = self_intersections(ela.gamma8().sample(256))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["count"] == 1 and d["contacts"][0]["multiplicity"] == 2


@pytest.mark.parametrize("seed", range(5))
def test_detector_matches_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(4):
        n = int(rng.integers(8, 200))
        dim = 2 if rng.random() < 0.7 else 3
        c = random_curve(rng, n, dim=dim, modes=int(rng.integers(2, 8)), closed=rng.random() < 0.8)
        for prox in (0.0, 0.01 * length(c) / n, 0.3 * length(c) / n):
            if dim == 3 and prox == 0.0:
                continue
            i, j, *_ = contact_records(c, prox)
            assert set(zip(i.tolist(), j.tolist())) == brute_force_pairs(c, prox)


def test_min_self_distance():
    assert min_self_distance(circle(128)) == float("inf")
    # two parallel strands of a thin stadium
    t = np.linspace(0, 1, 50, endpoint=False)
    top = np.column_stack([t * 10, np.full_like(t, 0.1)])
    bottom = np.column_stack([10 - t * 10, np.full_like(t, -0.1)])
    c = DiscreteCurve(np.vstack([top, bottom]))
    assert min_self_distance(c, band=1.0) == pytest.approx(0.2, abs=1e-12)
    assert min_self_distance(ela.gamma8().sample(512), band=1.0) == 0.0


# ---------------------------------------------------------------------------
# resampling


def test_resample_circle():
    c = circle(100)
    r = resample_uniform(c, 200)
    assert r.n_points == 200
    assert abs(length(r) / length(c) - 1) < 1e-4
    h = np.linalg.norm(np.roll(r.points, -1, axis=0) - r.points, axis=1)
    assert np.ptp(h) < 1e-12


def test_resample_idempotent():
    c = random_curve(np.random.default_rng(8), 150)
    r1 = resample_uniform(c, 120)
    r2 = resample_uniform(r1, 120)
    assert np.max(np.abs(r1.points - r2.points)) < 1e-10
    c1 = resample_uniform(c, 120, kind="cubic")
    c2 = resample_uniform(c1, 120, kind="cubic")
    assert np.max(np.abs(c1.points - c2.points)) < 1e-10


def test_resample_two_teardrop_energy():
    C2T = ela.constant_C2T()
    # linear: new vertices sit on chords, so resample down from a finer polygon
    r = resample_uniform(ela.gamma2T().sample(16384), 4096)
    assert abs(energies(r).Bbar / C2T - 1) < 1e-3
    c = ela.gamma2T().sample(4096)
    r = resample_uniform(c, 4096, kind="cubic")
    assert abs(energies(r).Bbar / energies(c).Bbar - 1) < 1e-6


def test_resample_open_and_errors():
    c = DiscreteCurve(circle(40).points[:30], closed=False)
    r = resample_uniform(c, 25)
    assert np.allclose(r.points[[0, -1]], c.points[[0, -1]])
    with pytest.raises(DegenerateCurveError):
        resample_uniform(c, 4)
    with pytest.raises(ValueError):
        resample_uniform(c, 25, kind="cubic")


# ---------------------------------------------------------------------------
# threshold properties on stress corpora


def _perturbed(base, rng, amp, modes=5):
    P = base.points
    n = len(P)
    th = 2 * np.pi * np.arange(n) / n
    d = np.zeros_like(P)
    for k in range(1, modes + 1):
        d += np.outer(np.cos(k * th + rng.uniform(0, 2 * np.pi)), rng.normal(size=P.shape[1])) / k ** 2
    return base.with_points(P + amp * d)


def test_two_teardrop_threshold_corpus():
    C2T = ela.constant_C2T()
    rng = np.random.default_rng(11)
    base = ela.gamma2T().sample(1024)
    checked = 0
    for _ in range(40):
        c = _perturbed(base, rng, rng.uniform(0.005, 0.08))
        if rotation_number(c)[1] != 1 or self_intersections(c, prox_tol=0.0).embedded:
            continue
        checked += 1
        assert energies(c).Bbar >= C2T - 0.5
    # pinched ovals r = 1 + e cos(2 theta) with e past the point where the waist closes
    th = 2 * np.pi * np.arange(1024) / 1024
    for e in np.linspace(1.05, 1.6, 6):
        y = np.sin(th) * (1 + e * np.cos(2 * th))
        x = np.cos(th) * 1.0
        c = DiscreteCurve(np.column_stack([x, y * 0.5 + 0.3 * np.sin(2 * th)]))
        if rotation_number(c)[1] != 1 or self_intersections(c, prox_tol=0.0).embedded:
            continue
        checked += 1
        assert energies(c).Bbar >= C2T - 0.5
    assert checked >= 10


def test_self_intersecting_threshold_corpus():
    C8 = ela.constant_C8()
    rng = np.random.default_rng(12)
    base = ela.gamma8().sample(1024)
    checked = 0
    for _ in range(30):
        c = _perturbed(base, rng, rng.uniform(0.01, 0.2))
        if rng.random() < 0.5:
            c = c.with_points(np.column_stack([c.points, 0.2 * rng.normal() * np.sin(2 * np.pi * np.arange(1024) / 1024)]))
        if self_intersections(c, prox_tol=0.0).embedded:
            continue
        checked += 1
        assert energies(c).Bbar >= C8 - 0.5
    assert checked >= 10


# ---------------------------------------------------------------------------
# file format


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    for dim in (2, 3):
        c = random_curve(rng, 37, dim=dim)
        c = c.with_points(c.points, family="test", alpha=np.float64(0.25))
        path = tmp_path / f"c{dim}.json"
        save_curve(c, path)
        back = load_curve(path)
        assert np.array_equal(back.points, c.points)
        assert back.closed == c.closed
        assert back.metadata == {"family": "test", "alpha": 0.25}
        doc = json.loads(to_json(c))
        assert doc["dimension"] == dim and len(doc["points"]) == 37
    assert from_json(to_json(circle(8))).closed


def test_json_dimension_mismatch():
    doc = json.loads(to_json(circle(8)))
    doc["dimension"] = 3
    with pytest.raises(ValueError):
        from_json(json.dumps(doc))

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from abpcap.convexbody import (
    ContactConfig,
    ConvexSection,
    CylinderContactConfig,
    boundary_normal,
    convex_hull,
    random_section,
    sample_boundary,
    validate_contact_config,
)
from abpcap.errors import InvalidConfig, InvalidSection, NotOnBoundary

from conftest import SQUARE, seeds


def test_polygon_is_reoriented_counterclockwise():
    cw = ConvexSection.polygon([[-1, 1], [1, 1], [1, -1], [-1, -1]])
    assert cw.area == pytest.approx(4.0)


def test_invalid_polygons_rejected():
    with pytest.raises(InvalidSection):
        ConvexSection.polygon([[0, 0], [1, 0]])
    with pytest.raises(InvalidSection):
        ConvexSection.polygon([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]])
    with pytest.raises(InvalidSection):
        ConvexSection.polygon([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(InvalidSection):
        ConvexSection.disk(0.0)


def test_support_sampled_section_is_the_square():
    dirs = [[1, 0], [0, 1], [-1, 0], [0, -1]]
    body = ConvexSection.from_support(dirs, [1, 1, 1, 1])
    assert body.kind == "support_sampled"
    assert body.area == pytest.approx(4.0)
    with pytest.raises(InvalidSection):
        ConvexSection.from_support([[1, 0], [-1, 0]], [-1, -1])


def test_validation_examples():
    ok = ContactConfig([[0, 1], [1, 0]], [[0, 1], [1, 0]], [0, 0])
    assert validate_contact_config(ok).ok
    bad = ContactConfig([[0, 1], [1, 0]], [[0, -1], [1, 0]], [0, 0])
    report = validate_contact_config(bad)
    assert [(v.kind, v.indices) for v in report.violations] == [("supporting", (0, 1))]
    assert report.violations[0].magnitude == pytest.approx(1.0)
    facet = ContactConfig([[-0.5, 1], [0, 1], [0.5, 1]], [[0, 1]] * 3, [0, 1, 2], SQUARE)
    assert validate_contact_config(facet).ok


def test_validation_reports_off_boundary_and_bad_normals():
    cfg = ContactConfig([[0, 0.5], [1, 0]], [[0, 1], [1, 0]], [0, 0], SQUARE)
    kinds = {v.kind for v in validate_contact_config(cfg).violations}
    assert "on_boundary" in kinds
    cfg = ContactConfig([[0, 1]], [[0, 1.1]], [0])
    assert [v.kind for v in validate_contact_config(cfg).violations] == ["unit_normal"]
    cfg = ContactConfig([[0, 1]], [[1, 0]], [0], SQUARE)
    assert [v.kind for v in validate_contact_config(cfg).violations] == ["outward_normal"]


def test_boundary_normal_examples():
    disk = ConvexSection.disk(1.0)
    assert boundary_normal(disk, (0, 1)) == pytest.approx([0, 1])
    assert boundary_normal(SQUARE, (0, -1)) == pytest.approx([0, -1])
    s = math.sqrt(2) / 2
    assert boundary_normal(SQUARE, (1, 1)) == pytest.approx([s, s])
    with pytest.raises(NotOnBoundary):
        boundary_normal(SQUARE, (0, 0))


@settings(max_examples=100)
@given(seeds)
def test_boundary_normal_supports_polygon(seed):
    rng = np.random.default_rng(seed)
    body = random_section(rng, "polygon")
    V = body.vertices
    k = int(rng.integers(len(V)))
    for x in (V[k], V[k] + rng.uniform() * (V[(k + 1) % len(V)] - V[k])):
        nu = boundary_normal(body, x)
        assert np.max((V - x) @ nu) <= 1e-9


def test_sample_boundary_examples():
    disk = ConvexSection.disk(1.0)
    cfg = sample_boundary(disk, 4, 11)
    assert np.allclose(cfg.points, cfg.normals)
    assert validate_contact_config(cfg).ok
    cfg = sample_boundary(SQUARE, 100, 3)
    assert np.all(np.isclose(np.abs(cfg.normals), 0) | np.isclose(np.abs(cfg.normals), 1))
    assert validate_contact_config(cfg).ok
    again = sample_boundary(SQUARE, 100, 3)
    assert np.array_equal(cfg.points, again.points)
    assert not np.any(cfg.values)


@settings(max_examples=200)
@given(seeds)
def test_sampled_configs_are_valid(seed):
    rng = np.random.default_rng(seed)
    body = random_section(rng)
    cfg = sample_boundary(body, int(rng.integers(1, 30)), rng)
    assert validate_contact_config(cfg).ok


def test_json_round_trip_derives_normals():
    obj = {
        "section": {"type": "polygon", "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]]},
        "contacts": [{"point": [0, 1], "value": 0.5}, {"point": [1, 1]}],
    }
    cfg = ContactConfig.from_json(obj)
    assert cfg.normals[0] == pytest.approx([0, 1])
    assert cfg.values.tolist() == [0.5, 0.0]
    again = ContactConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert np.array_equal(again.points, cfg.points)
    with pytest.raises(InvalidConfig):
        ContactConfig.from_json({"contacts": [{"point": [0, 1]}]})


def test_cylinder_config_shapes():
    planar = ContactConfig([[0, 1], [1, 0]], [[0, 1], [1, 0]], [0, 0])
    cyl = CylinderContactConfig(planar, [0.0, 1.0])
    assert cyl.dimension == 3
    with pytest.raises(InvalidConfig):
        CylinderContactConfig(planar, [[0.0, 1.0, 2.0]])


def test_convex_hull_drops_interior_and_collinear_points():
    pts = [[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1]]
    hull = convex_hull(pts)
    assert len(hull) == 4

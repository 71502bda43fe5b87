"""Synthetic scene generator: determinism, structure, and labeling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from radialseg import PointCloud, SceneSpec, generate_scene, instances_from_labels
from radialseg.synth import FAMILY_NAMES


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(n_instances=0)
    with pytest.raises(ValueError):
        SceneSpec(families=(0, 7))
    with pytest.raises(ValueError):
        SceneSpec(min_scale=0.0)
    with pytest.raises(ValueError):
        SceneSpec(min_scale=2.0, max_scale=1.0)


def test_generate_scene_is_deterministic():
    spec = SceneSpec(n_instances=3, points_per_instance=50, n_background=100, seed=11)
    a = generate_scene(spec)
    b = generate_scene(spec)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.instance_ids, b.instance_ids)
    assert np.array_equal(a.semantic_ids, b.semantic_ids)
    c = generate_scene(SceneSpec(n_instances=3, points_per_instance=50,
                                 n_background=100, seed=12))
    assert not np.array_equal(a.positions, c.positions)


def test_scene_counts_and_labels():
    spec = SceneSpec(n_instances=4, points_per_instance=60, n_background=150,
                     families=(2, 0), seed=3)
    cloud = generate_scene(spec)
    assert cloud.n_points == 4 * 60 + 150
    assert int(np.sum(cloud.instance_ids == -1)) == 150
    for inst_id in range(4):
        member = cloud.instance_ids == inst_id
        assert int(member.sum()) == 60
        # One semantic class per instance, cycling through the family list.
        sems = np.unique(cloud.semantic_ids[member])
        assert len(sems) == 1
        assert sems[0] == spec.families[inst_id % len(spec.families)]
    # Background points carry no class.
    assert np.all(cloud.semantic_ids[cloud.instance_ids == -1] == -1)


def test_instances_are_separated():
    spec = SceneSpec(n_instances=5, min_separation=5.0, seed=4)
    cloud = generate_scene(spec)
    centers = [
        cloud.positions[g.point_indices].mean(axis=0)
        for g in instances_from_labels(cloud)
    ]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            # Point means wobble around the placed centers, so allow slack.
            assert np.linalg.norm(centers[i] - centers[j]) > spec.min_separation - 2.0


def test_background_fills_the_box():
    spec = SceneSpec(n_instances=1, points_per_instance=10, n_background=2000,
                     extent=6.0, seed=5)
    cloud = generate_scene(spec)
    bg = cloud.positions[cloud.instance_ids == -1]
    assert np.all(np.abs(bg) <= spec.extent)
    # Uniform clutter reaches well into every octant.
    assert np.all(bg.max(axis=0) > 0.8 * spec.extent)
    assert np.all(bg.min(axis=0) < -0.8 * spec.extent)


def test_family_scales_bound_instances():
    spec = SceneSpec(n_instances=3, points_per_instance=200, n_background=0,
                     min_scale=1.0, max_scale=1.5, families=(0, 1, 2), seed=6)
    cloud = generate_scene(spec)
    for g in instances_from_labels(cloud):
        pts = cloud.positions[g.point_indices]
        center = pts.mean(axis=0)
        radii = np.linalg.norm(pts - center, axis=1)
        # Every family is built from unit shapes scaled by at most
        # max_scale (times a small family-specific factor), so no point
        # strays far from its own center.
        assert radii.max() < 4.0 * spec.max_scale


def test_colors_follow_families():
    spec = SceneSpec(n_instances=3, points_per_instance=20, n_background=30,
                     families=(0, 1, 2), with_colors=True, seed=7)
    cloud = generate_scene(spec)
    assert cloud.colors is not None
    assert cloud.colors.shape == (cloud.n_points, 3)
    for g in instances_from_labels(cloud):
        rows = cloud.colors[g.point_indices]
        assert np.all(rows == rows[0])
    plain = generate_scene(SceneSpec(n_instances=1, seed=7))
    assert plain.colors is None


def test_family_names_cover_ids():
    assert len(FAMILY_NAMES) == 3
    spec = SceneSpec()
    assert all(0 <= f < len(FAMILY_NAMES) for f in spec.families)


def test_impossible_placement_raises():
    # The box cannot even hold one instance of this scale.
    with pytest.raises(ValueError):
        generate_scene(SceneSpec(n_instances=1, extent=1.0, min_scale=0.9,
                                 max_scale=1.0))
    # The box holds them individually but never this far apart.
    with pytest.raises(ValueError):
        generate_scene(SceneSpec(n_instances=2, extent=3.0, min_scale=0.9,
                                 max_scale=1.0, min_separation=50.0))


def test_generated_scene_is_a_valid_cloud():
    cloud = generate_scene(SceneSpec(seed=8))
    assert isinstance(cloud, PointCloud)
    assert np.all(np.isfinite(cloud.positions))

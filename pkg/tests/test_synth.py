import math

import numpy as np
import pytest

from silhuetta import data_path
from silhuetta.hull import BoundingVolume
from silhuetta.silhouette import to_grayscale
from silhuetta.synth import (OverlappingPrimitives, Primitive, Scene,
                             analytic_volume, brute_force_hull_volume,
                             build_paper_rig, build_ring_rig, load_scene,
                             render_color, render_silhouette_exact, save_scene,
                             shadow_footprint, ShadowPatch)

BV = BoundingVolume(vmin=np.full(3, -100.0), vmax=np.full(3, 100.0))


def sphere_scene(radius=50.0, rig=None, **prim_kw):
    rig = rig or build_paper_rig()
    return Scene(primitives=(Primitive(kind="sphere", size=(radius,), **prim_kw),),
                 rig=rig, bv=BV)


class TestAnalyticVolume:
    def test_sphere(self):
        scene = sphere_scene(50.0)
        assert analytic_volume(scene) == pytest.approx(523.5987755982989, rel=1e-12)

    def test_box(self):
        scene = Scene(primitives=(Primitive(kind="box", size=(50.0, 30.0, 20.0)),),
                      rig=build_paper_rig(), bv=BV)
        assert analytic_volume(scene) == pytest.approx(240.0, rel=1e-12)

    def test_cylinder(self):
        scene = Scene(primitives=(Primitive(kind="cylinder", size=(10.0, 40.0)),),
                      rig=build_paper_rig(), bv=BV)
        assert analytic_volume(scene) == pytest.approx(math.pi * 100 * 40 / 1000, rel=1e-12)

    def test_disjoint_primitives_add(self):
        scene = Scene(
            primitives=(
                Primitive(kind="sphere", size=(20.0,), translation=(-60.0, 0.0, 0.0)),
                Primitive(kind="box", size=(20.0, 20.0, 20.0), translation=(60.0, 0.0, 0.0)),
            ),
            rig=build_paper_rig(), bv=BV)
        expected = 4 / 3 * math.pi * 8000 / 1000 + 8 * 8000 / 1000
        assert analytic_volume(scene) == pytest.approx(expected, rel=1e-12)

    def test_overlapping_rejected(self):
        scene = Scene(
            primitives=(
                Primitive(kind="sphere", size=(30.0,)),
                Primitive(kind="sphere", size=(30.0,), translation=(40.0, 0.0, 0.0)),
            ),
            rig=build_paper_rig(), bv=BV)
        with pytest.raises(OverlappingPrimitives):
            analytic_volume(scene)


class TestExactSilhouette:
    def test_centered_sphere_is_a_disk_at_principal_point(self):
        scene = sphere_scene(50.0)
        cam = scene.rig.cameras[0]
        mask = render_silhouette_exact(scene, cam)
        k = cam.intrinsics
        ys, xs = np.nonzero(mask)
        cx, cy = (xs.min() + xs.max()) / 2.0, (ys.min() + ys.max()) / 2.0
        assert abs(cx - (k.cx - 0.5)) < 1.0 and abs(cy - (k.cy - 0.5)) < 1.0
        # symmetric extents, area close to the projected disk
        width = xs.max() - xs.min() + 1
        height = ys.max() - ys.min() + 1
        assert abs(width - height) <= 1
        assert mask.sum() == pytest.approx(math.pi * (width / 2) ** 2, rel=0.02)

    def test_empty_scene_gives_empty_mask(self):
        scene = Scene(primitives=(), rig=build_paper_rig(), bv=BV)
        assert not render_silhouette_exact(scene, scene.rig.cameras[0]).any()

    def test_box_area_converges_to_analytic_projection(self):
        # face-on unit-ish box viewed by a distant camera: projected
        # polygon area is (close to) the near-face rectangle
        rig = build_ring_rig(n_lateral=3, radius=2000.0, fx=1200.0,
                             width=320, height=240)
        scene = Scene(primitives=(Primitive(kind="box", size=(30.0, 40.0, 25.0)),),
                      rig=rig, bv=BV)
        cam = scene.rig.cameras[0]  # on +x axis, faces the (y, z) face
        k = cam.intrinsics

        def area(scale):
            m = render_silhouette_exact(scene, cam, scale)
            return m.sum() / scale ** 2

        # analytic: outline comes from the near face at depth 2000-30
        depth = 2000.0 - 30.0
        expected = (2 * 40.0 * k.fx / depth) * (2 * 25.0 * k.fx / depth)
        err1 = abs(area(1) - expected)
        err4 = abs(area(4) - expected)
        assert err4 <= err1 + 0.5
        assert area(4) == pytest.approx(expected, rel=0.01)

    def test_cylinder_and_rotation(self):
        # cylinder rotated 90 deg about y: axis along world x
        c, s = math.cos(math.pi / 2), math.sin(math.pi / 2)
        rot = (c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
        scene = Scene(
            primitives=(Primitive(kind="cylinder", size=(20.0, 80.0), rotation=rot),),
            rig=build_paper_rig(), bv=BV)
        top = scene.rig.cameras[-1]
        mask = render_silhouette_exact(scene, top)
        ys, xs = np.nonzero(mask)
        k = top.intrinsics
        # from above: roughly an 80 x 40 rectangle footprint (perspective
        # makes the near rim slightly larger)
        w = (xs.max() - xs.min() + 1) / k.fx * 600.0
        h = (ys.max() - ys.min() + 1) / k.fy * 600.0
        assert sorted([w, h])[0] == pytest.approx(40.0, rel=0.05)
        assert sorted([w, h])[1] == pytest.approx(80.0, rel=0.05)


class TestRenderColor:
    def test_two_colors_without_noise_or_shadows(self):
        scene = sphere_scene(50.0, albedo=(10, 200, 30))
        img = render_color(scene, scene.rig.cameras[0], seed=4)
        colors = {tuple(c) for c in img.reshape(-1, 3)}
        assert colors == {(10, 200, 30), (200, 200, 200)}

    def test_same_seed_bit_identical(self):
        scene = sphere_scene(50.0, texture_noise=30)
        a = render_color(scene, scene.rig.cameras[1], seed=99)
        b = render_color(scene, scene.rig.cameras[1], seed=99)
        assert np.array_equal(a, b)

    def test_different_seed_differs(self):
        scene = sphere_scene(50.0, texture_noise=30)
        a = render_color(scene, scene.rig.cameras[1], seed=1)
        b = render_color(scene, scene.rig.cameras[1], seed=2)
        assert not np.array_equal(a, b)

    def test_shadow_halves_gray_background(self):
        scene = Scene(
            primitives=(Primitive(kind="sphere", size=(10.0,)),),
            rig=build_paper_rig(), bv=BV, background=(128, 128, 128),
            shadows=(ShadowPatch(view_id="cam1",
                                 polygon=((10.0, 10.0), (60.0, 10.0), (60.0, 60.0),
                                          (10.0, 60.0)),
                                 darkening=0.5),),
        )
        img = render_color(scene, scene.rig.cameras[0], seed=0)
        assert tuple(img[30, 30]) == (64, 64, 64)
        assert tuple(img[100, 100]) == (128, 128, 128)
        fp = shadow_footprint(scene, scene.rig.cameras[0])
        assert fp[30, 30] and not fp[100, 100]
        assert fp.sum() == 50 * 50

    def test_shadow_never_darkens_object_pixels(self):
        scene = sphere_scene(50.0, albedo=(250, 250, 250))
        k = scene.rig.cameras[0].intrinsics
        poly = ((0.0, 0.0), (float(k.width), 0.0), (float(k.width), float(k.height)),
                (0.0, float(k.height)))
        shadowed = Scene(primitives=scene.primitives, rig=scene.rig, bv=scene.bv,
                         background=scene.background,
                         shadows=(ShadowPatch(view_id="cam1", polygon=poly,
                                              darkening=0.5),))
        img = render_color(shadowed, shadowed.rig.cameras[0], seed=0)
        exact = render_silhouette_exact(shadowed, shadowed.rig.cameras[0])
        assert (img[exact] == 250).all()
        assert (img[~exact] == 100).all()

    def test_exact_silhouette_matches_midpoint_threshold(self):
        scene = sphere_scene(50.0, albedo=(60, 60, 60))
        for cam in scene.rig:
            img = render_color(scene, cam, seed=0)
            exact = render_silhouette_exact(scene, cam)
            gray = to_grayscale(img)
            mid = (60 + 200) / 2
            assert np.array_equal(gray < mid, exact)

    def test_two_tone_sphere_shows_both_albedos(self):
        scene = load_scene(data_path("scenes/twotone_sphere.json"))
        # cam2 sits at 120 degrees azimuth: it sees the x > 0 (red) and
        # x < 0 (blue) halves at once
        img = render_color(scene, scene.rig.cameras[1], seed=0)
        colors = {tuple(int(v) for v in c) for c in img.reshape(-1, 3)}
        assert (200, 40, 40) in colors and (40, 40, 200) in colors


class TestBruteForceHull:
    def test_scene_filling_bv_gives_bv_volume(self):
        # a box covering the whole bounding volume projects as foreground
        # everywhere the bv projects, so every sample is inside (slightly
        # oversized so pixel-centre quantization cannot graze the corners)
        scene = Scene(primitives=(Primitive(kind="box", size=(102.0, 102.0, 102.0)),),
                      rig=build_paper_rig(), bv=BV)
        vol, half = brute_force_hull_volume(scene, scene.rig, 20_000, seed=1, scale=2)
        assert vol == pytest.approx(BV.volume_cm3(), rel=1e-12)
        assert half == 0.0

    def test_empty_scene_gives_zero(self):
        scene = Scene(primitives=(), rig=build_paper_rig(), bv=BV)
        vol, half = brute_force_hull_volume(scene, scene.rig, 20_000, seed=1, scale=2)
        assert vol == 0.0 and half == 0.0

    def test_hull_contains_object_volume(self):
        scene = sphere_scene(50.0)
        vol, half = brute_force_hull_volume(scene, scene.rig, 100_000, seed=2, scale=2)
        assert vol >= 523.5987755982989 - half

    def test_too_few_samples_rejected(self):
        scene = sphere_scene(50.0)
        with pytest.raises(ValueError):
            brute_force_hull_volume(scene, scene.rig, 9_999)


class TestSceneIO:
    def test_round_trip(self, tmp_path):
        scene = load_scene(data_path("scenes/exp1_sphere_shadow.json"))
        p = tmp_path / "copy.json"
        save_scene(scene, p)
        again = load_scene(p)
        assert again.name == scene.name
        assert again.invert == scene.invert and again.window == scene.window
        assert len(again.primitives) == len(scene.primitives)
        assert len(again.shadows) == len(scene.shadows)
        assert np.array_equal(again.bv.vmin, scene.bv.vmin)
        a, b = again.primitives[0], scene.primitives[0]
        assert a == b

    def test_ground_truth_mismatch_rejected(self, tmp_path):
        import json

        doc = json.loads(data_path("scenes/twotone_sphere.json").read_text())
        doc["ground_truth_volume_cm3"] = 1.0
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="ground truth"):
            load_scene(p)

    def test_primitive_validation(self):
        with pytest.raises(ValueError):
            Primitive(kind="cone", size=(1.0,))
        with pytest.raises(ValueError):
            Primitive(kind="sphere", size=(-5.0,))
        with pytest.raises(ValueError):
            Primitive(kind="box", size=(1.0, 2.0))

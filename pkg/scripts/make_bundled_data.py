"""Regenerate the bundled data files under src/silhuetta/data/.

The JSON files shipped with the package are frozen outputs of this
script; rerun it only when the scene designs change.
"""

from pathlib import Path

import numpy as np

from silhuetta.camera import save_rig
from silhuetta.hull import BoundingVolume
from silhuetta.synth import (Primitive, Scene, build_paper_rig, build_ring_rig,
                             save_scene, shadow_patches_for_cylinder, _convex_hull_2d,
                             ShadowPatch)
from silhuetta.camera import project_point

DATA = Path(__file__).resolve().parent.parent / "src" / "silhuetta" / "data"

DARK_OBJECT = dict(albedo=(60, 60, 60), texture_noise=20, texture_style="speckle",
                   texture_cell=1, texture_bright=0.05)


def _box_shadow_patches(rig, lo, hi, darkening, skip_ids=("top",)):
    """Shadow polygons from projecting a virtual box's corners."""
    corners = [(x, y, z) for x in (lo[0], hi[0]) for y in (lo[1], hi[1])
               for z in (lo[2], hi[2])]
    patches = []
    for cam in rig:
        if cam.id in skip_ids:
            continue
        hull = _convex_hull_2d([project_point(p, cam) for p in corners])
        patches.append(ShadowPatch(view_id=cam.id, polygon=tuple(hull),
                                   darkening=darkening))
    return patches


def make_exp1():
    """Single dark object; cast shadow below it in every lateral view."""
    rig = build_ring_rig(n_lateral=12, radius=600.0)
    prim = Primitive(kind="sphere", size=(50.0,), **DARK_OBJECT)
    shadows = tuple(shadow_patches_for_cylinder(
        rig, center=(0.0, 0.0, -58.0), radius=40.0, height=40.0, darkening=0.35))
    return Scene(
        primitives=(prim,), rig=rig,
        bv=BoundingVolume(vmin=np.array([-100.0] * 3), vmax=np.array([100.0] * 3)),
        background=(200, 200, 200), shadows=shadows,
        invert=True, window=9, name="exp1",
    )


def make_exp2():
    """Two near-touching objects; shading bridges the gap between them."""
    rig = build_ring_rig(n_lateral=12, radius=600.0)
    big = Primitive(kind="box", size=(40.0, 35.0, 32.0), translation=(-55.0, 0.0, 0.0),
                    **DARK_OBJECT)
    small = Primitive(kind="box", size=(25.0, 25.0, 22.0), translation=(55.0, 0.0, 0.0),
                      **DARK_OBJECT)
    shadows = tuple(_box_shadow_patches(
        rig, lo=(-18.0, -24.0, -30.0), hi=(32.0, 24.0, 8.0), darkening=0.4))
    return Scene(
        primitives=(big, small), rig=rig,
        bv=BoundingVolume(vmin=np.array([-120.0] * 3), vmax=np.array([120.0] * 3)),
        background=(200, 200, 200), shadows=shadows,
        invert=True, window=9, name="exp2",
    )


def make_exp3():
    """Cluttered scene: the largest object partially occluded in most
    lateral views, clean from the top."""
    rig = build_ring_rig(n_lateral=12, radius=600.0)
    big = Primitive(kind="box", size=(45.0, 40.0, 35.0), **DARK_OBJECT)
    occluders = (
        Primitive(kind="sphere", size=(18.0,), translation=(0.0, -95.0, -10.0),
                  albedo=(55, 55, 55), texture_noise=20, texture_style="speckle",
                  texture_bright=0.05),
        Primitive(kind="cylinder", size=(14.0, 40.0), translation=(85.0, 60.0, -12.0),
                  albedo=(65, 65, 65), texture_noise=20, texture_style="speckle",
                  texture_bright=0.05),
        Primitive(kind="sphere", size=(15.0,), translation=(-90.0, 55.0, 5.0),
                  albedo=(50, 50, 50), texture_noise=20, texture_style="speckle",
                  texture_bright=0.05),
    )
    return Scene(
        primitives=(big,) + occluders, rig=rig,
        bv=BoundingVolume(vmin=np.array([-120.0] * 3), vmax=np.array([120.0] * 3)),
        background=(200, 200, 200), shadows=(),
        invert=True, window=9, name="exp3",
    )


def make_twotone():
    """Half red / half blue sphere on the 4-camera rig: carving target."""
    prim = Primitive(kind="sphere", size=(50.0,), albedo=(200, 40, 40),
                     albedo2=(40, 40, 200), split_axis=0)
    return Scene(
        primitives=(prim,), rig=build_paper_rig(),
        bv=BoundingVolume(vmin=np.array([-100.0] * 3), vmax=np.array([100.0] * 3)),
        background=(120, 120, 120), name="twotone_sphere",
    )


TABLE1 = """\
experiment,method,exp_volume_cm3,real_volume_cm3
1,existing,290.7,240
1,proposed,258.9,240
2,existing,712.8,565
2,proposed,559.2,565
3,existing,1214.8,720
3,proposed,694.1,720
4,existing,237.4,220
4,proposed,211.5,220
"""


def main():
    (DATA / "rigs").mkdir(parents=True, exist_ok=True)
    (DATA / "scenes").mkdir(parents=True, exist_ok=True)
    save_rig(build_paper_rig(), DATA / "rigs" / "paper4.json")
    save_scene(make_exp1(), DATA / "scenes" / "exp1_sphere_shadow.json")
    save_scene(make_exp2(), DATA / "scenes" / "exp2_two_objects.json")
    save_scene(make_exp3(), DATA / "scenes" / "exp3_cluttered.json")
    save_scene(make_twotone(), DATA / "scenes" / "twotone_sphere.json")
    (DATA / "table1.csv").write_text(TABLE1)
    print(f"regenerated bundled data under {DATA}")


if __name__ == "__main__":
    main()

import math

import numpy as np
import pytest

from cdsfcrf.errors import ParameterError
from cdsfcrf.io import read_kv, write_kv
from cdsfcrf.phantom import (
    BACKGROUND_LEVEL,
    LESION_LEVEL,
    PROSTATE_LEVEL,
    URETHRA_LEVEL,
    Disc,
    Ellipse,
    PhantomSpec,
    default_prostate_spec,
    generate_phantom,
)


def test_empty_scene_is_constant():
    img = generate_phantom(PhantomSpec(40, 30, background_level=0.2))
    assert img.shape == (30, 40)
    assert np.all(img == 0.2)


def test_default_center_is_urethra():
    img = generate_phantom(default_prostate_spec(256, 256))
    assert img[128, 128] == URETHRA_LEVEL


def test_default_spec_is_valid_and_documented_levels():
    spec = default_prostate_spec(256, 256)
    spec.validate()
    assert spec.background_level == BACKGROUND_LEVEL == 0.15
    assert spec.prostate.intensity == PROSTATE_LEVEL == 0.6
    assert [l.intensity for l in spec.lesions] == [LESION_LEVEL] * 3 == [0.35] * 3
    assert spec.urethra.intensity == URETHRA_LEVEL == 0.1


def test_default_proportions():
    spec = default_prostate_spec(200, 200)
    p = spec.prostate
    assert p.ax / p.ay == pytest.approx(5 / 4.5)
    assert 2 * p.ax == pytest.approx(0.4)
    major_axis = 2 * p.ax
    for lesion in spec.lesions:
        # 0.5-1.0 cm diameter against the 5 cm prostate axis.
        assert 0.25 / 5 <= lesion.r / major_axis <= 0.5 / 5
    assert 2 * spec.urethra.r / major_axis == pytest.approx(0.7 / 5)


def test_lesions_hypointense_to_prostate():
    spec = default_prostate_spec(64, 64)
    assert all(l.intensity < spec.prostate.intensity for l in spec.lesions)


@pytest.mark.parametrize("seed", range(6))
def test_lesion_pixels_inside_prostate(seed):
    w, h = 96, 80
    spec = default_prostate_spec(w, h, seed)
    short = min(w, h)
    p = spec.prostate
    ys, xs = np.mgrid[0:h, 0:w] + 0.5
    in_prostate = ((xs - p.cx * w) / (p.ax * short)) ** 2 + ((ys - p.cy * h) / (p.ay * short)) ** 2 <= 1
    for lesion in spec.lesions:
        inside = (xs - lesion.cx * w) ** 2 + (ys - lesion.cy * h) ** 2 <= (lesion.r * short) ** 2
        assert inside.any()
        assert np.all(in_prostate[inside])


def test_same_seed_same_spec_and_image():
    a, b = default_prostate_spec(128, 128, 7), default_prostate_spec(128, 128, 7)
    assert a == b
    assert generate_phantom(a).tobytes() == generate_phantom(b).tobytes()


def test_different_seed_moves_lesions():
    assert default_prostate_spec(128, 128, 1).lesions != default_prostate_spec(128, 128, 2).lesions


def test_intensity_bounds():
    img = generate_phantom(default_prostate_spec(100, 120, 3))
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_mean_matches_analytic_area_oracle():
    w = h = 256
    spec = default_prostate_spec(w, h)
    img = generate_phantom(spec)
    short = min(w, h)
    p = spec.prostate
    total = BACKGROUND_LEVEL * w * h
    total += math.pi * p.ax * p.ay * short**2 * (p.intensity - BACKGROUND_LEVEL)
    # Lesions and urethra are disjoint and fully inside the prostate.
    for disc in [*spec.lesions, spec.urethra]:
        total += math.pi * (disc.r * short) ** 2 * (disc.intensity - p.intensity)
    assert img.mean() == pytest.approx(total / (w * h), abs=1e-3)


def test_mean_matches_pixel_center_oracle():
    w = h = 256
    spec = default_prostate_spec(w, h)
    short = min(w, h)
    ref = np.full((h, w), spec.background_level)
    for shape in spec.shapes():
        for i in range(h):
            for j in range(w):
                x, y = j + 0.5, i + 0.5
                if isinstance(shape, Ellipse):
                    rx, ry = shape.ax * short, shape.ay * short
                else:
                    rx = ry = shape.r * short
                if ((x - shape.cx * w) / rx) ** 2 + ((y - shape.cy * h) / ry) ** 2 <= 1:
                    ref[i, j] = shape.intensity
    assert generate_phantom(spec).mean() == pytest.approx(ref.mean(), abs=1e-3)


def test_antialiased_edges_have_intermediate_values():
    img = generate_phantom(PhantomSpec(32, 32, 0.0, prostate=Ellipse(0.5, 0.5, 0.3, 0.2, 1.0)))
    partial = (img > 0) & (img < 1)
    assert partial.any()
    levels = np.unique(np.round(img[partial] * 16))
    assert set(levels.tolist()) <= set(range(1, 16))


def test_draw_order_later_shapes_win():
    spec = PhantomSpec(
        32, 32, 0.0,
        prostate=Ellipse(0.5, 0.5, 0.4, 0.4, 0.5),
        lesions=[Disc(0.5, 0.5, 0.2, 0.9)],
        urethra=Disc(0.5, 0.5, 0.1, 0.2),
    )
    img = generate_phantom(spec)
    assert img[16, 16] == 0.2
    assert img[16, 11] == 0.9


@pytest.mark.parametrize(
    "spec",
    [
        PhantomSpec(32, 32, 1.2),
        PhantomSpec(32, 32, 0.1, prostate=Ellipse(0.9, 0.5, 0.2, 0.2, 0.5)),
        PhantomSpec(32, 32, 0.1, lesions=[Disc(0.5, 0.5, 0.0, 0.5)]),
        PhantomSpec(32, 32, 0.1, urethra=Disc(0.5, 0.5, 0.1, 1.5)),
    ],
)
def test_invalid_specs_rejected(spec):
    with pytest.raises(ParameterError):
        generate_phantom(spec)


def test_small_canvas_rejected():
    with pytest.raises(ParameterError):
        default_prostate_spec(31, 64)


def test_spec_key_value_round_trip(tmp_path):
    spec = default_prostate_spec(96, 64, 5)
    write_kv(tmp_path / "spec.txt", spec.to_dict())
    again = PhantomSpec.from_dict(read_kv(tmp_path / "spec.txt"))
    assert again == spec
    assert generate_phantom(again).tobytes() == generate_phantom(spec).tobytes()


def test_spec_missing_key_rejected():
    d = default_prostate_spec(64, 64).to_dict()
    del d["lesion1.r"]
    with pytest.raises(ParameterError):
        PhantomSpec.from_dict(d)

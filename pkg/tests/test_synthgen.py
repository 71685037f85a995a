from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxr_regions.errors import InvalidSpec
from cxr_regions.imagecore import ViewKind, bbox_of
from cxr_regions.maskops import estimate_ap_rotation
from cxr_regions.orientation import Side
from cxr_regions.synthgen import (
    LungEllipse,
    ap_spec,
    lat_spec,
    make_corpus,
    make_phantom,
    paired_cases,
)


def test_same_spec_same_output():
    spec = lat_spec(Side.LEFT, rotation_deg=6.0, noise_seed=11)
    (a, ta), (b, tb) = make_phantom(spec), make_phantom(spec)
    assert a == b and ta.mask == tb.mask and ta.to_json() == tb.to_json()


def test_noise_seed_changes_pixels_not_mask():
    (a, ta), (b, tb) = make_phantom(ap_spec(noise_seed=1)), make_phantom(ap_spec(noise_seed=2))
    assert a != b and ta.mask == tb.mask


def test_symmetric_ap_is_upright():
    _, truth = make_phantom(ap_spec(0.0))
    assert abs(estimate_ap_rotation(truth.mask)) <= 0.5


def test_tilted_ap_recovered():
    _, truth = make_phantom(ap_spec(10.0, noise_seed=5))
    assert estimate_ap_rotation(truth.mask) == pytest.approx(10.0, abs=1.0)


def test_polarity_and_noise_bounds():
    spec = lat_spec(Side.RIGHT, noise_seed=3)
    img, truth = make_phantom(spec)
    lungs = img.pixels[truth.mask.bits].mean()
    assert lungs < spec.background_level < spec.spine_level
    quiet, _ = make_phantom(replace(spec, noise_frac=0.0))
    assert np.abs(img.pixels.astype(int) - quiet.pixels.astype(int)).max() <= round(0.03 * 255) + 1


@settings(max_examples=25, deadline=None)
@given(st.floats(-15, 15), st.integers(0, 2**63 - 1), st.sampled_from([ViewKind.AP, ViewKind.LAT]))
def test_truth_consistent_with_mask(rot, seed, view):
    spec = ap_spec(rot, seed) if view is ViewKind.AP else lat_spec(Side.LEFT, rot, seed)
    img, truth = make_phantom(spec)
    assert img.shape == truth.mask.shape == (spec.canvas[1], spec.canvas[0])
    assert bbox_of(truth.mask) == truth.union_bbox
    assert truth.rotation_deg == rot
    # re-rasterizing from the recorded rotation gives the same mask
    _, again = make_phantom(replace(spec, rotation_deg=truth.rotation_deg, noise_seed=0))
    assert again.mask == truth.mask


def test_invalid_specs():
    base = ap_spec()
    bad = [
        replace(base, canvas=(4, 4)),
        replace(base, noise_frac=0.2),
        replace(base, rotation_deg=60.0),
        replace(base, lungs=base.lungs[:1]),
        replace(base, lungs=(LungEllipse((50, 50), (0, 10), 60), base.lungs[1])),
        replace(base, lungs=(LungEllipse((5, 95), (30, 60), 60), base.lungs[1])),
        replace(base, bit_depth=12),
        replace(lat_spec(), spine_side=None),
        replace(lat_spec(), spine_level=40.0),
        replace(base, background_level=300.0),
    ]
    for spec in bad:
        with pytest.raises(InvalidSpec):
            make_phantom(spec)


def test_sixteen_bit_phantom():
    spec = replace(ap_spec(), bit_depth=16, background_level=40000.0, spine_level=60000.0,
                   mediastinum_level=50000.0,
                   lungs=tuple(replace(e, intensity=15000.0) for e in ap_spec().lungs))
    img, _ = make_phantom(spec)
    assert img.bit_depth == 16 and img.pixels.max() > 255


def test_corpus_shape_and_determinism():
    corpus = make_corpus(30, base_seed=9)
    assert len(corpus) == 60
    assert [s.view for s, _, _ in corpus[:4]] == [ViewKind.AP, ViewKind.LAT] * 2
    assert all(abs(s.rotation_deg) <= 15 for s, _, _ in corpus)
    assert {s.spine_side for s, _, _ in corpus[1::2]} == {Side.LEFT, Side.RIGHT}
    again = make_corpus(30, base_seed=9)
    assert all(a[1] == b[1] and a[0] == b[0] for a, b in zip(corpus, again))
    other = make_corpus(30, base_seed=10)
    assert [s.rotation_deg for s, _, _ in corpus] != [s.rotation_deg for s, _, _ in other]
    pairs = paired_cases(corpus)
    assert len(pairs) == 30 and all(ap[0].view is ViewKind.AP and lat[0].view is ViewKind.LAT for ap, lat in pairs)
    with pytest.raises(ValueError):
        make_corpus(0)

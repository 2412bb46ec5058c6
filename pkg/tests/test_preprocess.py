import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from famnet.preprocess import (AugmentParams, AugmentPolicy, apply_augmentation, assemble_clip,
                               augment, face_crop, read_image, resize_and_crop, temporal_indices,
                               to_tensor)


def _image(h, w, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def test_face_crop_uses_box():
    img = _image(240, 320)
    out, flagged = face_crop(img, lambda im: [(10, 10, 200, 200)])
    assert out.shape == (190, 190, 3) and not flagged
    np.testing.assert_array_equal(out, img[10:200, 10:200])


def test_face_crop_fallback_center_square():
    img = _image(100, 160)
    out, flagged = face_crop(img, lambda im: [])
    assert flagged and out.shape == (100, 100, 3)
    np.testing.assert_array_equal(out, img[:, 30:130])


def test_face_crop_null_detector_is_identity():
    img = _image(64, 64)
    out, flagged = face_crop(img)
    assert not flagged
    np.testing.assert_array_equal(out, img)


def test_face_crop_rejects_bad_input():
    with pytest.raises(ValueError):
        face_crop(np.zeros((10, 10)))


def test_read_image_unreadable(tmp_path):
    bad = tmp_path / "x.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(ValueError, match="cannot read"):
        read_image(bad)


def test_resize_and_crop_shape():
    assert resize_and_crop(_image(480, 640)).shape == (224, 224, 3)
    rng = np.random.default_rng(0)
    assert resize_and_crop(_image(480, 640), train=True, rng=rng).shape == (224, 224, 3)


def test_eval_crop_is_central_window():
    img = _image(240, 234)
    out = resize_and_crop(img)
    np.testing.assert_array_equal(out, img[8:232, 5:229])


def test_train_crop_seeded():
    img = _image(300, 300)
    a = resize_and_crop(img, train=True, rng=np.random.default_rng(7))
    b = resize_and_crop(img, train=True, rng=np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_eval_idempotent():
    once = resize_and_crop(_image(300, 280))
    np.testing.assert_array_equal(resize_and_crop(once), once)


def test_augment_disabled_is_identity():
    img = _image(50, 50)
    policy = AugmentPolicy(enabled=False)
    np.testing.assert_array_equal(augment(img, policy, policy.rng(0)), img)


def test_augment_seeded():
    img = _image(50, 50)
    policy = AugmentPolicy(seed=4)
    np.testing.assert_array_equal(augment(img, policy, policy.rng(1)), augment(img, policy, policy.rng(1)))


def test_double_flip_restores_symmetric_pattern():
    yy, xx = np.mgrid[0:41, 0:41]
    disk = (((yy - 20) ** 2 + (xx - 20) ** 2) < 150).astype(np.uint8) * 255
    img = np.repeat(disk[..., None], 3, axis=2)
    img[5:10, 2:8] = 90  # asymmetric mark, so a single flip is visible
    policy = AugmentPolicy(rotation=0.0, flip_prob=1.0, brightness=(1.0, 1.0), seed=11)
    once = augment(img, policy, policy.rng(0))
    assert not np.array_equal(once, img)
    np.testing.assert_array_equal(augment(once, policy, policy.rng(0)), img)


def test_brightness_and_rotation_applied():
    img = np.full((20, 20, 3), 100, dtype=np.uint8)
    out = apply_augmentation(img, AugmentParams(brightness=1.2))
    assert out.max() == 120
    out = apply_augmentation(_image(20, 20), AugmentParams(angle=10.0))
    assert out.shape == (20, 20, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_normalized_range(seed):
    x = to_tensor(_image(8, 8, seed))
    assert x.min() >= -1 and x.max() <= 1


def test_assemble_clip_shape():
    frames = [_image(224, 224, i) for i in range(16)]
    clip = assemble_clip(frames, depth=16)
    assert clip.shape == (3, 224, 224, 16)
    torch.testing.assert_close(clip[..., 3], to_tensor(frames[3]))


def test_assemble_clip_pads_with_last_frame():
    frames = [_image(8, 8, i) for i in range(9)]
    clip = assemble_clip(frames, depth=16)
    for t in range(8, 16):
        torch.testing.assert_close(clip[..., t], to_tensor(frames[8]))


def _linspace_round_oracle(n, d):
    # exact rational arithmetic, round half up
    from fractions import Fraction
    return [int(Fraction(i * (n - 1), d - 1) + Fraction(1, 2)) for i in range(d)]


def test_assemble_clip_uniform_sampling():
    assert temporal_indices(40, 16) == _linspace_round_oracle(40, 16)
    assert temporal_indices(40, 16)[0] == 0 and temporal_indices(40, 16)[-1] == 39


@given(st.integers(8, 64), st.integers(8, 300))
def test_temporal_indices_property(d, n):
    idx = temporal_indices(n, d)
    assert len(idx) == d
    assert idx == sorted(idx)
    if n >= d:
        assert idx == _linspace_round_oracle(n, d)


def test_assemble_clip_empty():
    with pytest.raises(ValueError):
        assemble_clip([])

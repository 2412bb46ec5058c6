import pytest
import torch
import torchvision

from famnet.backbone import STAGE_CHANNELS, ResNet18Trunk, backbone2d, backbone3d


def stride_oracle(size: int, depth: int | None = None):
    """Tap shapes from the ResNet18 stage table: /2 stem, /2 pool, then /1,/2,/2,/2."""
    def down(n):  # 3x3 stride-2 conv or pool with padding 1 (ceil), 7x7 stride-2 with padding 3
        return (n + 1) // 2
    s = down(down(size))
    d = depth
    shapes = {}
    for i, c in enumerate(STAGE_CHANNELS, start=1):
        if i > 1:
            s = down(s)
            d = None if d is None else down(d)
        shapes[i] = (c, s, s) if d is None else (c, d, s, s)
    return shapes


def test_oracle_table():
    assert stride_oracle(224)[1] == (64, 56, 56)
    assert stride_oracle(224)[4] == (512, 7, 7)
    assert stride_oracle(224, 16)[4] == (512, 2, 7, 7)
    assert stride_oracle(224, 8)[4] == (512, 1, 7, 7)


def test_2d_tap_shapes():
    m = backbone2d().eval()
    with torch.no_grad():
        taps = m(torch.randn(1, 3, 224, 224))
    expected = stride_oracle(224)
    for (i, j), shape in taps.shapes().items():
        assert shape == expected[i], (i, j)


@pytest.mark.parametrize("depth", [16, 8])
def test_3d_tap_shapes(depth):
    m = backbone3d().eval()
    with torch.no_grad():
        taps = m(torch.randn(1, 3, depth, 224, 224))
    expected = stride_oracle(224, depth)
    for (i, j), shape in taps.shapes().items():
        assert shape == expected[i], (i, j)


def test_3d_depth_too_short():
    with pytest.raises(ValueError, match="depth"):
        backbone3d(0.25)(torch.randn(1, 3, 4, 32, 32))


def test_wrong_rank():
    with pytest.raises(ValueError):
        backbone2d(0.25)(torch.randn(3, 32, 32))


def test_param_count_matches_torchvision_trunk():
    ref = torchvision.models.resnet18(weights=None)
    ref_count = sum(p.numel() for n, p in ref.named_parameters() if not n.startswith("fc."))
    assert sum(p.numel() for p in backbone2d().parameters()) == ref_count


def test_zero_input_finite():
    m = backbone2d(0.25).eval()
    with torch.no_grad():
        taps = m(torch.zeros(2, 3, 64, 64))
    for i in range(1, 5):
        for j in (1, 2):
            assert torch.isfinite(taps[i][j]).all()


def test_block_chaining():
    m = backbone2d(0.25).eval()
    with torch.no_grad():
        taps = m(torch.randn(1, 3, 64, 64))
        for i in range(1, 5):
            first, second = m.stages[i - 1]
            torch.testing.assert_close(second(taps[i][1]), taps[i][2])
            if i > 1:
                torch.testing.assert_close(first(taps[i - 1][2]), taps[i][1])


def test_gradient_reaches_stem():
    m = backbone3d(0.25)
    taps = m(torch.randn(2, 3, 8, 32, 32))
    taps[4][2].sum().backward()
    assert m.conv1.weight.grad is not None and m.conv1.weight.grad.abs().sum() > 0


def test_width_multiplier():
    assert ResNet18Trunk(2, 0.25).channels == (16, 32, 64, 128)

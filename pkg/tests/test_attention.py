import pytest
import torch

from famnet.attention import (AttentionModule, TaskAttentionStack, attention_first, attention_step,
                              position_softmax)
from famnet.backbone import STAGE_CHANNELS, FeatureTaps, scaled_channels
from famnet.model import AMNet

from gradcheck_utils import check_gradients


def surrogate_taps(channels, size, depth=None, batch=2, dtype=torch.float32, seed=0):
    gen = torch.Generator().manual_seed(seed)
    blocks = []
    s, d = size, depth
    for i, c in enumerate(channels):
        if i:
            s = (s + 1) // 2
            d = None if d is None else (d + 1) // 2
        shape = (batch, c, s, s) if d is None else (batch, c, d, s, s)
        blocks.append((torch.randn(*shape, generator=gen, dtype=dtype),
                       torch.randn(*shape, generator=gen, dtype=dtype)))
    return FeatureTaps(blocks)


def test_zero_conv_gives_uniform_map():
    mod = AttentionModule(2, 64, 64)
    torch.nn.init.zeros_(mod.conv.weight)
    torch.nn.init.zeros_(mod.conv.bias)
    t1, t2 = torch.randn(1, 64, 56, 56), torch.randn(1, 64, 56, 56)
    m, f = attention_first(mod, t1, t2)
    torch.testing.assert_close(m, torch.full_like(m, 1 / 3136))
    torch.testing.assert_close(f, t2 / 3136)


def test_softmax_sums_per_channel():
    mod = AttentionModule(2, 16, 16)
    m, _ = attention_first(mod, torch.randn(3, 16, 9, 9) * 5, torch.randn(3, 16, 9, 9))
    torch.testing.assert_close(m.sum(dim=(2, 3)), torch.ones(3, 16), atol=1e-5, rtol=0)


def test_step_channel_bookkeeping():
    stack = TaskAttentionStack(2, STAGE_CHANNELS)
    conv = stack.blocks[1].conv
    assert (conv.in_channels, conv.out_channels) == (64 + 128, 128)
    assert [(b.conv.in_channels, b.conv.out_channels) for b in stack.blocks] == [
        (64, 64), (192, 128), (384, 256), (768, 512)]


def test_step_zero_conv_uniform_and_zero_tap():
    mod = AttentionModule(2, 16 + 32, 32)
    torch.nn.init.zeros_(mod.conv.weight)
    torch.nn.init.zeros_(mod.conv.bias)
    f_prev = torch.randn(1, 16, 8, 8)
    m, f = attention_step(mod, f_prev, torch.randn(1, 32, 4, 4), torch.zeros(1, 32, 4, 4))
    torch.testing.assert_close(m, torch.full_like(m, 1 / 16))
    assert (f == 0).all()


def test_shape_mismatch():
    mod = AttentionModule(2, 16, 16)
    with pytest.raises(ValueError):
        attention_first(mod, torch.randn(1, 16, 8, 8), torch.randn(1, 16, 4, 4))
    with pytest.raises(ValueError):
        attention_step(AttentionModule(2, 48, 32), torch.randn(1, 8, 8, 8),
                       torch.randn(1, 32, 4, 4), torch.randn(1, 32, 4, 4))


def test_stack_final_shapes_2d_3d():
    taps2 = surrogate_taps(STAGE_CHANNELS, 56, batch=1)
    st = TaskAttentionStack(2, STAGE_CHANNELS)(taps2)
    assert st.final.shape[1:] == (512, 7, 7)
    taps3 = surrogate_taps(STAGE_CHANNELS, 56, depth=16, batch=1)
    st = TaskAttentionStack(3, STAGE_CHANNELS)(taps3)
    assert st.final.shape[1:] == (512, 2, 7, 7)
    for k, m in enumerate(st.maps):
        assert m.shape == taps3[k + 1][2].shape
        torch.testing.assert_close(m.flatten(2).sum(-1), torch.ones(m.shape[:2]), atol=1e-5, rtol=0)
        torch.testing.assert_close(st.gated[k], taps3[k + 1][2] * m)


def test_uniform_maps_reduce_to_scaled_identity():
    taps = surrogate_taps(scaled_channels(0.25), 16, batch=1)
    stack = TaskAttentionStack(2, scaled_channels(0.25))
    for b in stack.blocks:
        torch.nn.init.zeros_(b.conv.weight)
        torch.nn.init.zeros_(b.conv.bias)
    st = stack(taps)
    for k in range(4):
        tap = taps[k + 1][2]
        positions = tap[0, 0].numel()
        torch.testing.assert_close(st.gated[k], tap / positions)


def test_identical_init_identical_output():
    taps = surrogate_taps(scaled_channels(0.25), 16)
    torch.manual_seed(1)
    a = TaskAttentionStack(2, scaled_channels(0.25), "mer")
    b = TaskAttentionStack(2, scaled_channels(0.25), "au")
    b.load_state_dict(a.state_dict())
    torch.testing.assert_close(a(taps).final, b(taps).final)


def test_gradient_connectivity_finite_differences():
    ch = scaled_channels(0.25)
    taps = surrogate_taps(ch, 16, dtype=torch.float64)
    stack = TaskAttentionStack(2, ch).double()
    proj = torch.randn(2, ch[-1], 2, 2, dtype=torch.float64)

    def fn():
        return (stack(taps).final * proj).sum()

    weights = [b.conv.weight for b in stack.blocks]
    check_gradients(fn, weights, n_coords=8, rtol=1e-3)
    fn().backward()
    for w in weights:
        assert w.grad.abs().max() > 0


def test_backbone_sharing_under_au_loss():
    model = AMNet(2, width=0.25, n_au=4)
    out = model(torch.randn(2, 3, 32, 32))
    out.au.sum().backward()
    assert model.backbone.conv1.weight.grad.abs().sum() > 0
    for p in model.stacks["mer"].parameters():
        assert p.grad is None or (p.grad == 0).all()
    for p in model.heads.mer.parameters():
        assert p.grad is None

import json
import warnings

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from famnet.metrics import (MetricsReport, compute_uar, compute_uf1, confusion_matrix, emit_report,
                            fused_prediction, late_fuse)

CM = [[2, 0, 0], [1, 1, 0], [0, 0, 2]]


def per_sample_oracle(y_true, y_pred, classes=(0, 1, 2)):
    """UAR/UF1 from per-sample counting, no confusion matrix."""
    recalls, f1s = [], []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        n = sum(1 for t in y_true if t == c)
        if n:
            recalls.append(tp / n)
        f1s.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return sum(recalls) / len(recalls), sum(f1s) / len(f1s)


def test_late_fuse_examples():
    v = torch.tensor([0.3, -1.0, 2.0])
    torch.testing.assert_close(late_fuse(v, v), v)
    torch.testing.assert_close(late_fuse(torch.tensor([1.0, 0, 0]), torch.tensor([0, 1.0, 0])),
                               torch.tensor([0.5, 0.5, 0]))
    with pytest.raises(ValueError):
        late_fuse(torch.zeros(3), torch.zeros(4))


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_fusion_commutative_and_argmax(a, b):
    a, b = torch.tensor(a, dtype=torch.float64), torch.tensor(b, dtype=torch.float64)
    torch.testing.assert_close(late_fuse(a, b), late_fuse(b, a))
    o = late_fuse(a, b)
    p = o.softmax(-1)
    # softmax is monotone, so the logit argmax is a maximal probability (ties can appear after rounding)
    assert p[o.argmax()] == p.max()
    assert fused_prediction(a[None], b[None]).item() == o.argmax().item()


def test_uar_uf1_examples():
    assert compute_uar(np.eye(3, dtype=int) * 4) == 1.0
    assert compute_uf1(np.eye(3, dtype=int) * 4) == 1.0
    assert compute_uar(CM) == pytest.approx(0.8333, abs=1e-4)
    assert compute_uf1(CM) == pytest.approx(0.8222, abs=1e-4)
    y_true = [0, 0, 1, 1, 1, 2, 2]
    y_pred = [0, 0, 0, 1, 1, 2, 2]
    assert confusion_matrix(y_true[:5] + [2, 2], y_pred[:5] + [2, 2]).tolist() == [[2, 0, 0], [1, 2, 0], [0, 0, 2]]
    uar, uf1 = per_sample_oracle([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 2, 2])
    assert uar == pytest.approx(compute_uar(CM)) and uf1 == pytest.approx(compute_uf1(CM))


@pytest.mark.parametrize("n", [1, 4, 10])
def test_single_class_predictions(n):
    cm = confusion_matrix([0] * n + [1] * n + [2] * n, [0] * (3 * n))
    assert compute_uf1(cm) == pytest.approx(1 / 6)
    assert compute_uar(cm) == pytest.approx(1 / 3)


def test_chance_level_uar():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1, 2], 20000)
    assert compute_uar(confusion_matrix(y, rng.integers(0, 3, y.size))) == pytest.approx(1 / 3, abs=0.01)


def test_absent_class_warns_and_excludes():
    cm = [[3, 1, 0], [0, 2, 0], [0, 0, 0]]
    with pytest.warns(UserWarning):
        assert compute_uar(cm) == pytest.approx((0.75 + 1) / 2)
    with pytest.warns(UserWarning):
        compute_uf1(cm)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert compute_uf1(cm, exclude_absent=True) == pytest.approx((6 / 7 + 0.8) / 2)


def test_random_matrices_against_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        y_true = np.concatenate([[0, 1, 2], rng.integers(0, 3, n)])
        y_pred = rng.integers(0, 3, y_true.size)
        cm = confusion_matrix(y_true, y_pred)
        uar, uf1 = per_sample_oracle(y_true.tolist(), y_pred.tolist())
        assert abs(compute_uar(cm) - uar) < 1e-9
        assert abs(compute_uf1(cm) - uf1) < 1e-9


@given(st.lists(st.integers(1, 6), min_size=3, max_size=3))
def test_uar_invariant_to_class_duplication(factors):
    cm = np.array(CM) * np.array(factors)[:, None]
    assert compute_uar(cm) == pytest.approx(compute_uar(CM))


def test_report_invariants():
    r = MetricsReport(CM)
    assert r.n_samples == 6
    assert r.support.tolist() == [2, 2, 2] and r.tp.tolist() == [2, 1, 2]
    assert r.fp.tolist() == [1, 0, 0] and r.fn.tolist() == [0, 1, 0]
    assert 0 <= r.uar <= 1 and 0 <= r.uf1 <= 1


def test_emit_report(tmp_path):
    r = MetricsReport(CM, per_fold=[{"fold": "s1", "uar": 0.5, "uf1": 0.4}])
    paths = emit_report(r, tmp_path, dataset="synthetic", config_hash="abc")
    data = json.loads(paths["metrics"].read_text())
    assert data["uar"] == 0.833333 and data["dataset"] == "synthetic" and data["config_hash"] == "abc"
    assert data["confusion"] == CM
    assert paths["csv"].read_text().splitlines()[0] == "true\\pred,Positive,Negative,Surprise"
    from PIL import Image
    assert Image.open(paths["heatmap"]).size[0] > 0
    with pytest.raises(ValueError):
        emit_report(MetricsReport(np.zeros((3, 3), dtype=int)), tmp_path)
    assert MetricsReport.from_dict(data).confusion.tolist() == CM

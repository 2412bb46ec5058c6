import sys

import numpy as np
import pytest
import torch

from famnet.synthetic import SyntheticSpec, generate


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
    np.random.seed(0)


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    """3 subjects x 3 samples of 32px synthetic clips."""
    spec = SyntheticSpec(n_subjects=3, samples_per_subject=3, image_size=32, n_frames=10, seed=3)
    return generate(spec, tmp_path_factory.mktemp("tiny"))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])

import pytest
import torch

from qdvmr.featurestore import FeatureDataset, SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Small shared synthetic dataset for module tests."""
    out = tmp_path_factory.mktemp("synth") / "data"
    generate_synthetic(SyntheticConfig(n_train=8, n_val=4, seed=11), out)
    return out


@pytest.fixture(scope="session")
def synth_dataset(synth_dir):
    return FeatureDataset(synth_dir, "train", mask_seed=11)


@pytest.fixture(autouse=True)
def torch_deterministic():
    torch.manual_seed(0)
    yield

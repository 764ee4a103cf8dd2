import numpy as np
import pytest

from conworld import dataset


@pytest.fixture(scope="session")
def traveler_collection(tmp_path_factory):
    """Small traveler collection shared by dataset/cli/report tests."""
    out = tmp_path_factory.mktemp("coll") / "traveler"
    dataset.collect("traveler", 4, episode_len=12, seed=7, out_dir=out)
    return out


@pytest.fixture(scope="session")
def pacman_collection(tmp_path_factory):
    out = tmp_path_factory.mktemp("coll") / "pacman"
    dataset.collect("pacman", 2, episode_len=10, seed=3, out_dir=out)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0)

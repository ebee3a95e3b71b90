import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boxte.data import Quadruple, TemporalKG, Vocabulary

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_vocab(E, R, T):
    return Vocabulary(tuple(f"e{i}" for i in range(E)), tuple(f"r{i}" for i in range(R)),
                      tuple(f"t{i:04d}" for i in range(T)))


def random_tkg(seed, num_facts=20, E=10, R=3, T=4, holdout=0):
    """``num_facts`` distinct random quadruples; the last ``holdout`` go to test."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(E * R * E * T, num_facts, replace=False)
    quads = [Quadruple(*map(int, np.unravel_index(i, (E, R, E, T)))) for i in idx]
    train, test = sorted(quads[:num_facts - holdout]), sorted(quads[num_facts - holdout:])
    return TemporalKG(make_vocab(E, R, T), tuple(train), (), tuple(test))


@pytest.fixture
def tiny_tkg():
    return random_tkg(0, num_facts=12, E=5, R=2, T=3, holdout=4)

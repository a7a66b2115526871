"""Everything a checkpoint holds: config, parameters, BN statistics, optimizer."""

from dataclasses import dataclass

import numpy as np

from strl.autograd.nn import ParameterStore
from strl.autograd.optim import AdamState
from strl.config import Config
from strl.models.relation import init_relation
from strl.models.stae import init_stae


@dataclass
class ModelState:
    config: Config
    store: ParameterStore
    optimizer: AdamState


def build_model(config, seed=None):
    """
    Initialise a fresh model for ``config``.

    Args:
        config: Validated Config
        seed: Overrides ``config.seed`` for the weight draws

    Returns:
        ModelState
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    store = ParameterStore()
    init_stae(store, config, rng)
    init_relation(store, config, rng)
    return ModelState(config, store, AdamState(learning_rate=config.learning_rate))

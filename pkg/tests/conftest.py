import numpy as np
import pytest

from risce.model import SystemConfig, draw_paths, synthesize_channels
from risce.sounding import (compress_measurements, compress_pilots,
                            generate_pilots, measure)


@pytest.fixture
def scene():
    """Factory: one sounded channel realization, receiver-side compressed.

    Returns (config, channel, pilots, y, noise_var); keyword overrides go
    straight into SystemConfig.
    """

    def make(seed=0, compress=True, **overrides):
        defaults = dict(n_tx=8, n_ris=16, n_rf=4, n_sc=8, q_tx=8, q_ris=16,
                        n_subframes=12, n_slots=6, n_paths_bs=2, n_paths_ue=2,
                        snr_db=np.inf, on_grid=True)
        defaults.update(overrides)
        config = SystemConfig(**defaults)
        rng = np.random.default_rng(seed)
        paths_bs, paths_ue = draw_paths(config, rng)
        channel = synthesize_channels(config, paths_bs, paths_ue)
        pilots = generate_pilots(config, rng)
        y, noise_var = measure(channel, pilots, config.snr_db, rng)
        if compress:
            pilots, transforms = compress_pilots(pilots)
            y = compress_measurements(y, transforms)
        return config, channel, pilots, y, noise_var

    return make

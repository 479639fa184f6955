import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, jitter=0.5):
    a = rng.normal(size=(d, d))
    return a @ a.T + jitter * np.eye(d)


TINY_CONFIG = '''
model = "gk"
replicates = 2
seed = 7

[model_options]
n_obs = 100

[truth]
theta = [3.0, 1.0, 2.0, 0.5]

[observed]
source = "generate"
seed = 1

[prior]
components = [["uniform", 0, 30], ["uniform", 0, 30],
              ["uniform", 0, 30], ["uniform", 0, 30]]

[start]
mode = "theta"
theta = [3.0, 1.0, 2.0, 0.5]

[schedule]
burnin = 40
asl = 10
adaptive = 150
n_sims = 20

[proposal]
burnin_sd = [0.05, 0.05, 0.05, 0.05]
update_interval = 10
'''


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / 'tiny.toml'
    path.write_text(TINY_CONFIG)
    return path

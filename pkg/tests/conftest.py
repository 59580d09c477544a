import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """The desk-scale reproduction run, shared by the acceptance criteria."""
    from tansens import experiment

    out = tmp_path_factory.mktemp("desk_run")
    return experiment.run_desk_scale(out_dir=str(out))

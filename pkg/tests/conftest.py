import numpy as np
import pytest

from regimepricer.config import three_regime_model


@pytest.fixture(scope="session")
def fixture_model():
    """Bundled three-regime credit model (zero rate floored)."""
    return three_regime_model()


@pytest.fixture(scope="session")
def flat_rate_model():
    """Same model with the flat 3% short rate of the bond reference grid."""
    return three_regime_model(short_rates=[0.03, 0.03, 0.03])


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)

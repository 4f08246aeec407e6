import copy

import pytest

from hierstein.features import experiment, recursion
from hierstein.laws import bernoulli, rademacher, standardize

CLT_CONFIG = {
    "models": [
        {
            "effect": "x",
            "k": 2,
            "coefficients": {"rule": "constant", "values": ["1/sqrt(2)", "1/sqrt(2)"]},
            "initial": {"kind": "rademacher"},
        },
        {
            "effect": "y",
            "k": 2,
            "coefficients": {"rule": "constant", "values": ["1/sqrt(2)", "1/sqrt(2)"]},
            "initial": {"kind": "rademacher"},
        },
    ],
    "n_max": 8,
    "method": "exact",
    "seed": 7,
}


@pytest.fixture
def clt_config_dict():
    return copy.deepcopy(CLT_CONFIG)


@pytest.fixture
def clt_config(clt_config_dict):
    return experiment.parse_config(clt_config_dict)


@pytest.fixture
def clt_models():
    a = recursion.CoefficientSchedule.constant([2**-0.5, 2**-0.5])
    mx = recursion.RecursionModel(a, rademacher(), name="x")
    my = recursion.RecursionModel(a, rademacher(), name="y")
    return recursion.TwoEffectModel(mx, my)


def geometric_models(ratio: float = 0.5, base: float = 0.3, k: int = 2):
    """Equal-coefficient effects with independent Rademacher perturbations base·ratioⁿ."""
    coefs = recursion.CoefficientSchedule.constant([k**-0.5] * k)
    pert = recursion.PerturbationSpec("independent", rademacher(), recursion.GeometricRule(base, ratio))
    mx = recursion.RecursionModel(coefs, rademacher(), pert, "x")
    my = recursion.RecursionModel(coefs, standardize(bernoulli(0.3)), pert, "y")
    return recursion.TwoEffectModel(mx, my)


@pytest.fixture
def make_geometric():
    return geometric_models


@pytest.fixture
def geometric_tm():
    return geometric_models()


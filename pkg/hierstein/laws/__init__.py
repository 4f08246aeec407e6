# hierstein/laws/__init__.py
from __future__ import annotations

from typing import Union

from hierstein.errors import UnsupportedLawError
from hierstein.laws.discrete import (
    DiscreteDistribution,
    bernoulli,
    central_moment,
    make_discrete,
    point_mass,
    rademacher,
    standardize,
    two_point,
    uniform_on,
)
from hierstein.laws.empirical import EmpiricalSample
from hierstein.laws.normal import STANDARD_NORMAL, StandardNormal
from hierstein.laws.piecewise import (
    PiecewiseLinearCDF,
    from_density,
    from_density_jumps,
    mix,
    mixture_of_shifts,
    uniform_cdf,
)
from hierstein.laws.records import from_record, to_record

Law = Union[DiscreteDistribution, PiecewiseLinearCDF, StandardNormal, EmpiricalSample]
LAW_TYPES = (DiscreteDistribution, PiecewiseLinearCDF, StandardNormal, EmpiricalSample)


def cdf_eval(law: Law, t):
    """Right-continuous CDF of any supported law; ±inf map to 0 and 1."""
    if not isinstance(law, LAW_TYPES):
        raise UnsupportedLawError(f"unsupported law kind {type(law).__name__}")
    return law.cdf(t)


__all__ = [
    "Law",
    "LAW_TYPES",
    "DiscreteDistribution",
    "PiecewiseLinearCDF",
    "StandardNormal",
    "STANDARD_NORMAL",
    "EmpiricalSample",
    "make_discrete",
    "central_moment",
    "standardize",
    "cdf_eval",
    "rademacher",
    "bernoulli",
    "two_point",
    "uniform_on",
    "point_mass",
    "uniform_cdf",
    "from_density",
    "from_density_jumps",
    "mix",
    "mixture_of_shifts",
    "to_record",
    "from_record",
]

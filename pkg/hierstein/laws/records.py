# hierstein/laws/records.py
# Plain-text law records. Header line "<kind> key=value ...", then one row per atom or
# breakpoint; numbers are written with 17 significant digits so parsing them back gives
# the same float64 bits.
from __future__ import annotations

from typing import Dict, List

import numpy as np

from hierstein.errors import InvalidLawError, UnsupportedLawError
from hierstein.laws.discrete import DiscreteDistribution
from hierstein.laws.empirical import EmpiricalSample
from hierstein.laws.normal import STANDARD_NORMAL, StandardNormal
from hierstein.laws.piecewise import PiecewiseLinearCDF
from hierstein.utils.numeric import fmt17


def to_record(law) -> str:
    if isinstance(law, DiscreteDistribution):
        rows = [f"{fmt17(a)} {fmt17(p)}" for a, p in zip(law.atoms, law.probs)]
        return "\n".join([f"discrete n={law.size}", *rows]) + "\n"
    if isinstance(law, PiecewiseLinearCDF):
        rows = [f"{fmt17(x)} {fmt17(F)}" for x, F in zip(law.breakpoints, law.cdf_values)]
        return "\n".join([f"piecewise n={law.size}", *rows]) + "\n"
    if isinstance(law, EmpiricalSample):
        head = f"empirical n={law.size}"
        if law.seed is not None:
            head += f" seed={law.seed}"
        if law.stream:
            head += " stream=" + ",".join(str(k) for k in law.stream)
        return "\n".join([head, *(fmt17(v) for v in law.values)]) + "\n"
    if isinstance(law, StandardNormal):
        return "normal\n"
    raise UnsupportedLawError(f"no record format for {type(law).__name__}")


def _header(line: str) -> tuple[str, Dict[str, str]]:
    kind, *pairs = line.split()
    return kind, dict(p.split("=", 1) for p in pairs)


def from_record(text: str):
    lines: List[str] = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise InvalidLawError("empty record")
    kind, meta = _header(lines[0])
    body = lines[1:]
    if "n" in meta and int(meta["n"]) != len(body):
        raise InvalidLawError(f"{kind} record declares n={meta['n']} but has {len(body)} rows")
    if kind == "normal":
        return STANDARD_NORMAL
    if kind == "empirical":
        stream = tuple(int(k) for k in meta["stream"].split(",")) if "stream" in meta else ()
        seed = int(meta["seed"]) if "seed" in meta else None
        return EmpiricalSample(np.array([float(v) for v in body]), seed, stream)
    cols = np.array([[float(tok) for tok in ln.split()] for ln in body])
    if kind == "discrete":
        return DiscreteDistribution(cols[:, 0], cols[:, 1])
    if kind == "piecewise":
        return PiecewiseLinearCDF(cols[:, 0], cols[:, 1])
    raise UnsupportedLawError(f"unknown record kind {kind!r}")

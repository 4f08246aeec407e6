# hierstein/config.py
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict

# Optional: load .env here so flags exist even when imported from tests or the API
try:
    from dotenv import load_dotenv

    load_dotenv()
except Exception:
    pass

# ----------------------- Numeric defaults -----------------------------
ATOM_MERGE_TOL = 1e-12          # atoms closer than this are one atom
PROB_SUM_TOL = 1e-12
STANDARDIZED_TOL = 1e-10        # mean 0 / variance 1 checks on ξ components
DEFAULT_ATOM_CAP = 1_000_000
DEFAULT_BREAKPOINT_CAP = 1_000_000
CHUNK_SIZE = 8192               # draws per counter-derived substream

DELTA_FLOOR = 1e-6              # state envelopes never fit below this
DELTA_P2_CAP = 0.999            # zero-variance perturbation conventions
DELTA_P4_CAP = 0.9
GAP_ZERO_TOL = 1e-10
GAMMA_MARGIN = 0.05
DEFAULT_FIT_SKIP = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ----------------------- Runtime config -------------------------------
def _cfg() -> Dict[str, Any]:
    """Read env at call time so .env changes and test monkeypatching are honoured."""
    return {
        "THREADS": int(os.getenv("HIERSTEIN_THREADS", "1") or 1),
        "ATOM_CAP": int(os.getenv("HIERSTEIN_ATOM_CAP", str(DEFAULT_ATOM_CAP))),
        "LOG_LEVEL": (os.getenv("HIERSTEIN_LOG_LEVEL") or "INFO").upper(),
        "LOG_FILE": os.getenv("HIERSTEIN_LOG_FILE") or "",
        "OUT_DIR": os.getenv("HIERSTEIN_OUT_DIR") or "out",
    }


def default_threads() -> int:
    return max(1, _cfg()["THREADS"])


def default_atom_cap() -> int:
    return _cfg()["ATOM_CAP"]


def default_out_dir() -> Path:
    return Path(_cfg()["OUT_DIR"])


def setup_logging(level: str | None = None) -> logging.Logger:
    c = _cfg()
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if c["LOG_FILE"]:
        Path(c["LOG_FILE"]).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(c["LOG_FILE"]))
    logging.basicConfig(
        level=(level or c["LOG_LEVEL"]).upper(),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return logging.getLogger("hierstein")

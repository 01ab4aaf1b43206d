"""Named instances that exhibit the known gaps of index policies and LP relaxations."""
import logging
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.errors import ParameterOutOfRange
from src.core.settings import section
from src.core.types import DEFAULT_DELTA, FeedbackArm, FeedbackInstance, Machine, ReplenishInstance

# --- Configuration ---
_GALLERY = section("gallery")
DETERMINISTIC_BETA = _GALLERY["deterministic_beta"]
MYOPIC_MAX_N = _GALLERY["myopic_max_n"]

NAMES = ("myopic-gap", "index-gap", "lp-gap", "nonseparable-gap", "replenish-gap")
DEFAULT_N = {"myopic-gap": 12, "lp-gap": 50, "nonseparable-gap": 10, "replenish-gap": 10}
DEFAULT_LP_BETA = 1e-5
_ID_PATTERN = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GalleryId:
    """Gallery family name with its parameters."""
    name: str
    n: Optional[int] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise ParameterOutOfRange(f"gallery name {self.name!r} must be one of {NAMES}")
        if self.name == "index-gap":
            return
        n = DEFAULT_N[self.name] if self.n is None else int(self.n)
        object.__setattr__(self, "n", n)
        if self.name == "myopic-gap" and not 2 <= n <= MYOPIC_MAX_N:
            raise ParameterOutOfRange(f"myopic-gap n = {n} outside expected range [2, {MYOPIC_MAX_N}]")
        if self.name == "lp-gap":
            beta = DEFAULT_LP_BETA if self.beta is None else float(self.beta)
            if n < 2:
                raise ParameterOutOfRange(f"lp-gap n = {n} must be >= 2")
            if not 0 < beta < 0.5:
                raise ParameterOutOfRange(f"lp-gap beta = {beta} outside expected range (0, 0.5)")
            object.__setattr__(self, "beta", beta)
        if self.name in ("nonseparable-gap", "replenish-gap") and n < 2:
            raise ParameterOutOfRange(f"{self.name} n = {n} must be >= 2")

    @classmethod
    def parse(cls, text):
        """Reads ``name`` or ``name(n)`` / ``lp-gap(n, beta)``."""
        match = _ID_PATTERN.match(text)
        if not match:
            raise ParameterOutOfRange(f"cannot parse gallery id {text!r}")
        name, args = match.group(1), match.group(2)
        values = [a.strip() for a in args.split(",")] if args else []
        try:
            n = int(values[0]) if values else None
            beta = float(values[1]) if len(values) > 1 else None
        except ValueError as e:
            raise ParameterOutOfRange(f"cannot parse gallery parameters in {text!r}: {e}")
        return cls(name, n, beta)

    def label(self):
        if self.name == "index-gap":
            return self.name
        if self.name == "lp-gap":
            return f"{self.name}({self.n}, {self.beta:g})"
        return f"{self.name}({self.n})"


def deterministic_arm(r=1.0, beta=DETERMINISTIC_BETA, delta=DEFAULT_DELTA):
    """Reward-r arm that is good almost surely at every step."""
    return FeedbackArm(alpha=1.0 - delta - 2.0 * beta, beta=beta, r=r, delta=delta)


def complete_information_bound(n):
    """Reward of always playing a good arm when one exists among n i.i.d. rare-good arms."""
    return 1.0 - (1.0 - 1.0 / n) ** n


def myopic_gap(n):
    beta = 2.0 ** -n
    arms = [deterministic_arm()] + [FeedbackArm(alpha=beta / (n - 1), beta=beta, r=float(n)) for _ in range(n)]
    return FeedbackInstance(tuple(arms))


def index_gap():
    stochastic = FeedbackArm(alpha=0.1, beta=0.1, r=2.0)
    return FeedbackInstance((deterministic_arm(), stochastic, stochastic))


def lp_gap(n, beta):
    return FeedbackInstance(tuple(FeedbackArm(alpha=beta / (n - 1), beta=beta, r=1.0) for _ in range(n)))


def nonseparable_gap(n):
    """Three-state arms whose transition probabilities are not of the form f_k(t)·q(k, j).

    Returned as an instance document only; no solver accepts it.
    """
    late = 2 * n - 1
    arm = {
        "states": ["g", "b", "a"],
        "rewards": [1.0, 0.0, 0.0],
        "initial_state": 1,
        "transitions": {
            "g": {"b": [[1, 0.5]], "a": [[1, 0.0], [2, 0.5]]},
            "b": {"g": [[1, 0.0], [late - 1, 0.0], [late, 0.5]],
                  "a": [[1, 0.0], [late, 0.0], [late + 1, 0.5]]},
            "a": {},
        },
    }
    return {"type": "monotone-nonseparable", "n": n, "arms": [arm] * n}


def replenish_gap(n):
    machines = (
        Machine(rewards=(1.0, 0.0), costs=(0.0, 0.0), p=np.array([[1.0 - 1.0 / n, 1.0 / n], [0.0, 1.0]]),
                s=1.0 / n ** 4),
        Machine(rewards=(1.0, 0.0), costs=(0.0, 0.0), p=np.array([[0.0, 1.0], [0.0, 1.0]]), s=1.0),
    )
    return ReplenishInstance(machines, M=1)


def generate(gallery_id):
    """Builds the instance named by ``gallery_id`` (a GalleryId or its text form)."""
    gid = GalleryId.parse(gallery_id) if isinstance(gallery_id, str) else gallery_id
    if gid.name == "myopic-gap":
        instance = myopic_gap(gid.n)
    elif gid.name == "index-gap":
        instance = index_gap()
    elif gid.name == "lp-gap":
        instance = lp_gap(gid.n, gid.beta)
    elif gid.name == "nonseparable-gap":
        instance = nonseparable_gap(gid.n)
    else:
        instance = replenish_gap(gid.n)
    logger.debug(f"Generated gallery instance {gid.label()}")
    return instance

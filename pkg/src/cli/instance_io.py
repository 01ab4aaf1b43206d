"""Canonical JSON documents for instances.

Field order is fixed and reals are written with ``repr`` (shortest string that
reads back to the same double), so load(emit(x)) reproduces x exactly.
"""
import json
import logging
from pathlib import Path

from src.cli.schemas import INSTANCE_ADAPTER
from src.core.errors import ShapeMismatch
from src.core.types import DEFAULT_DELTA, FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance

logger = logging.getLogger(__name__)


def _reals(values):
    return [float(v) for v in values]


def _matrix(m):
    return [_reals(row) for row in m]


def instance_to_document(instance):
    if isinstance(instance, dict):
        return instance
    if isinstance(instance, FeedbackInstance):
        return {
            "type": "feedback",
            "delta": float(instance.delta),
            "arms": [{"alpha": a.alpha, "beta": a.beta, "r": a.r} for a in instance.arms],
        }
    if isinstance(instance, MonotoneInstance):
        arms = []
        for arm in instance.arms:
            states = [{"reward": s.reward, "duration": s.duration,
                       "f_breakpoints": [[t, v] for t, v in s.escape.breakpoints]} for s in arm.states]
            arms.append({"states": states, "q": _matrix(arm.q), "initial_state": arm.initial_state})
        return {
            "type": "monotone",
            "delta": DEFAULT_DELTA,
            "M": instance.M,
            "switch_out": _reals(instance.switch_out),
            "switch_in": _reals(instance.switch_in),
            "arms": arms,
        }
    if isinstance(instance, ProbeInstance):
        return {
            "type": "probe",
            "delta": float(instance.delta),
            "M": instance.M,
            "arms": [{"alpha": pa.arm.alpha, "beta": pa.arm.beta, "r": pa.arm.r, "cost": pa.cost}
                     for pa in instance.arms],
        }
    if isinstance(instance, ReplenishInstance):
        return {
            "type": "replenish",
            "delta": DEFAULT_DELTA,
            "M": instance.M,
            "machines": [{"rewards": _reals(m.rewards), "costs": _reals(m.costs), "p": _matrix(m.p),
                          "s": m.s, "initial": m.initial} for m in instance.machines],
        }
    raise ShapeMismatch(f"cannot serialise {type(instance).__name__}")


def dumps_instance(instance):
    return json.dumps(instance_to_document(instance), indent=2)


def emit_instance(instance, path=None):
    """Writes the canonical document to ``path`` and returns its text."""
    text = dumps_instance(instance)
    if path is not None:
        Path(path).write_text(text + "\n")
        logger.info(f"Instance written to {path}")
    return text


def document_to_instance(document):
    """Validates a document against the InstanceFile schema and builds the core instance."""
    return INSTANCE_ADAPTER.validate_python(document).to_instance()


def loads_instance(text):
    return document_to_instance(json.loads(text))


def load_instance(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Instance file not found at {path}")
    instance = loads_instance(path.read_text())
    logger.info(f"Loaded {type(instance).__name__} from {path}")
    return instance

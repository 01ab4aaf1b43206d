import pytest

from src.core.errors import ParameterOutOfRange
from src.core.types import FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance
from src.gallery.instances import (
    DEFAULT_N, NAMES, GalleryId, complete_information_bound, deterministic_arm, generate, index_gap, lp_gap,
    myopic_gap, nonseparable_gap, replenish_gap,
)
from src.gallery.random_instances import (
    random_feedback_instance, random_monotone_instance, random_probe_instance, random_replenish_instance,
)


# Test gallery ids
@pytest.mark.parametrize("text, label", [
    ("index-gap", "index-gap"),
    ("lp-gap", "lp-gap(50, 1e-05)"),
    ("lp-gap(50, 1e-5)", "lp-gap(50, 1e-05)"),
    ("replenish-gap", "replenish-gap(10)"),
    ("myopic-gap(8)", "myopic-gap(8)"),
    (" nonseparable-gap ( 4 ) ", "nonseparable-gap(4)"),
])
def test_gallery_id_labels(text, label):
    assert GalleryId.parse(text).label() == label


def test_gallery_id_defaults():
    for name in NAMES:
        gid = GalleryId(name)
        if name != "index-gap":
            assert gid.n == DEFAULT_N[name]


@pytest.mark.parametrize("text, match", [
    ("bandit-gap", "must be one of"),
    ("myopic-gap(41)", "myopic-gap n"),
    ("myopic-gap(1)", "myopic-gap n"),
    ("lp-gap(1)", "must be >= 2"),
    ("lp-gap(10, 0.5)", "lp-gap beta"),
    ("lp-gap(ten)", "cannot parse gallery parameters"),
    ("replenish-gap(1)", "must be >= 2"),
    ("lp gap!", "cannot parse gallery id"),
])
def test_gallery_id_rejects(text, match):
    with pytest.raises(ParameterOutOfRange, match=match):
        GalleryId.parse(text)


# Test instance parameters
def test_deterministic_arm():
    arm = deterministic_arm()
    assert arm.beta == pytest.approx(1e-9)
    assert arm.alpha + arm.beta == pytest.approx(1.0 - arm.delta - arm.beta)
    assert arm.r == 1.0


def test_myopic_gap_shape():
    instance = myopic_gap(12)
    assert instance.n == 13
    assert instance.arms[0].r == 1.0
    for arm in instance.arms[1:]:
        assert arm.r == 12.0
        assert arm.beta == pytest.approx(2.0 ** -12)
        assert arm.alpha == pytest.approx(2.0 ** -12 / 11)


def test_index_gap_shape():
    instance = index_gap()
    assert instance.n == 3
    assert (instance.arms[1].alpha, instance.arms[1].beta, instance.arms[1].r) == (0.1, 0.1, 2.0)
    assert instance.arms[1] == instance.arms[2]


def test_lp_gap_shape():
    instance = lp_gap(50, 1e-5)
    assert instance.n == 50
    assert all(a.alpha == pytest.approx(1e-5 / 49) and a.r == 1.0 for a in instance.arms)


def test_complete_information_bound():
    assert complete_information_bound(2) == pytest.approx(0.75)
    assert complete_information_bound(50) == pytest.approx(1.0 - 0.98 ** 50)
    assert complete_information_bound(10_000) == pytest.approx(1.0 - 1.0 / 2.718281828, abs=1e-4)


def test_replenish_gap_shape():
    instance = replenish_gap(10)
    fragile, broken = instance.machines
    assert fragile.s == pytest.approx(1e-4)
    assert fragile.p[0][1] == pytest.approx(0.1)
    assert broken.s == 1.0
    assert broken.p[0][1] == 1.0


def test_nonseparable_document():
    document = nonseparable_gap(4)
    assert document["type"] == "monotone-nonseparable"
    assert len(document["arms"]) == 4
    arm = document["arms"][0]
    assert arm["states"] == ["g", "b", "a"]
    assert arm["transitions"]["b"]["g"][-1] == [7, 0.5]


@pytest.mark.parametrize("text, kind", [
    ("index-gap", FeedbackInstance),
    ("lp-gap(5, 0.01)", FeedbackInstance),
    ("myopic-gap(4)", FeedbackInstance),
    ("replenish-gap(3)", ReplenishInstance),
    ("nonseparable-gap(3)", dict),
])
def test_generate(text, kind):
    assert isinstance(generate(text), kind)


# Test random generators produce valid instances
def test_random_instances(rng):
    for _ in range(10):
        feedback = random_feedback_instance(rng)
        assert all(0 < a.alpha + a.beta <= 1 - a.delta for a in feedback.arms)
        assert isinstance(random_monotone_instance(rng), MonotoneInstance)
        assert isinstance(random_probe_instance(rng, M=2), ProbeInstance)
        assert isinstance(random_replenish_instance(rng), ReplenishInstance)


def test_random_monotone_switching(rng):
    instance = random_monotone_instance(rng, switching=True)
    assert instance.has_switching
    assert instance.M == 1

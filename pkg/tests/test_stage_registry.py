"""Tests for the stage registry and decorator."""

from rlunlearn.pipeline.registry import StageRegistry, stage, stage_registry
from rlunlearn.pipeline.stages import ENV, LEMMA, METRICS, POLICY_FINAL


def test_register_and_get():
    registry = StageRegistry()

    @stage("alpha", requires=("a.json",), produces=("b.json",), registry=registry)
    def alpha(run):
        return "done"

    info = registry.get_stage("alpha")
    assert info is not None
    assert info.func is alpha
    assert info.requires == ("a.json",)
    assert info.produces == ("b.json",)
    assert info.parallel is False
    assert info.module == __name__


def test_default_name_from_function():
    registry = StageRegistry()

    @stage(registry=registry)
    def write_report(run):
        pass

    assert registry.names() == ["write-report"]


def test_registration_order_is_kept():
    registry = StageRegistry()
    for name in ("c", "a", "b"):
        registry.register(lambda run: None, name)
    assert registry.names() == ["c", "a", "b"]
    assert list(registry.list_stages()) == ["c", "a", "b"]


def test_overwrite_keeps_position():
    registry = StageRegistry()
    registry.register(lambda run: 1, "x")
    registry.register(lambda run: 2, "y")
    registry.register(lambda run: 3, "x")
    assert registry.names() == ["x", "y"]
    assert registry.get_stage("x").func(None) == 3


def test_missing_stage_is_none():
    assert StageRegistry().get_stage("nope") is None


def test_pipeline_stages_registered_in_order():
    assert stage_registry.names() == [
        "gen-env",
        "coldstart",
        "train",
        "eval",
        "lemma-verify",
        "report",
    ]
    assert stage_registry.get_stage("gen-env").produces == (ENV,)
    assert POLICY_FINAL in stage_registry.get_stage("eval").requires
    assert METRICS in stage_registry.get_stage("report").requires
    assert stage_registry.get_stage("lemma-verify").produces == (LEMMA,)


def test_parallel_flags():
    parallel = {name for name, info in stage_registry.list_stages().items() if info.parallel}
    assert parallel == {"train", "eval", "lemma-verify"}

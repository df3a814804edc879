import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from svclbp.model import SKIP, BandwidthTrace, ModelError, VideoSpec, deadline_of, make_config
from svclbp.scans import Window, forward_scan, plan_offline_skip, plan_window
from svclbp.validate import check_plan

from instances import golden_skip_instance, random_instance


def window(bandwidth, sizes=((1000,), (1000,)), deadlines=(1, 2)):
    return Window([list(s) for s in sizes], list(deadlines), list(bandwidth), capacity=4)


def test_forward_scan_shares_a_slot():
    fwd = forward_scan(window([2000, 2000]), [0, 0])
    assert fwd.start == [1, 1] and fwd.head == [1000, 1000] and fwd.residual == [0, 2000]


def test_forward_scan_one_chunk_per_slot():
    fwd = forward_scan(window([1000, 1000]), [0, 0])
    assert fwd.start == [1, 2] and fwd.residual == [0, 0]


def test_forward_scan_skipped_chunk_untouched():
    fwd = forward_scan(window([5], sizes=((0,),), deadlines=(1,)), [SKIP])
    assert fwd.start == [0] and fwd.head == [0] and fwd.residual == [5]


@pytest.mark.parametrize("bandwidth,levels", [([1000, 1000], [0, 0]), ([0, 1000], [SKIP, 0])])
def test_base_layer_choice(bandwidth, levels):
    got, _, _ = plan_window(window(bandwidth), 1)
    assert got == levels


def test_no_bandwidth_skips_everything():
    got, _, _ = plan_window(window([0], sizes=((1000,),), deadlines=(1,)), 1)
    assert got == [SKIP]


def test_unconstrained_single_chunk_gets_top_layer():
    spec = VideoSpec.from_layers(1, 1, [1000, 500])
    plan = plan_offline_skip(spec, make_config(spec, 1, 4), BandwidthTrace((10**6,)))
    assert plan.levels == (1,)


def test_golden_lower_deadlines():
    spec, config, trace = golden_skip_instance()
    plan = plan_offline_skip(spec, config, trace)
    assert plan.lower == (1, 1, 2, 0, 3, 4, 5, 6, 11, 11)
    assert plan.layer_sets() == [[1, 2, 3, 5, 6, 7, 8, 9, 10], [5, 6, 7, 8, 9, 10]]


def test_invalid_weights_rejected():
    spec = VideoSpec.from_layers(3, 1, [10, 500])
    config = make_config(spec, 1, 2, gamma=Fraction(99, 100))
    with pytest.raises(ModelError):
        plan_offline_skip(spec, config, BandwidthTrace((10,) * 5))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_plans_execute_as_planned(seed):
    inst = random_instance(random.Random(seed), max_chunks=12)
    plan = plan_offline_skip(inst.spec, inst.config, inst.trace, check_weights=False)
    check_plan(plan, inst.spec, inst.config, inst.trace)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_per_chunk_sizes_plan_is_feasible(seed):
    rng = random.Random(seed)
    C, L = rng.randint(1, 10), rng.randint(1, 3)
    layers = [[rng.randint(1, 9) for _ in range(C)] for _ in range(rng.randint(1, 3))]
    spec = VideoSpec.from_layers(C, L, layers)
    config = make_config(spec, rng.randint(0, 4), rng.randint(1, 4) * L)
    trace = BandwidthTrace(tuple(rng.randint(0, 12) for _ in range(C * L + 5)))
    plan = plan_offline_skip(spec, config, trace, check_weights=False)
    check_plan(plan, spec, config, trace)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scan_iterations_bounded(seed):
    inst = random_instance(random.Random(seed), max_chunks=30)
    plan = plan_offline_skip(inst.spec, inst.config, inst.trace, check_weights=False)
    C = inst.spec.num_chunks
    bound = C + deadline_of(C, inst.spec.chunk_duration, inst.config.startup_delay) + 1
    assert max(plan.scan_iterations) <= bound

import random

import pytest
from hypothesis import given, settings, strategies as st

from svclbp.model import BandwidthTrace, Mode, ModelError, VideoSpec, make_config
from svclbp.noskip import base_backward_reposition, base_forward_stalls, plan_offline_noskip
from svclbp.oracle import enumerate_optimal_noskip
from svclbp.validate import check_plan

from instances import golden_stall_instance, random_instance


def noskip(C, layers, s, buffer, L=1):
    spec = VideoSpec.from_layers(C, L, layers)
    return spec, make_config(spec, s, buffer, mode=Mode.NOSKIP)


def test_forward_stalls_hand_example():
    spec, config = noskip(2, [2000], 1, 10)
    stalls, _ = base_forward_stalls(spec, config, BandwidthTrace((1000,) * 4))
    assert stalls == [1, 2]


def test_everything_fits_before_first_deadline():
    spec, config = noskip(3, [100], 1, 3)
    stalls, _ = base_forward_stalls(spec, config, BandwidthTrace((300, 0, 0)))
    assert stalls == [0, 0, 0]
    shifted, _ = base_backward_reposition(spec, config, BandwidthTrace((300, 0, 0)), stalls)
    assert shifted == [0, 0, 0]


def test_abundant_bandwidth_gives_top_quality():
    spec, config = noskip(4, [100, 50, 50], 1, 4)
    plan = plan_offline_noskip(spec, config, BandwidthTrace((10**4,) * 8))
    assert plan.levels == (2, 2, 2, 2) and plan.total_stall == 0


def test_golden_plan_is_base_only_with_stalls_up_front():
    spec, config, trace = golden_stall_instance(4)
    plan = plan_offline_noskip(spec, config, trace)
    assert plan.levels == (0,) * 7
    assert plan.stalls == (5,) * 7
    check_plan(plan, spec, config, trace)


def test_golden_small_buffer_keeps_a_mid_stream_stall():
    spec, config, trace = golden_stall_instance(3)
    forward, _ = base_forward_stalls(spec, config, trace)
    shifted, _ = base_backward_reposition(spec, config, trace, forward)
    assert shifted == [3, 5, 5, 5, 5, 5, 5]


def test_trace_too_short_is_an_error():
    spec, config = noskip(3, [100], 1, 3)
    with pytest.raises(ModelError):
        base_forward_stalls(spec, config, BandwidthTrace((100, 0)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reposition_keeps_total_and_only_delays(seed):
    inst = random_instance(random.Random(seed), Mode.NOSKIP, max_chunks=12)
    forward, _ = base_forward_stalls(inst.spec, inst.config, inst.trace)
    shifted, _ = base_backward_reposition(inst.spec, inst.config, inst.trace, forward)
    assert shifted[-1] == forward[-1]
    assert all(a <= b for a, b in zip(shifted, shifted[1:]))
    assert all(f <= d for f, d in zip(forward, shifted))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_noskip_plans_execute_as_planned(seed):
    inst = random_instance(random.Random(seed), Mode.NOSKIP, max_chunks=12)
    plan = plan_offline_noskip(inst.spec, inst.config, inst.trace, check_weights=False)
    check_plan(plan, inst.spec, inst.config, inst.trace)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forward_stall_total_is_minimal(seed):
    inst = random_instance(random.Random(seed), Mode.NOSKIP, max_chunks=7)
    stalls, _ = base_forward_stalls(inst.spec, inst.config, inst.trace)
    assert stalls[-1] == enumerate_optimal_noskip(inst.spec, inst.config, inst.trace).min_stall

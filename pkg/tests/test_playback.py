import random

from hypothesis import given, settings, strategies as st

from svclbp.model import SKIP, BandwidthTrace, LayerPlan, Mode, VideoSpec, make_config
from svclbp.playback import InOrderPolicy, SimulatorState, execute_plan, run_session, step
from svclbp.scans import plan_offline_skip
from svclbp.validate import check_session

from instances import random_instance


def small(mode=Mode.SKIP):
    spec = VideoSpec.from_layers(2, 1, [10, 5])
    return spec, make_config(spec, 1, 2, mode=mode)


def test_step_fetch_progress():
    spec, config = small()
    state = SimulatorState(spec, config)
    nxt = step(state, 4, InOrderPolicy([15, 15]))
    assert nxt.delivered == [4, 0] and state.delivered == [0, 0]
    assert nxt.first_touch == [1, 0] and nxt.slot == 2


def test_step_playback_advances_at_deadline():
    spec, config = small()
    nxt = step(SimulatorState(spec, config), 20, InOrderPolicy([10, 10]))
    assert nxt.played[0] == 0 and nxt.next_play == 1 and nxt.play_slot[0] == 1
    assert nxt.delivered == [10, 10]


def test_step_stalls_without_base_in_noskip():
    spec, config = small(Mode.NOSKIP)
    nxt = step(SimulatorState(spec, config), 3, InOrderPolicy([10, 10]))
    assert nxt.stall == 1 and nxt.next_play == 0 and nxt.played[0] is None


def test_step_skips_without_base_in_skip_mode():
    spec, config = small()
    nxt = step(SimulatorState(spec, config), 3, InOrderPolicy([10, 10]))
    assert nxt.played[0] == SKIP and nxt.next_play == 1


def test_all_skipped_plan_uses_no_bandwidth():
    spec, config = small()
    plan = LayerPlan(levels=(SKIP, SKIP), sizes=(0, 0), deadlines=(1, 2), lower=(0, 0), head=(0, 0),
                     residual=(0, 0), stalls=(0, 0), mode=Mode.SKIP, scan_iterations=())
    log = execute_plan(plan, spec, config, BandwidthTrace((100, 100)))
    assert log.levels == [SKIP, SKIP] and sum(log.received_kb) == 0 and log.play_slot == [1, 2]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_plan_on_weaker_trace_delivers_no_more(seed):
    inst = random_instance(random.Random(seed), max_chunks=10)
    plan = plan_offline_skip(inst.spec, inst.config, inst.trace, check_weights=False)
    halved = BandwidthTrace(tuple(b // 2 for b in inst.trace.capacities))
    log = execute_plan(plan, inst.spec, inst.config, halved)
    check_session(log, inst.spec, inst.config, halved)
    assert all(got <= want for got, want in zip(log.delivered_kb, plan.sizes))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_in_order_sessions_are_clean_in_both_modes(seed):
    rng = random.Random(seed)
    mode = rng.choice([Mode.SKIP, Mode.NOSKIP])
    inst = random_instance(rng, mode, max_chunks=10)
    table = inst.spec.cumulative_table()
    sizes = [row[rng.randrange(len(row))] for row in table]
    log = run_session(inst.spec, inst.config, inst.trace, InOrderPolicy(sizes))
    check_session(log, inst.spec, inst.config, inst.trace)
    assert sum(log.received_kb) == sum(log.delivered_kb) + log.wasted_kb

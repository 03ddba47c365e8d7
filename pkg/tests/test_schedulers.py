from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msrpt.schedulers import (
    Assignment,
    PolicyError,
    PolicyKind,
    PolicySpec,
    assignment_violations,
    decide,
    decide_fcfs,
    decide_m_chi_srpt,
    decide_m_srpt,
    decide_psjf_single_fast,
    decide_srpt_single_fast,
    parse_policy,
)

from conftest import state


def served_jobs(asg: Assignment) -> list:
    return [s[0] if s else None for s in asg.slots]


def test_m_srpt_two_smallest():
    st_ = state(2, {0: (0, [5], [5]), 1: (0, [3], [3]), 2: (0, [9], [9])})
    assert sorted(served_jobs(decide_m_srpt(st_))) == [0, 1]


def test_m_srpt_keeps_pinned():
    st_ = state(2, {0: (0, [5], [5]), 1: (0, [3], [3]), 2: (0, [9], [8], [False])}, pinned={0: (2, 0)})
    asg = decide_m_srpt(st_)
    assert asg.slots[0] == (2, 0) and asg.slots[1] == (1, 0)


def test_m_srpt_parallel_tasks_single_job():
    st_ = state(3, {0: (0, [1, 2], [1, 2])}, parallel=True)
    asg = decide_m_srpt(st_)
    assert served_jobs(asg).count(0) == 2 and asg.idle == 1


def test_m_srpt_parallel_second_pass_after_everyone():
    st_ = state(3, {0: (0, [1, 1], [1, 1]), 1: (0, [5], [5]), 2: (0, [7], [7])}, parallel=True)
    assert sorted(served_jobs(decide_m_srpt(st_))) == [0, 1, 2]


def test_m_srpt_shortest_task_first():
    st_ = state(1, {0: (0, [3, 1, 2], [3, 1, 2])})
    assert decide_m_srpt(st_).slots == ((0, 1),)


def test_m_chi_srpt_fifo_pool():
    # the 0.7 job arrived first; both small jobs are served in arrival order
    st_ = state(2, {0: (1.0, [0.5], [0.5]), 1: (0.0, [0.7], [0.7]), 2: (0.0, [4], [4])})
    asg = decide_m_chi_srpt(st_, 1.0)
    assert served_jobs(asg) == [1, 0]
    st_ = state(1, {0: (1.0, [0.5], [0.5]), 1: (0.0, [0.7], [0.7]), 2: (0.0, [4], [4])})
    assert served_jobs(decide_m_chi_srpt(st_, 1.0)) == [1]


def test_m_chi_small_threshold_equals_m_srpt():
    st_ = state(2, {0: (0, [5], [5]), 1: (1, [3], [3]), 2: (2, [9], [9])})
    assert decide_m_chi_srpt(st_, 0.001) == decide_m_srpt(st_)


def test_m_chi_large_threshold_is_fifo():
    st_ = state(2, {0: (2, [1], [1]), 1: (1, [3], [3]), 2: (0, [9], [9])})
    assert served_jobs(decide_m_chi_srpt(st_, 100.0)) == [2, 1]


def test_m_chi_rejects_nonpositive():
    with pytest.raises(PolicyError):
        decide_m_chi_srpt(state(1, {}), 0.0)
    with pytest.raises(PolicyError):
        PolicySpec(PolicyKind.M_CHI_SRPT, chi=-1)
    with pytest.raises(PolicyError):
        PolicySpec(PolicyKind.M_SRPT, chi=1)


def test_single_fast_policies():
    st_ = state(1, {0: (0, [5], [5]), 1: (0, [3], [3])}, speed=4.0)
    asg = decide_srpt_single_fast(st_)
    assert served_jobs(asg) == [1] and asg.rate(1) == 4.0
    st_ = state(1, {0: (0, [3], [3]), 1: (0, [3], [3])})
    assert served_jobs(decide_srpt_single_fast(st_)) == [0]
    assert decide_srpt_single_fast(state(1, {})).slots == (None,)
    st_ = state(1, {0: (0, [5], [0.1]), 1: (0, [3], [3])})
    assert served_jobs(decide_psjf_single_fast(st_)) == [1]
    assert served_jobs(decide_psjf_single_fast(state(1, {7: (0, [2], [1])}))) == [7]
    st_ = state(1, {4: (0, [3], [3]), 2: (0, [3], [1])})
    assert served_jobs(decide_psjf_single_fast(st_)) == [2]


def test_fcfs():
    st_ = state(1, {0: (2, [1], [1]), 1: (1, [5], [5])})
    assert served_jobs(decide_fcfs(st_)) == [1]
    st_ = state(2, {0: (2, [1], [1]), 1: (1, [5], [5]), 2: (0, [9], [9])})
    assert served_jobs(decide_fcfs(st_)) == [2, 1]
    assert decide_fcfs(state(2, {})).idle == 2
    st_ = state(1, {0: (0, [3, 1], [3, 1])})
    assert decide_fcfs(st_).slots == ((0, 0),)


@pytest.mark.parametrize(
    "text,spec",
    [
        ("m-srpt", PolicySpec(PolicyKind.M_SRPT)),
        ("M-SRPT", PolicySpec(PolicyKind.M_SRPT)),
        ("m-chi-srpt:0.5", PolicySpec(PolicyKind.M_CHI_SRPT, 0.5)),
        ("srpt1n", PolicySpec(PolicyKind.SRPT_1N)),
        ("psjf1n", PolicySpec(PolicyKind.PSJF_1N)),
        ("fcfs", PolicySpec(PolicyKind.FCFS)),
        ("brute", PolicySpec(PolicyKind.BRUTE_OPT)),
    ],
)
def test_parse_policy(text, spec):
    assert parse_policy(text) == spec
    assert parse_policy(str(spec)) == spec


@pytest.mark.parametrize("bad", ["nope", "m-chi-srpt", "m-chi-srpt:x", "m-srpt:1", "m-chi-srpt:0"])
def test_parse_policy_errors(bad):
    with pytest.raises(PolicyError):
        parse_policy(bad)


def test_decide_rejects_oracle():
    with pytest.raises(PolicyError):
        decide(PolicySpec(PolicyKind.BRUTE_OPT), state(1, {}))


# --- random states ---------------------------------------------------------------

job_st = st.tuples(
    st.floats(0, 10),
    st.lists(st.tuples(st.floats(0.1, 5), st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=4),
)


@st.composite
def random_state(draw):
    N = draw(st.integers(1, 4))
    parallel = draw(st.booleans())
    specs = draw(st.lists(job_st, max_size=7))
    jobs = {}
    for j, (a, tasks) in enumerate(specs):
        sizes = [s for s, _, _ in tasks]
        rem = [s * f if f > 0.05 else s for s, f, _ in tasks]
        flags = [p for _, _, p in tasks]
        jobs[j] = (a, sizes, rem, flags)
    st_ = state(N, jobs, parallel=parallel)
    # pin some started non-preemptive tasks on distinct machines
    m = 0
    for j, js in st_.jobs.items():
        for t in range(len(js.rem)):
            if not js.preemptive[t] and js.rem[t] < js.sizes[t] and m < N and draw(st.booleans()):
                if parallel or j not in {p[0] for p in st_.pinned.values()}:
                    st_.pinned[m] = (j, t)
                    m += 1
    return st_


@settings(max_examples=300, deadline=None)
@given(random_state(), st.sampled_from(["m-srpt", "m-chi-srpt:1", "m-chi-srpt:4", "fcfs"]))
def test_assignment_invariants_random_states(st_, pol):
    asg = decide(parse_policy(pol), st_)
    assert assignment_violations(st_, asg) == []


@settings(max_examples=300, deadline=None)
@given(random_state())
def test_m_srpt_priority_monotone(st_):
    asg = decide_m_srpt(st_)
    pinned_jobs = {j for j, _ in st_.pinned.values()}
    served = {s[0] for s in asg.slots if s}
    unserved = [js.remaining for j, js in st_.jobs.items() if j not in served]
    for j in served - pinned_jobs:
        for r in unserved:
            assert st_.jobs[j].remaining <= r

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msrpt.oracle import OracleTooLarge, brute_force_optimal
from msrpt.schedulers import parse_policy
from msrpt.sim_engine import run, total_flow

from conftest import inst


def test_short_job_preempts():
    schedule, total = brute_force_optimal(inst(1, (0, [3]), (1, [1])))
    assert total == 5.0
    assert schedule


def test_two_unit_jobs_two_machines():
    assert brute_force_optimal(inst(2, (0, [1]), (0, [1]))).total_flow == 2.0


def test_nonpreemptive_runs_short_first():
    assert brute_force_optimal(inst(1, (0, [2], [False]), (0, [1]))).total_flow == 4.0


# frozen values from exhaustive enumeration
def test_rigid_task_blocks_later_arrival():
    i = inst(1, (0, [4], [False]), (1, [1]), (2, [1]))
    assert brute_force_optimal(i).total_flow == 9.0
    assert total_flow(run(i, parse_policy("m-srpt"))) == 12.0


def test_parallel_tasks_lower_optimum():
    seq = inst(2, (0, [1, 2]), (0, [2]), (1, [1]))
    par = inst(2, (0, [1, 2]), (0, [2]), (1, [1]), parallel=True)
    assert brute_force_optimal(par).total_flow <= brute_force_optimal(seq).total_flow


def test_completions_consistent():
    i = inst(2, (0, [2, 1], [False, True]), (1, [1]), (1, [3]))
    res = brute_force_optimal(i)
    assert sum(res.completions[j.id] - j.arrival for j in i.jobs) == res.total_flow


def test_limits():
    with pytest.raises(OracleTooLarge):
        brute_force_optimal(inst(1, *[(0, [1])] * 5))
    with pytest.raises(OracleTooLarge):
        brute_force_optimal(inst(1, (0, [1, 1, 1, 1])))
    with pytest.raises(OracleTooLarge):
        brute_force_optimal(inst(1, (0, [1.5])))
    with pytest.raises(OracleTooLarge):
        brute_force_optimal(inst(2, (0, [4, 4, 4]), (0, [4, 4, 4]), (1, [4, 4, 4]), (2, [4, 4, 4]), parallel=True), max_states=50)


def test_quantum():
    assert brute_force_optimal(inst(1, (0, [1.5]), (0.5, [0.5])), time_quantum=0.5).total_flow == 2.5


@st.composite
def tiny(draw):
    N = draw(st.integers(1, 2))
    n = draw(st.integers(1, 3))
    jobs = []
    for _ in range(n):
        k = draw(st.integers(1, 2))
        jobs.append((draw(st.integers(0, 3)), [draw(st.integers(1, 3)) for _ in range(k)], [draw(st.booleans()) for _ in range(k)]))
    return inst(N, *jobs, parallel=draw(st.booleans()))


@settings(max_examples=150, deadline=None)
@given(tiny())
def test_oracle_lower_bounds_policies(i):
    opt = brute_force_optimal(i).total_flow
    for pol in ("m-srpt", "fcfs", "m-chi-srpt:2"):
        assert opt <= total_flow(run(i, parse_policy(pol))) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 4)), min_size=1, max_size=4))
def test_m_srpt_optimal_on_one_preemptive_machine(jobs):
    i = inst(1, *[(a, [p]) for a, p in jobs])
    assert total_flow(run(i, parse_policy("m-srpt"))) == brute_force_optimal(i).total_flow

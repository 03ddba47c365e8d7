from __future__ import annotations

from msrpt.core_model import Instance, Job
from msrpt.sim_engine import JobState, SimState


def inst(machines, *jobs, parallel=False):
    """jobs: (arrival, sizes) or (arrival, sizes, flags); ids follow argument order."""
    out = []
    for i, spec in enumerate(jobs):
        a, sizes, *flags = spec
        out.append(Job.from_sizes(i, a, sizes, flags[0] if flags else True))
    return Instance(machines, tuple(out), parallel)


def state(machines, jobs, pinned=None, parallel=False, speed=1.0):
    """jobs: {id: (arrival, size_list, rem_list[, flags])}."""
    st = SimState(0.0, machines, speed, parallel)
    for j, spec in jobs.items():
        a, sizes, rem, *flags = spec
        f = flags[0] if flags else [True] * len(sizes)
        st.jobs[j] = JobState(j, a, float(sum(sizes)), list(sizes), list(f), list(rem))
    st.pinned = dict(pinned or {})
    return st


ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])

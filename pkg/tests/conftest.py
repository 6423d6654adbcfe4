import numpy as np
import pytest

from ivpi.bounds import (
    ALWAYS_TAKER,
    COMPLIANCE_TYPES,
    DEFIER,
    DOOMED,
    HELPED,
    HURT,
    NEVER_TAKER,
    OUTCOME_TYPES,
    ResponseTypeDistribution,
)
from ivpi.model import TrialCounts

# PASS/FAIL lines appended by test_acceptance.py, echoed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

# Influenza-vaccine encouragement trial, n = 2861:
# z = physician received reminder letter, x = vaccinated, y = hospitalized.
FLU_COUNTS = {
    (0, 0, 0): 1027, (0, 0, 1): 99, (0, 1, 0): 233, (0, 1, 1): 30,
    (1, 0, 0): 935, (1, 0, 1): 84, (1, 1, 0): 422, (1, 1, 1): 31,
}


@pytest.fixture
def flu_counts():
    return TrialCounts.from_mapping(FLU_COUNTS)


def random_q(rng, monotone=False, cap_nt=None, cap_at=None, alpha=1.0):
    """Random response-type distribution, optionally satisfying the given assumptions."""
    shares = rng.dirichlet([alpha] * 4)
    if monotone:
        shares[COMPLIANCE_TYPES.index(DEFIER)] = 0.0
        shares /= shares.sum()
    q = {}
    for c, s in zip(COMPLIANCE_TYPES, shares):
        dist = rng.dirichlet([alpha] * 4)
        capped = {NEVER_TAKER: (cap_nt, (DOOMED, HELPED)), ALWAYS_TAKER: (cap_at, (DOOMED, HURT))}.get(c)
        if capped and capped[0] is not None:
            cap, risky = capped
            idx = [OUTCOME_TYPES.index(r) for r in risky]
            rest = [i for i in range(4) if i not in idx]
            target = rng.uniform(0, cap)
            dist[idx] *= target / dist[idx].sum()
            dist[rest] *= (1 - target) / dist[rest].sum()
        for r, w in zip(OUTCOME_TYPES, dist):
            q[(c, r)] = s * w
    return ResponseTypeDistribution.from_mapping(q)


@pytest.fixture
def rng():
    return np.random.default_rng(20140517)

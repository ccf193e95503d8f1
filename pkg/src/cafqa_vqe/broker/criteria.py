"""Job-return criteria: reject histograms wildly off the expected distribution."""

from __future__ import annotations

from typing import Mapping, NamedTuple


class CriteriaResult(NamedTuple):
    passed: bool
    deviation: float


def total_variation(observed: Mapping[str, float], expected: Mapping[str, float]) -> float:
    """Half the L1 distance between observed frequencies and expected probabilities."""
    total = sum(observed.values())
    if total <= 0:
        raise ValueError("observed histogram is empty")
    keys = set(observed) | set(expected)
    return 0.5 * sum(abs(observed.get(k, 0) / total - expected.get(k, 0.0)) for k in keys)


def check_return_criteria(observed: Mapping[str, float], expected: Mapping[str, float] | None,
                          threshold: float) -> CriteriaResult:
    """Fail iff the total variation distance exceeds ``threshold``.

    Jobs without an expected distribution always pass (deviation reported as 0).
    A threshold of 1.0 disables the check since TV never exceeds 1.
    """
    if expected is None:
        return CriteriaResult(True, 0.0)
    tv = total_variation(observed, expected)
    return CriteriaResult(tv <= threshold, tv)

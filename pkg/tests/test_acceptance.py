"""Acceptance suite: one test and one verdict line per criterion.

Run on its own with ``pytest tests/test_acceptance.py -v``; the verdict
lines are printed in the terminal summary.  Criterion 9 is exploratory and
only reported.
"""

import pytest

from papalab.acceptance import CRITERIA

SEED = 0


def _fmt(m):
    parts = [f"{m.name}={m.value:.6g}"]
    if m.std_error is not None:
        parts.append(f"se={m.std_error:.3g}")
    if m.reference is not None:
        parts.append(f"ref={m.reference:.6g}")
    if m.threshold is not None:
        parts.append(f"thr={m.threshold:.4g}")
    return " ".join(parts)


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"c{c.number:02d}_{c.name}" for c in CRITERIA])
def test_criterion(criterion, acceptance_report):
    metrics = criterion.run(seed=SEED)
    gated = [m for m in metrics if m.passed is not None]
    ok = all(m.passed for m in gated)
    verdict = ("PASS" if ok else "FAIL") if criterion.gating else "REPORT"
    if len(gated) > 6:
        # long oracle tables: report the count and the closest call
        worst = max(gated, key=lambda m: abs(m.value - m.reference) / m.threshold if m.threshold else 0.0)
        detail = f"{sum(m.passed for m in gated)}/{len(gated)} within threshold; closest {_fmt(worst)}"
    else:
        detail = "; ".join(_fmt(m) for m in (gated or metrics))
    line = f"[{verdict}] criterion {criterion.number:2d} {criterion.name}: {detail}"
    acceptance_report.append(line)
    print(line)
    if criterion.gating:
        failed = [m.name for m in gated if not m.passed]
        assert not failed, f"failed metrics: {failed}"
    else:
        assert metrics

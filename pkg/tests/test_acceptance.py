"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line followed by its individual
checks.  Run standalone with ``python tests/test_acceptance.py`` or through
pytest, where the lines are repeated in the terminal summary.
"""

import pytest

from conftest import ACCEPTANCE_LINES

CRITERIA = [
    ("annulus multipliers", "multipliers2d"),
    ("symbol asymptotics 2D", "symbol2d"),
    ("fixed-point convergence", "fixedpoint2d"),
    ("trivial fixed point", "trivial2d"),
    ("flow-map Jacobian", "jacobian2d"),
    ("3D multipliers", "multipliers3d"),
    ("kernel decay discrimination", "kernels"),
    ("mapped domains", "mapped2d"),
    ("grid convergence", "grid_convergence"),
]


def report(title, result):
    lines = [f"{'PASS' if result.passed else 'FAIL'} {title} [{result.suite}]"]
    lines += [f"    {c.line()}" for c in result.checks]
    return lines


@pytest.mark.slow
@pytest.mark.parametrize("title,suite", CRITERIA, ids=[s for _, s in CRITERIA])
def test_criterion(title, suite, suite_result):
    result = suite_result(suite)
    lines = report(title, result)
    ACCEPTANCE_LINES.extend(lines)
    print("\n".join(lines))
    failed = [c.line() for c in result.checks if not c.passed]
    assert result.passed, "; ".join(failed)


if __name__ == "__main__":
    import sys

    from gradrubin.suites import SUITES

    ok = True
    for title, suite in CRITERIA:
        result = SUITES[suite]()
        ok &= result.passed
        print("\n".join(report(title, result)), flush=True)
    sys.exit(0 if ok else 1)

"""Acceptance gate: every criterion at its stated tolerance.

Heavy solves (the two gap sweeps, the refinement ladder, the two
touching-limit estimates) are shared through a session context, so the
whole gate runs in well under its budgets.  Each test prints the
criterion's pass/fail line and its detail rows.
"""

import pytest

from neckfield import acceptance


@pytest.fixture(scope="module")
def ctx():
    return acceptance.AcceptanceContext()


def _check(result):
    print()
    print(result.line())
    for detail in result.details:
        print(f"    {detail}")
    assert result.passed, "\n".join(result.details)


def test_c1_closed_form_constants(ctx):
    _check(acceptance.criterion_1_closed_form_constants(ctx))


def test_c2_oracle_asymptotics(ctx):
    _check(acceptance.criterion_2_oracle_asymptotics(ctx))


def test_c3_structural_identities(ctx):
    _check(acceptance.criterion_3_structural_identities(ctx))


def test_c4_blowup_rates(ctx):
    _check(acceptance.criterion_4_blowup_rates(ctx))


def test_c5_energy_constants(ctx):
    _check(acceptance.criterion_5_energy_constants(ctx))


def test_c6_degeneracy_and_symmetry(ctx):
    _check(acceptance.criterion_6_degeneracy_and_symmetry(ctx))


def test_c7_blowup_factor_convergence(ctx):
    _check(acceptance.criterion_7_blowup_factor_convergence(ctx))


def test_c8_boundedness_surrogates(ctx):
    _check(acceptance.criterion_8_boundedness_surrogates(ctx))


def test_c9_self_convergence(ctx):
    _check(acceptance.criterion_9_self_convergence(ctx))

import math
from fractions import Fraction

import mpmath as mp
import pytest

from pfslab.diophantine import (
    approx_exponents,
    census_At,
    cf_convergents,
    contfrac_check,
    in_At,
    point_with_exponent,
)
from pfslab.errors import DomainError, ResourceError

GOLDEN = "0.61803398874989484820458683436563811772030917980576286213545"


def test_golden_ratio_fibonacci_convergents():
    cf = cf_convergents(GOLDEN, n_max=12)
    fib = [(1, 1), (1, 2), (2, 3), (3, 5), (5, 8), (8, 13), (13, 21)]
    assert cf.convergents[:7] == fib
    assert all(a == 1 for a in cf.quotients[:12])


def test_sqrt2_minus_1_convergents():
    with mp.workprec(300):
        x = mp.sqrt(2) - 1
    cf = cf_convergents(x, n_max=6)
    assert cf.convergents[:3] == [(1, 2), (2, 5), (5, 12)]


def test_rational_terminates():
    cf = cf_convergents(Fraction(3, 7), n_max=10)
    assert cf.terminated
    assert cf.convergents[-1] == (3, 7)
    rs, limsup = approx_exponents(cf)
    assert math.isnan(limsup) or limsup == float("inf") or limsup > 0


def test_determinant_and_monotone_q():
    cf = cf_convergents(mp.pi, n_max=15, prec=320)
    for (a1, q1), (a2, q2) in zip(cf.convergents, cf.convergents[1:]):
        assert a2 * q1 - a1 * q2 in (1, -1)
        assert q2 > q1
    # |x - a_n/q_n| < 1/(q_n q_{n+1})
    x = cf.x_fraction
    for (a1, q1), (a2, q2) in zip(cf.convergents, cf.convergents[1:]):
        assert abs(x - Fraction(a1, q1)) < Fraction(1, q1 * q2)


def test_precision_exhaustion_names_horizon():
    with pytest.raises(ResourceError) as ei:
        cf_convergents(GOLDEN, n_max=500, prec=64)
    assert ei.value.achievable >= 10


def test_golden_exponent_tends_to_2():
    cf = cf_convergents(GOLDEN, n_max=40)
    rs, limsup = approx_exponents(cf, window=5)
    assert abs(limsup - 2.0) < 0.05


@pytest.mark.parametrize("r", [2.5, 3.0, 4.0, 6.0])
def test_point_with_exponent_roundtrip(r):
    for seed in range(20):
        x, meta = point_with_exponent(r, seed=seed, prec=320)
        cf = cf_convergents(x, prec=320)
        _, limsup = approx_exponents(cf, window=4)
        assert abs(limsup - r) <= 0.05, (r, seed, limsup)


def test_point_with_exponent_parity():
    x, meta = point_with_exponent(3.0, seed=11, parity_constraint=True, prec=320)
    cf = cf_convergents(x, prec=320)
    odd = sum(1 for _, q in cf.convergents if q % 2 == 1)
    assert odd >= len(cf.convergents) // 3
    with pytest.raises(DomainError):
        point_with_exponent(2.0)


def test_in_At_examples():
    assert in_At(3, 100, 5, 25) is True  # <15/100> = 0.15 < 5/25
    assert in_At(20, 100, 5, 1000) is True  # q | a q~ -> distance 0
    assert in_At(1, 100, 5, 30) is True  # 0.05 < 5/30
    assert in_At(9, 100, 5, 40) is False  # <45/100> = 0.45 > 5/40


def test_census_At_scaling():
    # |A(t)| ~ q q~ / t within a factor 4 on a grid
    for (q, qt, t) in [(101, 5, 25), (211, 7, 50), (401, 11, 100)]:
        c = census_At(q, qt, t)
        model = q * qt / t
        assert model / 4 <= c + 1 <= 4 * model + 4


def test_contfrac_check_chain():
    out = contfrac_check(GOLDEN, 2.5)
    assert out["hypothesis_holds"] and out["all_ok"]
    assert abs(out["r_conjugate"] - (2.5 / 1.5)) < 1e-12
    # an r=3 point must fail the E_{2.5} screen
    x, _ = point_with_exponent(3.0, seed=5, prec=320)
    out = contfrac_check(x, 2.5, prec=320)
    assert out["hypothesis_holds"] is False

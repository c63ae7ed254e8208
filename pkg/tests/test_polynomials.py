import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfslab.errors import DomainError
from pfslab.polynomials import (
    IntPolynomial,
    _mult_by_derivatives,
    _synthetic_mult,
    hensel_count,
    nu_global,
    ramification_profile,
    roots_mult_mod_p,
    splits_mod_p,
)

N2 = IntPolynomial((0, 0, 1))
N3 = IntPolynomial((0, 0, 0, 1))
N3N = IntPolynomial((0, 1, 0, 1))


def test_parse_roundtrip():
    for s, coeffs in [
        ("n^2", (0, 0, 1)),
        ("n^3+n", (0, 1, 0, 1)),
        ("n^3 + n^2 + 1", (1, 0, 1, 1)),
        ("2*n^2 - 3*n + 1", (1, -3, 2)),
        ("5", (5,)),
        ("-n", (0, -1)),
    ]:
        P = IntPolynomial.parse(s)
        assert P.coeffs == coeffs
        assert IntPolynomial.parse(P.to_string()).coeffs == coeffs
        assert IntPolynomial.from_json(P.to_json()) == P


def test_derivative_power_rule():
    assert N2.derivative().coeffs == (0, 2)
    assert N3N.derivative().coeffs == (1, 0, 3)
    assert IntPolynomial((5,)).derivative().coeffs == (0,)


def test_nu_global_examples():
    assert nu_global(N2) == (1, 2)
    assert nu_global(N3) == (2, 2)
    assert nu_global(IntPolynomial((0, 0, 0, 0, 1))) == (3, 3)
    assert nu_global(IntPolynomial((1, 2, 1, 1))) == (1, 2)
    with pytest.raises(DomainError):
        nu_global(IntPolynomial((1, 2)))


def test_nu_global_shift_invariance():
    for P in [N2, N3, N3N, IntPolynomial((7, -3, 0, 2, 1))]:
        base = nu_global(P)
        for c in (-3, 1, 11):
            assert nu_global(P.shift(c)) == base


def test_roots_mult_mod_p_examples():
    nu_fp, B, C = roots_mult_mod_p(N3, 5)
    assert nu_fp == 2 and B == [0] and C == []
    nu_fp, B, C = roots_mult_mod_p(N3N, 5)
    assert nu_fp <= 1  # 3n^2+1 has only simple roots mod 5 (if any)
    nu_fp, B, C = roots_mult_mod_p(N2, 7)
    assert B == [0] and nu_fp == 1
    with pytest.raises(DomainError):
        roots_mult_mod_p(N3, 3)  # p <= k refused
    with pytest.raises(DomainError):
        roots_mult_mod_p(IntPolynomial((0, 0, 5)), 5)  # p | c0


def test_roots_annihilate_dp():
    for P, p in [(N3, 7), (N3N, 11), (IntPolynomial((1, 0, 1, 1)), 13)]:
        dp = P.derivative()
        _, B, C = roots_mult_mod_p(P, p)
        for b in B + C:
            assert dp(b) % p == 0
        assert not set(B) & set(C)


def test_hensel_count_examples():
    assert hensel_count(IntPolynomial((-1, 0, 1)), 3, 2) == 2
    assert hensel_count(N2, 5, 2) == 5
    # i=1 equals brute count mod p
    for Q, p in [(N3N, 7), (IntPolynomial((2, 1, 1)), 11)]:
        brute = sum(1 for r in range(p) if Q(r) % p == 0)
        assert hensel_count(Q, p, 1) == brute
    with pytest.raises(DomainError):
        hensel_count(IntPolynomial((7, 7)), 7, 2)


@given(
    c=st.lists(st.integers(-6, 6), min_size=2, max_size=5),
    p=st.sampled_from([5, 7, 11, 13]),
    i=st.integers(1, 3),
)
@settings(max_examples=60, deadline=None)
def test_hensel_count_vs_exhaustive(c, p, i):
    if all(x % p == 0 for x in c) or all(x == 0 for x in c):
        return
    Q = IntPolynomial(tuple(c))
    if all(x % p == 0 for x in Q.coeffs):
        return
    mod = p ** i
    brute = sum(1 for r in range(mod) if Q(r) % mod == 0)
    assert hensel_count(Q, p, i) == brute


def test_splits_mod_p():
    assert splits_mod_p(N3, 7) is True  # 3n^2 = 3*n*n
    assert splits_mod_p(N2, 11) is True  # linear P'
    # 3n^2+1 splits mod p iff -1/3 is a QR; check against direct root count
    for p in (5, 7, 11, 13, 17):
        roots = sum(1 for b in range(p) if N3N.derivative()(b) % p == 0)
        assert splits_mod_p(N3N, p) == (roots == 2)


def test_two_oracle_multiplicity_agreement():
    for P in [N3, N3N, IntPolynomial((1, 0, 1, 1)), IntPolynomial((0, 0, 0, 0, 1))]:
        d = P.derivative().coeffs
        for p in (7, 11, 13, 101):
            if P.leading % p == 0 or p <= P.degree:
                continue
            for b in range(p):
                m1 = _synthetic_mult(d, b, p)
                m2 = _mult_by_derivatives(d, b, p, P.degree)
                assert m1 == m2


def test_ramification_profile():
    prof = ramification_profile(N3, primes=(5, 7))
    assert prof.nu_F == 2 and prof.nu_0 == 2
    assert prof.per_prime[5][1] == [0]

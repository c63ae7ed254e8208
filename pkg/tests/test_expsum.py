import cmath
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfslab import expsum
from pfslab.errors import DomainError
from pfslab.expsum import (
    SpacedSubsetReport,
    TuranInstance,
    bound_report,
    complete_sum,
    crt_split,
    power_sum_bounds,
    spaced_subset,
    tau_census,
    tau_star,
    turan_fraction,
)
from pfslab.polynomials import IntPolynomial

N2 = IntPolynomial((0, 0, 1))
N3 = IntPolynomial((0, 0, 0, 1))
N3N = IntPolynomial((0, 1, 0, 1))


def test_complete_sum_gauss_examples():
    v = complete_sum(N2, 1, 5).value
    assert abs(v - math.sqrt(5)) < 1e-12  # real Gauss sum
    v = complete_sum(N2, 1, 3).value
    assert abs(v - 1j * math.sqrt(3)) < 1e-12
    assert complete_sum(N3N, 0, 1).value == 1
    assert complete_sum(N2, 0, 7, 0).value == 7  # (a,m)=(0,0) -> q exactly
    with pytest.raises(DomainError):
        complete_sum(N2, 1, 0)


def test_conjugation_symmetry():
    for q in (7, 12, 31):
        for a in (1, 3, 5):
            for m in (0, 1, 4):
                t1 = complete_sum(N3N, q - a, q, m).value
                t2 = complete_sum(N3N, a, q, (-m) % q).value
                assert abs(t1 - t2.conjugate()) < 1e-9


def test_multiplicativity_crt():
    for (q1, q2) in [(5, 7), (3, 11), (4, 9)]:
        q = q1 * q2
        for a in (1, 2, 5):
            if math.gcd(a, q) != 1:
                continue
            a1, a2 = crt_split(a, q1, q2)
            t = abs(complete_sum(N3N, a, q).value)
            t1 = abs(complete_sum(N3N, a1, q1).value)
            t2 = abs(complete_sum(N3N, a2, q2).value)
            assert abs(t - t1 * t2) < 1e-9 * q


def test_tau_star_examples():
    assert abs(tau_star(N3, 5, 1) - 1) < 1e-12  # B={0}, P(0)=0
    assert abs(tau_star(N3, 7, 3) - 1) < 1e-12
    with pytest.raises(DomainError):
        tau_star(N2, 5, 1)  # nu_F = 1


def test_tau_star_matches_brute():
    # brute: sum over all residues b mod p with multiplicity nu_F
    P = IntPolynomial((0, 0, 0, 0, 1))  # n^4, P'=4n^3, nu_F=3
    p = 7
    q = p ** 4
    got = tau_star(P, p, 5)
    want = cmath.exp(2j * math.pi * ((5 * P(0)) % q) / q)
    assert abs(got - want) < 1e-12


def test_bound_report_weil_and_gauss():
    rep = bound_report(N3N, [11])
    weil_rows = [r for r in rep["rows"] if r["weil"] != "na"]
    assert weil_rows and all(r["weil"] == "ok" for r in weil_rows)
    assert max(r["abs"] for r in weil_rows) <= 2 * math.sqrt(11) + 1e-6
    rep = bound_report(N2, [13], a_range=[1], m_range=[0])
    assert rep["rows"][0]["gauss"] == "ok"
    rep = bound_report(N2, [2], a_range=[1], m_range=[0])
    assert rep["rows"][0]["gauss"] == "ok" and rep["rows"][0]["abs"] < 1e-12
    # (0,0) cell is flagged not-applicable, not a failure
    rep = bound_report(N3N, [11], a_range=[0], m_range=[0])
    assert rep["rows"][0]["weil"] == "na"
    assert rep["rows"][0]["abs"] == 11.0


def test_bound_report_hua_pure_power():
    rep = bound_report(N3, [9, 27], a_range=[1, 2, 4], m_range=[0, 3, 5])
    assert rep["hua_C"] > 0


def test_tau_census_gauss_law():
    # P=n^2: Gauss law keeps every reduced a for every odd prime in [Q, 2Q)
    out = tau_census(N2, (0.0, 1.0), 10)
    expect = sum(p - 1 for p in (11, 13, 17, 19))
    assert out["count"] == expect
    out = tau_census(N2, (0.3, 0.3), 10)
    assert out["count"] == 0
    with pytest.raises(DomainError):
        tau_census(N2, (0.0, 1.0), 1)  # [1, 2) holds no prime


def test_tau_census_counts_in_band():
    out = tau_census(N3N, (0.2, 0.4), 100)
    # raw count emitted; sanity band within a generous constant of Q^2|I|/log Q
    model = 100 ** 2 * 0.2 / math.log(100)
    assert 0 < out["count"] < 20 * model


def test_turan_fraction_trivial_and_examples():
    out = turan_fraction(TuranInstance(lambdas=[42], q=101, interval=(0.0, 1.0)))
    assert out["pass"] and out["fraction"] >= 1e-4
    out = turan_fraction(TuranInstance(lambdas=[1, 5, 9], q=997, interval=(0.0, 1.0)))
    assert out["pass"]
    out = turan_fraction(TuranInstance(lambdas=[0, 0], q=50, interval=(0.0, 1.0)))
    assert out["pass"] and out["fraction"] > 0.9
    with pytest.raises(DomainError):
        turan_fraction(TuranInstance(lambdas=[1, 2, 3, 4], q=10, interval=(0.0, 1.0)))


@given(st.data())
@settings(max_examples=120, deadline=None)
def test_turan_fraction_random_admissible(data):
    q = data.draw(st.integers(100, 2000))
    N = data.draw(st.integers(1, 6))
    min_w = N * N / q
    if min_w > 0.45:
        return
    lam = data.draw(st.lists(st.integers(0, 10**6), min_size=N, max_size=N))
    lo = data.draw(st.floats(0.0, 0.5))
    width = data.draw(st.floats(min_w * 1.02, 1.0 - lo))
    out = turan_fraction(TuranInstance(lambdas=lam, q=q, interval=(lo, lo + width)))
    assert out["pass"]


def test_power_sum_examples():
    out = power_sum_bounds(TuranInstance(lambdas=[], q=1, b=[1], z=[1], M=0, H=1))
    assert out["first_ok"] and out["mean_square_ok"]
    z = [cmath.exp(2j * math.pi / 7), cmath.exp(4j * math.pi / 7)]
    out = power_sum_bounds(TuranInstance(lambdas=[], q=1, b=[1, 1], z=z, M=0, H=4))
    assert out["first_ok"] and out["mean_square_ok"] and 1 <= out["witness"] <= 2
    out = power_sum_bounds(TuranInstance(lambdas=[], q=1, b=[1, -1], z=[1, 1], M=0, H=2))
    assert out["first_ok"] and out["mean_square_ok"]  # s0 = 0, vacuous


@given(st.data())
@settings(max_examples=150, deadline=None)
def test_power_sum_random(data):
    N = data.draw(st.integers(1, 8))
    rng = random.Random(data.draw(st.integers(0, 2**31)))
    b = [complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(N)]
    z = [cmath.exp(2j * math.pi * rng.random()) * (1 + rng.random())
         for _ in range(N)]
    M = data.draw(st.integers(0, 8))
    H = data.draw(st.integers(N, 64))
    out = power_sum_bounds(TuranInstance(lambdas=[], q=1, b=b, z=z, M=M, H=H))
    assert out["first_ok"] and out["mean_square_ok"]


def _fractions_x0(interval, Q, n):
    lo, hi = interval
    xs = []
    for p in (11, 13):
        pn = p ** n
        if not Q <= pn < 2 * Q:
            continue
        for a in range(1, pn):
            x = a / pn
            if lo <= x <= hi and math.gcd(a, p) == 1:
                xs.append(x)
    return sorted(xs)


def test_spaced_subset_greedy():
    x0 = _fractions_x0((0.0, 1.0), 1331, 3)
    rep = spaced_subset(x0, x0, (0.0, 1.0), alpha=0.5, power_n=3, Q=1331)
    assert rep.beta_out > rep.guaranteed_beta
    assert rep.min_gap >= 1.0 / len(x0) - 1e-15
    # already-separated X0 is kept whole
    sep = [i / 100 for i in range(0, 100, 5)]  # spacing exactly |I|/|X0|
    rep = spaced_subset(sep, sep, (0.0, 1.0), alpha=0.5)
    assert rep.x2 == sorted(sep)
    with pytest.raises(DomainError):
        spaced_subset(x0, x0[: len(x0) // 3], (0.0, 1.0), alpha=0.5)


def test_exp_sum_value_triangle_invariant():
    v = complete_sum(N3N, 4, 97, 5)
    assert abs(v.value) <= 97 * (1 + 1e-9)

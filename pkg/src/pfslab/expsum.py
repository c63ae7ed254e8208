"""Complete exponential sums tau_m, bound audits, Turan machinery, spacing.

tau_m(a, q) = sum_{n=1}^q e((a P(n) + m n)/q). Phases always come from exact
integer residues mod q; accumulation is Kahan-compensated in fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import DomainError
from .polynomials import IntPolynomial, nu_global, roots_mult_mod_p

TAU_ABS_SLACK = 1e-9  # rounding slack per unit q for |tau| <= q checks


@dataclass(frozen=True)
class ExpSumValue:
    value: complex
    a: int
    q: int
    m: int
    poly: str

    def __post_init__(self):
        if abs(self.value) > self.q * (1 + TAU_ABS_SLACK):
            raise DomainError("computed |tau| exceeds q beyond rounding slack")


@dataclass
class TuranInstance:
    lambdas: list
    q: int
    interval: tuple = (0.0, 1.0)
    b: list = field(default_factory=list)
    z: list = field(default_factory=list)
    M: int = 0
    H: int = 0


@dataclass
class SpacedSubsetReport:
    x0: list
    x1: list
    x2: list
    interval: tuple
    alpha_in: float
    beta_out: float
    min_gap: float
    guaranteed_beta: float


def complete_sum(P, a, q, m=0):
    """Direct O(q) evaluation of tau_m(a, q)."""
    if q <= 0:
        raise DomainError("q must be a positive integer")
    if not 0 <= a < q:
        a = a % q
    if q == 1:
        return ExpSumValue(1 + 0j, 0, 1, m, P.to_string())
    if (a % q, m % q) == (0, 0):
        return ExpSumValue(complex(q), a, q, m, P.to_string())
    val = kernels.tau_single(P.coeffs, q, a, m)
    return ExpSumValue(val, a, q, m % q, P.to_string())


def tau_row(P, a, q):
    """tau_m(a, q) for m = 0..q-1 in one FFT pass."""
    return kernels.tau_all_m(P.coeffs, q, a)


def gauss_tau0_abs(P, q):
    """|tau_0(a, q)| for quadratic P and odd prime q coprime to a and 2c2.

    Classical Gauss-sum law: the modulus is sqrt(q), independent of a.
    """
    if P.degree != 2:
        raise DomainError("gauss fast path needs deg P = 2")
    if q % 2 == 0 or (2 * P.leading) % q == 0:
        raise DomainError("gauss fast path needs odd prime q with q coprime to 2*c2")
    return math.sqrt(q)


def tau_star(P, p, a):
    """tau_* = sum_{b in B} e(a P(b)/q) with q = p^(nu_F+1)."""
    nu_F, _ = nu_global(P)
    if nu_F <= 1:
        raise DomainError("tau_star is undefined in the unramified case nu_F = 1")
    nu_Fp, B, _ = roots_mult_mod_p(P, p)  # also enforces p prime, p > k, p∤c0
    if nu_Fp != nu_F:
        raise DomainError(f"nu_F,p = {nu_Fp} != nu_F = {nu_F} at p = {p}")
    q = p ** (nu_F + 1)
    s = 0j
    for b in B:
        r = (a * P(b)) % q
        s += complex(math.cos(2 * math.pi * r / q), math.sin(2 * math.pi * r / q))
    return s


# ----------------------------------------------------------------------
# bound audits
# ----------------------------------------------------------------------

def _is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _divisor_count_power(q, j):
    """d_j(q): number of ways to write q as an ordered product of j factors."""
    if j < 1:
        return 1
    # factorise q (desk scale)
    fac = {}
    n = q
    d = 2
    while d * d <= n:
        while n % d == 0:
            fac[d] = fac.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        fac[n] = fac.get(n, 0) + 1
    out = 1
    for e in fac.values():
        out *= math.comb(e + j - 1, j - 1)
    return out


def bound_report(P, q_range, a_range=None, m_range=None):
    """Per-(q, a, m) audit rows for the Weil / Gauss / Hua bounds.

    Each row: dict with tau value, per-bound status 'ok' | 'fail' | 'na',
    and the fitted Hua constant accumulated across applicable rows.
    """
    k = P.degree
    rows = []
    hua_applicable = all(c == 0 for c in P.coeffs[:-1])  # P = c0 n^k
    hua_C = 0.0
    for q in q_range:
        a_list = range(q) if a_range is None else [a % q for a in a_range]
        m_list = range(q) if m_range is None else [m % q for m in m_range]
        prime = _is_prime(q)
        for a in a_list:
            taus = kernels.tau_all_m(P.coeffs, q, a)
            for m in m_list:
                t = taus[m % q]
                at = abs(t)
                # Weil: prime q, reduced polynomial aP+mn non-constant mod q
                deg_red = 0
                if a % q != 0:
                    for i in range(k, 0, -1):
                        ci = (a * P.coeffs[i]) % q if i > 1 else (a * P.coeffs[1] + m) % q
                        if ci != 0:
                            deg_red = i
                            break
                elif m % q != 0:
                    deg_red = 1
                weil = "na"
                if prime and q > k and deg_red >= 1:
                    weil = "ok" if at <= (deg_red - 1) * math.sqrt(q) + 1e-6 else "fail"
                gauss = "na"
                if k == 2 and prime and m % q == 0 and a % q != 0:
                    if q == 2:
                        # tau_0(1,2) vanishes exactly when c2 + c1 is odd
                        if (P.coeffs[2] + P.coeffs[1]) % 2 == 1:
                            gauss = "ok" if at <= 1e-12 else "fail"
                    elif (2 * P.leading) % q != 0:
                        gauss = "ok" if abs(at - math.sqrt(q)) <= 1e-9 * math.sqrt(q) else "fail"
                hua = "na"
                if hua_applicable and a % q != 0 and math.gcd(a, q) == 1:
                    denom = _divisor_count_power(q, k - 1) * math.sqrt(q * math.gcd(m, q))
                    hua_C = max(hua_C, at / denom)
                    hua = "ok"
                rows.append({
                    "poly": P.to_string(), "q": q, "a": a, "m": m,
                    "re": t.real, "im": t.imag, "abs": at,
                    "weil": weil, "gauss": gauss, "hua": hua,
                })
    return {"rows": rows, "hua_C": hua_C}


def tau_census(P, interval, Q, eps=0.5, C_threshold=4.0):
    """Census of fractions a/q in `interval` with prime q in [Q, 2Q) and
    |tau_0| >= sqrt(q)/2 (Lemma-style lower-bound census).
    """
    lo, hi = interval
    if hi < lo:
        raise DomainError("empty interval")
    width = hi - lo
    primes = kernels.primes_in_range(Q, 2 * Q)
    if len(primes) == 0:
        raise DomainError(f"no primes in [{Q}, {2*Q})")
    below = Q * width ** (2 + eps) <= C_threshold
    survivors = []
    count = 0
    for q in primes:
        q = int(q)
        a_lo = math.ceil(lo * q)
        a_hi = math.floor(hi * q)
        a_vals = [a for a in range(max(a_lo, 1), min(a_hi, q - 1) + 1)
                  if math.gcd(a, q) == 1]
        if not a_vals:
            continue
        absvals = kernels.tau0_abs_batch(P.coeffs, q, a_vals)
        thr = 0.5 * math.sqrt(q)
        for a, v in zip(a_vals, absvals):
            if v >= thr:
                count += 1
                survivors.append((a, q))
    return {"count": count, "fractions": survivors,
            "below_threshold": bool(below), "n_primes": len(primes)}


# ----------------------------------------------------------------------
# Turan machinery
# ----------------------------------------------------------------------

def turan_fraction(inst):
    """Exhaustive scan of a/q in I for |sum e(lambda_n a/q)| >= (|I|/100)^N.

    Returns the measured proportion (relative to q|I|) and the pass flag
    against the guaranteed proportion (100N)^-2.
    """
    lo, hi = inst.interval
    width = hi - lo
    N = len(inst.lambdas)
    q = inst.q
    if width < N * N / q:
        raise DomainError("Turan lemma needs |I| >= N^2/q")
    lam = [l % q for l in inst.lambdas]
    thresh = (width / 100.0) ** N
    a_lo = math.ceil(lo * q)
    a_hi = math.floor(hi * q)
    count = 0
    total = 0
    tre, tim = kernels.phase_table(q)
    for a in range(a_lo, a_hi + 1):
        sre = sim = 0.0
        for l in lam:
            idx = (l * a) % q
            sre += tre[idx]
            sim += tim[idx]
        total += 1
        if math.hypot(sre, sim) >= thresh:
            count += 1
    fraction = count / (q * width)
    passed = fraction >= 1.0 / (100.0 * N) ** 2
    return {"fraction": fraction, "count": count, "scanned": total, "pass": passed}


def power_sum_bounds(inst):
    """Turan's first main theorem and the mean-square variant.

    s_nu = sum b_n z_n^nu. Checks
      max_{M+1<=nu<=M+N} |s_nu| >= |s_0| (N/(2e(M+N)))^(N-1)
      sum_{nu=1}^H |s_nu|^2 >= |s_0|^2/(e^(8N^2/H)-1)   (H >= N).
    """
    if not inst.z:
        raise DomainError("empty z list")
    if any(abs(z) < 1.0 - 1e-12 for z in inst.z):
        raise DomainError("power-sum theorems need |z_n| >= 1")
    N = len(inst.z)
    M = inst.M
    H = inst.H if inst.H else N
    if H < N:
        raise DomainError("mean-square form needs H >= N")
    b = inst.b if inst.b else [1.0] * N
    s0 = sum(b)
    zs = list(inst.z)
    cur = [complex(x) for x in b]
    smax = 0.0
    witness = None
    sq_sum = 0.0
    top = max(M + N, H)
    for nu in range(1, top + 1):
        cur = [c * z for c, z in zip(cur, zs)]
        s = sum(cur)
        if M + 1 <= nu <= M + N and abs(s) > smax:
            smax = abs(s)
            witness = nu
        if 1 <= nu <= H:
            sq_sum += abs(s) ** 2
    if witness is None:
        witness = M + 1
    rhs1 = abs(s0) * (N / (2 * math.e * (M + N))) ** (N - 1)
    rhs2 = abs(s0) ** 2 / (math.exp(8.0 * N * N / H) - 1.0)
    ok1 = smax >= rhs1 * (1 - 1e-12)
    ok2 = sq_sum >= rhs2 * (1 - 1e-12)
    return {"witness": witness, "max_s": smax, "rhs_first": rhs1, "first_ok": ok1,
            "sq_sum": sq_sum, "rhs_mean_square": rhs2, "mean_square_ok": ok2}


def spaced_subset(x0, x1, interval, alpha, power_n=None, Q=None):
    """Greedy extraction of a |I|/|X0|-separated subset X2 of X1.

    Asserts the lemma's guarantee |X2| > (alpha^2/64000)|X0| and reports the
    achieved proportion.
    """
    x0 = sorted(x0)
    x1s = sorted(x1)
    if not set(x1s) <= set(x0):
        raise DomainError("X1 must be a subset of X0")
    if len(x1s) <= alpha * len(x0):
        raise DomainError("spacing lemma needs |X1| > alpha |X0|")
    lo, hi = interval
    width = float(hi) - float(lo)
    if width <= 0 or not x0:
        raise DomainError("degenerate interval or empty X0")
    if power_n is not None and Q is not None:
        if Q ** (1 - 2.0 / power_n) * width <= 4:
            raise DomainError("spacing lemma needs Q^(1-2/n)|I| > 4")
    gap = width / len(x0)
    x2 = []
    last = None
    for x in x1s:
        if last is None or float(x) - float(last) >= gap * (1 - 1e-12):
            x2.append(x)
            last = x
    beta_guaranteed = alpha * alpha / 64000.0
    achieved = len(x2) / len(x0)
    assert achieved > beta_guaranteed, (
        f"greedy spaced subset fell below the lemma guarantee: "
        f"{achieved} <= {beta_guaranteed}")
    min_gap = min((float(b) - float(a) for a, b in zip(x2, x2[1:])), default=width)
    return SpacedSubsetReport(
        x0=x0, x1=x1s, x2=x2, interval=(float(lo), float(hi)),
        alpha_in=float(alpha), beta_out=achieved, min_gap=min_gap,
        guaranteed_beta=beta_guaranteed)


def crt_split(a, q1, q2):
    """a mod q1*q2 -> (a1, a2) with a/q = a1/q1 + a2/q2 mod 1 (gcd(q1,q2)=1).

    Used by the multiplicativity audit |tau_0(a, q1 q2)| =
    |tau_0(a1 q2^{-1}...)|; returns the matched residues for the audit.
    """
    if math.gcd(q1, q2) != 1:
        raise DomainError("moduli must be coprime")
    inv2 = pow(q2, -1, q1)
    inv1 = pow(q1, -1, q2)
    a1 = (a * inv2) % q1
    a2 = (a * inv1) % q2
    return a1, a2

"""Continued fractions, approximation exponents, and the restricted sets.

Expansions are computed from a high-precision (default 256-bit) dyadic image
of x with exact integer convergent recurrences; the horizon is limited by the
precision check q_n^2 < 2^prec so every reported digit is trustworthy.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from .errors import DomainError, ResourceError

DEFAULT_PREC = 256


@dataclass
class ContinuedFractionExpansion:
    x_num: int  # exact rational image x = x_num/x_den (x_den = 2^prec for
    x_den: int  # dyadic images of irrational inputs)
    quotients: list
    convergents: list  # (a_n, q_n) exact integers
    exponents: list = field(default_factory=list)  # r_n
    exact: bool = False  # input was an exact rational, not a dyadic image
    terminated: bool = False  # expansion ended exactly (rational input)

    @property
    def x_fraction(self):
        return Fraction(self.x_num, self.x_den)

    def to_json(self):
        return {
            "x_hex": hex(self.x_num),
            "den_bits": self.x_den.bit_length() - 1,
            "quotients": list(self.quotients),
            "convergents": [[str(a), str(q)] for a, q in self.convergents],
            "r_n": list(self.exponents),
            "terminated": self.terminated,
        }


def _to_rational(x, prec):
    """(num, den, exact): exact rational image of the input.

    Fractions and floats are taken exactly; strings and mpf values become
    dyadic images at the working precision."""
    if isinstance(x, ContinuedFractionExpansion):
        return x.x_num, x.x_den, x.exact
    if isinstance(x, Fraction):
        return x.numerator, x.denominator, True
    if isinstance(x, int):
        return x, 1, True
    if isinstance(x, float):
        fr = Fraction(*x.as_integer_ratio())
        return fr.numerator, fr.denominator, True
    try:
        with mp.workprec(prec + 16):
            v = mp.mpf(x)
            return int(mp.floor(v * (1 << prec))), 1 << prec, False
    except (TypeError, ValueError):
        raise DomainError(f"cannot take {type(x)} as a real input") from None


def cf_convergents(x, n_max=None, prec=DEFAULT_PREC):
    """Convergents a_n/q_n of x by exact integer recurrence.

    n_max=None takes the expansion to the precision horizon q_n^2 < den
    (no horizon for exact rational inputs, whose expansion is finite).
    An explicit n_max beyond the horizon raises ResourceError naming the
    last trustworthy index; exact rational inputs terminate.
    """
    x_num, den, exact = _to_rational(x, prec)
    num = x_num % den  # work with the fractional part
    quotients = []
    convergents = []
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    cap = n_max if n_max is not None else 1 << 30
    # continued fraction of num/den by exact Euclid
    a_vals = []
    nn, dd = num, den
    while dd and len(a_vals) <= cap + 2:
        a_vals.append(nn // dd)
        nn, dd = dd, nn % dd
    terminated = dd == 0 and len(a_vals) <= cap + 2
    for i, a in enumerate(a_vals):
        if i == 0:
            continue  # integer part; convergents of the fractional part
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        if q * q > den and not exact:
            if n_max is not None and len(convergents) < n_max:
                raise ResourceError(
                    f"precision supports only n <= {len(convergents)}, "
                    f"requested {n_max}", achievable=len(convergents))
            break
        quotients.append(a)
        convergents.append((p, q))
        if len(convergents) >= cap:
            break
    cf = ContinuedFractionExpansion(
        x_num=num, x_den=den, quotients=quotients, convergents=convergents,
        exact=exact,
        terminated=exact and terminated and len(convergents) == len(a_vals) - 1)
    _check_invariants(cf)
    cf.exponents = _exponents(cf)
    return cf


def _check_invariants(cf):
    prev = None
    for i, (a, q) in enumerate(cf.convergents):
        if prev is not None:
            ap, qp = prev
            det = a * qp - ap * q
            assert det in (1, -1), "determinant identity violated"
            assert q > qp, "q_n must increase"
        prev = (a, q)


def _exponents(cf):
    """r_n = -log|x - a_n/q_n| / log q_n from the exact dyadic image."""
    out = []
    den = cf.x_den
    logden = math.log(den)
    for (a, q) in cf.convergents:
        diff_num = abs(cf.x_num * q - a * den)  # |x - a/q| = diff/(q den)
        if diff_num == 0 or q == 1:
            out.append(float("inf") if q > 1 else float("nan"))
            continue
        log_diff = math.log(diff_num) - math.log(q) - logden
        out.append(-log_diff / math.log(q))
    return out


def approx_exponents(cf, window=5):
    """(r_n list, limsup estimate = max over the trailing window)."""
    rs = [r for r in cf.exponents if math.isfinite(r)]
    if not rs:
        return [], float("nan")
    tail = rs[-window:]
    return cf.exponents, max(tail)


def point_with_exponent(r, seed=0, parity_constraint=False, prec=DEFAULT_PREC,
                        warmup_quotients=3):
    """Construct x with limsup r_n ~ r by a_{n+1} ~ q_n^(r-2) growth.

    parity_constraint steers a subsequence of q_n odd (the A_r* variant);
    returns (x as Fraction of a deep convergent, metadata dict).
    """
    if r <= 2:
        raise DomainError("needs r > 2 (r = 2 is the bounded-quotient regime)")
    rng = random.Random(seed)
    quotients = [rng.randint(1, 3) for _ in range(warmup_quotients)]
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    for a in quotients[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    steered = []
    while q * q < (1 << prec):
        a_next = max(1, math.ceil(q ** (r - 2.0)))
        if q >= 50:  # +-1 jitter perturbs r_n by O(1/(a log q)): keep it small
            a_next += rng.randint(0, 1)
        p_next = a_next * p + p_prev
        q_next = a_next * q + q_prev
        if parity_constraint and q_next % 2 == 0:
            a_next += 1
            p_next = a_next * p + p_prev
            q_next = a_next * q + q_prev
            steered.append(len(quotients))
        quotients.append(a_next)
        p_prev, p, q_prev, q = p, p_next, q, q_next
    meta = {"quotients": quotients, "depth": len(quotients),
            "parity_steered_at": steered, "q_final": q}
    return Fraction(p % q, q), meta  # fractional part; quotients shift by one


def in_At(a, q, q_tilde, t):
    """Exact test of <a q~/q> < q~ / t, all arithmetic rational."""
    if not q_tilde < q:
        raise DomainError("needs q~ < q")
    t = Fraction(t) if not isinstance(t, Fraction) else t
    if t < 1:
        raise DomainError("needs t >= 1")
    v = (a * q_tilde) % q
    dist = Fraction(min(v, q - v), q)
    return dist < Fraction(q_tilde, 1) / t


def census_At(q, q_tilde, t):
    """|A(t)| by exhaustive membership; the paper's ~ q q~/t count."""
    return sum(1 for a in range(1, q) if in_At(a, q, q_tilde, t))


def contfrac_check(x, r, n0=2, prec=DEFAULT_PREC, c0=1):
    """Verify q_n^-r <= |x-a_n/q_n| < |x-a_{n-1}/q_{n-1}| < q_n^-r' beyond n0.

    r' is the Holder conjugate r/(r-1). If some convergent of c0*x violates
    |c0 x - a/q| >= q^-r (the E_r membership screen), the report flags the
    failing index instead of checking the chain.
    """
    if r <= 2:
        raise DomainError("needs r > 2")
    rp = r / (r - 1.0)
    x_num, den, exact = _to_rational(x, prec)
    x_num = (x_num * c0) % den  # the screen and chain apply to frac(c0 x)
    # expand the rational image itself; the q^2 <= den window below cuts the
    # resolution-edge convergents that only see the image, not x
    cf = cf_convergents(Fraction(x_num, den), prec=prec)
    # trustworthy window: resolution-edge convergents (q^2 beyond the image
    # denominator) approximate the rational image itself, not x
    horizon = sum(1 for _, qn in cf.convergents if qn * qn <= den)
    # E_r screen over the trustworthy window: finitely many early violations
    # are allowed (they only shift n0); persistent ones flag E_r membership
    violations = []
    for i, (a, q) in enumerate(cf.convergents[:horizon]):
        if q < 2:
            continue
        diff = abs(Fraction(x_num, den) - Fraction(a, q))
        if diff > 0 and math.log(diff) < -r * math.log(q):
            violations.append(i)
    if violations and violations[-1] >= horizon - 3:
        return {"hypothesis_holds": False, "fails_at": violations[-1],
                "reason": f"convergent {violations[-1]} approximates below q^-r "
                          "and violations persist to the horizon"}
    if violations:
        n0 = max(n0, violations[-1] + 1)
    rows = []
    ok = True
    for i in range(max(n0, 1), horizon):
        a_n, q_n = cf.convergents[i]
        a_p, q_p = cf.convergents[i - 1]
        d_n = abs(Fraction(x_num, den) - Fraction(a_n, q_n))
        d_p = abs(Fraction(x_num, den) - Fraction(a_p, q_p))
        lo = math.log(d_n) if d_n > 0 else -math.inf
        hi = math.log(d_p) if d_p > 0 else -math.inf
        chain = (lo >= -r * math.log(q_n) - 1e-12
                 and d_n < d_p
                 and hi < -rp * math.log(q_n) + 1e-12)
        ok &= chain
        rows.append({"n": i, "q_n": q_n, "log_d_n": lo, "chain_ok": chain})
    return {"hypothesis_holds": True, "all_ok": ok, "rows": rows,
            "r_conjugate": rp}

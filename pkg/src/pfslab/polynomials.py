"""Integer polynomials and their ramification invariants.

The ramification data drives everything downstream: nu_F is the maximal
multiplicity of a complex zero of P', nu_0 = max(nu_F, 2), and per-prime
tables record the zeros of P' mod p split by whether their multiplicity
equals nu_F (set B) or not (set C).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DomainError


@dataclass(frozen=True)
class IntPolynomial:
    """P in Z[n], coefficients constant-first, trailing coefficient nonzero."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(int(x) for x in self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if not c:
            c = (0,)
        object.__setattr__(self, "coeffs", c)
        if self.degree > 0 and c[-1] == 0:
            raise DomainError("leading coefficient must be nonzero")

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def leading(self):
        return self.coeffs[-1]

    def __call__(self, n):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc

    def derivative(self):
        if self.degree == 0:
            return IntPolynomial((0,))
        return IntPolynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i > 0))

    def shift(self, c):
        """P(n + c) for integer c, exact (Horner in the polynomial ring)."""
        r = [0]
        for coef in reversed(self.coeffs):
            # r = r*(x+c) + coef
            nr = [0] * (len(r) + 1)
            for i, rc in enumerate(r):
                nr[i + 1] += rc
                nr[i] += rc * c
            nr[0] += coef
            r = nr
        while len(r) > 1 and r[-1] == 0:
            r.pop()
        return IntPolynomial(tuple(r))

    # -- canonical ASCII and JSON forms ------------------------------------

    def to_string(self):
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            mag = abs(c)
            if i == 0:
                term = str(mag)
            elif i == 1:
                term = "n" if mag == 1 else f"{mag}*n"
            else:
                term = f"n^{i}" if mag == 1 else f"{mag}*n^{i}"
            if not parts:
                parts.append(term if c > 0 else "-" + term)
            else:
                parts.append(("+ " if c > 0 else "- ") + term)
        return " ".join(parts) if parts else "0"

    def to_json(self):
        return list(self.coeffs)

    @classmethod
    def from_json(cls, arr):
        return cls(tuple(int(x) for x in arr))

    @classmethod
    def parse(cls, s):
        """Parse 'c*n^k + ... + c0' (also accepts '3n^2', 'n', '-n^3+2')."""
        s = s.replace(" ", "")
        if not s:
            raise DomainError("empty polynomial string")
        tokens = re.findall(r"[+-]?[^+-]+", s)
        coeffs = {}
        for tok in tokens:
            m = re.fullmatch(r"([+-]?)(\d*)\*?(n(\^(\d+))?)?", tok)
            if not m or (not m.group(2) and not m.group(3)):
                raise DomainError(f"cannot parse polynomial term {tok!r}")
            sign = -1 if m.group(1) == "-" else 1
            coef = int(m.group(2)) if m.group(2) else 1
            if m.group(3) is None:
                power = 0
            elif m.group(5) is not None:
                power = int(m.group(5))
            else:
                power = 1
            coeffs[power] = coeffs.get(power, 0) + sign * coef
        deg = max(coeffs)
        return cls(tuple(coeffs.get(i, 0) for i in range(deg + 1)))


@dataclass
class RamificationProfile:
    """nu_F, nu_0 and the per-prime zero tables of P'."""

    nu_F: int
    nu_0: int
    per_prime: dict = field(default_factory=dict)  # p -> (nu_Fp, B, C)


def derivative(P):
    return P.derivative()


# -- exact gcd machinery over Q --------------------------------------------

def _fr(poly):
    return [Fraction(c) for c in poly.coeffs]


def _deg(c):
    d = len(c) - 1
    while d > 0 and c[d] == 0:
        d -= 1
    return d if any(c) else -1


def _polymod(a, b):
    a = a[:]
    da, db = _deg(a), _deg(b)
    while da >= db >= 0:
        f = a[da] / b[db]
        for i in range(db + 1):
            a[da - db + i] -= f * b[i]
        a[da] = Fraction(0)
        da = _deg(a)
    return a[: max(da + 1, 1)]


def _polygcd(a, b):
    a, b = a[:], b[:]
    while _deg(b) >= 0 and any(b):
        a, b = b, _polymod(a, b)
    d = _deg(a)
    if d < 0:
        return [Fraction(0)]
    lead = a[d]
    return [c / lead for c in a[: d + 1]]


def _polyder(c):
    if len(c) <= 1:
        return [Fraction(0)]
    return [i * c[i] for i in range(1, len(c))]


def nu_global(P):
    """(nu_F, nu_0): max complex-zero multiplicity of P', via exact gcd chains."""
    if P.degree < 2:
        raise DomainError("nu_global needs deg P >= 2")
    chain = _fr(P.derivative())
    nu = 0
    while _deg(chain) > 0:
        nu += 1
        chain = _polygcd(chain, _polyder(chain))
    return nu, max(nu, 2)


# -- mod-p machinery --------------------------------------------------------

def _is_prime(p):
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _check_prime_pre(P, p):
    if not _is_prime(p):
        raise DomainError(f"{p} is not prime")
    if P.leading % p == 0:
        raise DomainError(f"prime {p} divides the leading coefficient")
    if p <= P.degree:
        raise DomainError(f"primes p <= deg P = {P.degree} are out of scope")


def _synthetic_mult(dcoeffs, b, p):
    """Multiplicity of b as a root of the mod-p polynomial dcoeffs."""
    c = [x % p for x in dcoeffs]
    mult = 0
    while any(c):
        # synthetic division by (x - b) mod p: quotient digits + remainder
        carry = 0
        quot = [0] * max(len(c) - 1, 1)
        for i in range(len(c) - 1, 0, -1):
            carry = (carry * b + c[i]) % p
            quot[i - 1] = carry
        rem = (carry * b + c[0]) % p
        if rem != 0:
            break
        mult += 1
        c = quot
    return mult


def _mult_by_derivatives(dcoeffs, b, p, kmax):
    """Second oracle: multiplicity via factorial-scaled Taylor coefficients
    D^(j)(b)/j! = sum_i C(i,j) d_i b^(i-j), exact integers reduced mod p.
    """
    from math import comb

    for j in range(0, kmax + 1):
        val = 0
        for i in range(j, len(dcoeffs)):
            val = (val + comb(i, j) * dcoeffs[i] * pow(b, i - j, p)) % p
        if val != 0:
            return j
    return kmax + 1


def roots_mult_mod_p(P, p):
    """(nu_Fp, B, C): zero set of P' mod p with multiplicities.

    B holds the zeros whose multiplicity equals the global nu_F, C the rest.
    """
    _check_prime_pre(P, p)
    nu_F, _ = nu_global(P)
    d = P.derivative().coeffs
    roots = {}
    for b in range(p):
        m = _synthetic_mult(d, b, p)
        if m > 0:
            roots[b] = m
    nu_Fp = max(roots.values()) if roots else 0
    B = sorted(b for b, m in roots.items() if m == nu_F)
    C = sorted(b for b in roots if b not in B)
    return nu_Fp, B, C


def splits_mod_p(P, p):
    """True iff P' factors into linear factors mod p (multiplicity census)."""
    _check_prime_pre(P, p)
    d = P.derivative().coeffs
    total = 0
    for b in range(p):
        total += _synthetic_mult(d, b, p)
    degree_mod = _deg([c % p for c in d])
    return total == degree_mod


def hensel_count(Q, p, i):
    """Exact number of roots of Q mod p^i, lifting level by level."""
    if not _is_prime(p):
        raise DomainError(f"{p} is not prime")
    if i < 1:
        raise DomainError("i must be >= 1")
    if all(c % p == 0 for c in Q.coeffs):
        raise DomainError("Q vanishes identically mod p")
    Qd = Q.derivative()
    roots = [r for r in range(p) if Q(r) % p == 0]
    level = 1
    while level < i:
        mod_next = p ** (level + 1)
        new = []
        for r in roots:
            if Qd(r) % p != 0:
                # unique lift: r + t p^level with t = -Q(r)/p^level / Q'(r)
                inv = pow(Qd(r) % p, p - 2, p)
                t = (-(Q(r) // p ** level) * inv) % p
                new.append(r + t * p ** level)
            else:
                if Q(r) % mod_next == 0:
                    new.extend(r + t * p ** level for t in range(p))
        roots = new
        level += 1
    count = len(roots)
    bound = p ** (i - 1) * max(_deg([c % p for c in Q.coeffs]), 1)
    assert count <= bound, "Hensel count exceeded the p^{i-1} deg Q bound"
    return count


def ramification_profile(P, primes=()):
    nu_F, nu_0 = nu_global(P)
    prof = RamificationProfile(nu_F=nu_F, nu_0=nu_0)
    for p in primes:
        prof.per_prime[p] = roots_mult_mod_p(P, p)
    return prof

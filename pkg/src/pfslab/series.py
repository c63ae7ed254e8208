"""Evaluation of F(x) = sum e(P(n) x)/n^alpha around rationals.

Two independent routes to the local increment Delta F = F(a/q+h) - F(a/q):

* eval_delta_direct: tail-bounded direct summation with exact phases, plus
  an exact Hurwitz-zeta completion of the non-oscillatory tail part;
* poisson_delta: the dual expansion q^-1 h^((alpha-1)/k) sum_m tau_m ghat_m,
  with ghat values from the oscillatory-integral engine.

The two never share code paths beyond the polynomial itself, so their
agreement is a genuine cross-check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from . import kernels, oscquad
from .errors import DomainError, ResourceError
from .polynomials import IntPolynomial, nu_global, roots_mult_mod_p

DIRECT_N_CAP = 300_000_000


@dataclass(frozen=True)
class SeriesParams:
    """The pair (P, alpha) defining F, with derived constants."""

    P: IntPolynomial
    alpha: float

    def __post_init__(self):
        if self.P.degree < 2:
            raise DomainError("F needs deg P = k > 1")
        if self.P.leading <= 0:
            raise DomainError("normalise to leading coefficient c0 > 0 "
                              "(conjugation handles c0 < 0)")
        if self.alpha <= 1.0:
            raise DomainError("alpha must exceed 1 for absolute convergence")

    @property
    def k(self):
        return self.P.degree

    @property
    def c0(self):
        return self.P.leading

    @property
    def rho(self):
        return (self.alpha - 1.0) / self.k

    @property
    def modes(self):
        k, a = self.k, self.alpha
        out = set()
        if 1 + k / 2 < a < k:
            out.add("main")
        if k == 2 and 1 < a <= 2:
            out.add("quadratic")
        if k / 2 < a <= k:
            out.add("extended")
        return out

    def require_mode(self, mode):
        if mode not in self.modes:
            raise DomainError(
                f"alpha={self.alpha} outside the '{mode}' window for k={self.k}")

    def ramification(self):
        return nu_global(self.P)


# ----------------------------------------------------------------------
# smooth dyadic bump pair
# ----------------------------------------------------------------------

class BumpPair:
    """phi with support [1/2, 2] built from f(x) = int_{1/2}^x exp(-(2u-1)^-2 (u-1)^-2) du,
    and the telescoped Phi(x) = sum_j phi(x/2^j), equal to 1 on [1, inf).
    """

    _PANELS = 256
    _NODES = 12

    def __init__(self):
        gx, gw = np.polynomial.legendre.leggauss(self._NODES)
        edges = np.linspace(0.5, 1.0, self._PANELS + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        halfs = 0.5 * np.diff(edges)
        xs = mids[:, None] + halfs[:, None] * gx[None, :]
        vals = self._integrand(xs)
        panel_ints = halfs * (vals @ gw)
        self._edges = edges
        self._cum = np.concatenate([[0.0], np.cumsum(panel_ints)])
        self._gx, self._gw = gx, gw
        self.f1 = float(self._cum[-1])

    @staticmethod
    def _integrand(u):
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        inside = (u > 0.5) & (u < 1.0)
        ui = u[inside]
        with np.errstate(over="ignore", under="ignore"):
            out[inside] = np.exp(-1.0 / ((2 * ui - 1) ** 2 * (ui - 1) ** 2))
        return out

    def _f(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = np.clip(x, 0.5, 1.0)
        idx = np.minimum(np.searchsorted(self._edges, y, side="right") - 1,
                         self._PANELS - 1)
        lo = self._edges[idx]
        base = self._cum[idx]
        mid = 0.5 * (lo + y)
        half = 0.5 * (y - lo)
        xs = mid[..., None] + half[..., None] * self._gx
        part = half * (self._integrand(xs) @ self._gw)
        return base + part

    def phi(self, x):
        """The bump: f(x)/f(1) on [1/2,1], 1 - f(x/2)/f(1) on [1,2], else 0."""
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        rise = (x > 0.5) & (x < 1.0)
        fall = (x >= 1.0) & (x < 2.0)
        out[rise] = self._f(x[rise]) / self.f1
        out[fall] = 1.0 - self._f(x[fall] / 2.0) / self.f1
        return out if out.ndim else float(out)

    def Phi(self, x):
        """sum_j phi(x/2^j): 0 below 1/2, f(x)/f(1) on [1/2,1], 1 from 1 on."""
        x = np.asarray(x, dtype=np.float64)
        out = np.ones_like(x)
        out[x <= 0.5] = 0.0
        rise = (x > 0.5) & (x < 1.0)
        out[rise] = self._f(x[rise]) / self.f1
        return out if out.ndim else float(out)


@lru_cache(maxsize=1)
def bump_pair():
    return BumpPair()


# ----------------------------------------------------------------------
# direct evaluation
# ----------------------------------------------------------------------

def direct_n_for_tol(params, h, tol):
    """Truncation index: spec bound sum_{n>N} min(2, 2 pi |h| |P|(n)) n^-alpha < tol.

    Beyond the phase crossover the bound is the zeta tail 2 N^(1-a)/(a-1);
    the returned N also satisfies the crossover and exact-arithmetic caps.
    """
    a = float(params.alpha)
    if tol <= 0:
        raise DomainError("tol must be positive")
    n_cross = 1
    if h != 0:
        # smallest n with 2 pi |h| |P|(n) >= 2
        pabs = [abs(c) for c in params.P.coeffs]
        while sum(c * n_cross ** i for i, c in enumerate(pabs)) * math.pi * abs(h) < 1 \
                and n_cross < DIRECT_N_CAP:
            n_cross *= 2
    n_tail = (2.0 / ((a - 1.0) * tol)) ** (1.0 / (a - 1.0))
    return max(int(n_cross), int(math.ceil(n_tail)), 16)


def _zeta_completion(P, a, q, alpha, N):
    """sum_{n>N} e(a P(n)/q) n^-alpha, exact per residue class via Hurwitz zeta."""
    q = int(q)
    pres = kernels.poly_residues(P.coeffs, q)
    total = 0j
    for j in range(q):
        r = (a * int(pres[j])) % q
        ph = cmath.exp(2j * math.pi * r / q)
        # smallest n > N with n = j (mod q); n = j + m q, m >= m0
        m0 = (N - j) // q + 1
        total += ph * float(hurwitz_zeta(alpha, m0 + j / q))
    return total * q ** (-alpha)


@dataclass
class DeltaValue:
    value: complex
    budget: float
    n_used: int
    method: str


def eval_delta_direct(params, a, q, h, tol=1e-9, threads=None, mask_mod=0,
                      mask=None, with_budget=False):
    """Delta F = sum_n e(aP(n)/q) (e(hP(n)) - 1) n^-alpha by direct summation.

    Truncation at N with the analytic tail bound below tol; the non-oscillatory
    tail part is then completed exactly with Hurwitz zeta, leaving only the
    rapidly-oscillating remainder inside the declared budget
    N^(1-alpha)/(alpha-1) + N^-alpha.
    """
    if abs(h) >= 1:
        raise DomainError("needs |h| < 1")
    if q <= 0:
        raise DomainError("q must be positive")
    a = a % q
    if h == 0:
        out = DeltaValue(0j, 0.0, 0, "direct")
        return out if with_budget else out.value
    alpha = float(params.alpha)
    N = direct_n_for_tol(params, h, tol)
    cap = min(DIRECT_N_CAP, kernels.poly_max_n_exact(params.P.coeffs))
    if N > cap:
        achievable = 2.0 * cap ** (1 - alpha) / (alpha - 1)
        raise ResourceError(
            f"tol={tol} needs N={N} > cap={cap}", achievable=achievable)
    val = kernels.delta_rational_sum(params.P.coeffs, a, q, h, alpha, N,
                                     mask_mod=mask_mod, mask=mask,
                                     threads=threads)
    if mask is None or mask_mod == 0:
        val -= _zeta_completion(params.P, a, q, alpha, N)
    else:
        val -= _zeta_completion_masked(params.P, a, q, alpha, N, mask_mod, mask)
    budget = N ** (1 - alpha) / (alpha - 1) + N ** (-alpha) + 1e-15 * math.log(N + 1)
    out = DeltaValue(val, budget, N, "direct")
    return out if with_budget else out.value


def _zeta_completion_masked(P, a, q, alpha, N, mask_mod, mask):
    qq = int(q) * int(mask_mod) // math.gcd(int(q), int(mask_mod))
    pres = kernels.poly_residues(P.coeffs, qq)
    total = 0j
    for j in range(qq):
        if not mask[j % mask_mod]:
            continue
        r = (a * int(pres[j]) * (qq // q)) % qq  # a P(j)/q = a P(j) (qq/q) / qq
        ph = cmath.exp(2j * math.pi * r / qq)
        m0 = (N - j) // qq + 1
        total += ph * float(hurwitz_zeta(alpha, m0 + j / qq))
    return total * qq ** (-alpha)


def delta_at_real(params, x_num, scale_bits, h, tol=1e-9, threads=None):
    """Delta F at the exact dyadic base x = x_num/2^scale_bits (irrational
    surrogate), by finite-difference phase chains. Plain truncation budget."""
    if h == 0:
        return DeltaValue(0j, 0.0, 0, "direct-real")
    alpha = float(params.alpha)
    N = direct_n_for_tol(params, h, tol)
    cap = min(DIRECT_N_CAP, kernels.poly_max_n_exact(params.P.coeffs))
    capped = False
    if N > cap:
        N = cap
        capped = True
    hm, hs = kernels.dyadic_of_float(abs(h))
    S = max(scale_bits, hs)
    xa = x_num << (S - scale_bits)
    hb = hm << (S - hs)
    xb = xa + hb if h > 0 else xa - hb
    val = kernels.delta_real_sum(params.P.coeffs, xa, xb, S, alpha, N,
                                 threads=threads)
    budget = 2.0 * N ** (1 - alpha) / (alpha - 1) + 2.0 * N ** (-alpha)
    return DeltaValue(val, budget, N, "direct-real" + ("-capped" if capped else ""))


# ----------------------------------------------------------------------
# Poisson route
# ----------------------------------------------------------------------

def fhat(params, h, xi, bump=None):
    """F-hat(xi) = int_{1/2}^inf Phi(x)(e(hP(x))-1) x^-alpha e(-xi x) dx.

    Bump-weighted panels on [1/2, 1], engine tails beyond 1 (Phi = 1 there).
    """
    if not 0 < h < 1:
        raise DomainError("needs 0 < h < 1")
    bump = bump or bump_pair()
    alpha = float(params.alpha)
    phi1 = [h * c for c in params.P.coeffs]
    while len(phi1) < 2:
        phi1.append(0.0)
    phi1[1] -= xi
    phi2 = [0.0, -xi]

    step1 = oscquad.panel_step(phi1)
    step2 = oscquad.panel_step(phi2)

    def integrand(xs):
        w = bump.Phi(xs) * xs ** (-alpha)
        e1 = np.exp(2j * math.pi * (oscquad._polyval(phi1, xs) % 1.0))
        e2 = np.exp(2j * math.pi * (oscquad._polyval(phi2, xs) % 1.0))
        return w * (e1 - e2)

    head = oscquad.panel_integral(
        integrand, 0.5, 1.0, lambda x: min(step1(x), step2(x), 0.1))
    tail = oscquad.fourier_tail(phi1, alpha, 1.0) - oscquad.fourier_tail(phi2, alpha, 1.0)
    return head + tail


def ghat(params, h, xi, bump=None):
    """ghat_h(xi) = h^((1-alpha)/k) F-hat(h^(1/k) xi) (the paper's scaling)."""
    params.require_mode("extended")
    scale = h ** ((1.0 - params.alpha) / params.k)
    return fhat(params, h, h ** (1.0 / params.k) * xi, bump=bump).scaled(scale)


@dataclass
class PoissonExpansion:
    a: int
    q: int
    h: float
    terms: dict = field(default_factory=dict)  # m -> tau_m * fhat(m/q)
    M: int = 0
    tail_estimate: float = 0.0  # absolute-sum bound on dropped terms (declared)
    tail_rms: float = 0.0  # cancellation-aware expected tail size
    quad_budget: float = 0.0
    value: complex = 0j

    @property
    def budget(self):
        return self.tail_estimate + self.quad_budget


def _fhat_batch_quadratic(params, h, q, ms, bump, levels=(3, 4)):
    """F-hat(m/q) for many m at once, k = 2 only.

    The quadratic phase h(c2 x^2 + c1 x + c0) - xi x makes every steepest
    descent path an explicit sqrt branch and every saddle path an exact
    45-degree line, so everything vectorises over (m, node).
    Returns (values, errs). Caller guarantees no saddle crowds x = 1.
    """
    alpha = float(params.alpha)
    c0h = h * params.P.coeffs[0]
    c1h = h * params.P.coeffs[1]
    A = h * params.P.coeffs[2]
    ms = np.asarray(ms, dtype=np.int64)
    xi = ms / q
    B = c1h - xi  # phi1 = A x^2 + B x + c0h
    D = 2 * A + B  # phi1'(1)
    sgn = np.where(D >= 0, 1.0, -1.0)
    width = 1.0 / math.sqrt(TWO_PI_ * 2 * abs(A))
    xstar = -B / (2 * A)
    cross = xstar > 1.0 + oscquad.SEP_MIN * width
    rot = cmath.exp(1j * math.pi / 4) / math.sqrt(abs(A))

    vals = {}
    for li, level in enumerate(levels):
        ts, ws = oscquad._expsinh_rule(level)
        decay = np.exp(-TWO_PI_ * ts) * ws
        keep = decay > 1e-22
        ts, decay = ts[keep], decay[keep]
        hx, hw = oscquad._hermgauss(48 * (li + 1))
        us = hx / math.sqrt(TWO_PI_)
        out = np.empty(len(ms), dtype=np.complex128)
        for s in range(0, len(ms), 512):
            sl = slice(s, min(s + 512, len(ms)))
            Dv = D[sl]
            sg = sgn[sl]
            root = np.sqrt((Dv * Dv)[:, None] + 4j * A * ts[None, :])
            z = 1.0 + (-Dv[:, None] + sg[:, None] * root) / (2 * A)
            with np.errstate(invalid="ignore"):
                integ = np.exp(-alpha * np.log(z)) * (1j / (sg[:, None] * root))
            tail1 = np.exp(2j * math.pi * ((A + B[sl] + c0h) % 1.0)) \
                * (integ @ decay)
            crs = cross[sl]
            if np.any(crs):
                zs = xstar[sl][crs][:, None] + rot * us[None, :]
                phs = ((-(B[sl][crs] ** 2) / (4 * A) + c0h) % 1.0)
                tail1[crs] += (np.exp(2j * math.pi * phs) * rot
                               / math.sqrt(TWO_PI_)
                               * (np.exp(-alpha * np.log(zs)) @ hw))
            xin = xi[sl]
            tail2 = np.full(len(xin), 1.0 / (alpha - 1.0), dtype=np.complex128)
            nz = xin != 0
            if np.any(nz):
                xa = xin[nz]
                dz2 = 1j / (-xa)  # descent direction for either sign of xi
                zlin = 1.0 + dz2[:, None] * ts[None, :]
                tail2[nz] = np.exp(2j * math.pi * ((-xa) % 1.0)) \
                    * (np.exp(-alpha * np.log(zlin)) @ decay) * dz2
            out[sl] = tail1 - tail2
        vals[level] = out

    # head [1/2, 1]: fixed Gauss grid dense enough for the top frequency
    xi_max = float(np.max(np.abs(xi))) if len(xi) else 0.0
    freq = xi_max + 2 * abs(A) + abs(c1h) + 2.0
    heads = {}
    gx, gw = np.polynomial.legendre.leggauss(12)
    for ppo in (16, 28):
        n_panels = max(8, int(0.5 * freq * ppo / 12.0) + 1)
        edges = np.linspace(0.5, 1.0, n_panels + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        halfs = 0.5 * np.diff(edges)
        xs = (mids[:, None] + halfs[:, None] * gx[None, :]).ravel()
        wts = (halfs[:, None] * gw[None, :]).ravel()
        g = bump.Phi(xs) * xs ** (-alpha) \
            * (np.exp(2j * math.pi * ((h * _pval(params.P.coeffs, xs)) % 1.0)) - 1.0)
        gw_ = g * wts
        acc = np.empty(len(ms), dtype=np.complex128)
        for s in range(0, len(ms), 512):
            sl = slice(s, min(s + 512, len(ms)))
            acc[sl] = gw_ @ np.exp(-2j * math.pi * np.outer(xs, xi[sl]))
        heads[ppo] = acc
    values = heads[28] + vals[levels[1]]
    errs = np.abs(heads[28] - heads[16]) + np.abs(vals[levels[1]] - vals[levels[0]])
    return values, errs


TWO_PI_ = 2.0 * math.pi


def _pval(coeffs, x):
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _fhat_for_ms(params, h, q, ms, bump):
    """Dispatch: vectorised quadratic fast path where valid, engine otherwise."""
    ms = list(ms)
    values = np.empty(len(ms), dtype=np.complex128)
    errs = np.empty(len(ms), dtype=np.float64)
    fast_idx = []
    if params.k == 2:
        A = h * params.P.coeffs[2]
        width = 1.0 / math.sqrt(TWO_PI_ * 2 * A)
        for i, m in enumerate(ms):
            xi = m / q
            B = h * params.P.coeffs[1] - xi
            xstar = -B / (2 * A)
            D = 2 * A + B
            # generic engine when a saddle crowds x = 1 or the descent from 1
            # would dive across the branch cut (moderate negative slope)
            t_cross = math.sqrt(abs(D) ** 3 / A) if D < 0 else math.inf
            if m == 0 or abs(xstar - 1.0) < 1.3 * oscquad.SEP_MIN * width \
                    or t_cross < 35.0:
                continue
            fast_idx.append(i)
    if fast_idx:
        vv, ee = _fhat_batch_quadratic(params, h, q, [ms[i] for i in fast_idx], bump)
        for j, i in enumerate(fast_idx):
            values[i] = vv[j]
            errs[i] = ee[j]
    slow = [i for i in range(len(ms)) if i not in set(fast_idx)]
    for i in slow:
        fr = fhat(params, h, ms[i] / q, bump=bump)
        values[i] = fr.value
        errs[i] = fr.err
    return values, errs


def _saddle_only_batch(params, h, q, ms, nodes=48):
    """Saddle-crossing contribution to F-hat(m/q), vectorised over m.

    For large xi the endpoint pieces of head and tail cancel to all orders
    (they assemble the boundary-free integral over [1/2, inf)), leaving the
    stationary-phase crossing as the whole of F-hat up to a superpolynomially
    small carcass. Newton on the shifted phase runs vectorised over (m, node).
    """
    alpha = float(params.alpha)
    k = params.k
    xs, psi_r, phase = _saddle_setup(params, h, q, ms)
    psi = [p + 0j for p in psi_r]
    hx, hw = oscquad._hermgauss(nodes)
    us = hx / math.sqrt(TWO_PI_)
    rot = cmath.exp(1j * math.pi / 4) / np.sqrt(np.abs(psi[0]))
    w = rot[:, None] * us[None, :]
    if k > 2:
        target = 1j * us[None, :] ** 2
        for _ in range(8):
            # psi(w) and psi'(w), lowest powers 2 and 1
            acc = np.zeros_like(w)
            dacc = np.zeros_like(w)
            for jj in range(k, 1, -1):
                acc = (acc + psi[jj - 2][:, None]) * w
                dacc = dacc * w + jj * psi[jj - 2][:, None]
            w = w - (acc * w - target) / (dacc * w)
        dacc = np.zeros_like(w)
        for jj in range(k, 1, -1):
            dacc = dacc * w + jj * psi[jj - 2][:, None]
        dz = 2j * us[None, :] / (dacc * w)
    else:
        dz = np.broadcast_to(rot[:, None], w.shape)
    z = xs[:, None] + w
    vals = np.exp(2j * math.pi * phase) / math.sqrt(TWO_PI_) \
        * np.sum(np.exp(-alpha * np.log(z)) * dz * hw[None, :], axis=1)
    return vals


def _saddle_setup(params, h, q, ms):
    """(x*, psi_2..psi_k arrays, phase at the saddle) for the m-batch."""
    k = params.k
    coeffs = params.P.coeffs
    ms = np.asarray(ms, dtype=np.int64)
    xi = ms / q
    dco = [i * c * h for i, c in enumerate(coeffs)][1:]
    d2co = [i * c for i, c in enumerate(dco)][1:]
    xs = (xi / (k * h * coeffs[-1])) ** (1.0 / (k - 1))
    for _ in range(3 if k == 2 else 16):
        xs = xs - (_pval(dco, xs) - xi) / _pval(d2co, xs)
    psi = []
    for j in range(2, k + 1):
        cj = sum(math.comb(i, j) * coeffs[i] * xs ** (i - j)
                 for i in range(j, k + 1)) * h
        psi.append(cj)
    phase = (_pval([c * h for c in coeffs], xs) - xi * xs) % 1.0
    return xs, psi, phase


def _saddle_asym_batch(params, h, q, ms):
    """Two-term stationary-phase closed form for F-hat(m/q), error O(eps^2).

    Expansion of z^-alpha e(psi_2 w^2 + psi_3 w^3 + psi_4 w^4 + ...) in
    complex-Gaussian moments about the saddle; used beyond the Hermite range
    after a probe validation.
    """
    alpha = float(params.alpha)
    k = params.k
    xs, psi, phase = _saddle_setup(params, h, q, ms)
    p2 = psi[0]
    p3 = psi[1] if k >= 3 else np.zeros_like(p2)
    p4 = psi[2] if k >= 4 else np.zeros_like(p2)
    g0 = xs ** (-alpha)
    g1 = -alpha * xs ** (-alpha - 1.0)
    g2 = 0.5 * alpha * (alpha + 1.0) * xs ** (-alpha - 2.0)
    s2 = 1j / (4.0 * math.pi * p2)  # complex Gaussian variance
    bracket = (g0 + s2 * g2
               + 2j * math.pi * 3.0 * s2 ** 2 * (g1 * p3 + g0 * p4)
               + (2j * math.pi) ** 2 * 7.5 * s2 ** 3 * g0 * p3 ** 2)
    G0 = cmath.exp(1j * math.pi / 4) / np.sqrt(2.0 * p2)
    return np.exp(2j * math.pi * phase) * G0 * bracket


def poisson_delta_batch(params, q, h, a_list, M_max=50_000_000, tol=1e-6,
                        bump=None, term_store_cap=2048):
    """poisson_delta for several a sharing one F-hat table (h > 0).

    The F-hat values depend only on (P, alpha, h, q, m); tau carries all the
    a-dependence. Full evaluations (head + descent tails) run in doubling
    blocks up to an auto-calibrated M0 where the validated saddle-only form
    takes over; the table is extended until every a meets the stop rule
    (last terms below tol/100 relative, cancellation-aware rms tail below
    tol/10 relative); the fitted absolute-sum tail is the declared estimate.
    """
    params.require_mode("extended")
    if not 0 < h < 1:
        raise DomainError("needs 0 < h < 1")
    for a in a_list:
        if math.gcd(a % q if a % q else q, q) != 1:
            raise DomainError("poisson_delta needs gcd(a, q) = 1")
    bump = bump or bump_pair()
    tau_by_a = {a: kernels.tau_all_m(params.P.coeffs, q, a) for a in a_list}

    totals = {a: 0j for a in a_list}
    terms = {a: {} for a in a_list}
    mags = {a: {} for a in a_list}
    budgets = {a: 0.0 for a in a_list}

    # phase 1: full evaluation, both signs, until the saddle-only form is valid
    M0 = 0
    block = 64
    fhat_cache = {}
    while True:
        ms = list(range(M0 + 1, M0 + block + 1)) if M0 else list(range(0, block + 1))
        ms += [-m for m in ms if m > 0]
        vv, ee = _fhat_for_ms(params, h, q, ms, bump)
        for m, v, e in zip(ms, vv, ee):
            fhat_cache[m] = v
            for a in a_list:
                t = tau_by_a[a][m % q] * v / q
                terms[a][m] = t
                mags[a][m] = abs(t)
                totals[a] += t
                budgets[a] += abs(tau_by_a[a][m % q]) * e / q
        M0 += block
        probes = [M0 - 2, M0 - 1, M0]
        sv = _saddle_only_batch(params, h, q, probes)
        fmax = max(abs(fhat_cache[m]) for m in range(1, M0 + 1))
        ok = all(abs(s - fhat_cache[m]) <= 1e-3 * abs(fhat_cache[m])
                 + 1e-10 * fmax for s, m in zip(sv, probes))
        if ok:
            break
        if M0 >= 4096:
            raise ResourceError("saddle-only form failed to validate by m = 4096")
        block *= 2
    neg_tails = {a: sum(mags[a][m] for m in range(-M0, -M0 + 5)) for a in a_list}

    def structured_tail(M_used):
        # the m-tail aliases the n <~ x*(M) head of the direct series, which
        # adds without cancellation: ~ q x*(M)^-alpha (safety factor fitted)
        xstar = (M_used / q / (params.k * h * params.c0)) ** (1.0 / (params.k - 1))
        return 20.0 * q * xstar ** (-params.alpha)

    def all_stopped(M_used):
        st = structured_tail(M_used)
        for a in a_list:
            scale = max(abs(totals[a]), 1e-300)
            recent = [mags[a].get(j, 0.0) for j in range(M_used - 4, M_used + 1)]
            _, rms = _tail_models(mags[a], M_used)
            if not (all(r < tol * scale / 100 for r in recent)
                    and rms < tol * scale / 10 and st < tol * scale / 3):
                return False
        return True

    # phase 2: saddle tail in doubling blocks, shared across a; Hermite
    # crossings first, the validated two-term asymptotic beyond
    M_used = M0
    block = max(256, M0)
    asym_from = None
    asym_err = 0.0
    while not all_stopped(M_used):
        if M_used >= M_max:
            raise ResourceError(f"poisson tail above tol at M_max={M_max}")
        hi = min(M_used + block, M_max)
        for s in range(M_used + 1, hi + 1, 262144):
            sub = np.arange(s, min(s + 262144, hi + 1))
            pidx = np.arange(0, len(sub), max(1, len(sub) // 48))
            if asym_from is not None and s > asym_from:
                sv = _saddle_asym_batch(params, h, q, sub)
                err_rel = asym_err
            else:
                sv = _saddle_only_batch(params, h, q, sub, nodes=64)
                sv_lo = _saddle_only_batch(params, h, q, sub[pidx], nodes=32)
                err_rel = float(np.max(np.abs(sv_lo - sv[pidx])
                                       / (np.abs(sv[pidx]) + 1e-300)))
                if asym_from is None and s >= max(2 * M0, 768):
                    av = _saddle_asym_batch(params, h, q, sub[pidx])
                    agree = float(np.max(np.abs(av - sv[pidx])
                                         / (np.abs(sv[pidx]) + 1e-300)))
                    if agree < 1e-7:
                        asym_from = int(sub[-1])
                        asym_err = 2.0 * agree + err_rel
            keep = np.unique(np.concatenate([
                sub[:: max(1, len(sub) // 64)], sub[-8:]]))
            for a in a_list:
                tv = tau_by_a[a][sub % q] * sv / q
                totals[a] += complex(np.sum(tv))
                budgets[a] += float(np.sum(np.abs(tv))) * err_rel
                am = np.abs(tv)
                for m in keep:
                    mags[a][int(m)] = float(am[m - s])
                room = term_store_cap - len(terms[a])
                if room > 0:
                    for m, t in zip(sub[:room], tv[:room]):
                        terms[a][int(m)] = complex(t)
        M_used = hi
        block *= 2

    out = {}
    st = structured_tail(M_used)
    for a in a_list:
        tail_abs, tail_rms = _tail_models(mags[a], M_used)
        out[a] = PoissonExpansion(
            a=a, q=q, h=h, terms=terms[a], M=M_used,
            tail_estimate=tail_abs + neg_tails[a] + st, tail_rms=tail_rms + st,
            quad_budget=budgets[a], value=totals[a])
    return out


def poisson_delta(params, a, q, h, M_max=50_000_000, tol=1e-6, bump=None,
                  term_store_cap=2048):
    """Delta F via q^-1 sum_m tau_m F-hat(m/q).

    Negative h goes through the conjugation identity
    Delta F(a/q, -h) = conj Delta F((q-a)/q, h).
    """
    if h < 0:
        out = poisson_delta(params, (q - a) % q, q, -h, M_max=M_max, tol=tol,
                            bump=bump, term_store_cap=term_store_cap)
        out.value = out.value.conjugate()
        out.a, out.h = a, h
        return out
    return poisson_delta_batch(params, q, h, [a % q], M_max=M_max, tol=tol,
                               bump=bump, term_store_cap=term_store_cap)[a % q]


def _tail_models(mags, M):
    """(absolute-sum bound, rms expectation) for the dropped m-tail, from a
    power-law fit of |term_m| over the stored top range."""
    ms = [m for m in mags if m > 0 and m >= M // 2 and mags[m] > 0]
    if len(ms) < 4:
        mag = sum(mags.values())
        return mag + 1e-18, mag + 1e-18
    lx = np.log([float(m) for m in ms])
    ly = np.log([mags[m] for m in ms])
    slope, intercept = np.polyfit(lx, ly, 1)
    delta = max(-slope, 1.02)
    C = math.exp(intercept + 0.7)  # headroom for fit scatter
    tail_abs = 2.0 * C * M ** (1.0 - delta) / (delta - 1.0)
    tail_rms = 2.0 * C * M ** (0.5 - delta) / math.sqrt(max(2 * delta - 1.0, 0.1))
    return tail_abs, tail_rms


# ----------------------------------------------------------------------
# main term machinery
# ----------------------------------------------------------------------

def constant_A(params):
    """A = ((2 pi)^((alpha-1)/k)/k) e((1-alpha)/(4k)) Gamma((1-alpha)/k).

    Gamma at the negative argument via reflection from the positive axis.
    """
    k, alpha = params.k, params.alpha
    z = (1.0 - alpha) / k
    if not -1.0 < z < 0.0:
        raise DomainError("constant_A needs 1 < alpha < k+? with (1-alpha)/k in (-1,0)")
    gamma_z = math.pi / (math.sin(math.pi * z) * math.gamma(1.0 - z))
    phase = cmath.exp(2j * math.pi * (1.0 - alpha) / (4.0 * k))
    return ((2.0 * math.pi) ** ((alpha - 1.0) / k) / k) * phase * gamma_z


def osc_integral(params, h, x0=1.0):
    """I(h) = int_1^inf (e(hP(u)) - 1) u^-alpha du for monic P, plus the
    normalized residual I(h) h^(-(alpha-1)/k) - A."""
    if params.c0 != 1:
        raise DomainError("the integral lemma needs monic P")
    if not 0 < h < 1:
        raise DomainError("needs 0 < h < 1")
    if not 1 < params.alpha < params.k:
        raise DomainError("needs 1 < alpha < k")
    phi = [h * c for c in params.P.coeffs]
    osc = oscquad.fourier_tail(phi, params.alpha, x0)
    value = osc.value - 1.0 / (params.alpha - 1.0)
    A = constant_A(params)
    residual = value * h ** (-params.rho) - A
    return {"value": value, "err": osc.err, "A": A, "residual": residual,
            "residual_normalized": abs(residual) / h ** (1.0 / params.k)}


def main_term_residual(params, a, q, h, tol=1e-9, threads=None):
    """Residual of Delta F against A (tau_0/q) (c0 h)^((alpha-1)/k).

    normalized = |residual| / (h^(alpha/k) sqrt(q)), with an extra |log h|
    in the denominator at alpha = k.
    """
    params.require_mode("extended")
    from .expsum import complete_sum

    dv = eval_delta_direct(params, a, q, h, tol=tol, threads=threads,
                           with_budget=True)
    tau0 = complete_sum(params.P, a, q, 0).value
    A = constant_A(params)
    main = A * (tau0 / q) * (params.c0 * h) ** params.rho
    residual = dv.value - main
    denom = h ** (params.alpha / params.k) * math.sqrt(q)
    if abs(params.alpha - params.k) < 1e-12:
        denom *= abs(math.log(h))
    return {"delta": dv.value, "main": main, "residual": residual,
            "normalized": abs(residual) / denom, "tau0": tau0,
            "budget": dv.budget}


def split_delta(params, a, p, h, which, tol=1e-9, threads=None):
    """Delta F restricted to {n : p | P'(n)} (star) or its complement
    (lower_star), at q = p^(nu_F + 1)."""
    nu_F, _ = params.ramification()
    if which == "star" and nu_F <= 1:
        raise DomainError("split star undefined for nu_F = 1")
    q = p ** (nu_F + 1)
    dp = params.P.derivative()
    mask = np.zeros(p, dtype=np.uint8)
    for b in range(p):
        if dp(b) % p == 0:
            mask[b] = 1
    if which == "lower_star":
        mask = (1 - mask).astype(np.uint8)
    elif which != "star":
        raise DomainError("which must be 'star' or 'lower_star'")
    return eval_delta_direct(params, a, q, h, tol=tol, threads=threads,
                             mask_mod=p, mask=mask, with_budget=True)


def eta_tilde_norm(lam, t_max=None, n_t=2000, bump=None):
    """L1 norm of the Mellin-type transform of eta_lam(x) = phi(x/lam)(e(x)-1).

    eta-tilde(t) = int phi(u) (e(lam u) - 1) u^(it-1) du over [1/2, 2];
    |eta-tilde| integrated over a t-grid plus a 1/t tail bound from the
    double-integration-by-parts envelope.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    bump = bump or bump_pair()
    if t_max is None:
        t_max = 40.0 * (1.0 + lam)
    gx, gw = np.polynomial.legendre.leggauss(16)
    # panels over u in [1/2, 2] fine enough for frequency lam and log-phase t
    n_panels = int(40 + 8 * lam + 2.0 * t_max / (2 * math.pi))
    edges = np.linspace(0.5, 2.0, n_panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halfs = 0.5 * np.diff(edges)
    us = (mids[:, None] + halfs[:, None] * gx[None, :]).ravel()
    base = bump.phi(us) * (np.exp(2j * math.pi * lam * us) - 1.0) / us
    logu = np.log(us)
    ts = np.linspace(-t_max, t_max, n_t)
    weights = np.repeat(halfs, 16) * np.tile(gw, n_panels)
    vals = np.empty(len(ts))
    for i, t in enumerate(ts):
        integrand = base * np.exp(1j * t * logu)
        vals[i] = abs(np.sum(weights * integrand))
    norm_main = np.trapezoid(vals, ts)
    # double IBP: |eta-tilde(t)| <= C lam / t^2; fit C at the grid edge
    edge = max(vals[0], vals[-1]) * t_max ** 2
    tail = 2.0 * edge / t_max
    return float(norm_main + tail)

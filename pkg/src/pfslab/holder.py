"""Holder-exponent estimation, average-oscillation experiments, censuses,
the model sum S, and the two-sided spectrum bound formulas.

sup |Delta F| over an h-window is approximated by a geometric sample grid
(both signs), recorded as an under-estimate; log-log slopes over dyadic
windows are robust to that uniform under-sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .diophantine import _to_rational, in_At
from .errors import DomainError, ResourceError
from .series import SeriesParams, delta_at_real, eval_delta_direct

DEFAULT_SAMPLES = 64  # per sign per window


@dataclass
class OscillationRecord:
    base: object  # (a, q) tuple or ("real", x_num, scale_bits)
    j: int  # window |h| in [2^-j-1, 2^-j)
    sup: float
    samples: int
    method: str
    err_budget: float
    argmax_h: float = 0.0


@dataclass
class HolderEstimate:
    beta_hat: float
    stderr: float
    j_range: tuple
    residuals: list
    sups: list


@dataclass
class SpectrumBounds:
    k: int
    nu_0: int
    beta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    exact_quadratic: np.ndarray | None


def _window_h_values(j, samples):
    """Geometric grid over [2^-j-1, 2^-j), both signs, spec default density."""
    lo = 2.0 ** (-j - 1)
    hs = lo * (2.0 ** ((np.arange(samples) + 0.5) / samples))
    return np.concatenate([hs, -hs])


def sup_osc(params, base, j, samples=DEFAULT_SAMPLES, tol_rel=1e-3,
            mask_mod=0, mask=None, threads=None):
    """Sampled sup of |Delta F| over the dyadic window |h| in [2^-j-1, 2^-j).

    base: (a, q) rational or (x_num, scale_bits) high-precision real marker.
    The record documents the under-approximation (finite sample grid).
    """
    if samples < 2:
        raise DomainError("needs at least 2 samples")
    hs = _window_h_values(j, samples)
    # anticipated scale for the tolerance budget: |dF| ~ h^(rho + 1/2k)
    anticipate = (2.0 ** -j) ** (params.rho + 0.5 / (2 * params.k))
    tol = max(1e-13, tol_rel * anticipate)
    sup = 0.0
    arg = 0.0
    budget = 0.0
    if base[0] not in ("rat", "real"):
        raise DomainError("base must be ('rat', a, q) or ('real', x_num, bits)")
    for h in hs:
        if base[0] == "rat":
            _, a, q = base
            try:
                dv = eval_delta_direct(params, a, q, float(h), tol=tol,
                                       mask_mod=mask_mod, mask=mask,
                                       threads=threads, with_budget=True)
            except ResourceError as exc:
                if exc.achievable is None:
                    raise
                dv = eval_delta_direct(params, a, q, float(h),
                                       tol=exc.achievable * 1.01,
                                       mask_mod=mask_mod, mask=mask,
                                       threads=threads, with_budget=True)
        else:
            _, x_num, bits = base
            dv = delta_at_real(params, x_num, bits, float(h), tol=tol,
                               threads=threads)
        v = abs(dv.value)
        budget = max(budget, dv.budget)
        if v > sup:
            sup = v
            arg = float(h)
    return OscillationRecord(base=base, j=j, sup=sup, samples=2 * samples,
                             method="direct", err_budget=budget, argmax_h=arg)


def beta_estimate(params, x, j_min=8, j_max=None, samples=24, prec=256,
                  tol_rel=1e-3, threads=None):
    """Least-squares slope of log sup|Delta F| against log|h| over dyadic j.

    x may be a rational pair (a, q), a float/str/mpf real, or a Fraction.
    """
    if j_max is None:
        j_max = 26 if params.k == 2 else 20
    if j_max - j_min < 2:
        raise DomainError("needs at least 3 scales")
    if isinstance(x, tuple) and x and x[0] in ("rat", "real"):
        base = x
    elif isinstance(x, tuple) and len(x) == 2:
        base = ("rat", x[0] % x[1], x[1])
    else:
        num, den, _ = _to_rational(x, prec)
        num %= den
        if den.bit_length() <= 62 and isinstance(x, (Fraction, int)):
            base = ("rat", num, den)  # exact rational: use residue phases
        else:
            bits = max(den.bit_length() - 1, 64)
            base = ("real", (num << bits) // den, bits)
    sups = []
    js = list(range(j_min, j_max + 1))
    for j in js:
        rec = sup_osc(params, base, j, samples=samples, threads=threads)
        sups.append(rec.sup)
    ln_h = np.array([-j * math.log(2.0) for j in js])
    ln_s = np.log(np.array(sups))
    A = np.vstack([ln_h, np.ones_like(ln_h)]).T
    coef, res, *_ = np.linalg.lstsq(A, ln_s, rcond=None)
    fit = A @ coef
    resid = ln_s - fit
    dof = max(len(js) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof
                       / float(np.sum((ln_h - ln_h.mean()) ** 2)))
    return HolderEstimate(beta_hat=float(coef[0]), stderr=stderr,
                          j_range=(j_min, j_max), residuals=resid.tolist(),
                          sups=sups)


def _q_for_osc(params, p):
    nu_F, _ = params.ramification()
    return p if nu_F == 1 else p ** (nu_F + 1)


def _star_mask(params, p, lower=True):
    """Mask selecting n with p not dividing P'(n) (the F_* index set)."""
    nu_F, _ = params.ramification()
    if nu_F == 1:
        return 0, None
    dp = params.P.derivative()
    mask = np.array([0 if dp(b) % p == 0 else 1 for b in range(p)],
                    dtype=np.uint8)
    if not lower:
        mask = (1 - mask).astype(np.uint8)
    return p, mask


def avg_osc_single_q(params, p, H, samples=32, tol_rel=1e-3, threads=None):
    """(1/q) sum_a sup_{H<=|h|<2H} |Delta F_*(a/q+h)|^2, q = p or p^(nu_F+1)."""
    if not 0 < H < 1:
        raise DomainError("needs 0 < H < 1")
    q = _q_for_osc(params, p)
    mask_mod, mask = _star_mask(params, p)
    j = int(math.floor(-math.log2(H))) - 1  # window [H, 2H) = [2^-j-1, 2^-j)
    total = 0.0
    comp = 0.0
    for a in range(1, q + 1):
        rec = sup_osc(params, ("rat", a % q, q), j, samples=samples,
                      mask_mod=mask_mod, mask=mask, threads=threads)
        y = rec.sup ** 2 - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / q


def avg_osc_qrange(params, Q, H, eps=0.1, samples=16, tol_rel=1e-3, threads=None):
    """(1/Q^(2+eps)) sum_{Q<=n<2Q} sum_{a<=n} sup |Delta F(a/n+h)|^2."""
    if not Q ** (-params.k) < H < 1:
        raise DomainError("needs Q^-k < H < 1")
    j = int(math.floor(-math.log2(H))) - 1
    total = 0.0
    for n in range(Q, 2 * Q):
        for a in range(1, n + 1):
            rec = sup_osc(params, ("rat", a % n, n), j,
                          samples=samples, threads=threads)
            total += rec.sup ** 2
    return total / Q ** (2.0 + eps)


def avg_osc_restricted(params, q, q_tilde, r, H, samples=24, t=None,
                       tol_rel=1e-3, threads=None):
    """Average of sup|Delta F|^2 over a in A(q~^r), window [H, 2H).

    Returns (average, |A|, fitted-exponent reference 2(alpha-1)/k + 2/((nu_F+1)r)).
    """
    nu_F, _ = params.ramification()
    if not r > 2 * params.k / (nu_F + 1):
        raise DomainError("needs r > 2k/(nu_F+1)")
    if t is None:
        t = q_tilde ** int(r) if float(r).is_integer() \
            else Fraction(float(q_tilde) ** float(r))
    members = [a for a in range(1, q) if in_At(a, q, q_tilde, t)]
    if not members:
        raise DomainError("A(t) is empty at this scale")
    j = int(math.floor(-math.log2(H))) - 1
    total = 0.0
    for a in members:
        rec = sup_osc(params, ("rat", a, q), j, samples=samples,
                      threads=threads)
        total += rec.sup ** 2
    expo_ref = 2 * (params.alpha - 1) / params.k + 2.0 / ((nu_F + 1) * r)
    return {"average": total / len(members), "A_size": len(members),
            "exponent_ref": expo_ref}


def exceptional_census(params, q, q_tilde, r, eps, which="cheby",
                       h_samples=24, samples_per_octave=8, threads=None):
    """|C_{q,q~}(eps)| or |B_q(eps)| by exhaustive membership over sampled h.

    cheby: a in A(q~^r) with sup over (q^-r/4, 2 q~^-r) of
           |Delta F| / |h|^((alpha-1)/k + 1/((nu_F+1) r) - eps) > 1.
    Bq:    a <= q with sup over (q^-r/4, q^-r/2) of
           |Delta F_*| / (h^((alpha-1)/k) (h^(1/2k)+h^(1/2r)) h^-eps) > 1.
    Returns count plus the bound ratio against the statement's envelope.
    """
    nu_F, _ = params.ramification()
    count = 0
    if which == "cheby":
        t = q_tilde ** int(r) if float(r).is_integer() \
            else Fraction(float(q_tilde) ** float(r))
        members = [a for a in range(1, q) if in_At(a, q, q_tilde, t)]
        h_lo = 0.25 * float(q) ** -float(r)
        h_hi = 2.0 * float(q_tilde) ** -float(r)
        n_oct = max(int(math.log2(h_hi / h_lo)), 1)
        hs = np.geomspace(h_lo, h_hi, max(h_samples, n_oct * samples_per_octave))
        expo = (params.alpha - 1) / params.k + 1.0 / ((nu_F + 1) * r) - eps
        for a in members:
            for h in hs:
                dv = eval_delta_direct(params, a, q, float(h),
                                       tol=1e-3 * h ** expo, threads=threads)
                if abs(dv) / h ** expo > 1.0:
                    count += 1
                    break
        bound = (q_tilde ** r) ** (-2 * eps) * len(members) * math.log(q)
        return {"count": count, "bound": bound,
                "ratio": count / bound if bound > 0 else math.inf,
                "population": len(members)}
    if which == "Bq":
        p = round(q ** (1.0 / (nu_F + 1))) if nu_F > 1 else q
        mask_mod, mask = _star_mask(params, p)
        h_lo = 0.25 * float(q) ** -float(r)
        h_hi = 0.5 * float(q) ** -float(r)
        hs = np.geomspace(h_lo, h_hi, h_samples)
        for a in range(1, q + 1):
            for h in hs:
                dv = eval_delta_direct(params, a % q, q, float(h), tol=1e-9,
                                       mask_mod=mask_mod, mask=mask,
                                       threads=threads)
                env = h ** ((params.alpha - 1) / params.k) \
                    * (h ** (0.5 / params.k) + h ** (0.5 / r)) * h ** -eps
                if abs(dv) / env > 1.0:
                    count += 1
                    break
        bound = q ** (1.0 - 2 * eps * r)
        return {"count": count, "bound": bound,
                "ratio": count / bound if bound > 0 else math.inf,
                "population": q}
    raise DomainError("which must be 'cheby' or 'Bq'")


def model_sum_S(params, a, q, h):
    """S = h^(1/k) sum_{h^(-1/k) <= n < 2 h^(-1/k)} e(a P(n)/q), plus the
    comparison of h^rho S with Delta F."""
    if not 0 < h < 1:
        raise DomainError("needs 0 < h < 1")
    n0 = int(math.ceil(h ** (-1.0 / params.k)))
    n1 = 2 * n0
    if n1 <= 1:
        return {"S": 0j, "n_range": (n0, n1), "model": 0j}
    val = kernels.expsum_range(params.P.coeffs, q, a % q, n0, n1)
    S = h ** (1.0 / params.k) * val
    return {"S": S, "n_range": (n0, n1), "model": h ** params.rho * S}


def spectrum_bounds(k, nu_0, grid=256, edge_refine=1e-7):
    """Two-sided spectrum bounds on beta in [0, 1/2k).

    lower = (nu_0 + 2) beta; upper = the two-branch omega formula with the
    branch junction at beta = 1/(k 2^k); for k = 2 the exact quadratic curve
    4 beta is tabulated alongside. The last grid node sits at
    (1/2k)(1 - edge_refine) so the upper limit 1 is visible at the edge.
    """
    if not (isinstance(k, int) and k >= 2):
        raise DomainError("needs integer k >= 2")
    if nu_0 < 2 or nu_0 > max(k - 1, 2):
        raise DomainError("needs 2 <= nu_0 <= max(k-1, 2)")
    top = 1.0 / (2 * k)
    if np.ndim(grid) == 0:
        beta = np.linspace(0.0, top * (1 - 2.0 ** -20), int(grid) - 1)
        beta = np.append(beta, top * (1.0 - edge_refine))
    else:
        beta = np.asarray(grid, dtype=np.float64)
    if np.any(beta < 0) or np.any(beta >= top):
        raise DomainError("beta grid must lie in [0, 1/2k)")
    lower = (nu_0 + 2.0) * beta
    junction = 1.0 / (k * 2.0 ** k)
    upper = np.where(
        beta < junction,
        2.0 * beta / (2.0 ** -k + beta),
        1.5 - np.sqrt(np.maximum((k + 4.0) / (4.0 * k) - 2.0 * beta, 0.0)))
    exact = 4.0 * beta if k == 2 else None
    return SpectrumBounds(k=k, nu_0=nu_0, beta=beta, lower=lower, upper=upper,
                          exact_quadratic=exact)

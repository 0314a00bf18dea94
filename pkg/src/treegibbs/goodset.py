"""Good-set membership for norm pairs of the transfer operator.

A pair (gamma, delta) with d >= 2 belongs to the good set G_d when some
epsilon > 0 satisfies both

    delta + gamma * eps**d <= eps                    (invariant ball)
    L(eps) = 2*d*(gamma*eps**(d-1) + delta*eps**d) < 1   (contraction)

Inside G_d the boundary-law operator maps the eps-ball around the transfer
operator into itself and contracts, which yields a localized Gibbs measure
per center.  This module finds the minimal eps, evaluates L there (optimal,
since L is increasing in eps), maps out the exact d = 2 boundary curve,
locates inverse-temperature thresholds by bisection, and scans large
degrees along the beta_{A,d} = A*log(d)/(d+1) schedule.

All root finding is plain bisection with interval certificates; the sizes
involved make speed irrelevant and the bracket widths double as error
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, NumericalError
from .potentials import Potential, log_potential, norm_pair, sos

__all__ = [
    "GoodSetQuery",
    "MembershipVerdict",
    "ScanRow",
    "ScanReport",
    "smallest_epsilon",
    "lipschitz_constant",
    "membership",
    "binary_delta_boundary",
    "binary_delta_boundary_radical",
    "beta_threshold",
    "large_degree_scan",
]

REASON_OK = "ok"
REASON_NO_EPSILON = "no_epsilon_exists"
REASON_LIPSCHITZ = "lipschitz_ge_one"
REASON_GAMMA_FLAG = "gamma_out_of_domain_flag"


@dataclass(frozen=True)
class GoodSetQuery:
    """Candidate norm pair: gamma for the full norm, delta for the punctured one."""

    d: int
    gamma: float
    delta: float

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 2):
            raise ConfigError(f"d must be an integer >= 2, got {self.d!r}")
        # delta == 0 is the degenerate no-off-diagonal-mass limit (norm
        # underflow at extreme beta); membership is then immediate
        if not (self.gamma > 0 and self.delta >= 0):
            raise ConfigError(
                f"gamma and delta must be positive, got gamma={self.gamma!r} delta={self.delta!r}"
            )


@dataclass(frozen=True)
class MembershipVerdict:
    """Outcome of the two good-set inequalities at the minimal epsilon.

    The pairs with gamma <= 1 sit outside the region the theory is stated
    for (the full norm always dominates the zero term, so gamma >= 1 with
    equality only in the Dirac limit); the inequalities are evaluated
    anyway and the reason records the caveat.
    """

    d: int
    gamma: float
    delta: float
    in_good_set: bool
    epsilon: float | None
    lipschitz: float | None
    reason: str

    def __bool__(self) -> bool:
        return self.in_good_set


def smallest_epsilon(query: GoodSetQuery, abs_tol: float = 1e-13) -> float | None:
    """Smallest positive solution of delta + gamma*eps**d = eps, or None.

    f(eps) = gamma*eps**d + delta - eps is convex with minimum at
    eps* = (1/(d*gamma))**(1/(d-1)); when f(eps*) > 0 there is no root.
    Otherwise bisect on [0, eps*] and return the upper bracket end, so the
    ball inequality holds exactly at the returned value.
    """
    if abs_tol <= 0:
        raise ConfigError(f"abs_tol must be positive, got {abs_tol}")
    d, g, dl = query.d, query.gamma, query.delta
    if not (math.isfinite(g) and math.isfinite(dl)):
        return None
    eps_star = (1.0 / (d * g)) ** (1.0 / (d - 1))

    def f(e: float) -> float:
        return g * e**d + dl - e

    if f(eps_star) > 0:
        return None
    lo, hi = 0.0, eps_star
    while hi - lo > abs_tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def lipschitz_constant(query: GoodSetQuery, eps: float) -> float:
    """L(eps) = 2d(gamma*eps^(d-1) + delta*eps^d), the contraction bound."""
    d = query.d
    return 2.0 * d * (query.gamma * eps ** (d - 1) + query.delta * eps**d)


def membership(query: GoodSetQuery, abs_tol: float = 1e-13) -> MembershipVerdict:
    """Verdict with the minimal epsilon and its Lipschitz constant.

    Minimal eps is the right probe: L is strictly increasing in eps, so the
    pair is in G_d iff L(minimal eps) < 1.
    """
    flag = query.gamma <= 1.0
    eps = smallest_epsilon(query, abs_tol)
    if eps is None:
        reason = REASON_GAMMA_FLAG if flag else REASON_NO_EPSILON
        return MembershipVerdict(query.d, query.gamma, query.delta, False, None, None, reason)
    L = lipschitz_constant(query, eps)
    member = L < 1.0
    if flag:
        reason = REASON_GAMMA_FLAG
    else:
        reason = REASON_OK if member else REASON_LIPSCHITZ
    return MembershipVerdict(query.d, query.gamma, query.delta, member, eps, L, reason)


# ---------------------------------------------------------------------------
# exact boundary of G_2
# ---------------------------------------------------------------------------


def _binary_quartic(gamma: float, delta: float) -> float:
    """16 g^2 x^4 + 24 g^3 x^2 + (16 g^5 - 4 g^2) x - 3 g^4, scaled by g^-4."""
    g = gamma
    return (
        16.0 * delta**4 / g**2
        + 24.0 * delta**2 / g
        + (16.0 * g - 4.0 / g**2) * delta
        - 3.0
    )


def binary_delta_boundary_radical(gamma: float) -> float:
    """Closed radical form of the d = 2 boundary curve delta(gamma).

    Loses relative accuracy like gamma^2 * eps_machine from the final
    subtraction; the bisection value is the certified one.
    """
    g = gamma
    w = (g**3 + 0.25) ** (2.0 / 3.0) - g
    inner = 2.0 * (g**3 - 0.25) / math.sqrt(w) - (g**3 + 0.25) ** (2.0 / 3.0) - 2.0 * g
    return 0.5 * math.sqrt(inner) - 0.5 * math.sqrt(w)


def binary_delta_boundary(gamma: float, abs_tol: float = 1e-14) -> float:
    """Unique delta > 0 on the boundary of G_2 at the given gamma > 1.

    Below the returned value the pair (gamma, delta) is in G_2, above it is
    not.  Bisection on (0, 1/(4*gamma)] against the scaled quartic, then a
    consistency check against the radical form with a cancellation-aware
    tolerance.
    """
    if not gamma > 1.0:
        raise ConfigError(f"binary boundary curve needs gamma > 1, got {gamma}")
    lo, hi = 0.0, 1.0 / (4.0 * gamma)
    if _binary_quartic(gamma, hi) < 0:
        raise NumericalError(f"quartic bracket failed at gamma={gamma}")
    while hi - lo > abs_tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _binary_quartic(gamma, mid) > 0:
            hi = mid
        else:
            lo = mid
    delta = 0.5 * (lo + hi)
    rad = binary_delta_boundary_radical(gamma)
    if abs(delta - rad) > 1e-8 * delta + 1e-13 * gamma**2:
        raise NumericalError(
            f"boundary curve mismatch at gamma={gamma}: bisection {delta!r} vs radical {rad!r}"
        )
    return delta


# ---------------------------------------------------------------------------
# temperature thresholds
# ---------------------------------------------------------------------------


def _potential_family(family) -> "tuple[str, object]":
    if callable(family):
        return ("custom", family)
    if family == "sos":
        return ("sos", sos)
    if family == "log":
        return ("log", log_potential)
    raise ConfigError(f"unknown potential family {family!r}, expected 'sos', 'log', or a callable")


def beta_threshold(
    family,
    d: int,
    pairing: str = "half",
    tol: float = 1e-6,
    beta_max: float = 64.0,
    rel_tol: float = 1e-10,
) -> float:
    """Infimum of beta for which the operator's norm pair enters G_d.

    ``family`` is "sos", "log", or a callable beta -> Potential.  Membership
    is monotone in beta because both norms strictly decrease in beta, which
    makes bisection valid; the closed-form norm path keeps each probe cheap.
    Raises NumericalError when no member is found below beta_max.
    """
    if d < 2:
        raise ConfigError(f"d must be >= 2, got {d}")
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    _, make = _potential_family(family)

    def is_member(beta: float) -> bool:
        g, dl = norm_pair(make(beta), d, pairing, rel_tol=rel_tol, cross_check=False)
        if g.is_infinite or dl.is_infinite:
            return False
        return membership(GoodSetQuery(d, g.value, dl.value)).in_good_set

    hi = 1.0
    while not is_member(hi):
        hi *= 2.0
        if hi > beta_max:
            raise NumericalError(f"no threshold in range: not in G_{d} up to beta={beta_max}")
    lo = hi / 2.0
    while is_member(lo):
        hi = lo
        lo /= 2.0
        if lo < 1e-9:
            raise NumericalError("membership persists down to beta ~ 0; no finite threshold")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_member(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# large-degree scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    d: int
    beta: float
    gamma: float
    delta: float
    in_good_set: bool
    ratio_upper_bound: float | None
    flag: str | None = None


@dataclass(frozen=True)
class ScanReport:
    """Rows of the beta_{A,d} schedule plus the onset degree d0.

    d0 is the smallest tested degree from which membership holds for every
    larger tested degree; None when the largest degree still fails.
    ratio_upper_bound is the localization mass bound
    (delta*(1+delta*eps^d)/(1-gamma*eps^(d-1)))^(d+1); the theory says it
    decays like 1/d along the schedule.
    """

    A: float
    v: float
    rows: tuple[ScanRow, ...]
    d0: int | None


def _min_potential_value(pot: Potential) -> float:
    if pot.kind == "sos":
        return 1.0
    if pot.kind == "log":
        return math.log(2.0)
    return min(pot.table)


def large_degree_scan(family, A: float, d_range, rel_tol: float = 1e-10) -> ScanReport:
    """Membership along beta_{A,d} = A*log(d)/(d+1) for each d in d_range.

    Requires A > 1/v with v = inf_{j != 0} U(j) > 0; that schedule is the
    regime where the good-set conditions kick in for all large d.
    """
    _, make = _potential_family(family)
    probe = make(1.0)
    v = _min_potential_value(probe)
    if v <= 0:
        raise ConfigError("potential needs inf_{j!=0} U(j) > 0 for the large-degree schedule")
    if A <= 1.0 / v:
        raise ConfigError(f"A must exceed 1/v = {1.0 / v:.6g}, got {A}")
    rows = []
    for d in d_range:
        d = int(d)
        if d < 2:
            raise ConfigError(f"degrees must be >= 2, got {d}")
        beta = A * math.log(d) / (d + 1)
        g, dl = norm_pair(make(beta), d, "half", rel_tol=rel_tol, cross_check=False)
        if g.is_infinite or dl.is_infinite:
            rows.append(ScanRow(d, beta, math.inf, dl.value, False, None, "gamma_infinite"))
            continue
        verdict = membership(GoodSetQuery(d, g.value, dl.value))
        ratio = None
        if verdict.in_good_set:
            ratio = _localization_ratio(d, g.value, dl.value, verdict.epsilon)
        rows.append(ScanRow(d, beta, g.value, dl.value, verdict.in_good_set, ratio))
    d0 = None
    for row in reversed(rows):
        if not row.in_good_set:
            break
        d0 = row.d
    return ScanReport(A, v, tuple(rows), d0)


def _localization_ratio(d: int, gamma: float, delta: float, eps: float) -> float:
    # log space: the bound underflows fast along the schedule
    log_b = math.log(delta) + math.log1p(delta * eps**d) - math.log1p(-gamma * eps ** (d - 1))
    val = (d + 1) * log_b
    return math.exp(val) if val > -745 else 0.0

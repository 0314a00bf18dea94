"""Two-layer gradient-measure objects built from a q-periodic boundary law.

The hidden layer is the fuzzy chain: a Markov chain on the q height classes
with transitions P(ibar, jbar) = Q_q(ibar - jbar) lam(jbar) / N(ibar) and
stationary law alpha = lam^((d+1)/d) normalized.  The visible layer draws
the integer increment of an edge from the class-conditional law
rho(j | sbar) = Q(j) / Q_q(sbar) restricted to the residue class.  Edge and
star marginals come out exactly by enumerating the root class; along any
finite tree the classes are determined by the root class and the edge
increments, so the enumeration never grows beyond q terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary_law import SUPPORT_PERIODIC, BoundaryLaw, single_site_marginal
from .errors import ConfigError, NumericalError
from .potentials import FuzzyOperator, Potential, _arm_tail_bracket, fuzzy_Q

__all__ = [
    "FuzzyChain",
    "IncrementLaw",
    "fuzzy_chain",
    "increment_law",
    "increment_laws",
    "ggm_edge_marginal",
    "star_marginal",
]

_STATIONARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FuzzyChain:
    """Induced chain on height classes with its stationary law.

    P is row-stochastic; alpha satisfies alpha @ P = alpha and detailed
    balance (both consequences of the boundary-law equation, checked at
    construction).  d is carried along for marginal formulas downstream.
    """

    q: int
    P: np.ndarray
    alpha: np.ndarray
    d: int

    def __post_init__(self):
        self.P.setflags(write=False)
        self.alpha.setflags(write=False)


@dataclass(frozen=True, eq=False)
class IncrementLaw:
    """Conditional edge-increment distribution on one residue class.

    ``support`` holds the represented integers j = residue (mod q) with
    |j| <= radius; ``weights`` their probabilities Q(j)/Q_q(residue).
    ``tail_mass_bound`` certifies the probability mass left outside.
    """

    q: int
    residue: int
    support: np.ndarray
    weights: np.ndarray
    tail_mass_bound: float

    def __post_init__(self):
        self.support.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def radius(self) -> int:
        return int(np.max(np.abs(self.support)))

    def mean(self) -> float:
        return math.fsum((self.support * self.weights).tolist())

    def second_moment(self) -> float:
        return math.fsum((self.support.astype(float) ** 2 * self.weights).tolist())


def fuzzy_chain(bl: BoundaryLaw, qq: FuzzyOperator) -> FuzzyChain:
    """Build the class chain P(ibar, jbar) = Q_q(ibar-jbar) lam(jbar) / N(ibar).

    Accepts any q-periodic law, including the free state (constant lam gives
    the normalized class operator itself and a uniform alpha).  The
    stationarity of alpha is rechecked; a residual above 1e-10 means the
    input does not actually solve the boundary-law equation.
    """
    if bl.kind != SUPPORT_PERIODIC:
        raise ConfigError("fuzzy_chain needs a q-periodic boundary law")
    if qq.q != bl.q:
        raise ConfigError(f"operator has q={qq.q}, boundary law has q={bl.q}")
    q = bl.q
    lam = bl.lam
    idx = np.arange(q)
    Qmat = np.asarray(qq.values, dtype=float)[(idx[:, None] - idx[None, :]) % q]
    num = Qmat * lam[None, :]
    P = num / num.sum(axis=1, keepdims=True)
    alpha = single_site_marginal(bl)
    if q > 1:
        resid = float(np.max(np.abs(alpha @ P - alpha)))
        if resid > _STATIONARITY_TOL:
            raise NumericalError(
                f"stationarity residual {resid:.3g} exceeds {_STATIONARITY_TOL:.0e}; "
                "the supplied law does not solve the boundary-law equation"
            )
    return FuzzyChain(q=q, P=P, alpha=alpha, d=bl.d)


def increment_law(
    pot: Potential,
    q: int,
    residue: int,
    radius: int | None = None,
    tail_bound: float = 1e-10,
) -> IncrementLaw:
    """Normalized restriction of Q to one residue class, with certified tail.

    The default radius is grown until the omitted class mass is certified
    below tail_bound.  Requires Q summable (the class masses are the
    normalizers).
    """
    qq = fuzzy_Q(pot, q)
    residue %= q
    mass = qq.at(residue) - qq.residual_tail

    def tail(R: int) -> float:
        return 2.0 * _arm_tail_bracket(pot, 1.0, R)[1] / mass

    if radius is None:
        radius = max(1, pot.table_end, residue)
        while tail(radius) > tail_bound:
            radius *= 2
            if radius > (1 << 30):
                raise NumericalError(
                    f"increment window beyond 2^30 needed for tail bound {tail_bound:.3g}"
                )
        lo = max(1, pot.table_end, residue)
        hi = radius
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tail(mid) <= tail_bound:
                hi = mid
            else:
                lo = mid
        radius = hi if tail(lo) > tail_bound else lo
    elif radius < residue or radius < 1:
        raise ConfigError(f"radius {radius} cannot hold residue {residue}")

    first = residue if residue else q
    pos = np.arange(first, radius + 1, q)
    neg = -np.arange(q - residue, radius + 1, q)
    support = np.concatenate([neg[::-1], [0] if residue == 0 else [], pos]).astype(int)
    weights = pot.Q(support) / qq.at(residue)
    return IncrementLaw(
        q=q,
        residue=residue,
        support=support,
        weights=weights,
        tail_mass_bound=max(tail(radius), 0.0),
    )


def increment_laws(
    pot: Potential, q: int, radius: int | None = None, tail_bound: float = 1e-10
) -> list[IncrementLaw]:
    """One IncrementLaw per residue class 0..q-1."""
    return [increment_law(pot, q, s, radius, tail_bound) for s in range(q)]


def _check_laws(fc: FuzzyChain, laws) -> list[IncrementLaw]:
    laws = list(laws)
    if len(laws) != fc.q:
        raise ConfigError(f"need {fc.q} increment laws, got {len(laws)}")
    for s, law in enumerate(laws):
        if law.q != fc.q or law.residue != s:
            raise ConfigError(f"law at position {s} has q={law.q}, residue={law.residue}")
    return laws


def ggm_edge_marginal(
    fc: FuzzyChain, laws, window: int, tail_tol: float = 1e-9
) -> np.ndarray:
    """Single-edge increment law nu(j) on the window [-K, K].

    nu(j) = sum_ibar alpha(ibar) P(ibar, ibar+jbar) rho(j | jbar) with
    jbar = j mod q.  The result is symmetric with zero tilt.  Errors out
    when the window cannot hold enough mass for tail_tol.
    """
    laws = _check_laws(fc, laws)
    q = fc.q
    need = max(law.radius for law in laws)
    nu = np.zeros(2 * window + 1)
    for s, law in enumerate(laws):
        # stationary probability of a class step s: sum_i alpha(i) P(i, i+s)
        step = math.fsum(
            float(fc.alpha[i] * fc.P[i, (i + s) % q]) for i in range(q)
        )
        for j, w in zip(law.support.tolist(), law.weights.tolist()):
            if abs(j) <= window:
                nu[j + window] += step * w
    deficit = 1.0 - math.fsum(nu.tolist())
    if deficit > tail_tol:
        raise NumericalError(
            f"window {window} leaks mass {deficit:.3g} > {tail_tol:.3g}; "
            f"use window >= {need}"
        )
    return nu


def star_marginal(fc: FuzzyChain, laws, increments) -> float:
    """Exact probability of a given increment assignment on a star.

    The volume is a root with len(increments) outgoing edges; conditioning
    on the root class makes the edges independent, so the enumeration is a
    single sum over classes.  Limited to 12 edges (desk-scale exactness).
    """
    laws = _check_laws(fc, laws)
    increments = [int(j) for j in increments]
    if len(increments) > 12:
        raise ConfigError("star volumes limited to 12 edges; sample instead")
    q = fc.q
    rho = []
    for j in increments:
        law = laws[j % q]
        hit = np.nonzero(law.support == j)[0]
        rho.append(float(law.weights[hit[0]]) if hit.size else 0.0)
    total = 0.0
    for i in range(q):
        term = float(fc.alpha[i])
        for j, r in zip(increments, rho):
            term *= float(fc.P[i, (i + j) % q]) * r
        total += term
    return total

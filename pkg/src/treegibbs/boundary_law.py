"""Boundary-law fixed points: localized laws on a truncated window of Z and
height-periodic laws on Z_q.

The normalized boundary-law equation is x = T(x) with

    T(x)(i) = (Q(i) + sum_{j != 0} Q(i-j) x(j)^d) / (1 + sum_{j != 0} Q(j) x(j)^d),

a convolution against w = x^d with the zero slot pinned to w(0) = 1,
renormalized so T(x)(0) = 1.  Inside the good set T contracts an eps-ball
around Q in the l_{d+1} norm, and Banach iteration from x0 = Q converges to
the unique fixed point there; lambda = x^d is the boundary law and
lambda^{(d+1)/d} normalizes to the single-site marginal.

On Z_q the same operator runs with the normalized class-sum operator
Qbar_q = Q_q / Q_q(0) and circular convolution; the q = 1 case degenerates
to the free state lambda == 1.

Solves are certified by default: refusal outside the good set, a-posteriori
Banach stopping ||x_{n+1} - x_n|| * L/(1-L) < tol, and a truncation radius
chosen so the discarded tail of Q at exponent d+1 stays below 0.01*tol.
The best-effort mode drops the certificates (plain iteration, divergence
and trivial-branch detection) and labels the result uncertified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import ConfigError, NumericalError, OutsideGoodSetError
from .goodset import GoodSetQuery, membership
from .potentials import (
    DOMAIN_Z,
    DOMAIN_Z_STAR,
    FuzzyOperator,
    Potential,
    _arm_tail_bracket,
    fuzzy_Q,
    p_norm,
)

__all__ = [
    "SUPPORT_TRUNCATED",
    "SUPPORT_PERIODIC",
    "BoundaryLaw",
    "SolveConfig",
    "SolveReport",
    "apply_T",
    "apply_T_periodic",
    "truncation_radius",
    "solve_fixed_point",
    "periodic_solve",
    "localization_bounds",
    "single_site_marginal",
    "write_law_csv",
]

SUPPORT_TRUNCATED = "Z_truncated"
SUPPORT_PERIODIC = "Z_q"

MODE_CERTIFIED = "certified"
MODE_BEST_EFFORT = "best_effort"
MODE_AUTO = "auto"

_FFT_WINDOW = 2048
_MAX_WINDOW_RADIUS = 1 << 25


@dataclass(frozen=True, eq=False)
class BoundaryLaw:
    """A solved boundary law in d-th root representation.

    ``x`` holds the root values on the support including the zero slot
    (pinned to 1): index i lives at x[i + radius] on a truncated window,
    at x[i] on Z_q.  The law itself is lambda = x**d.  ``residual`` is the
    sup norm of x - T(x); ``ball_radius`` the certified eps (None when the
    solve was best-effort); ``certified`` whether the contraction
    certificate held.  ``pot`` keeps the generating potential so consumers
    can rebuild the height chain P(i,j) = Q(i-j) lambda(j) / N(i).
    """

    kind: str
    d: int
    x: np.ndarray
    radius: int | None = None
    q: int | None = None
    ball_radius: float | None = None
    residual: float = 0.0
    certified: bool = True
    free_state: bool = False
    pot: Potential | None = None

    def __post_init__(self):
        self.x.setflags(write=False)

    @property
    def lam(self) -> np.ndarray:
        """Boundary law lambda = x^d, lambda(0) = 1."""
        return self.x**self.d

    @property
    def indices(self) -> np.ndarray:
        if self.kind == SUPPORT_TRUNCATED:
            return np.arange(-self.radius, self.radius + 1)
        return np.arange(self.q)

    def _slot(self, i: int) -> int:
        if self.kind == SUPPORT_TRUNCATED:
            if abs(i) > self.radius:
                raise IndexError(f"index {i} outside window radius {self.radius}")
            return i + self.radius
        return i % self.q

    def x_at(self, i: int) -> float:
        return float(self.x[self._slot(i)])

    def lam_at(self, i: int) -> float:
        return float(self.x[self._slot(i)] ** self.d)

    def offzero_norm(self) -> float:
        """l_{d+1} norm of x over the support minus the zero slot."""
        v = self.x.copy()
        v[self._slot(0)] = 0.0
        return float(np.sum(v ** (self.d + 1)) ** (1.0 / (self.d + 1)))


@dataclass(frozen=True)
class SolveConfig:
    """Iteration controls.  radius None picks the certified truncation
    automatically; mode "auto" certifies when the good-set test passes and
    degrades to best-effort otherwise."""

    radius: int | None = None
    tol: float = 1e-12
    max_iter: int = 20000
    mode: str = MODE_CERTIFIED
    norm_rel_tol: float = 1e-10
    start: str = "Q"

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.mode not in (MODE_CERTIFIED, MODE_BEST_EFFORT, MODE_AUTO):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.radius is not None and self.radius < 1:
            raise ConfigError(f"radius must be >= 1, got {self.radius}")
        if self.start not in ("Q", "zero"):
            raise ConfigError(f"start must be 'Q' or 'zero', got {self.start!r}")


@dataclass(frozen=True)
class SolveReport:
    """Certificate trail of one Banach solve.

    contraction_estimate is the largest observed ratio of successive step
    norms (measured while steps are well above rounding noise); certified
    runs keep it at or below the good-set Lipschitz constant.  a_priori and
    a_posteriori are the standard Banach error bounds; both None without a
    contraction certificate.
    """

    iterations: int
    final_residual: float
    contraction_estimate: float | None
    a_priori_bound: float | None
    a_posteriori_bound: float | None
    lipschitz: float | None
    epsilon: float | None
    gamma: float
    delta: float
    certified: bool
    mode: str


# ---------------------------------------------------------------------------
# the operator
# ---------------------------------------------------------------------------


class _WindowOperator:
    """T on the window [-R, R] by linear convolution against Q on [-2R, 2R].

    The full convolution of Q2 (length 4R+1) with w (length 2R+1) is needed
    only at lags [2R, 4R]; a circular transform of length >= 4R+1 leaves
    that slice alias-free, so the FFT path caches one kernel transform.
    """

    def __init__(self, pot: Potential, d: int, R: int):
        self.d = d
        self.R = R
        self.Q2 = pot.Q(np.arange(-2 * R, 2 * R + 1))
        self.Q_win = self.Q2[R : 3 * R + 1]
        self.use_fft = 2 * R + 1 > _FFT_WINDOW
        if self.use_fft:
            self.nfft = scipy.fft.next_fast_len(4 * R + 1)
            self.kernel_f = scipy.fft.rfft(self.Q2, self.nfft)

    def start(self, kind: str = "Q") -> np.ndarray:
        if kind == "zero":
            x = np.zeros(2 * self.R + 1)
            x[self.R] = 1.0
            return x
        x = self.Q_win.copy()
        x[self.R] = 1.0
        return x

    def apply(self, x: np.ndarray) -> np.ndarray:
        R = self.R
        w = x**self.d
        w[R] = 1.0
        if self.use_fft:
            c = scipy.fft.irfft(self.kernel_f * scipy.fft.rfft(w, self.nfft), self.nfft)
            num = c[2 * R : 4 * R + 1]
        else:
            num = np.convolve(self.Q2, w)[2 * R : 4 * R + 1]
        return num / num[R]

    def zero_slot(self) -> int:
        return self.R


class _PeriodicOperator:
    """T on Z_q with the normalized class operator, circular convolution."""

    def __init__(self, qbar: FuzzyOperator, d: int):
        self.d = d
        self.q = qbar.q
        self.values = np.asarray(qbar.values, dtype=float)
        self.use_fft = self.q > 64
        if self.use_fft:
            self.kernel_f = np.fft.rfft(self.values)
        else:
            idx = np.arange(self.q)
            self.matrix = self.values[(idx[:, None] - idx[None, :]) % self.q]

    def start(self, kind: str = "Q") -> np.ndarray:
        if kind == "zero":
            x = np.zeros(self.q)
            x[0] = 1.0
            return x
        x = self.values.copy()
        x[0] = 1.0
        return x

    def apply(self, x: np.ndarray) -> np.ndarray:
        w = x**self.d
        w[0] = 1.0
        if self.use_fft:
            num = np.fft.irfft(self.kernel_f * np.fft.rfft(w), self.q)
        else:
            num = self.matrix @ w
        return num / num[0]

    def zero_slot(self) -> int:
        return 0


def apply_T(pot: Potential, d: int, x: np.ndarray, radius: int) -> np.ndarray:
    """One application of the boundary-law operator on the window [-R, R].

    ``x`` is the full window vector (length 2*radius+1); the zero slot
    participates as w(0) = 1 regardless of its stored value, and the output
    has value 1 there.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * radius + 1,):
        raise ConfigError(f"x must have length {2 * radius + 1} for radius {radius}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ConfigError("x must be finite and nonnegative")
    return _WindowOperator(pot, d, radius).apply(x.copy())


def apply_T_periodic(qbar: FuzzyOperator, d: int, x: np.ndarray) -> np.ndarray:
    """One application of the operator on Z_q against a normalized class operator."""
    x = np.asarray(x, dtype=float)
    if x.shape != (qbar.q,):
        raise ConfigError(f"x must have length q={qbar.q}")
    op = _PeriodicOperator(qbar.normalized_op(), d)
    return op.apply(x.copy())


# ---------------------------------------------------------------------------
# truncation control
# ---------------------------------------------------------------------------


def truncation_radius(pot: Potential, p: float, bound: float) -> int:
    """Smallest radius R with the certified tail norm of Q at exponent p below bound.

    The tail norm is (2 * sum_{j>R} Q(j)^p)^(1/p); brackets come from the
    potential's declared decay, so this is exact up to the bracket width.
    """
    if bound <= 0:
        raise ConfigError("bound must be positive")

    def tail_norm(R: int) -> float:
        hi = _arm_tail_bracket(pot, p, R)[1]
        return (2.0 * hi) ** (1.0 / p)

    lo = max(1, pot.table_end)
    if tail_norm(lo) <= bound:
        return lo
    hi = lo
    while tail_norm(hi) > bound:
        hi *= 2
        if hi > _MAX_WINDOW_RADIUS:
            raise NumericalError(
                f"truncation radius beyond {_MAX_WINDOW_RADIUS} needed for tail bound "
                f"{bound:.3g}; loosen tol (slowly decaying operator)"
            )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_norm(mid) <= bound:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# the iteration core
# ---------------------------------------------------------------------------


def _offzero_dp1(v: np.ndarray, zero_slot: int, d: int) -> float:
    s = math.fsum((np.abs(v) ** (d + 1)).tolist()) - abs(v[zero_slot]) ** (d + 1)
    return max(s, 0.0) ** (1.0 / (d + 1))


def _iterate(op, d: int, tol: float, max_iter: int, L: float | None, start: str = "Q"):
    """Banach loop; returns (x, iterations, step_norms).

    With L the stop is the certified a-posteriori bound; without it, plain
    step smallness plus divergence detection.  The threshold never exceeds
    tol so the final residual stays below tol even for tiny L.
    """
    zero = op.zero_slot()
    x = op.start(start)
    steps: list[float] = []
    if L is not None and L > 0:
        threshold = tol * min(1.0, (1.0 - L) / L)
    else:
        threshold = tol
    grow = 0
    for n in range(1, max_iter + 1):
        x_next = op.apply(x)
        step = _offzero_dp1(x_next - x, zero, d)
        steps.append(step)
        x = x_next
        if not np.all(np.isfinite(x)) or step > 1e12:
            raise NumericalError(f"iteration diverged at step {n} (step norm {step:.3g})")
        if step <= threshold:
            return x, n, steps
        if L is None:
            grow = grow + 1 if len(steps) > 1 and step > steps[-2] else 0
            if grow >= 50:
                raise NumericalError("iteration is not contracting (50 growing steps)")
    raise NumericalError(
        f"no convergence in {max_iter} iterations (last step {steps[-1]:.3g}, "
        f"threshold {threshold:.3g})"
    )


def _contraction_estimate(steps: list[float], floor: float) -> float | None:
    ratios = [
        b / a for a, b in zip(steps, steps[1:]) if a > floor and b > floor and a > 0
    ]
    return max(ratios) if ratios else None


def _finish(op, d, x, n_iter, steps, tol, L, eps, gamma, delta, certified, mode):
    resid_vec = op.apply(x) - x
    zero = op.zero_slot()
    final_residual = _offzero_dp1(resid_vec, zero, d)
    sup_residual = float(np.max(np.abs(resid_vec)))
    floor = max(100.0 * tol, 1e-13)
    contraction = _contraction_estimate(steps, floor)
    a_priori = a_post = None
    if L is not None and L > 0:
        a_priori = L**n_iter / (1.0 - L) * steps[0] if steps else 0.0
        a_post = steps[-1] * L / (1.0 - L) if steps else 0.0
    report = SolveReport(
        iterations=n_iter,
        final_residual=final_residual,
        contraction_estimate=contraction,
        a_priori_bound=a_priori,
        a_posteriori_bound=a_post,
        lipschitz=L,
        epsilon=eps,
        gamma=gamma,
        delta=delta,
        certified=certified,
        mode=mode,
    )
    return sup_residual, report


def solve_fixed_point(
    pot: Potential, d: int, config: SolveConfig = SolveConfig()
) -> tuple[BoundaryLaw, SolveReport]:
    """Solve x = T(x) on a truncated window, certified inside the good set.

    The norm pair is computed with series cross-checks, membership decides
    whether the contraction certificate applies, and the window is sized so
    the discarded tail cannot move the solution by more than the tolerance.
    Outside the good set the default mode refuses; "auto" and "best_effort"
    iterate uncertified instead.
    """
    if d < 2:
        raise ConfigError(f"d must be >= 2, got {d}")
    g = p_norm(pot, (d + 1) / 2.0, DOMAIN_Z, config.norm_rel_tol)
    dl = p_norm(pot, float(d + 1), DOMAIN_Z_STAR, config.norm_rel_tol)
    if g.is_infinite or dl.is_infinite:
        if config.mode == MODE_CERTIFIED:
            raise OutsideGoodSetError(
                "outside good set - no contraction certificate (a norm is infinite: "
                f"{g.witness or dl.witness})"
            )
        raise NumericalError(
            f"a norm of Q is infinite ({g.witness or dl.witness}); "
            "no meaningful truncated solve exists"
        )
    verdict = membership(GoodSetQuery(d, g.value, dl.value))
    certified = verdict.in_good_set
    if not certified and config.mode == MODE_CERTIFIED:
        raise OutsideGoodSetError(
            f"outside good set - no contraction certificate (reason: {verdict.reason})",
            verdict=verdict,
        )

    if config.radius is not None:
        R = config.radius
        tail = (2.0 * _arm_tail_bracket(pot, d + 1, max(R, pot.table_end))[1]) ** (
            1.0 / (d + 1)
        )
        if tail > config.tol:
            raise ConfigError(
                f"radius {R} leaves a truncated tail of {tail:.3g} > tol {config.tol:.3g}"
            )
    else:
        R = truncation_radius(pot, d + 1, 0.01 * config.tol)
        R = max(R, 4)

    op = _WindowOperator(pot, d, R)
    L = verdict.lipschitz if certified else None
    eps = verdict.epsilon if certified else None
    x, n_iter, steps = _iterate(op, d, config.tol, config.max_iter, L, config.start)
    if certified:
        ball = _offzero_dp1(x, op.zero_slot(), d)
        if ball > eps * (1.0 + 1e-9):
            raise NumericalError(
                f"solution left the certified ball: |x| = {ball!r} > eps = {eps!r}"
            )
    sup_residual, report = _finish(
        op, d, x, n_iter, steps, config.tol, L, eps, g.value, dl.value,
        certified, config.mode,
    )
    law = BoundaryLaw(
        kind=SUPPORT_TRUNCATED,
        d=d,
        x=x,
        radius=R,
        ball_radius=eps,
        residual=sup_residual,
        certified=certified,
        pot=pot,
    )
    return law, report


def periodic_solve(
    pot: Potential, d: int, q: int, config: SolveConfig = SolveConfig(mode=MODE_AUTO)
) -> tuple[BoundaryLaw, SolveReport]:
    """Solve the q-periodic boundary law against the normalized class operator.

    q = 1 returns the free state immediately (the single class forces
    lambda == 1).  For q >= 2 the good-set test runs on the Z_q norms of
    Qbar_q; membership gives a certified contraction, otherwise mode
    decides between refusal and best-effort iteration.  A best-effort run
    that lands on the constant law fails loudly: the trivial branch exists
    at every temperature and is not the sought solution.
    """
    if d < 2:
        raise ConfigError(f"d must be >= 2, got {d}")
    qbar = fuzzy_Q(pot, q, rel_tol=min(1e-12, config.tol)).normalized_op()
    if q == 1:
        law = BoundaryLaw(
            kind=SUPPORT_PERIODIC, d=d, x=np.ones(1), q=1,
            residual=0.0, certified=True, free_state=True, pot=pot,
        )
        report = SolveReport(
            iterations=0, final_residual=0.0, contraction_estimate=None,
            a_priori_bound=None, a_posteriori_bound=None, lipschitz=None,
            epsilon=None, gamma=1.0, delta=0.0, certified=True, mode=config.mode,
        )
        return law, report

    g = qbar.p_norm((d + 1) / 2.0)
    dl = qbar.p_norm(float(d + 1), without_zero=True)
    verdict = membership(GoodSetQuery(d, g.value, dl.value))
    certified = verdict.in_good_set
    if not certified and config.mode == MODE_CERTIFIED:
        raise OutsideGoodSetError(
            f"(gamma_q, delta_q) outside good set for q={q} (reason: {verdict.reason})",
            verdict=verdict,
        )

    op = _PeriodicOperator(qbar, d)
    L = verdict.lipschitz if certified else None
    eps = verdict.epsilon if certified else None
    x, n_iter, steps = _iterate(op, d, config.tol, config.max_iter, L, config.start)
    lam = x**d
    if float(lam.max() - lam.min()) < 1e-6:
        raise NumericalError(
            "converged to the trivial branch (lambda constant == free state); "
            "no non-trivial q-periodic solution found at these parameters"
        )
    if certified:
        ball = _offzero_dp1(x, 0, d)
        if ball > eps * (1.0 + 1e-9):
            raise NumericalError(
                f"solution left the certified ball: |x| = {ball!r} > eps = {eps!r}"
            )
    sup_residual, report = _finish(
        op, d, x, n_iter, steps, config.tol, L, eps, g.value, dl.value,
        certified, config.mode,
    )
    law = BoundaryLaw(
        kind=SUPPORT_PERIODIC, d=d, x=x, q=q,
        ball_radius=eps, residual=sup_residual, certified=certified, pot=pot,
    )
    return law, report


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def localization_bounds(gamma: float, delta: float, d: int) -> tuple[float, float]:
    """Two-sided bound on the off-center marginal mass ratio mu(s != 0)/mu(s = 0).

    Evaluates (delta*(1 -+ delta*eps^d)/(1 +- gamma*eps^(d-1)))^(d+1) at the
    minimal eps.  Only meaningful in the good set; refuses otherwise.
    """
    verdict = membership(GoodSetQuery(d, gamma, delta))
    if not verdict.in_good_set:
        raise OutsideGoodSetError(
            f"localization bounds need (gamma, delta) in the good set (reason: {verdict.reason})",
            verdict=verdict,
        )
    eps = verdict.epsilon
    lower = (delta * (1.0 - delta * eps**d) / (1.0 + gamma * eps ** (d - 1))) ** (d + 1)
    upper = (delta * (1.0 + delta * eps**d) / (1.0 - gamma * eps ** (d - 1))) ** (d + 1)
    return lower, upper


def single_site_marginal(law: BoundaryLaw) -> np.ndarray:
    """Probability vector lambda^{(d+1)/d} / sum over the support.

    On a truncated window this is the height marginal of the localized
    measure; on Z_q it is the stationary distribution of the fuzzy chain.
    """
    weights = law.x ** (law.d + 1)
    return weights / math.fsum(weights.tolist())


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_law_csv(law: BoundaryLaw, fh, meta: dict | None = None) -> None:
    """Write `index,x,lambda,marginal` rows with `#` metadata lines."""
    meta = dict(meta or {})
    meta.setdefault("support", law.kind)
    meta.setdefault("d", law.d)
    if law.kind == SUPPORT_TRUNCATED:
        meta.setdefault("radius", law.radius)
    else:
        meta.setdefault("q", law.q)
    meta.setdefault("residual", f"{law.residual:.17g}")
    meta.setdefault("certified", str(law.certified).lower())
    for key in sorted(meta):
        fh.write(f"# {key}={meta[key]}\n")
    fh.write("index,x,lambda,marginal\n")
    marg = single_site_marginal(law)
    lam = law.lam
    for slot, i in enumerate(law.indices):
        fh.write(f"{i},{law.x[slot]:.17g},{lam[slot]:.17g},{marg[slot]:.17g}\n")

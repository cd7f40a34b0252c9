"""Hidden-state privacy accountant and the public-state baselines.

The hidden-state bound charges, per step past a switch time tau, a
directional Gaussian (or subsampled-Gaussian) cost plus an isotropic
cost for a shift schedule a_t that amortizes the coupled processes'
displacement.  Feasibility of a schedule is the backward recursion

    z_t = cbar1^{-1} (z_{t+1} + a_t - c2),   z_T = 0,
    z_tau >= min(2R, 2 eta Delta tau / sqrt(K)),   a_t, z_t >= 0,

read from t = T-1 down to tau.  The optimizer searches tau (via
S = T - tau), the concentration slack theta, and a constant noise split
beta, with shifts allocated geometrically (a'_t proportional to
cbar1^{-(t-tau)}), which is the exact minimizer of sum a'_t^2 under the
rolled-out constraint and collapses to equal allocation when cbar1 = 1.

tau = 0 needs no shifts and no high-probability Lipschitz events (the
coupled trajectories coincide), so that branch is exactly per-step
composition with zero failure probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .concentration import _tail_exponent, min_K, xi_max
from .errors import (
    InfeasibleSchedule,
    NoFeasibleSchedule,
    PreconditionViolated,
    ValidationError,
)
from .params import (
    ConvexityClass,
    DerivedConstants,
    ProblemParams,
    cbar1,
    lipschitz_c,
    theta_star,
)
from .rdp import default_alpha_grid, sgm_rdp_grid

__all__ = [
    "Schedule",
    "AccountResult",
    "winf_bound",
    "rho_for_schedule",
    "verify_schedule",
    "optimize_hidden_state",
    "minibatch_hidden_state",
    "closed_form_strongly_convex",
    "composition_baseline",
    "output_perturbation",
    "account_curve",
    "saturation_step_count",
]

_DEFAULT_THETA_GRID = tuple(np.geomspace(0.05, 4.0, 12))
_EXHAUSTIVE_T = 4096
_GEOM_GRID_POINTS = 128
_WALK_LIMIT = 100_000


@dataclass(frozen=True)
class Schedule:
    """Shift schedule for steps t = tau .. T-1 with its induced z sequence."""

    tau: int
    beta: np.ndarray
    a: np.ndarray
    z: np.ndarray  # length len(a) + 1, z[0] = z_tau, z[-1] = z_T

    def __post_init__(self) -> None:
        for name in ("beta", "a", "z"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.tau < 0:
            raise ValidationError(f"tau must be >= 0, got {self.tau}")
        if len(self.beta) != len(self.a):
            raise ValidationError("beta and a must have equal length")
        if len(self.z) != len(self.a) + 1:
            raise ValidationError("z must have one more entry than a")

    @property
    def steps(self) -> int:
        return len(self.a)

    @property
    def T(self) -> int:
        return self.tau + self.steps


@dataclass(frozen=True)
class AccountResult:
    """One privacy guarantee (epsilon, delta) and how it was obtained."""

    epsilon: float
    delta: float
    analysis: str
    alpha_star: float
    tau_star: Optional[int]
    theta: Optional[float]
    delta_p: float
    delta_f: float
    schedule: Optional[Schedule] = None

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.delta_p + self.delta_f > self.delta * (1 + 1e-12):
            raise ValidationError("delta_p + delta_f must not exceed delta")

    @property
    def beta(self) -> Optional[float]:
        """Constant noise split of the schedule, when one exists."""
        if self.schedule is None or self.schedule.steps == 0:
            return None
        return float(self.schedule.beta[0])


def winf_bound(t: int, params: ProblemParams) -> float:
    """Coupled-process displacement bound min(2R, 2 eta Delta t / sqrt(K))."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    return min(2.0 * params.R, 2.0 * params.eta * params.Delta * t / math.sqrt(params.K))


# ---------------------------------------------------------------------------
# schedule family
# ---------------------------------------------------------------------------


def _log_geom(step: float, count: int) -> float:
    """log sum_{j=0}^{count-1} exp(j * step), stable for any step size."""
    if count <= 0:
        raise ValidationError("count must be >= 1")
    if step == 0.0:
        return math.log(count)
    if step > 0:
        return (
            (count - 1) * step
            + math.log(-math.expm1(-count * step))
            - math.log(-math.expm1(-step))
        )
    return math.log(-math.expm1(count * step)) - math.log(-math.expm1(step))


def _family_shift_moments(S: int, z_req: float, cbar1_val: float) -> Tuple[float, float, float]:
    """(sum a'_t^2, sum a'_t, log a'_tau) for the geometric shift family.

    a'_t = A * cbar1^{-(t-tau)} with A chosen so the rolled-out constraint
    sum_t a'_t cbar1^{-(t-tau+1)} = z_req holds with equality.
    """
    L = -math.log(cbar1_val)
    log_g2 = _log_geom(2.0 * L, S)
    log_z = math.log(z_req)
    log_sum_sq = 2.0 * log_z - 2.0 * L - log_g2
    log_sum = log_z + _log_geom(L, S) - L - log_g2
    log_a0 = log_z - L - log_g2
    return math.exp(log_sum_sq), math.exp(log_sum), log_a0


def _family_cost_W(S: int, z_req: float, cbar1_val: float, c2: float) -> float:
    """sum_t (a'_t + c2)^2 for the geometric family; the isotropic load."""
    if z_req == 0.0 and c2 == 0.0:
        return 0.0
    if z_req == 0.0:
        return S * c2 * c2
    sum_sq, sum_lin, _ = _family_shift_moments(S, z_req, cbar1_val)
    return sum_sq + 2.0 * c2 * sum_lin + S * c2 * c2


def _build_schedule(
    tau: int, S: int, z_req: float, beta: float, cbar1_val: float, c2: float
) -> Schedule:
    """Materialize the geometric-family schedule with its z rollout."""
    if z_req == 0.0:
        a = np.zeros(S)
        z = np.zeros(S + 1)
        return Schedule(tau=tau, beta=np.full(S, beta), a=a, z=z)
    L = -math.log(cbar1_val)
    _, _, log_a0 = _family_shift_moments(S, z_req, cbar1_val)
    with np.errstate(under="ignore"):
        a_prime = np.exp(log_a0 + L * np.arange(S))
    a = a_prime + c2
    z = np.zeros(S + 1)
    u = 1.0 / cbar1_val
    for j in range(S - 1, -1, -1):
        z[j] = (z[j + 1] + a[j] - c2) * u
    return Schedule(tau=tau, beta=np.full(S, beta), a=a, z=z)


def verify_schedule(
    sched: Schedule, params: ProblemParams, consts: DerivedConstants, atol: float = 1e-9
) -> None:
    """Independent feasibility check; raises InfeasibleSchedule on failure.

    The all-zero schedule with zero required displacement is feasible by
    construction: coinciding coupled trajectories need no shifts.
    """
    a = np.asarray(sched.a, dtype=float)
    z = np.asarray(sched.z, dtype=float)
    beta = np.asarray(sched.beta, dtype=float)
    if np.any(beta < -atol) or np.any(beta > 1.0 + atol):
        raise InfeasibleSchedule("beta outside [0, 1]")
    if np.any(a < -atol):
        raise InfeasibleSchedule("negative shift a_t")
    if np.any(z < -atol):
        raise InfeasibleSchedule("negative displacement bound z_t")
    if abs(z[-1]) > atol:
        raise InfeasibleSchedule(f"z_T = {z[-1]} != 0")
    if sched.steps == 0:
        return
    z_req = winf_bound(sched.tau, params)
    if z_req == 0.0 and not a.any() and not z.any():
        return
    scale = max(1.0, float(np.max(z, initial=0.0)))
    recon = (z[1:] + a - consts.c2) / consts.cbar1
    if np.any(np.abs(recon - z[:-1]) > atol * scale):
        raise InfeasibleSchedule("z recursion violated")
    if z[0] < z_req - atol * scale:
        raise InfeasibleSchedule(
            f"z_tau = {z[0]} below required displacement {z_req}"
        )


def rho_for_schedule(
    params: ProblemParams,
    sched: Schedule,
    alpha: float,
    consts: DerivedConstants,
) -> float:
    """Renyi cost of an explicit (possibly time-varying) schedule.

    Infinite demands (beta_t = 0 with the always-positive directional
    sensitivity, or beta_t = 1 with a_t > 0) return an infinity sentinel;
    a_t = 0 contributes no isotropic cost even at beta_t = 1.
    """
    if alpha <= 1.0:
        raise ValidationError(f"alpha must be > 1, got {alpha}")
    verify_schedule(sched, params, consts)
    if sched.steps == 0:
        return 0.0
    beta = np.asarray(sched.beta, dtype=float)
    a = np.asarray(sched.a, dtype=float)
    if np.any(beta <= 0.0) or np.any((a > 0.0) & (beta >= 1.0)):
        return math.inf
    s_dir = 2.0 * params.Delta / params.n
    sigma2 = params.sigma * params.sigma
    directional = alpha * s_dir * s_dir / 2.0 * math.fsum(1.0 / (beta * sigma2))
    shifted = a > 0.0
    isotropic = (
        alpha
        * params.d
        / (2.0 * params.eta**2 * sigma2)
        * math.fsum(a[shifted] ** 2 / (1.0 - beta[shifted]))
    )
    return directional + isotropic


# ---------------------------------------------------------------------------
# conversion helpers
# ---------------------------------------------------------------------------


def _convert_linear(slope: float, alphas: np.ndarray, delta_p: float) -> Tuple[float, float]:
    """min over the grid of alpha*slope + log(1/delta_p)/(alpha-1)."""
    log_term = math.log(1.0 / delta_p)
    values = alphas * slope + log_term / (alphas - 1.0)
    i = int(np.argmin(values))
    return float(values[i]), float(alphas[i])


def _convert_general(rhos: np.ndarray, alphas: np.ndarray, delta_p: float) -> Tuple[float, float]:
    log_term = math.log(1.0 / delta_p)
    values = rhos + log_term / (alphas - 1.0)
    i = int(np.argmin(values))
    return float(values[i]), float(alphas[i])


def _alpha_grid(alpha_grid: Optional[Sequence[float]]) -> np.ndarray:
    if alpha_grid is None:
        return default_alpha_grid()
    grid = np.asarray(sorted(set(float(a) for a in alpha_grid)), dtype=float)
    if grid.size == 0 or np.any(grid <= 1.0):
        raise ValidationError("alpha grid must be non-empty with all orders > 1")
    return grid


def _theta_candidates(
    c: float, theta_grid: Optional[Sequence[float]]
) -> Tuple[float, ...]:
    if theta_grid is not None:
        thetas = tuple(sorted(set(float(t) for t in theta_grid)))
        if not thetas or any(t < 0 for t in thetas):
            raise ValidationError("theta grid must be non-empty with all values >= 0")
        return thetas
    if c < 1.0:
        return (theta_star(c),)
    return _DEFAULT_THETA_GRID


def _s_candidates(T: int) -> List[int]:
    """Candidate step counts S = T - tau, exact below the exhaustive cap.

    Beyond it, geometric grids in both S and tau guard against missing
    either a saturated interior optimum or a small-tau optimum; local
    integer refinement runs afterwards.
    """
    if T <= _EXHAUSTIVE_T:
        return list(range(1, T + 1))
    s_geo = np.unique(np.round(np.geomspace(1, T, _GEOM_GRID_POINTS)).astype(int))
    tau_geo = np.unique(np.round(np.geomspace(1, T - 1, _GEOM_GRID_POINTS)).astype(int))
    cands = set(int(s) for s in s_geo) | set(int(T - t) for t in tau_geo) | {T}
    return sorted(s for s in cands if 1 <= s <= T)


# ---------------------------------------------------------------------------
# hidden-state optimizer (full batch)
# ---------------------------------------------------------------------------


def _tail_exponent_theta(params: ProblemParams, theta: float) -> float:
    return _tail_exponent(params.K, params.d, theta)


def _cell_slope_full(
    S: int, z_req: float, P0: float, Q0: float, cbar1_val: float, c2: float
) -> Tuple[float, float]:
    """(rho slope per alpha, optimal beta) for a full-batch cell.

    Minimizes A/beta + B/(1-beta) with A = S*P0 and B = Q0 * W in closed
    form; the minimizer is beta = sqrt(A)/(sqrt(A)+sqrt(B)).
    """
    W = _family_cost_W(S, z_req, cbar1_val, c2)
    A = S * P0
    if W == 0.0:
        return A, 1.0
    B = Q0 * W
    sa, sb = math.sqrt(A), math.sqrt(B)
    beta = sa / (sa + sb)
    return (sa + sb) ** 2, beta


def _result_T0(params: ProblemParams, delta: float, alphas: np.ndarray, analysis: str) -> AccountResult:
    eps, a_star = _convert_linear(0.0, alphas, delta)
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis=analysis,
        alpha_star=a_star,
        tau_star=0,
        theta=None,
        delta_p=delta,
        delta_f=0.0,
        schedule=Schedule(tau=0, beta=np.zeros(0), a=np.zeros(0), z=np.zeros(1)),
    )


def optimize_hidden_state(
    params: ProblemParams,
    delta: float,
    T: int,
    alpha_grid: Optional[Sequence[float]] = None,
    theta_grid: Optional[Sequence[float]] = None,
) -> AccountResult:
    """Best hidden-state guarantee over (tau, theta, beta) and the order grid.

    The tau = 0 cell is per-step composition with delta_f = 0 and is
    always searched, so the result never exceeds the beta = 1 composition
    baseline.  Ties break toward smaller tau, then smaller theta, then
    smaller beta.
    """
    params.require_hidden_state()
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    if T < 0:
        raise ValidationError(f"T must be >= 0, got {T}")
    alphas = _alpha_grid(alpha_grid)
    if T == 0:
        return _result_T0(params, delta, alphas, "hidden_state")

    c = lipschitz_c(params)
    thetas = _theta_candidates(c, theta_grid)
    P0 = (2.0 * params.Delta / params.n) ** 2 / (2.0 * params.sigma**2)
    Q0 = params.d / (2.0 * params.eta**2 * params.sigma**2)
    c2 = params.eta * params.M * params.xi
    sqrt_k = math.sqrt(params.K)
    two_r = 2.0 * params.R
    step_scale = 2.0 * params.eta * params.Delta / sqrt_k

    best = None  # (eps, tau, theta, beta, alpha_star, slope, delta_p, delta_f, cbar1)

    def evaluate(S: int, theta: float, cb: float, exponent: float):
        tau = T - S
        if tau == 0:
            z_req, d_f = 0.0, 0.0
        else:
            z_req = min(two_r, step_scale * tau)
            d_f = 2.0 * S * math.exp(-exponent)
            if d_f >= delta:
                return None
        d_p = delta - d_f
        slope, beta = _cell_slope_full(S, z_req, P0, Q0, cb, c2)
        eps, a_star = _convert_linear(slope, alphas, d_p)
        return (eps, tau, theta, beta, a_star, slope, d_p, d_f, cb)

    for theta in thetas:
        cb = cbar1(c, params.K, params.d, theta)
        exponent = _tail_exponent_theta(params, theta)
        cells = []
        for S in _s_candidates(T):
            cell = evaluate(S, theta, cb, exponent)
            if cell is not None:
                cells.append(cell)
        if not cells:
            continue
        local = min(cells, key=lambda r: (r[0], r[1], r[2], r[3]))
        # integer refinement: eps is unimodal in S for fixed theta
        S0 = T - local[1]
        for direction in (-1, 1):
            S_cur, cur = S0, local
            for _ in range(_WALK_LIMIT):
                S_next = S_cur + direction
                if not 1 <= S_next <= T:
                    break
                nxt = evaluate(S_next, theta, cb, exponent)
                if nxt is None or nxt[0] >= cur[0]:
                    break
                S_cur, cur = S_next, nxt
            if cur[0] < local[0]:
                local = cur
        if best is None or (local[0], local[1], local[2], local[3]) < (
            best[0],
            best[1],
            best[2],
            best[3],
        ):
            best = local

    if best is None:
        raise NoFeasibleSchedule(
            "every (tau, theta) cell has delta_f >= delta; increase delta or K"
        )

    eps, tau, theta, beta, a_star, slope, d_p, d_f, cb = best
    S = T - tau
    z_req = 0.0 if tau == 0 else min(two_r, step_scale * tau)
    sched = _build_schedule(tau, S, z_req, beta, cb, c2)
    consts = DerivedConstants(c=c, cbar1=cb, c2=c2, theta=theta)
    verify_schedule(sched, params, consts)
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis="hidden_state",
        alpha_star=a_star,
        tau_star=tau,
        theta=theta,
        delta_p=d_p,
        delta_f=d_f,
        schedule=sched,
    )


# ---------------------------------------------------------------------------
# hidden-state optimizer (minibatch, sampling without replacement)
# ---------------------------------------------------------------------------

_DEFAULT_BETA_GRID = tuple(np.linspace(0.05, 0.95, 19)) + (0.99,)


def _minibatch_dir_curve(
    alphas: np.ndarray, q: float, beta: float, params: ProblemParams
) -> np.ndarray:
    """Per-step directional cost: smaller of the two subsampled bounds.

    The K-fold bound charges K copies of the per-direction subsampled
    Gaussian; the subspace bound pays a sqrt(K) sensitivity factor once.
    """
    b = params.batch
    base = params.sigma * b / (2.0 * params.Delta)
    sigma_k = math.sqrt(params.K * beta) * base
    sigma_1 = math.sqrt(beta) * base
    return np.minimum(
        params.K * sgm_rdp_grid(alphas, q, sigma_k),
        sgm_rdp_grid(alphas, q, sigma_1),
    )


def minibatch_hidden_state(
    params: ProblemParams,
    delta: float,
    T: int,
    alpha_grid: Optional[Sequence[float]] = None,
    theta_grid: Optional[Sequence[float]] = None,
    beta_grid: Optional[Sequence[float]] = None,
) -> AccountResult:
    """Hidden-state guarantee under per-step subsampling without replacement.

    At b = n the per-step subsampled cost collapses to the full-batch
    Gaussian cost exactly, so that case is delegated to
    :func:`optimize_hidden_state` and relabeled.
    """
    if params.batch is None:
        raise ValidationError("minibatch accounting requires params.batch")
    params.require_hidden_state()
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    if T < 0:
        raise ValidationError(f"T must be >= 0, got {T}")
    alphas = _alpha_grid(alpha_grid)
    if params.batch == params.n:
        res = optimize_hidden_state(params, delta, T, alpha_grid, theta_grid)
        return replace(res, analysis="minibatch_hidden_state")
    if T == 0:
        return _result_T0(params, delta, alphas, "minibatch_hidden_state")

    q = params.batch / params.n
    c = lipschitz_c(params)
    thetas = _theta_candidates(c, theta_grid)
    betas = tuple(beta_grid) if beta_grid is not None else _DEFAULT_BETA_GRID
    if any(not 0.0 < b_ < 1.0 for b_ in betas):
        raise ValidationError("minibatch beta grid must lie in (0, 1)")
    Q0 = params.d / (2.0 * params.eta**2 * params.sigma**2)
    c2 = params.eta * params.M * params.xi
    sqrt_k = math.sqrt(params.K)
    two_r = 2.0 * params.R
    step_scale = 2.0 * params.eta * params.Delta / sqrt_k
    log_term_full = math.log(1.0 / delta)

    dir_cache: dict = {}

    def dir_curve(beta: float) -> np.ndarray:
        if beta not in dir_cache:
            dir_cache[beta] = _minibatch_dir_curve(alphas, q, beta, params)
        return dir_cache[beta]

    # tau = 0: composition of the subsampled mechanism, beta = 1 optimal
    dir_one = dir_curve(1.0)
    values = T * dir_one + log_term_full / (alphas - 1.0)
    i0 = int(np.argmin(values))
    best = (float(values[i0]), 0, thetas[0], 1.0, float(alphas[i0]), delta, 0.0, None)

    def eval_cell(S: int, theta: float, cb: float, exponent: float, beta: float):
        tau = T - S
        if tau == 0:
            return None  # handled above
        z_req = min(two_r, step_scale * tau)
        d_f = 2.0 * S * math.exp(-exponent)
        if d_f >= delta:
            return None
        d_p = delta - d_f
        W = _family_cost_W(S, z_req, cb, c2)
        rhos = S * dir_curve(beta) + alphas * (Q0 * W / (1.0 - beta))
        eps, a_star = _convert_general(rhos, alphas, d_p)
        return (eps, tau, theta, beta, a_star, d_p, d_f, cb)

    for theta in thetas:
        cb = cbar1(c, params.K, params.d, theta)
        exponent = _tail_exponent_theta(params, theta)
        for S in _s_candidates(T):
            if S == T:
                continue
            for beta in betas:
                cell = eval_cell(S, theta, cb, exponent, beta)
                if cell is None:
                    continue
                if (cell[0], cell[1], cell[2], cell[3]) < (best[0], best[1], best[2], best[3]):
                    best = cell

    eps, tau, theta, beta, a_star, d_p, d_f, cb = best
    if tau > 0:
        exponent = _tail_exponent_theta(params, theta)
        # local refinement: S walk at the winning beta, then golden-section on beta
        S0 = T - tau
        for direction in (-1, 1):
            S_cur = S0
            cur = (eps, tau, theta, beta, a_star, d_p, d_f, cb)
            for _ in range(_WALK_LIMIT):
                S_next = S_cur + direction
                if not 1 <= S_next <= T - 1:
                    break
                nxt = eval_cell(S_next, theta, cb, exponent, beta)
                if nxt is None or nxt[0] >= cur[0]:
                    break
                S_cur, cur = S_next, nxt
            if cur[0] < eps:
                eps, tau, theta, beta, a_star, d_p, d_f, cb = cur
        lo = max(1e-6, beta - 0.05)
        hi = min(1.0 - 1e-9, beta + 0.05)
        refined = _golden_section(
            lambda b_: eval_cell(T - tau, theta, cb, exponent, b_)[0], lo, hi
        )
        cell = eval_cell(T - tau, theta, cb, exponent, refined)
        if cell is not None and cell[0] < eps:
            eps, tau, theta, beta, a_star, d_p, d_f, cb = cell

    S = T - tau
    z_req = 0.0 if tau == 0 else min(two_r, step_scale * tau)
    cb_final = cb if tau > 0 else cbar1(c, params.K, params.d, theta)
    sched = _build_schedule(tau, S, z_req, beta, cb_final, c2)
    theta_rep = theta if tau > 0 else None
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis="minibatch_hidden_state",
        alpha_star=a_star,
        tau_star=tau,
        theta=theta_rep,
        delta_p=d_p,
        delta_f=d_f,
        schedule=sched,
    )


def _golden_section(f, lo: float, hi: float, iters: int = 60) -> float:
    """Golden-section minimizer on [lo, hi] for a unimodal objective."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c_ = b - inv_phi * (b - a)
    d_ = a + inv_phi * (b - a)
    fc, fd = f(c_), f(d_)
    for _ in range(iters):
        if fc <= fd:
            b, d_, fd = d_, c_, fc
            c_ = b - inv_phi * (b - a)
            fc = f(c_)
        else:
            a, c_, fc = c_, d_, fd
            d_ = a + inv_phi * (b - a)
            fd = f(d_)
    return c_ if fc <= fd else d_


# ---------------------------------------------------------------------------
# closed form and baselines
# ---------------------------------------------------------------------------


def saturation_step_count(params: ProblemParams) -> int:
    """ceil(n R sqrt(2d) / (Delta eta)), the closed form's saturated window."""
    return math.ceil(
        params.n * params.R * math.sqrt(2.0 * params.d) / (params.Delta * params.eta)
    )


def closed_form_strongly_convex(
    params: ProblemParams,
    delta: float,
    T: int,
    alpha_grid: Optional[Sequence[float]] = None,
) -> AccountResult:
    """Explicit-constant guarantee for strongly convex losses.

    rho(alpha) = alpha * min( T (2 Delta/n)^2 / (2 sigma^2),
                              8 Delta R sqrt(2d) / (eta n sigma^2) ),
    converted at delta_p = delta/2 with the other delta/2 reserved for
    the Lipschitz failure event (guaranteed <= delta/2 by the K lower
    bound).  Reported with the explicit constants, not the O(.) form.
    """
    params.require_hidden_state()
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    failures = []
    if params.convexity is not ConvexityClass.STRONGLY_CONVEX:
        failures.append("convexity must be strongly_convex")
    else:
        eta_target = params.K / params.M
        if abs(params.eta - eta_target) > 1e-12 * eta_target:
            failures.append(f"eta must equal K/M = {eta_target}, got {params.eta}")
        k_lo = min_K(params, delta)
        if not k_lo <= params.K <= params.d / 2:
            failures.append(
                f"K must lie in [{k_lo}, d/2 = {params.d / 2}], got {params.K}"
            )
        xi_hi = xi_max(params)
        if params.xi > xi_hi:
            failures.append(f"xi must be <= {xi_hi}, got {params.xi}")
    if failures:
        raise PreconditionViolated("; ".join(failures))

    alphas = _alpha_grid(alpha_grid)
    slope_growth = T * (2.0 * params.Delta / params.n) ** 2 / (2.0 * params.sigma**2)
    slope_sat = (
        8.0
        * params.Delta
        * params.R
        * math.sqrt(2.0 * params.d)
        / (params.eta * params.n * params.sigma**2)
    )
    slope = min(slope_growth, slope_sat)
    eps, a_star = _convert_linear(slope, alphas, delta / 2.0)
    theta = theta_star(1.0 - params.m / params.M)
    tau = 0 if slope_growth <= slope_sat else max(T - saturation_step_count(params), 0)
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis="closed_form",
        alpha_star=a_star,
        tau_star=tau,
        theta=theta,
        delta_p=delta / 2.0,
        delta_f=delta / 2.0,
        schedule=None,
    )


def composition_baseline(
    params: ProblemParams,
    delta: float,
    T: int,
    variant: str,
    alpha_grid: Optional[Sequence[float]] = None,
) -> AccountResult:
    """Public-state composition over T steps for beta = 1 or beta = 0.

    Per-step replacement sensitivity is 2 Delta / n throughout; the
    beta = 0 variant pays the orthonormal-frame factor d/K.
    """
    if variant not in ("beta1", "beta0"):
        raise ValidationError(f"variant must be 'beta1' or 'beta0', got {variant!r}")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    if T < 0:
        raise ValidationError(f"T must be >= 0, got {T}")
    if params.sigma <= 0:
        raise ValidationError("accounting requires sigma > 0")
    s2 = (2.0 * params.Delta / params.n) ** 2
    per_step = s2 / (2.0 * params.sigma**2)
    if variant == "beta0":
        per_step *= params.d / params.K
    alphas = _alpha_grid(alpha_grid)
    eps, a_star = _convert_linear(T * per_step, alphas, delta)
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis=f"composition_{variant}",
        alpha_star=a_star,
        tau_star=None,
        theta=None,
        delta_p=delta,
        delta_f=0.0,
        schedule=None,
    )


def output_perturbation(
    params: ProblemParams,
    delta: float,
    alpha_grid: Optional[Sequence[float]] = None,
) -> AccountResult:
    """Last-step-only Gaussian analysis with diameter sensitivity 2R."""
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    if params.sigma <= 0 or params.eta <= 0:
        raise ValidationError("accounting requires eta > 0 and sigma > 0")
    slope = (2.0 * params.R) ** 2 * params.d / (2.0 * params.eta**2 * params.sigma**2)
    alphas = _alpha_grid(alpha_grid)
    eps, a_star = _convert_linear(slope, alphas, delta)
    return AccountResult(
        epsilon=eps,
        delta=delta,
        analysis="output_perturbation",
        alpha_star=a_star,
        tau_star=None,
        theta=None,
        delta_p=delta,
        delta_f=0.0,
        schedule=None,
    )


_ANALYSES = (
    "hidden_state",
    "closed_form",
    "composition_beta1",
    "composition_beta0",
    "output_perturbation",
    "minibatch_hidden_state",
)


def account_curve(
    params: ProblemParams,
    delta: float,
    T_grid: Sequence[int],
    analyses: Sequence[str] = ("hidden_state", "composition_beta1", "output_perturbation"),
    alpha_grid: Optional[Sequence[float]] = None,
    theta_grid: Optional[Sequence[float]] = None,
    threads: Optional[int] = None,
) -> List[Tuple[int, List[AccountResult]]]:
    """Evaluate the requested analyses on an ascending T grid.

    Each row carries the per-analysis results plus a synthetic "min"
    result copying the best one.  Deterministic given the grids.
    """
    T_list = [int(t) for t in T_grid]
    if not T_list or any(b <= a for a, b in zip(T_list, T_list[1:])) or min(T_list) < 0:
        raise ValidationError("T_grid must be non-empty, ascending, non-negative")
    for name in analyses:
        if name not in _ANALYSES:
            raise ValidationError(f"unknown analysis {name!r}")
    if not analyses:
        raise ValidationError("analyses must be non-empty")

    def row(T: int) -> Tuple[int, List[AccountResult]]:
        results: List[AccountResult] = []
        for name in analyses:
            if name == "hidden_state":
                results.append(optimize_hidden_state(params, delta, T, alpha_grid, theta_grid))
            elif name == "closed_form":
                results.append(closed_form_strongly_convex(params, delta, T, alpha_grid))
            elif name == "composition_beta1":
                results.append(composition_baseline(params, delta, T, "beta1", alpha_grid))
            elif name == "composition_beta0":
                results.append(composition_baseline(params, delta, T, "beta0", alpha_grid))
            elif name == "output_perturbation":
                results.append(output_perturbation(params, delta, alpha_grid))
            elif name == "minibatch_hidden_state":
                results.append(
                    minibatch_hidden_state(params, delta, T, alpha_grid, theta_grid)
                )
        best = min(results, key=lambda r: r.epsilon)
        results.append(replace(best, analysis="min"))
        return T, results

    if threads is not None and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, T_list))
    return [row(T) for T in T_list]

"""Alternating weighted-MMSE solver for tri-hybrid sum-rate maximization.

The weighted sum rate is maximized through its WMMSE reformulation: minimize
sum_k beta_k (w_k e_k - ln w_k) over per-user MSE weights w, scalar
combiners v, a fully digital precoder F_D under the total power budget, and
the per-antenna pattern coefficients c^(n) under the 4 pi gain-power budget
with the constant (DC) coefficient pinned to eta.  Every block update is
closed form:

* v, w, F_D follow the classic per-user expressions, with one shared power
  multiplier found by bisection;
* each antenna's AC coefficient vector solves a norm-constrained quadratic
  program whose KKT system (A + 2 nu I) c = -d is resolved by eigen
  decomposition plus bisection on nu in the two outer intervals where
  ||c(nu)||^2 is monotone; both candidates are scored on the exact
  objective and accepted only on strict improvement, which makes the
  objective non-increasing step by step and the sum rate non-decreasing
  across outer iterations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .channel import Scenario
from .harmonics import FULL_SPHERE, PatternCoefficients, truncation_length

DEGENERACY_TOL = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs of the alternating solver."""

    eta: float = math.sqrt(2.0 * math.pi)
    max_iterations: int = 100
    tolerance: float = 1e-5  # relative sum-rate change; 0 disables early exit
    bisection_tol: float = 1e-10  # relative constraint residual

    def __post_init__(self):
        if not 0.0 < self.eta < math.sqrt(FULL_SPHERE):
            raise ValueError("eta must lie in (0, sqrt(4*pi))")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.tolerance < 0 or self.bisection_tol <= 0:
            raise ValueError("tolerances must be positive (convergence tol may be 0)")


@dataclass
class IterationRecord:
    iteration: int
    sum_rate: float
    objective: float
    objective_after_v: float
    objective_after_w: float
    objective_after_fd: float
    step_seconds: tuple


@dataclass
class SolverState:
    """Variables of the alternating solver."""

    w: np.ndarray  # (K,) positive MSE weights
    v: np.ndarray  # (K,) complex combiners
    f_d: np.ndarray  # (N_T, K) fully digital precoder
    coeffs: np.ndarray  # (N_T, T) pattern coefficients

    def patterns(self) -> list[PatternCoefficients]:
        return [PatternCoefficients(c) for c in self.coeffs]

    def validate(self, eta: float, p_max: float, dc_pinned: bool = True) -> None:
        if np.any(self.w <= 0):
            raise AssertionError("MSE weights must stay positive")
        power = float(np.sum(np.abs(self.f_d) ** 2))
        if power > p_max + 1e-8:
            raise AssertionError(f"precoder power {power} exceeds budget {p_max}")
        norms = np.sum(self.coeffs**2, axis=1)
        if np.any(np.abs(norms - FULL_SPHERE) > 1e-8):
            raise AssertionError("a pattern violates the 4*pi budget")
        if dc_pinned and np.any(self.coeffs[:, 0] != eta):
            raise AssertionError("DC coefficients drifted from eta")


@dataclass
class SolverResult:
    state: SolverState
    history: list
    converged: bool
    initial_objective: float
    channels: np.ndarray  # (K, N_T) effective channels at the final state
    blocks: np.ndarray  # (K, N_T, T) EM-domain channel blocks

    @property
    def sum_rate(self) -> float:
        return self.history[-1].sum_rate

    @property
    def iterations(self) -> int:
        return len(self.history)


def effective_channels(blocks: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """(K, N_T) physical channels from EM blocks and pattern coefficients."""
    return np.einsum("kmt,mt->km", blocks, coeffs)


def sum_rate(channels, f_d, weights, noise_powers) -> float:
    """Weighted sum rate sum_k beta_k log2(1 + SINR_k) in bits/s/Hz."""
    noise_powers = np.asarray(noise_powers, dtype=float)
    if np.any(noise_powers <= 0):
        raise ValueError("noise powers must be positive")
    p = channels @ f_d
    powers = np.abs(p) ** 2
    signal = np.diag(powers)
    interference = powers.sum(axis=1) - signal
    sinr = signal / (noise_powers + interference)
    return float(np.sum(np.asarray(weights) * np.log2(1.0 + sinr)))


def mse_vector(channels, f_d, v, noise_powers) -> np.ndarray:
    """Per-user MSE e_k = |1 - v_k p_kk|^2 + |v_k|^2 (interference + noise)."""
    p = channels @ f_d
    diag = np.diag(p)
    powers = np.abs(p) ** 2
    interference = powers.sum(axis=1) - np.diag(powers)
    return (
        np.abs(1.0 - v * diag) ** 2
        + np.abs(v) ** 2 * (interference + np.asarray(noise_powers, dtype=float))
    )


def wmmse_objective(w, e, weights) -> float:
    """sum_k beta_k (w_k e_k - ln w_k)."""
    return float(np.sum(np.asarray(weights) * (w * e - np.log(w))))


def update_v(channels, f_d, noise_powers) -> np.ndarray:
    """Per-user MMSE combiner: conj(p_kk) over total received power plus noise."""
    p = channels @ f_d
    denom = np.sum(np.abs(p) ** 2, axis=1) + np.asarray(noise_powers, dtype=float)
    return np.conj(np.diag(p)) / denom


def update_w(channels, f_d, v) -> np.ndarray:
    """MSE weights w_k = 1 / (1 - v_k p_kk); equals 1/e_k for fresh v."""
    diag = np.diag(channels @ f_d)
    delta = 1.0 - v * diag
    if np.any(np.abs(delta) < DEGENERACY_TOL):
        raise RuntimeError("weight update degenerate: v_k p_kk is numerically 1")
    w = np.real(1.0 / delta)
    if np.any(w <= 0):
        raise RuntimeError("weight update produced a non-positive weight")
    return w


def update_fd(channels, w, v, weights, p_max, rel_tol=1e-10) -> np.ndarray:
    """Fully digital precoder under the total power budget.

    Solves (M + lam I) f_k = beta_k w_k conj(v_k) conj(h_k) with the single
    multiplier lam >= 0 shared across users; lam = 0 is kept when the budget
    is slack (complementary slackness), otherwise bisection matches the
    power to the budget.
    """
    if p_max <= 0:
        raise ValueError("power budget must be positive")
    weights = np.asarray(weights, dtype=float)
    coef = weights * w * np.abs(v) ** 2
    hc = np.conj(channels)  # rows conj(h_k)
    m = hc.T @ (coef[:, None] * channels)
    b = hc.T * (weights * w * np.conj(v))[None, :]  # columns beta_k w_k v_k* h_k*
    eigvals, q = np.linalg.eigh(m)
    eigvals = np.clip(eigvals.real, 0.0, None)
    bt = q.conj().T @ b  # (N_T, K)
    bt_sq = np.sum(np.abs(bt) ** 2, axis=1)

    # lam = 0 via the pseudo-inverse: minimum-norm limit of lam -> 0+
    cutoff = eigvals[-1] * max(m.shape) * np.finfo(float).eps
    active = eigvals > cutoff
    power0 = float(np.sum(bt_sq[active] / eigvals[active] ** 2))
    if power0 <= p_max:
        scale = np.where(active, 1.0 / np.where(active, eigvals, 1.0), 0.0)
        return q @ (scale[:, None] * bt)

    def power(lam):
        return float(np.sum(bt_sq / (eigvals + lam) ** 2))

    hi = math.sqrt(np.sum(bt_sq) / p_max)  # power(hi) <= p_max by construction
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if power(mid) > p_max:
            lo = mid
        else:
            hi = mid
        if abs(power(hi) - p_max) <= rel_tol * p_max:
            break
    lam = hi
    if abs(power(lam) - p_max) > max(rel_tol, 1e-8) * p_max:
        raise RuntimeError("power bisection failed to meet the budget")
    return q @ (bt / (eigvals + lam)[:, None])


@dataclass(frozen=True)
class QuadraticSubproblem:
    """Norm-constrained quadratic model for one antenna's AC coefficients:
    minimize c^T (A/2) c + d^T c subject to ||c||^2 = rho_sq."""

    a_matrix: np.ndarray
    d: np.ndarray
    rho_sq: float

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValueError("quadratic matrix must be symmetric")
        object.__setattr__(self, "a_matrix", 0.5 * (a + a.T))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        if self.rho_sq <= 0:
            raise ValueError("target squared norm must be positive")


def g_affine(blocks, coeffs, f_d, k: int, i: int, n: int):
    """Affine map of the (k, i) link gain in antenna n's AC coefficients.

    Returns (a, b) with h_k^T f_i = a^T c_ac + b; ``b`` gathers the DC terms
    of all antennas and the AC terms of antennas other than n.
    """
    a = f_d[n, i] * blocks[k, n, 1:]
    per_antenna = np.einsum("mt,mt->m", blocks[k], coeffs)  # c^(m) . block m
    p_full = complex(np.sum(per_antenna * f_d[:, i]))
    b = p_full - complex(np.dot(blocks[k, n, 1:], coeffs[n, 1:])) * f_d[n, i]
    return a, b


def assemble_quadratic(blocks, coeffs, f_d, w, v, weights, n: int) -> QuadraticSubproblem:
    """Quadratic model of the WMMSE objective in antenna n's AC coefficients.

    Built from the affine link-gain decomposition so that the model value
    equals sum_k beta_k w_k e_k up to a constant; A is the positive
    semidefinite Gram-type matrix of the AC channel block.
    """
    weights = np.asarray(weights, dtype=float)
    gw = weights * w * np.abs(v) ** 2  # (K,)
    h_ac = blocks[:, n, 1:]  # (K, T-1)
    s_n = float(np.sum(np.abs(f_d[n, :]) ** 2))
    a_matrix = 2.0 * s_n * np.real((np.conj(h_ac) * gw[:, None]).T @ h_ac)
    a_matrix = 0.5 * (a_matrix + a_matrix.T)

    h_eff = effective_channels(blocks, coeffs)
    p = h_eff @ f_d  # (K, K)
    ac_inner = h_ac @ coeffs[n, 1:]  # (K,)
    b_mat = p - np.outer(ac_inner, f_d[n, :])  # b_{k,i}
    d1 = -2.0 * np.real(
        np.sum((weights * w * v * f_d[n, :])[:, None] * h_ac, axis=0)
    )
    s2 = np.conj(b_mat) @ f_d[n, :]  # (K,)
    d23 = 2.0 * np.real(np.sum((gw * s2)[:, None] * h_ac, axis=0))
    rho_sq = FULL_SPHERE - float(np.sum(coeffs[n, 0] ** 2))
    return QuadraticSubproblem(a_matrix=a_matrix, d=d1 + d23, rho_sq=rho_sq)


@dataclass(frozen=True)
class SubproblemCandidates:
    """The two KKT points from the outer multiplier intervals."""

    c_minus: np.ndarray
    nu_minus: float
    c_plus: np.ndarray
    nu_plus: float


def solve_ac_subproblem(
    sub: QuadraticSubproblem, tol: float = 1e-10, max_steps: int = 200
) -> SubproblemCandidates:
    """Find the two sphere-constrained stationary points of the quadratic.

    With A = V diag(lams) V^T, c(nu) = -(A + 2 nu I)^{-1} d has squared norm
    sum_m (d_m / (lam_m + 2 nu))^2, monotone on (-inf, -lam_max/2) and on
    (-lam_min/2, +inf); one bisection per interval matches it to rho_sq.
    For d = 0 the two points are +/- rho times the eigenvector of the
    smallest eigenvalue (documented convention).
    """
    eigvals, vecs = np.linalg.eigh(sub.a_matrix)  # ascending
    rho = math.sqrt(sub.rho_sq)
    if np.linalg.norm(sub.d) == 0.0:
        u_min = vecs[:, 0]
        nu = -0.5 * eigvals[0]
        return SubproblemCandidates(
            c_minus=rho * u_min, nu_minus=nu, c_plus=-rho * u_min, nu_plus=nu
        )

    dt = vecs.T @ sub.d

    def norm_sq(nu):
        return float(np.sum((dt / (eigvals + 2.0 * nu)) ** 2))

    scale = max(float(np.abs(eigvals).max()), np.linalg.norm(dt) / rho, 1e-30)

    def bisect(pole, direction):
        # direction +1: interval (pole, inf); -1: (-inf, pole)
        step = scale
        hi = pole + direction * step
        for _ in range(max_steps):
            if norm_sq(hi) < sub.rho_sq:
                break
            step *= 2.0
            hi = pole + direction * step
        else:
            raise RuntimeError("failed to bracket the multiplier away from the pole")
        step = scale
        lo = pole + direction * step
        for _ in range(max_steps):
            if norm_sq(lo) > sub.rho_sq:
                break
            step *= 0.5
            lo = pole + direction * step
        else:
            raise RuntimeError("failed to bracket the multiplier near the pole")
        for _ in range(max_steps):
            mid = 0.5 * (lo + hi)
            if norm_sq(mid) > sub.rho_sq:
                lo = mid
            else:
                hi = mid
            if abs(norm_sq(hi) - sub.rho_sq) <= tol * sub.rho_sq:
                return hi
        raise RuntimeError("multiplier bisection did not converge in 200 steps")

    nu_plus = bisect(-0.5 * eigvals[0], +1.0)
    nu_minus = bisect(-0.5 * eigvals[-1], -1.0)

    def solution(nu):
        return -vecs @ (dt / (eigvals + 2.0 * nu))

    return SubproblemCandidates(
        c_minus=solution(nu_minus),
        nu_minus=nu_minus,
        c_plus=solution(nu_plus),
        nu_plus=nu_plus,
    )


def _objective(blocks, coeffs, f_d, w, v, weights, noise_powers) -> float:
    h = effective_channels(blocks, coeffs)
    return wmmse_objective(w, mse_vector(h, f_d, v, noise_powers), weights)


def update_em(
    blocks, coeffs, f_d, w, v, weights, noise_powers, bisection_tol=1e-10
) -> np.ndarray:
    """One ascending sweep of per-antenna AC updates with monotone acceptance.

    Each antenna's two candidates are scored on the exact objective and the
    incumbent is kept unless strictly beaten, so the sweep never increases
    the objective.  DC entries are left untouched.
    """
    coeffs = np.array(coeffs, dtype=float)
    for n in range(coeffs.shape[0]):
        sub = assemble_quadratic(blocks, coeffs, f_d, w, v, weights, n)
        cands = solve_ac_subproblem(sub, tol=bisection_tol)
        incumbent = _objective(blocks, coeffs, f_d, w, v, weights, noise_powers)
        best_obj, best_ac = incumbent, None
        for c_ac in (cands.c_minus, cands.c_plus):
            trial = coeffs[n].copy()
            coeffs[n, 1:] = c_ac
            obj = _objective(blocks, coeffs, f_d, w, v, weights, noise_powers)
            coeffs[n] = trial
            if obj < best_obj:
                best_obj, best_ac = obj, c_ac
        if best_ac is not None:
            coeffs[n, 1:] = best_ac
    return coeffs


def initial_coefficients(
    n_antennas: int, degree: int, eta: float, rng: np.random.Generator
) -> np.ndarray:
    """DC pinned at eta, AC uniform on its sphere, independently per antenna."""
    t_len = truncation_length(degree)
    coeffs = np.empty((n_antennas, t_len))
    radius = math.sqrt(FULL_SPHERE - eta * eta)
    for n in range(n_antennas):
        direction = rng.standard_normal(t_len - 1)
        direction /= np.linalg.norm(direction)
        coeffs[n, 0] = eta
        coeffs[n, 1:] = radius * direction
    return coeffs


def isotropic_coefficients(n_antennas: int, degree: int) -> np.ndarray:
    """Unit-gain patterns: all power in the DC coefficient."""
    coeffs = np.zeros((n_antennas, truncation_length(degree)))
    coeffs[:, 0] = math.sqrt(FULL_SPHERE)
    return coeffs


def matched_filter_precoder(channels: np.ndarray, p_max: float) -> np.ndarray:
    """Conjugate matched-filter columns scaled to the full power budget."""
    f = np.conj(channels).T
    total = float(np.sum(np.abs(f) ** 2))
    if total == 0.0:
        raise ValueError("cannot initialize the precoder on an all-zero channel")
    return f * math.sqrt(p_max / total)


def run_algorithm1(
    scenario: Scenario,
    config: SolverConfig | None = None,
    seed: int = 0,
    *,
    em_update: bool = True,
    initial_coeffs: np.ndarray | None = None,
) -> SolverResult:
    """Run the alternating solver on one scenario.

    Patterns start with DC pinned at eta and random AC (or isotropic when
    ``em_update`` is off, the conventional hybrid baseline); the digital
    precoder starts as the conjugate matched filter at full power.  Each
    outer iteration runs the four block updates; the loop stops when the
    relative sum-rate change drops below the tolerance or the iteration
    budget is spent.
    """
    config = config or SolverConfig()
    geom = scenario.geometry
    t_len = truncation_length(scenario.truncation)
    blocks = scenario.em_channels().reshape(scenario.n_users, geom.n_t, t_len)
    rng = np.random.default_rng(seed)
    if initial_coeffs is not None:
        coeffs = np.array(initial_coeffs, dtype=float)
        if coeffs.shape != (geom.n_t, t_len):
            raise ValueError(f"initial coefficients must have shape {(geom.n_t, t_len)}")
    elif em_update:
        coeffs = initial_coefficients(geom.n_t, scenario.truncation, config.eta, rng)
    else:
        coeffs = isotropic_coefficients(geom.n_t, scenario.truncation)

    weights = scenario.weights
    noise = scenario.noise_powers
    h = effective_channels(blocks, coeffs)
    f_d = matched_filter_precoder(h, scenario.p_max)
    w = np.ones(scenario.n_users)
    v = np.zeros(scenario.n_users, dtype=complex)
    initial_obj = wmmse_objective(w, mse_vector(h, f_d, v, noise), weights)

    history: list[IterationRecord] = []
    prev_rate = None
    converged = False
    for it in range(1, config.max_iterations + 1):
        tic = time.perf_counter()
        v = update_v(h, f_d, noise)
        obj_v = wmmse_objective(w, mse_vector(h, f_d, v, noise), weights)
        t_v = time.perf_counter()
        w = update_w(h, f_d, v)
        obj_w = wmmse_objective(w, mse_vector(h, f_d, v, noise), weights)
        t_w = time.perf_counter()
        f_d = update_fd(h, w, v, weights, scenario.p_max, config.bisection_tol)
        obj_fd = wmmse_objective(w, mse_vector(h, f_d, v, noise), weights)
        t_fd = time.perf_counter()
        if em_update:
            coeffs = update_em(
                blocks, coeffs, f_d, w, v, weights, noise, config.bisection_tol
            )
            h = effective_channels(blocks, coeffs)
        obj_em = wmmse_objective(w, mse_vector(h, f_d, v, noise), weights)
        t_em = time.perf_counter()
        rate = sum_rate(h, f_d, weights, noise)
        history.append(
            IterationRecord(
                iteration=it,
                sum_rate=rate,
                objective=obj_em,
                objective_after_v=obj_v,
                objective_after_w=obj_w,
                objective_after_fd=obj_fd,
                step_seconds=(t_v - tic, t_w - t_v, t_fd - t_w, t_em - t_fd),
            )
        )
        if prev_rate is not None and abs(rate - prev_rate) <= config.tolerance * max(
            abs(prev_rate), 1e-12
        ):
            converged = True
            break
        prev_rate = rate

    state = SolverState(w=w, v=v, f_d=f_d, coeffs=coeffs)
    return SolverResult(
        state=state,
        history=history,
        converged=converged,
        initial_objective=initial_obj,
        channels=h,
        blocks=blocks,
    )


def refit_digital(
    channels: np.ndarray,
    weights,
    noise_powers,
    p_max: float,
    config: SolverConfig | None = None,
    f_init: np.ndarray | None = None,
):
    """Iterate the v/w/F_D updates on a fixed channel until the sum rate
    settles; returns (f_d, v, w, rates)."""
    config = config or SolverConfig()
    f_d = matched_filter_precoder(channels, p_max) if f_init is None else np.array(f_init)
    rates = []
    prev = None
    for _ in range(config.max_iterations):
        v = update_v(channels, f_d, noise_powers)
        w = update_w(channels, f_d, v)
        f_d = update_fd(channels, w, v, weights, p_max, config.bisection_tol)
        rate = sum_rate(channels, f_d, weights, noise_powers)
        rates.append(rate)
        if prev is not None and abs(rate - prev) <= config.tolerance * max(abs(prev), 1e-12):
            break
        prev = rate
    return f_d, v, w, rates

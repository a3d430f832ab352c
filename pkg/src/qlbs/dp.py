"""Model-based solver: backward dynamic programming over the replicating portfolio.

Each backward step fits the hedge coefficients from the demeaned price
increments, rolls the portfolio back under the self-financing constraint,
turns the portfolio change into a reward net of the variance penalty, and
fits the value coefficients. The time-0 put price is the negative average
of the initial action values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, FeatureMatrix, feature_cube, spec_for_states
from .market import PathSet, StateKind, compute_states, price_increments
from .numerics import (
    DEFAULT_RIDGE_REL,
    cross_sectional_stats,
    scaled_regularizer,
    solve_normal_equations,
)


@dataclass(frozen=True)
class RiskParams:
    """Risk aversion and discounting for the variance-penalized objective.

    ``pure_risk`` drops the drift-seeking term from the hedge (the default
    for benchmark reproduction); the full hedge needs a strictly positive
    risk aversion because that term scales with 1/(2*lambda*gamma).
    """

    risk_aversion: float
    gamma: float
    pure_risk: bool = True

    def __post_init__(self):
        if self.risk_aversion < 0:
            raise ValueError("risk_aversion must be nonnegative")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not self.pure_risk and self.risk_aversion == 0:
            raise ValueError("the full hedge needs risk_aversion > 0")

    @classmethod
    def from_rate(cls, risk_aversion: float, r: float, dt: float,
                  pure_risk: bool = True) -> "RiskParams":
        return cls(risk_aversion=risk_aversion, gamma=math.exp(-r * dt),
                   pure_risk=pure_risk)


@dataclass(frozen=True)
class DPSolution:
    """Full output of the backward pass.

    Matrices are (n_paths, n_steps + 1); ``phi`` and ``omega`` hold the
    hedge and value coefficients for t = 0 .. T-1 (shape (T, n_basis)).
    Cash is the bank-account leg portfolio - hedge * price.
    """

    hedges: np.ndarray
    portfolio: np.ndarray
    rewards: np.ndarray
    q_values: np.ndarray
    cash: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    price_t0: float
    hedge_t0: float


def terminal_conditions(paths: PathSet, strike: float, risk: RiskParams):
    """Terminal portfolio, its demeaned version, hedge, reward and value.

    The portfolio at expiry equals the put payoff, the position is closed
    (hedge 0), and the reward/value carry the variance penalty.
    """
    if strike <= 0:
        raise ValueError("strike must be positive")
    payoff = np.maximum(strike - paths.prices[:, -1], 0.0)
    mean, var = cross_sectional_stats(payoff)
    pi_hat = payoff - mean
    hedge = np.zeros_like(payoff)
    reward = np.full_like(payoff, -risk.risk_aversion * var)
    q_value = -payoff - risk.risk_aversion * var
    return payoff, pi_hat, hedge, reward, q_value


def _effective_ridge(gram: np.ndarray, regularizer: float | None) -> float:
    """Absolute ridge weight: an explicit value wins, else the scaled default."""
    if regularizer is not None:
        return regularizer
    return scaled_regularizer(gram, DEFAULT_RIDGE_REL)


def fit_hedge_coefficients(phi_t: FeatureMatrix, delta_s: np.ndarray,
                           delta_s_hat: np.ndarray, pi_hat_next: np.ndarray,
                           risk: RiskParams,
                           regularizer: float | None = None) -> np.ndarray:
    """Hedge coefficients from the increment-weighted normal equations.

    Gram matrix: sum_k phi_k phi_k^T (dShat_k)^2. Right-hand side couples
    the demeaned next portfolio with the increments; unless ``pure_risk``
    is set it also carries the drift term delta_s / (2 lambda gamma).
    """
    features = phi_t.values
    weighted = features * delta_s_hat[:, np.newaxis]
    gram = weighted.T @ weighted
    target = pi_hat_next * delta_s_hat
    if not risk.pure_risk:
        target = target + delta_s / (2.0 * risk.risk_aversion * risk.gamma)
    rhs = features.T @ target
    return solve_normal_equations(gram, rhs, _effective_ridge(gram, regularizer))


def optimal_hedge_values(phi_t: FeatureMatrix, coefficients: np.ndarray) -> np.ndarray:
    """Per-path hedge: feature matrix times coefficient vector."""
    return phi_t.values @ coefficients


def rollback_portfolio(pi_next: np.ndarray, hedge: np.ndarray,
                       delta_s: np.ndarray, gamma: float) -> np.ndarray:
    """One self-financing step backward: gamma * (pi_next - hedge * delta_s)."""
    return gamma * (pi_next - hedge * delta_s)


def compute_rewards(pi_next: np.ndarray, pi_t: np.ndarray, gamma: float,
                    risk_aversion: float) -> np.ndarray:
    """Per-path reward: discounted portfolio change minus the variance penalty.

    The penalty uses the cross-sectional (population) variance of the
    current portfolio, a single scalar shared by all paths.
    """
    _, var = cross_sectional_stats(pi_t)
    return gamma * pi_next - pi_t - risk_aversion * var


def fit_q_coefficients(phi_t: FeatureMatrix, rewards_t: np.ndarray,
                       q_next: np.ndarray, gamma: float,
                       regularizer: float | None = None) -> np.ndarray:
    """Value coefficients: regress reward + gamma * next value on the features."""
    features = phi_t.values
    gram = features.T @ features
    rhs = features.T @ (rewards_t + gamma * q_next)
    return solve_normal_equations(gram, rhs, _effective_ridge(gram, regularizer))


def run_model_based(paths: PathSet, state_kind: StateKind, strike: float,
                    risk: RiskParams, basis_spec: BasisSpec | None = None,
                    regularizer: float | None = None,
                    features: np.ndarray | None = None) -> DPSolution:
    """Backward pass from expiry to time 0.

    When no basis spec is given, the default clamped basis is built over
    the global range of the chosen state. A precomputed feature cube
    (T+1, K, N) may be passed to reuse work across runs that share paths
    and basis.
    """
    n_paths, n_steps = paths.n_paths, paths.n_steps
    if features is None:
        states = compute_states(paths, state_kind)
        if basis_spec is None:
            basis_spec = spec_for_states(states.values)
        features = feature_cube(basis_spec, states.values)
    # The rate implied by the discount factor, so increments and
    # discounting always agree even for loaded path fixtures.
    rate = -math.log(risk.gamma) / paths.dt
    increments = price_increments(paths, rate)

    hedges = np.zeros((n_paths, n_steps + 1))
    portfolio = np.zeros_like(hedges)
    rewards = np.zeros_like(hedges)
    q_values = np.zeros_like(hedges)
    n_basis = features.shape[2]
    phi = np.zeros((n_steps, n_basis))
    omega = np.zeros((n_steps, n_basis))

    pi_T, _, a_T, r_T, q_T = terminal_conditions(paths, strike, risk)
    portfolio[:, -1] = pi_T
    hedges[:, -1] = a_T
    rewards[:, -1] = r_T
    q_values[:, -1] = q_T
    pi_hat_next = pi_T - pi_T.mean()

    for t in range(n_steps - 1, -1, -1):
        phi_t = FeatureMatrix(values=features[t])
        ds = increments.delta_s[:, t]
        ds_hat = increments.delta_s_hat[:, t]

        phi[t] = fit_hedge_coefficients(phi_t, ds, ds_hat, pi_hat_next, risk,
                                        regularizer)
        hedges[:, t] = optimal_hedge_values(phi_t, phi[t])
        portfolio[:, t] = rollback_portfolio(portfolio[:, t + 1], hedges[:, t],
                                             ds, risk.gamma)
        rewards[:, t] = compute_rewards(portfolio[:, t + 1], portfolio[:, t],
                                        risk.gamma, risk.risk_aversion)
        omega[t] = fit_q_coefficients(phi_t, rewards[:, t], q_values[:, t + 1],
                                      risk.gamma, regularizer)
        q_values[:, t] = phi_t.values @ omega[t]
        pi_hat_next = portfolio[:, t] - portfolio[:, t].mean()

    return DPSolution(
        hedges=hedges,
        portfolio=portfolio,
        rewards=rewards,
        q_values=q_values,
        cash=portfolio - hedges * paths.prices,
        phi=phi,
        omega=omega,
        price_t0=float(-q_values[:, 0].mean()),
        hedge_t0=float(hedges[:, 0].mean()),
    )

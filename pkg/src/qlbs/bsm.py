"""Closed-form Black-Scholes-Merton put price and hedge ratio.

Serves as the analytic benchmark for the simulation-based prices. Only
European puts are covered; the hedge ratio here is the put delta, which
lives in [-1, 0].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x):
    """Standard normal CDF via the complementary error function.

    erfc is evaluated by the C library to full double precision, so the
    absolute error is far below the 1e-10 contract. Accepts scalars or
    numpy arrays.
    """
    return 0.5 * erfc(-x / _SQRT2)


@dataclass(frozen=True)
class BsmQuote:
    price: float
    delta: float
    d1: float
    d2: float


def _d1_d2(s0: float, strike: float, r: float, sigma: float, maturity: float):
    root_t = math.sqrt(maturity)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma**2) * maturity) / (sigma * root_t)
    return d1, d1 - sigma * root_t


def _validate(s0, strike, sigma, maturity):
    if s0 <= 0 or strike <= 0:
        raise ValueError("spot and strike must be positive")
    if sigma < 0 or maturity < 0:
        raise ValueError("sigma and maturity must be nonnegative")


def _is_degenerate(sigma: float, maturity: float) -> bool:
    return sigma == 0.0 or maturity == 0.0


def bsm_put_price(s0: float, strike: float, r: float, sigma: float,
                  maturity: float) -> float:
    """European put price.

    sigma = 0 or maturity = 0 are treated as their analytic limits
    (discounted intrinsic value) so parameter sweeps can touch the edges.
    """
    _validate(s0, strike, sigma, maturity)
    if _is_degenerate(sigma, maturity):
        return max(strike * math.exp(-r * maturity) - s0, 0.0)
    d1, d2 = _d1_d2(s0, strike, r, sigma, maturity)
    return float(strike * math.exp(-r * maturity) * norm_cdf(-d2)
                 - s0 * norm_cdf(-d1))


def bsm_put_delta(s0: float, strike: float, r: float, sigma: float,
                  maturity: float) -> float:
    """Put hedge ratio N(d1) - 1, in [-1, 0]."""
    _validate(s0, strike, sigma, maturity)
    if _is_degenerate(sigma, maturity):
        return -1.0 if strike * math.exp(-r * maturity) > s0 else 0.0
    d1, _ = _d1_d2(s0, strike, r, sigma, maturity)
    return float(norm_cdf(d1) - 1.0)


def bsm_put_quote(s0: float, strike: float, r: float, sigma: float,
                  maturity: float) -> BsmQuote:
    """Price, delta and the d1/d2 coefficients in one call."""
    _validate(s0, strike, sigma, maturity)
    if _is_degenerate(sigma, maturity):
        sign = 1.0 if s0 >= strike * math.exp(-r * maturity) else -1.0
        return BsmQuote(
            price=bsm_put_price(s0, strike, r, sigma, maturity),
            delta=bsm_put_delta(s0, strike, r, sigma, maturity),
            d1=sign * math.inf,
            d2=sign * math.inf,
        )
    d1, d2 = _d1_d2(s0, strike, r, sigma, maturity)
    return BsmQuote(
        price=bsm_put_price(s0, strike, r, sigma, maturity),
        delta=bsm_put_delta(s0, strike, r, sigma, maturity),
        d1=d1,
        d2=d2,
    )

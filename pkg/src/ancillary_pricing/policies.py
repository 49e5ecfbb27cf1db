"""Price-selection layer: pure pricing operations plus policy adapters.

The operations take explicit random draws where randomness is involved, so
every function here is referentially transparent. The policy classes wrap
them behind a uniform ``quote(session, rng)`` interface for the A/B
harness, the evaluation report, and the serving layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .core import (
    DemandModel,
    EncodingSchema,
    PolicyTag,
    PriceGrid,
    Quote,
    SessionRecord,
    encode,
    snap_to_grid,
)
from .pricing_net import DnnClModel, recommend_price


@dataclass(frozen=True)
class LogisticMapParams:
    """Probability-to-price curve: max_price / (1 + exp(-shape*(p - midpoint)))."""

    max_price: float
    shape: float
    midpoint: float

    def __post_init__(self):
        if self.max_price <= 0:
            raise ValueError("max_price must be positive")
        if self.shape <= 0:
            raise ValueError("shape must be positive")
        if not 0.0 < self.midpoint < 1.0:
            raise ValueError("midpoint must lie in (0, 1)")


@dataclass(frozen=True)
class RandomDiscountParams:
    """Gaussian discount noise below a static reference price."""

    mean_discount: float
    std_discount: float
    static_price: float

    def __post_init__(self):
        if self.std_discount < 0:
            raise ValueError("std_discount must be non-negative")
        if self.static_price <= 0:
            raise ValueError("static_price must be positive")


def logistic_map(prob: float, params: LogisticMapParams, grid: PriceGrid) -> float:
    """Map a purchase probability to a price, clamped into the grid range."""
    raw = params.max_price / (1.0 + math.exp(-params.shape * (prob - params.midpoint)))
    return grid.clamp(raw)


def expected_revenue(model: DemandModel, features: np.ndarray, price: float) -> float:
    if price <= 0:
        raise ValueError("price must be positive")
    return price * model.predict_proba(features, price)


def des_recommend(model: DemandModel, features: np.ndarray, grid: PriceGrid,
                  model_version: str = "dev") -> Quote:
    """Exhaustive search for the grid price maximizing expected revenue.

    The demand model is evaluated over the whole grid in a single batched
    call; exact revenue ties go to the lowest price.
    """
    prices = grid.as_array()
    probs = model.predict_proba_grid(features, prices)
    revenue = prices * probs
    best = int(np.argmax(revenue))  # first maximum: lowest price on ties
    return Quote(
        recommended_price=grid.prices[best],
        policy_tag=PolicyTag.APP_DES,
        purchase_prob_estimate=float(probs[best]),
        expected_revenue_estimate=float(revenue[best]),
        model_version=model_version,
    )


def app_lm_recommend(model: DemandModel, features: np.ndarray, p_ref: float,
                     params: LogisticMapParams, grid: PriceGrid,
                     model_version: str = "dev") -> Quote:
    """Probability at the reference price, then the logistic price map."""
    prob = model.predict_proba(features, p_ref)
    return Quote(
        recommended_price=logistic_map(prob, params, grid),
        policy_tag=PolicyTag.APP_LM,
        purchase_prob_estimate=prob,
        model_version=model_version,
    )


def epsilon_greedy(eps: float, u: float, price_explore: float, price_exploit: float) -> float:
    """Exploration branch when the uniform draw u falls below eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return price_explore if u < eps else price_exploit


def random_discount(params: RandomDiscountParams, gauss: float, grid: PriceGrid) -> float:
    """Static price minus folded Gaussian noise, clamped into the grid.

    The absolute value keeps the discount non-negative: the served price
    never exceeds the static reference.
    """
    discount = abs(params.mean_discount + params.std_discount * gauss)
    return grid.clamp(params.static_price - discount)


def static_price(price: float, model_version: str = "human") -> Quote:
    return Quote(recommended_price=price, policy_tag=PolicyTag.HUMAN,
                 model_version=model_version)


class PricingPolicy(Protocol):
    """Maps a raw session to a price quote; rng covers any exploration."""

    name: str

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        ...

    def score(self, session: SessionRecord) -> float | None:
        """Purchase-probability estimate at the session's offered price, if any."""
        ...


@dataclass(frozen=True)
class StaticPricePolicy:
    price: float
    grid: PriceGrid
    name: str = "HUMAN"

    def __post_init__(self):
        if not self.grid.p_min <= self.price <= self.grid.p_max:
            raise ValueError(f"static price {self.price} outside grid range "
                             f"[{self.grid.p_min}, {self.grid.p_max}]")

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        return static_price(self.price)

    def score(self, session: SessionRecord) -> float | None:
        return None


@dataclass(frozen=True)
class RandomDiscountPolicy:
    params: RandomDiscountParams
    grid: PriceGrid
    name: str = "RANDOM"

    def __post_init__(self):
        if not self.grid.p_min <= self.params.static_price <= self.grid.p_max:
            raise ValueError(f"static price {self.params.static_price} outside grid "
                             f"range [{self.grid.p_min}, {self.grid.p_max}]")

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        price = random_discount(self.params, float(rng.standard_normal()), self.grid)
        return Quote(recommended_price=price, policy_tag=PolicyTag.RANDOM,
                     model_version="random-discount")

    def score(self, session: SessionRecord) -> float | None:
        return None


@dataclass(frozen=True)
class AppLmPolicy:
    """Purchase probability at a fixed reference price, mapped to a price."""

    model: DemandModel
    schema: EncodingSchema
    grid: PriceGrid
    logistic: LogisticMapParams
    p_ref: float
    name: str = "APP-LM"
    model_version: str = "dev"

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        x = encode(session, self.schema).values
        q = app_lm_recommend(self.model, x, self.p_ref, self.logistic, self.grid,
                             model_version=self.model_version)
        return q

    def score(self, session: SessionRecord) -> float | None:
        x = encode(session, self.schema).values
        return self.model.predict_proba(x, session.price_offered)


@dataclass(frozen=True)
class AppDesPolicy:
    model: DemandModel
    schema: EncodingSchema
    grid: PriceGrid
    name: str = "APP-DES"
    model_version: str = "dev"

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        x = encode(session, self.schema).values
        return des_recommend(self.model, x, self.grid, model_version=self.model_version)

    def score(self, session: SessionRecord) -> float | None:
        x = encode(session, self.schema).values
        return self.model.predict_proba(x, session.price_offered)


@dataclass(frozen=True)
class DnnClPolicy:
    model: DnnClModel
    schema: EncodingSchema
    name: str = "DNN-CL"
    model_version: str = "dev"

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        x = encode(session, self.schema).values
        return recommend_price(self.model, x, model_version=self.model_version)

    def score(self, session: SessionRecord) -> float | None:
        return None  # prices directly; no probability output


@dataclass(frozen=True)
class EpsilonGreedyPolicy:
    """Logistic exploration with probability eps, else revenue maximization."""

    eps: float
    explore: PricingPolicy
    exploit: PricingPolicy
    name: str = "EPS-GREEDY"

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")

    def quote(self, session: SessionRecord, rng: np.random.Generator) -> Quote:
        u = float(rng.uniform())
        q_explore = self.explore.quote(session, rng)
        q_exploit = self.exploit.quote(session, rng)
        price = epsilon_greedy(self.eps, u, q_explore.recommended_price,
                               q_exploit.recommended_price)
        chosen = q_explore if u < self.eps else q_exploit
        return Quote(
            recommended_price=price,
            policy_tag=PolicyTag.EPS_GREEDY,
            purchase_prob_estimate=chosen.purchase_prob_estimate,
            model_version=chosen.model_version,
        )

    def score(self, session: SessionRecord) -> float | None:
        return self.exploit.score(session)


def snap_quote_to_grid(quote: Quote, grid: PriceGrid) -> Quote:
    """Replace the quoted price by its nearest grid point."""
    idx = snap_to_grid(quote.recommended_price, grid)
    return Quote(
        recommended_price=grid.prices[idx],
        policy_tag=quote.policy_tag,
        purchase_prob_estimate=quote.purchase_prob_estimate,
        expected_revenue_estimate=quote.expected_revenue_estimate,
        model_version=quote.model_version,
    )

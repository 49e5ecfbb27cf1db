"""Domain types, feature encoding, and price-grid arithmetic.

Everything here is immutable after construction and safe to share across
threads; the operations are pure functions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol, Sequence

import numpy as np

from .errors import AllFeaturesDegenerate, EmptyDataset, SchemaMismatch

# Base features extracted from every SessionRecord, in encoding order.
# Extra features (per-session name -> value maps) follow, sorted by name.
BASE_NUMERIC = (
    "days_to_departure",
    "departure_epoch",
    "length_of_stay",
    "group_size",
    "num_stops",
    "price_comparison_score",
)
BASE_CATEGORICAL = ("market", "booking_class")


class PolicyTag(str, Enum):
    HUMAN = "HUMAN"
    RANDOM = "RANDOM"
    APP_LM = "APP_LM"
    APP_DES = "APP_DES"
    DNN_CL = "DNN_CL"
    EPS_GREEDY = "EPS_GREEDY"


@dataclass(frozen=True)
class SessionRecord:
    """One booking session: raw attributes, offered price, purchase label.

    ``purchased`` is None for inference-time records that have no outcome
    yet. ``length_of_stay`` of 0 means a one-way booking.
    """

    session_id: str
    days_to_departure: int
    departure_epoch: int
    length_of_stay: int
    market: tuple[str, str]
    group_size: int
    booking_class: str
    num_stops: int
    price_comparison_score: float
    price_offered: float
    purchased: int | None = None
    extra_features: Mapping[str, float | str] = field(default_factory=dict)

    def __post_init__(self):
        if self.price_offered <= 0:
            raise ValueError(f"price_offered must be positive, got {self.price_offered}")
        if self.days_to_departure < 0:
            raise ValueError("days_to_departure must be non-negative")
        if self.length_of_stay < 0:
            raise ValueError("length_of_stay must be non-negative")
        if self.group_size < 1:
            raise ValueError("group_size must be at least 1")
        if self.num_stops < 0:
            raise ValueError("num_stops must be non-negative")
        if self.purchased is not None and self.purchased not in (0, 1):
            raise ValueError(f"purchased must be 0 or 1, got {self.purchased}")
        if len(self.market) != 2:
            raise ValueError("market must be an (origin, destination) pair")

    @property
    def market_code(self) -> str:
        return f"{self.market[0]}-{self.market[1]}"


@dataclass(frozen=True)
class PriceGrid:
    """The ordered discrete set of legal prices within [p_min, p_max]."""

    prices: tuple[float, ...]

    def __post_init__(self):
        if len(self.prices) < 2:
            raise ValueError("price grid needs at least 2 points")
        if any(p <= 0 for p in self.prices):
            raise ValueError("all grid prices must be positive")
        if any(b <= a for a, b in zip(self.prices, self.prices[1:])):
            raise ValueError("grid prices must be strictly ascending")
        object.__setattr__(self, "_arr", np.asarray(self.prices, dtype=float))

    @property
    def p_min(self) -> float:
        return self.prices[0]

    @property
    def p_max(self) -> float:
        return self.prices[-1]

    def as_array(self) -> np.ndarray:
        return self._arr

    def __len__(self) -> int:
        return len(self.prices)

    def clamp(self, price: float) -> float:
        return min(max(price, self.p_min), self.p_max)


@dataclass(frozen=True)
class NumericFeature:
    name: str
    mean: float
    std: float
    optional: bool  # optional features carry an extra missing-flag column


@dataclass(frozen=True)
class CategoricalFeature:
    name: str
    levels: tuple[str, ...]  # one-hot over levels plus a trailing unknown bucket


@dataclass(frozen=True)
class EncodingSchema:
    """Fitted feature layout: z-score stats and categorical level lists."""

    numeric: tuple[NumericFeature, ...]
    categorical: tuple[CategoricalFeature, ...]

    @property
    def dim(self) -> int:
        n = sum(2 if f.optional else 1 for f in self.numeric)
        n += sum(len(f.levels) + 1 for f in self.categorical)
        return n

    @property
    def schema_hash(self) -> str:
        payload = {
            "numeric": [[f.name, f.mean, f.std, f.optional] for f in self.numeric],
            "categorical": [[f.name, list(f.levels)] for f in self.categorical],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def column_names(self) -> list[str]:
        cols: list[str] = []
        for f in self.numeric:
            cols.append(f.name)
            if f.optional:
                cols.append(f"{f.name}__missing")
        for f in self.categorical:
            cols.extend(f"{f.name}={lvl}" for lvl in f.levels)
            cols.append(f"{f.name}=<unknown>")
        return cols


@dataclass(frozen=True)
class FeatureVector:
    """Encoded session, bound to the schema that produced it."""

    values: np.ndarray
    schema_hash: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature vector contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class Quote:
    """A price recommendation emitted by one of the pricing policies."""

    recommended_price: float
    policy_tag: PolicyTag
    purchase_prob_estimate: float | None = None
    expected_revenue_estimate: float | None = None
    model_version: str = "dev"

    def __post_init__(self):
        if self.recommended_price <= 0:
            raise ValueError("recommended price must be positive")
        p = self.purchase_prob_estimate
        if p is not None and not 0.0 <= p <= 1.0:
            raise ValueError(f"purchase probability estimate out of [0,1]: {p}")
        if self.expected_revenue_estimate is not None and self.expected_revenue_estimate < 0:
            raise ValueError("expected revenue estimate must be non-negative")


class DemandModel(Protocol):
    """Purchase-probability estimator f(x, P) in [0, 1]."""

    def predict_proba(self, features: np.ndarray, price: float) -> float:
        ...

    def predict_proba_grid(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        """Evaluate the same session at many candidate prices in one call."""
        ...


def _base_value(session: SessionRecord, name: str):
    if name == "market":
        return session.market_code
    return getattr(session, name)


def _raw_value(session: SessionRecord, name: str):
    """Value of a named feature, or None when absent/missing."""
    if name in BASE_NUMERIC or name in BASE_CATEGORICAL:
        return _base_value(session, name)
    return session.extra_features.get(name)


def _is_numeric(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def fit_schema(sessions: Sequence[SessionRecord]) -> EncodingSchema:
    """Fit an encoding layout from raw sessions.

    Numeric features are z-scored with population (1/n) variance; constant
    numeric features are dropped. Categorical features collect sorted level
    lists plus an unknown bucket. Extra features seen missing at fit time
    are marked optional and get a missing-flag column.
    """
    if len(sessions) < 2:
        raise EmptyDataset(f"need at least 2 sessions to fit a schema, got {len(sessions)}")

    extra_names = sorted({name for s in sessions for name in s.extra_features})
    kinds: dict[str, str] = {}
    for name in extra_names:
        observed = [s.extra_features[name] for s in sessions
                    if s.extra_features.get(name) is not None]
        if not observed:
            continue
        if all(_is_numeric(v) for v in observed):
            kinds[name] = "numeric"
        elif all(isinstance(v, str) for v in observed):
            kinds[name] = "categorical"
        else:
            raise SchemaMismatch(f"feature {name!r} mixes numeric and categorical values")

    numeric: list[NumericFeature] = []
    numeric_names = list(BASE_NUMERIC) + [n for n in extra_names if kinds.get(n) == "numeric"]
    for name in numeric_names:
        raw = [_raw_value(s, name) for s in sessions]
        present = [float(v) for v in raw if v is not None]
        if not present:
            continue
        mean = float(np.mean(present))
        std = float(np.std(present))
        if std == 0.0:
            continue  # zero-variance feature carries no signal
        optional = len(present) < len(raw)
        numeric.append(NumericFeature(name=name, mean=mean, std=std, optional=optional))

    if not numeric:
        raise AllFeaturesDegenerate("every numeric feature is constant")

    categorical: list[CategoricalFeature] = []
    cat_names = list(BASE_CATEGORICAL) + [n for n in extra_names if kinds.get(n) == "categorical"]
    for name in cat_names:
        observed = {str(v) for s in sessions if (v := _raw_value(s, name)) is not None}
        if not observed:
            continue
        categorical.append(CategoricalFeature(name=name, levels=tuple(sorted(observed))))

    return EncodingSchema(numeric=tuple(numeric), categorical=tuple(categorical))


def encode(session: SessionRecord, schema: EncodingSchema) -> FeatureVector:
    """Encode one session against a fitted schema. Pure and deterministic."""
    out = np.empty(schema.dim, dtype=float)
    i = 0
    for f in schema.numeric:
        v = _raw_value(session, f.name)
        if v is not None and not _is_numeric(v):
            raise SchemaMismatch(f"feature {f.name!r} expected numeric, got {type(v).__name__}")
        if v is None:
            if not f.optional:
                raise SchemaMismatch(f"required feature {f.name!r} missing from session "
                                     f"{session.session_id!r}")
            out[i] = 0.0
            i += 1
            out[i] = 1.0
            i += 1
        else:
            out[i] = (float(v) - f.mean) / f.std
            i += 1
            if f.optional:
                out[i] = 0.0
                i += 1
    for f in schema.categorical:
        v = _raw_value(session, f.name)
        block = np.zeros(len(f.levels) + 1)
        if v is not None and str(v) in f.levels:
            block[f.levels.index(str(v))] = 1.0
        else:
            block[-1] = 1.0  # unseen level or absent value -> unknown bucket
        out[i:i + len(block)] = block
        i += len(block)
    return FeatureVector(values=out, schema_hash=schema.schema_hash)


def encode_matrix(sessions: Sequence[SessionRecord], schema: EncodingSchema) -> np.ndarray:
    if not sessions:
        return np.empty((0, schema.dim))
    return np.stack([encode(s, schema).values for s in sessions])


@dataclass(frozen=True)
class EncodedDataset:
    """Encoded feature matrix with offered prices and labels, ready to fit."""

    features: np.ndarray  # (n, d)
    prices: np.ndarray    # (n,)
    labels: np.ndarray    # (n,) in {0, 1}
    p_max: float

    @property
    def n(self) -> int:
        return len(self.labels)


def encode_dataset(sessions: Sequence[SessionRecord], schema: EncodingSchema,
                   grid: PriceGrid) -> EncodedDataset:
    if any(s.purchased is None for s in sessions):
        raise ValueError("all sessions must carry a purchase label for training")
    return EncodedDataset(
        features=encode_matrix(sessions, schema),
        prices=np.array([s.price_offered for s in sessions], dtype=float),
        labels=np.array([s.purchased for s in sessions], dtype=int),
        p_max=grid.p_max,
    )


def snap_to_grid(price: float, grid: PriceGrid) -> int:
    """Index of the grid price nearest to ``price``.

    The input is clamped into [p_min, p_max] first; exact equidistant ties
    go to the lower index.
    """
    p = grid.clamp(price)
    return int(np.argmin(np.abs(grid.as_array() - p)))

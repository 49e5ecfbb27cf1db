import pytest

from ancillary_pricing.core import PriceGrid, SessionRecord


def _make_session(**overrides) -> SessionRecord:
    base = dict(
        session_id="s1",
        days_to_departure=30,
        departure_epoch=1_736_000_000,
        length_of_stay=4,
        market=("AAA", "BBB"),
        group_size=2,
        booking_class="economy",
        num_stops=1,
        price_comparison_score=0.3,
        price_offered=50.0,
        purchased=0,
    )
    base.update(overrides)
    return SessionRecord(**base)


@pytest.fixture
def make_session():
    return _make_session


@pytest.fixture
def grid3() -> PriceGrid:
    return PriceGrid((10.0, 20.0, 30.0))


@pytest.fixture
def grid_default() -> PriceGrid:
    return PriceGrid(tuple(float(p) for p in range(30, 52, 2)))

"""Blind double-auction settlement: price formation, clearing, grid
fallback, and per-building billing.

All orders in a round share one uniform price from the supply/demand
curve, so clearing reduces to quantity matching: the short side is fully
matched and the long side is rationed pro-rata.  Residual quantities
settle with the grid at the grid tariff.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import GridTariff


@dataclass(frozen=True)
class BidAsk:
    """One building's order for a round.

    A building never bids and asks in the same round, so one of the two
    quantities is always zero.
    """

    building_id: str
    bid_price: float
    bid_quantity: float
    ask_price: float
    ask_quantity: float


@dataclass(frozen=True)
class Allocation:
    """Where one building's order quantity ended up."""

    market_buy: float = 0.0
    market_sell: float = 0.0
    grid_buy: float = 0.0
    grid_sell: float = 0.0


@dataclass(frozen=True)
class SettlementRound:
    """One step's market clearing."""

    t: int
    market_price: float
    cleared_quantity: float
    allocations: dict[str, Allocation]


def price_curve(total_bid_qty: float, total_ask_qty: float, tariff: GridTariff) -> float:
    """Uniform round price from the demand share D/(D+S), clamped to the
    market band.  An empty round prices at the band midpoint."""
    if total_bid_qty < 0 or total_ask_qty < 0:
        raise ValueError(f"negative quantities: D={total_bid_qty}, S={total_ask_qty}")
    total = total_bid_qty + total_ask_qty
    if total <= 0:
        return (tariff.market_min + tariff.market_max) / 2.0
    p = tariff.grid_sell + (tariff.grid_buy - tariff.grid_sell) * (total_bid_qty / total)
    return min(max(p, tariff.market_min), tariff.market_max)


def make_bid_ask(net_load: float, price: float, building_id: str = "") -> BidAsk:
    """Order from residual net load: positive net load bids, negative asks."""
    return BidAsk(
        building_id=building_id,
        bid_price=price,
        bid_quantity=max(net_load, 0.0),
        ask_price=price,
        ask_quantity=max(-net_load, 0.0),
    )


def _ration(quantities: list[float], cleared: float, total: float) -> list[float]:
    """Pro-rata shares of ``cleared`` (< total) with the float remainder
    assigned to the largest order (first on ties), so shares sum to
    ``cleared`` exactly."""
    largest = 0
    for i, q in enumerate(quantities):
        if q > quantities[largest]:
            largest = i
    scale = cleared / total
    shares = [q * scale for q in quantities]
    others = 0.0
    for i, s in enumerate(shares):
        if i != largest:
            others = others + s
    shares[largest] = cleared - others
    return shares


def settle_round(orders: list[BidAsk], tariff: GridTariff, t: int) -> SettlementRound:
    """Clear one round: uniform price, short side fully matched, long side
    rationed pro-rata, residuals settled with the grid."""
    for o in orders:
        if o.bid_quantity < 0 or o.ask_quantity < 0:
            raise ValueError(f"order {o.building_id!r}: negative quantity")
        if o.bid_quantity * o.ask_quantity != 0:
            raise ValueError(f"order {o.building_id!r}: bids and asks in the same round")

    bid_total = sum(o.bid_quantity for o in orders)
    ask_total = sum(o.ask_quantity for o in orders)
    price = price_curve(bid_total, ask_total, tariff)
    cleared = min(bid_total, ask_total)

    bids = [o.bid_quantity for o in orders]
    asks = [o.ask_quantity for o in orders]
    if cleared <= 0:
        market_buys = [0.0] * len(orders)
        market_sells = [0.0] * len(orders)
    else:
        market_buys = bids if bid_total <= ask_total else _ration(bids, cleared, bid_total)
        market_sells = asks if ask_total <= bid_total else _ration(asks, cleared, ask_total)

    allocations = {}
    for o, mb, ms in zip(orders, market_buys, market_sells):
        allocations[o.building_id] = Allocation(
            market_buy=mb,
            market_sell=ms,
            grid_buy=o.bid_quantity - mb,
            grid_sell=o.ask_quantity - ms,
        )
    return SettlementRound(t=t, market_price=price, cleared_quantity=cleared, allocations=allocations)


def building_bill(alloc: Allocation, market_price: float, tariff: GridTariff) -> float:
    """Market bill plus grid bill plus fees for one building in one round."""
    return (
        (alloc.market_buy - alloc.market_sell) * market_price
        + alloc.grid_buy * tariff.grid_buy
        - alloc.grid_sell * tariff.grid_sell
        + tariff.fees_per_step
    )

"""NumPy backend for the backward-induction hot loop.

Expression order mirrors the compiled core and the scalar market path
exactly, so all of them produce bit-identical values.  Do not reassociate
the arithmetic here.
"""

from __future__ import annotations

import numpy as np


def market_rewards(e, ob, oa, grid_buy, grid_sell, market_min, market_max, fees):
    """Reward (negative bill) of net load ``e`` settled against aggregate
    background bids ``ob`` and asks ``oa``; all arrays broadcastable."""
    qb = np.maximum(e, 0.0)
    qa = np.maximum(-e, 0.0)
    dd = qb + ob
    ss = qa + oa
    total = dd + ss
    with np.errstate(divide="ignore", invalid="ignore"):
        price = grid_sell + (grid_buy - grid_sell) * (dd / total)
        price = np.minimum(np.maximum(price, market_min), market_max)
        price = np.where(total > 0, price, (market_min + market_max) / 2.0)
        cleared = np.minimum(dd, ss)
        buy_scale = cleared / dd
        mb = np.where(dd <= ss, qb,
                      np.where(qb >= ob, cleared - ob * buy_scale, qb * buy_scale))
        sell_scale = cleared / ss
        ms = np.where(ss <= dd, qa,
                      np.where(qa >= oa, cleared - oa * sell_scale, qa * sell_scale))
    gb = qb - mb
    gs = qa - ms
    bill = (mb - ms) * price + gb * grid_buy - gs * grid_sell + fees
    return -bill


def billing_rewards(e, grid_buy, grid_sell, w_sq):
    """Grid-only net-billing reward with an optional quadratic penalty."""
    return -(np.maximum(e, 0.0) * grid_buy - np.maximum(-e, 0.0) * grid_sell) - w_sq * (e * e)


def solve_layered(act_target, act_energy, act_count, residual, market_mode,
                  grid_buy, grid_sell, market_min, market_max, fees, w_sq,
                  others_bid=None, others_ask=None):
    """Backward induction over a layered (t, SoC index) MDP.

    ``act_target``/``act_energy`` are ``[n, A]`` per-level action tables in
    canonical tie-break order (ascending |energy|, then target), padded to
    width A with ``act_count`` giving the valid prefix per level.  Returns
    ``(values [T+1, n], policy [T, n])`` with a zero terminal layer; the
    greedy policy takes the first maximum in canonical order.
    """
    act_target = np.ascontiguousarray(act_target, dtype=np.int32)
    act_energy = np.ascontiguousarray(act_energy, dtype=np.float64)
    act_count = np.ascontiguousarray(act_count, dtype=np.int32)
    residual = np.ascontiguousarray(residual, dtype=np.float64)
    n, width = act_target.shape
    horizon = residual.shape[0]

    valid = np.arange(width)[None, :] < act_count[:, None]
    gather = np.where(valid, act_target, 0)

    rewards = np.empty((horizon, n, width))
    chunk = max(1, (1 << 22) // max(1, n * width))
    for start in range(0, horizon, chunk):
        stop = min(start + chunk, horizon)
        e = residual[start:stop, None, None] + act_energy[None, :, :]
        if market_mode:
            ob = np.ascontiguousarray(others_bid, dtype=np.float64)[start:stop, None, None]
            oa = np.ascontiguousarray(others_ask, dtype=np.float64)[start:stop, None, None]
            rewards[start:stop] = market_rewards(
                e, ob, oa, grid_buy, grid_sell, market_min, market_max, fees)
        else:
            rewards[start:stop] = billing_rewards(e, grid_buy, grid_sell, w_sq)

    values = np.zeros((horizon + 1, n))
    policy = np.zeros((horizon, n), dtype=np.int32)
    rows = np.arange(n)
    for t in range(horizon - 1, -1, -1):
        vals = rewards[t] + values[t + 1][gather]
        vals = np.where(valid, vals, -np.inf)
        best = np.argmax(vals, axis=1)
        values[t] = vals[rows, best]
        policy[t] = act_target[rows, best]
    return values, policy

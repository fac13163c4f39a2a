"""Auction clearing for the three pricing rules.

Each auction is cleared independently.  Bidders whose bid meets their
reserve are eligible; eligible bidders are ranked by score bid + boost,
ties going to the lower bidder index, and the top slots[j] of them win
slots in order.

Prices use the extended score sequence: rank k's score past the last
eligible bidder is 0, and the hypothetical slot past the last one has
weight 0.  With s = slots[j] and 0-based slot k, the winner of slot k
pays

  VCG:  sum over u in (k, s] of clamp(max(score[u] - z, r)) * (pos[u-1] - pos[u])
  GSP:  clamp(max(score[k+1] - z, r)) * pos[k]
  FPA:  bid * pos[k]

where clamp floors the unit price at 0 and caps it at the winner's own
bid.  The VCG sum runs through u = s with pos[s] = 0, so a reserve binds
on the bottom slot even with no bidder beneath it.

`clear` is the readable per-auction reference; `clear_batch` is the
vectorized implementation used in hot loops.  The two are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import AuctionFormat, BidProfile, MechanismConfig, Outcome, ProblemInstance


@dataclass(frozen=True)
class RankedAuctionView:
    """Per-auction eligibility and ranking, before pricing.

    order[j] holds the eligible bidder indices of auction j from best score
    to worst; ranked_scores[j] holds their scores in the same order, which
    is the score sequence the pricing formulas read (0 past the end).
    """

    eligible: tuple[np.ndarray, ...]
    order: tuple[np.ndarray, ...]
    ranked_scores: tuple[np.ndarray, ...]

    def score_at(self, j: int, rank: int) -> float:
        """Score of the rank-th best eligible bidder in auction j, 0 if none."""
        s = self.ranked_scores[j]
        return float(s[rank]) if rank < len(s) else 0.0


def _check_shapes(instance: ProblemInstance, config: MechanismConfig, bids: BidProfile) -> None:
    instance.require_valid()
    config.require_valid()
    if bids.issues:
        raise ValueError("invalid bids: " + "; ".join(bids.issues))
    shape = (instance.n, instance.m)
    if config.reserves.shape != shape or config.boosts.shape != shape:
        raise ValueError(f"mechanism config shaped {config.reserves.shape}, instance needs {shape}")
    if bids.bids.shape != shape:
        raise ValueError(f"bids shaped {bids.bids.shape}, instance needs {shape}")


def rank_auctions(instance: ProblemInstance, config: MechanismConfig, bids: BidProfile) -> RankedAuctionView:
    """Rank eligible bidders by score in every auction."""
    _check_shapes(instance, config, bids)
    b = bids.bids
    eligible = []
    order = []
    ranked_scores = []
    for j in range(instance.m):
        elig = [i for i in range(instance.n) if b[i, j] >= config.reserves[i, j]]
        ranked = sorted(elig, key=lambda i: (-(b[i, j] + config.boosts[i, j]), i))
        eligible.append(np.array(elig, dtype=np.int64))
        order.append(np.array(ranked, dtype=np.int64))
        ranked_scores.append(np.array([b[i, j] + config.boosts[i, j] for i in ranked]))
    return RankedAuctionView(tuple(eligible), tuple(order), tuple(ranked_scores))


def clear(instance: ProblemInstance, config: MechanismConfig, bids: BidProfile) -> Outcome:
    """Clear all auctions, one at a time.  Reference implementation."""
    view = rank_auctions(instance, config, bids)
    n, m = instance.n, instance.m
    b = bids.bids
    payments = np.zeros((n, m))
    winners = []
    for j in range(m):
        s = instance.slots[j]
        ranked = view.order[j]
        scores = view.ranked_scores[j]
        nf = len(ranked)

        def score_at(rank: int) -> float:
            return float(scores[rank]) if rank < nf else 0.0

        def pos_at(k: int) -> float:
            return float(instance.pos[j][k]) if k < s else 0.0

        w = np.full(s, -1, dtype=np.int64)
        for k in range(min(s, nf)):
            i = int(ranked[k])
            w[k] = i
            bid = float(b[i, j])
            z = float(config.boosts[i, j])
            r = float(config.reserves[i, j])
            if config.format is AuctionFormat.FPA:
                p = bid * pos_at(k)
            elif config.format is AuctionFormat.GSP:
                t = max(score_at(k + 1) - z, r)
                t = max(t, 0.0)
                t = min(t, bid)
                p = t * pos_at(k)
            else:
                p = 0.0
                for u in range(k + 1, s + 1):
                    t = max(score_at(u) - z, r)
                    t = max(t, 0.0)
                    t = min(t, bid)
                    p += t * (pos_at(u - 1) - pos_at(u))
            payments[i, j] = p
        winners.append(w)
    return Outcome(winners, payments)


def clear_batch(instance: ProblemInstance, config: MechanismConfig, bids: BidProfile) -> Outcome:
    """Clear all auctions vectorized across auctions.

    Bit-identical to `clear`: the same operations are applied elementwise in
    the same order, so results agree exactly, not just to tolerance.
    """
    _check_shapes(instance, config, bids)
    n, m = instance.n, instance.m
    if m == 0:
        return Outcome([], np.zeros((n, 0)))
    b = bids.bids
    res = config.reserves
    boo = config.boosts

    eligible = b >= res
    scores = b + boo
    masked = np.where(eligible, scores, -1.0)  # eligible scores are >= 0, so -1 sorts last
    order = np.argsort(-masked, axis=0, kind="stable")
    ranked = np.take_along_axis(masked, order, axis=0)
    score_seq = np.vstack([np.maximum(ranked, 0.0), np.zeros((1, m))])
    elig_count = eligible.sum(axis=0)

    slots_arr = np.asarray(instance.slots, dtype=np.int64)
    smax = int(slots_arr.max())
    pos_pad = np.zeros((m, smax + 1))
    for j in range(m):
        pos_pad[j, : slots_arr[j]] = instance.pos[j]

    payments = np.zeros((n, m))
    winners_mat = np.full((smax, m), -1, dtype=np.int64)
    aidx = np.arange(m)
    for k in range(smax):
        filled = (k < slots_arr) & (k < elig_count)
        if not filled.any():
            continue
        cols = aidx[filled]
        w = order[k, filled]
        winners_mat[k, filled] = w
        bid = b[w, cols]
        z = boo[w, cols]
        r = res[w, cols]
        if config.format is AuctionFormat.FPA:
            p = bid * pos_pad[cols, k]
        elif config.format is AuctionFormat.GSP:
            t = np.minimum(np.maximum(np.maximum(score_seq[k + 1, cols] - z, r), 0.0), bid)
            p = t * pos_pad[cols, k]
        else:
            p = np.zeros(len(cols))
            for u in range(k + 1, smax + 1):
                # beyond an auction's own slot count the pos difference is 0
                t = np.minimum(np.maximum(np.maximum(score_seq[u, cols] - z, r), 0.0), bid)
                p = p + t * (pos_pad[cols, u - 1] - pos_pad[cols, u])
        payments[w, cols] = p

    winners = [winners_mat[: slots_arr[j], j] for j in range(m)]
    return Outcome(winners, payments)


def opt_welfare(instance: ProblemInstance) -> float:
    """Welfare of the value-sorted allocation: top slots to top values."""
    instance.require_valid()
    total = 0.0
    for j in range(instance.m):
        s = instance.slots[j]
        top = -np.sort(-instance.values[:, j])[:s]
        total += float(np.dot(top, instance.pos[j]))
    return total


def top_value_bidders(instance: ProblemInstance) -> np.ndarray:
    """Boolean (n, m) mask: value ranks in the top slots[j] of its auction.

    Ties resolve to the lower bidder index, matching the clearing tie-break.
    """
    n, m = instance.n, instance.m
    mask = np.zeros((n, m), dtype=bool)
    order = np.argsort(-instance.values, axis=0, kind="stable")
    for j in range(m):
        mask[order[: instance.slots[j], j], j] = True
    return mask


def welfare_per_bidder(instance: ProblemInstance, outcome: Outcome) -> np.ndarray:
    """Value each bidder receives from the allocation."""
    wel = np.zeros(instance.n)
    if instance.m == 0:
        return wel
    all_w = np.concatenate(outcome.winners)
    all_j = np.concatenate([np.full(len(w), j) for j, w in enumerate(outcome.winners)])
    all_pos = np.concatenate(instance.pos)
    got = all_w >= 0
    np.add.at(wel, all_w[got], instance.values[all_w[got], all_j[got]] * all_pos[got])
    return wel


def revenue_per_bidder(outcome: Outcome) -> np.ndarray:
    return outcome.payments.sum(axis=1)


def welfare(instance: ProblemInstance, outcome: Outcome) -> float:
    return float(welfare_per_bidder(instance, outcome).sum())


def revenue(outcome: Outcome) -> float:
    return float(outcome.payments.sum())

"""Brute-force pricing oracle used to cross-check the clearing engine.

Deliberately written with plain Python lists and loops, straight from the
pricing definitions, sharing no code with auctionkit.clearing.  Slot and
rank indices are 1-based here to mirror the usual statement of the
formulas; the sentinel slot s+1 has weight 0 and the score of a rank past
the last eligible bidder is 0.
"""


def oracle_clear(n, m, slots, pos, fmt, reserves, boosts, bids):
    """Return (winners, payments) as plain lists.

    winners[j] lists the bidder occupying each slot of auction j (no entry
    for unfilled slots); payments is an n x m list of lists.
    """
    payments = [[0.0] * m for _ in range(n)]
    winners = []
    for j in range(m):
        s = slots[j]
        eligible = [i for i in range(n) if bids[i][j] >= reserves[i][j]]
        ranked = sorted(eligible, key=lambda i: (-(bids[i][j] + boosts[i][j]), i))

        def score(rank):  # 1-based rank among eligible bidders
            if rank <= len(ranked):
                i = ranked[rank - 1]
                return bids[i][j] + boosts[i][j]
            return 0.0

        def weight(k):  # 1-based slot, 0 beyond the last slot
            return pos[j][k - 1] if k <= s else 0.0

        win_j = ranked[: min(s, len(ranked))]
        for k, i in enumerate(win_j, start=1):
            b = bids[i][j]
            z = boosts[i][j]
            r = reserves[i][j]
            if fmt == "FPA":
                p = b * weight(k)
            elif fmt == "GSP":
                unit = max(score(k + 1) - z, r)
                unit = max(unit, 0.0)
                unit = min(unit, b)
                p = unit * weight(k)
            elif fmt == "VCG":
                p = 0.0
                for kappa in range(k + 1, s + 2):
                    unit = max(score(kappa) - z, r)
                    unit = max(unit, 0.0)
                    unit = min(unit, b)
                    p += unit * (weight(kappa - 1) - weight(kappa))
            else:
                raise ValueError(fmt)
            payments[i][j] = p
        winners.append(win_j)
    return winners, payments


def oracle_opt_welfare(n, m, slots, pos, values):
    total = 0.0
    for j in range(m):
        col = sorted((values[i][j] for i in range(n)), reverse=True)
        for k in range(slots[j]):
            total += pos[j][k] * col[k]
    return total

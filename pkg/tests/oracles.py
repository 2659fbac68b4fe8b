"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written in plain Python (lists, fractions,
explicit loops) so it shares no code path with the implementations under
test.
"""

from fractions import Fraction

import numpy as np


def finite_diff_grad(loss_fn, params: np.ndarray, coords, eps: float = 1e-5):
    """Central finite differences of loss_fn at the given coordinates."""
    grads = {}
    for c in coords:
        bumped = params.copy()
        bumped[c] += eps
        hi = loss_fn(bumped)
        bumped[c] -= 2 * eps
        lo = loss_fn(bumped)
        grads[c] = (hi - lo) / (2 * eps)
    return grads


def median_oracle(rows):
    """Coordinate-wise median via explicit sort, even counts averaged."""
    n, d = len(rows), len(rows[0])
    out = []
    for j in range(d):
        vals = sorted(rows[i][j] for i in range(n))
        mid = n // 2
        out.append(vals[mid] if n % 2 else (vals[mid - 1] + vals[mid]) / 2)
    return out


def trimmed_mean_oracle(rows, trim):
    """Coordinate-wise trimmed mean via explicit sort and left-to-right sum."""
    n, d = len(rows), len(rows[0])
    out = []
    for j in range(d):
        vals = sorted(rows[i][j] for i in range(n))[trim : n - trim]
        total = 0.0
        for v in vals:
            total += v
        out.append(total / len(vals))
    return out


def multi_krum_oracle(rows, f, m):
    """Exhaustive Krum scoring; returns (selected indices, averaged vector)."""
    n, d = len(rows), len(rows[0])
    scores = []
    for i in range(n):
        dists = []
        for j in range(n):
            if j == i:
                continue
            d2 = 0.0
            for k in range(d):
                diff = rows[i][k] - rows[j][k]
                d2 += diff * diff
            dists.append(d2)
        dists.sort()
        scores.append(sum(dists[: n - f - 2]))
    order = sorted(range(n), key=lambda i: (scores[i], i))
    chosen = sorted(order[:m])
    avg = []
    for j in range(d):
        total = 0.0
        for i in chosen:
            total += rows[i][j]
        avg.append(total / len(chosen))
    return chosen, avg


def trust_round_oracle(trust, accs, lr, threshold, flags, cnt_max, malicious):
    """One filter round in exact Fraction arithmetic.

    Follows the published update order literally: average over non-excluded
    clients, penalize/reward by lr * (acc - avg)^2, flag at <= threshold,
    exclude at cnt_max flags, clamp negatives, renormalize survivors.
    """
    trust = {j: Fraction(v) for j, v in trust.items()}
    accs = {j: Fraction(v) for j, v in accs.items()}
    lr, threshold = Fraction(lr), Fraction(threshold)
    flags = dict(flags)
    malicious = set(malicious)
    active = [j for j in sorted(accs) if j not in malicious]
    avg = sum(accs[j] for j in active) / len(active)
    for j in active:
        dev = (accs[j] - avg) ** 2
        trust[j] = trust[j] - lr * dev if accs[j] < avg else trust[j] + lr * dev
        if trust[j] <= threshold:
            flags[j] += 1
            if flags[j] >= cnt_max:
                malicious.add(j)
    clamped = {j: max(trust[j], Fraction(0)) for j in trust if j not in malicious}
    total = sum(clamped.values())
    for j in clamped:
        trust[j] = clamped[j] / total
    return {j: float(v) for j, v in trust.items()}, flags, malicious

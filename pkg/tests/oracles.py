"""Reference computations that share no code path with the package."""

import itertools
import math

import numpy as np


def removal_subsets(n, k):
    return list(itertools.combinations(range(n), k))


def enumerate_r_range(n, n_ch, k):
    # nodes 0..n_ch-1 are the CHs
    counts = {sum(1 for v in s if v < n_ch) for s in removal_subsets(n, k)}
    return min(counts), max(counts)


def enumerate_p_fch(r, k, n_ch, n):
    subsets = removal_subsets(n, k)
    return sum(1 for s in subsets if sum(1 for v in s if v < n_ch) == r) / len(subsets)


def enumerate_l1(k, n_ch, p_fnch, p_sch, n):
    """Average surviving successes over every k-subset, CHs are nodes 0..n_ch-1."""
    subsets = removal_subsets(n, k)
    total = 0.0
    for s in subsets:
        gone = set(s)
        for v in range(n):
            if v not in gone:
                total += p_sch if v < n_ch else 1.0 - p_fnch
    return total / len(subsets)


def double_loop_l2(n_ch, p_fnch, p_sch, n):
    """Direct double sum over K and R with math.comb."""
    acc = 0.0
    for k in range(1, n + 1):
        for r in range(0, k + 1):
            if r > n_ch or k - r > n - n_ch:
                continue
            w = math.comb(n_ch, r) * math.comb(n - n_ch, k - r) / math.comb(n, k)
            acc += w * (((n - n_ch) - (k - r)) * (1 - p_fnch) + (n_ch - r) * p_sch)
    return acc / n


def enumerate_l3(n, p, p_fnch_by_ch, p_sch):
    """Exhaustive over all 2^n role assignments and all removal subsets."""
    total = 0.0
    for roles in itertools.product((False, True), repeat=n):
        n_ch = sum(roles)
        weight = p**n_ch * (1 - p) ** (n - n_ch)
        per_k = 0.0
        for k in range(1, n + 1):
            subsets = removal_subsets(n, k)
            acc = 0.0
            for s in subsets:
                gone = set(s)
                for v in range(n):
                    if v not in gone:
                        acc += p_sch if roles[v] else 1.0 - p_fnch_by_ch[n_ch]
            per_k += acc / len(subsets)
        total += weight * per_k / n
    return total


def fading_failure_frequency(r_j, ch_positions, p_t, p_b, p_th, alpha, draws, seed):
    """Frequency of {no relay pair works} and {no direct link} over Exp(1) gains."""
    rng = np.random.default_rng(seed)
    rj = np.asarray(r_j, dtype=float)
    direct_gain = rng.exponential(1.0, draws)
    received = p_b * np.linalg.norm(rj) ** (-alpha) * direct_gain if np.any(rj) else np.full(draws, np.inf)
    fail = received < p_th
    for ri in ch_positions:
        ri = np.asarray(ri, dtype=float)
        h = rng.exponential(1.0, draws)
        g = rng.exponential(1.0, draws)
        d = np.linalg.norm(rj - ri)
        up = (p_t * d ** (-alpha) * h >= p_th) if d > 0 else np.ones(draws, bool)
        down = (p_b * np.linalg.norm(ri) ** (-alpha) * g >= p_th) if np.any(ri) else np.ones(draws, bool)
        fail &= ~(up & down)
    freq = fail.mean()
    return freq, math.sqrt(max(freq * (1 - freq), 1.0 / draws) / draws)


def joint_position_fading_mc(n_ch, a, p_t, p_b, p_th, alpha, draws, seed):
    """NCH failure frequency sampling positions and fading together."""
    rng = np.random.default_rng(seed)
    rj = rng.uniform(-a, a, size=(draws, 2))
    fail = p_b * np.hypot(rj[:, 0], rj[:, 1]) ** (-alpha) * rng.exponential(1.0, draws) < p_th
    for _ in range(n_ch):
        ri = rng.uniform(-a, a, size=(draws, 2))
        d = np.hypot(rj[:, 0] - ri[:, 0], rj[:, 1] - ri[:, 1])
        up = p_t * d ** (-alpha) * rng.exponential(1.0, draws) >= p_th
        down = p_b * np.hypot(ri[:, 0], ri[:, 1]) ** (-alpha) * rng.exponential(1.0, draws) >= p_th
        fail &= ~(up & down)
    freq = fail.mean()
    return freq, math.sqrt(max(freq * (1 - freq), 1.0 / draws) / draws)

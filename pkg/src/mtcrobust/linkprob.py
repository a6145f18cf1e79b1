"""Link-existence probabilities under unit-mean Rayleigh power fading.

A link with transmit power ``P`` over distance ``d`` exists when the fading
gain ``h ~ Exp(1)`` satisfies ``h >= P_th d^alpha / P``, which happens with
probability ``exp(-P_th d^alpha / P)``.  NCH-to-CH links use the node power;
both BS links use the BS power (downlink convention).

The scalar functions take :class:`~mtcrobust.model.Position` values; the
``*_exponent`` helpers are the vectorized forms used by the analytic and
simulation engines.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import LinearPowers, Position


def link_exponent(distance, power: float, pw: LinearPowers):
    """``P_th * d**alpha / power``; the fading gain a link needs to exist."""
    return pw.p_th * np.power(distance, pw.alpha) / power


def nch_ch_exponent(dx, dy, pw: LinearPowers):
    return link_exponent(np.hypot(dx, dy), pw.p_t, pw)


def bs_exponent(x, y, pw: LinearPowers):
    return link_exponent(np.hypot(x, y), pw.p_b, pw)


def _distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def p_link_nch_to_ch(r_j: Position, r_i: Position, pw: LinearPowers) -> float:
    return math.exp(-float(link_exponent(_distance(r_j, r_i), pw.p_t, pw)))


def p_link_ch_to_bs(r_i: Position, pw: LinearPowers) -> float:
    return math.exp(-float(link_exponent(r_i.norm(), pw.p_b, pw)))


def p_link_nch_to_bs(r_j: Position, pw: LinearPowers) -> float:
    return math.exp(-float(link_exponent(r_j.norm(), pw.p_b, pw)))


def p_relay_pair_fails(r_j: Position, r_i: Position, pw: LinearPowers) -> float:
    """Probability that NCH ``j`` cannot relay through CH ``i``.

    At least one of the two hops (NCH->CH, BS->CH) is missing.
    """
    z = float(link_exponent(_distance(r_j, r_i), pw.p_t, pw) + link_exponent(r_i.norm(), pw.p_b, pw))
    return -math.expm1(-z)


def p_fbe(r_j: Position, ch_positions: Sequence[Position], pw: LinearPowers) -> float:
    """Failure probability of an NCH at fixed positions of itself and all CHs.

    No CH offers a working relay pair and the direct BS link is absent.
    An empty CH list leaves only the direct-link factor.
    """
    prob = -math.expm1(-float(link_exponent(r_j.norm(), pw.p_b, pw)))
    for r_i in ch_positions:
        prob *= p_relay_pair_fails(r_j, r_i, pw)
    return prob

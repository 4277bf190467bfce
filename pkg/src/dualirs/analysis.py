"""Closed-form power gains of the one- and two-IRS links.

All gains are linear power ratios; convert with :func:`to_db` only for reporting.
The closed forms flatten every per-element path loss to its anchor value, so
they are approximations of the exact cascade evaluated in ``experiments``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LinkDistances:
    """Anchor distances BS -> IRS 1 (d_t), IRS 1 -> IRS 2 (d_s), IRS 2 -> user (d_r)."""

    d_t: float
    d_s: float
    d_r: float

    def __post_init__(self):
        for name in ("d_t", "d_s", "d_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")


def to_db(x: float) -> float:
    return 10 * math.log10(x) if x > 0 else -math.inf


def from_db(x_db: float) -> float:
    return 10 ** (x_db / 10)


def _positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def double_gain_closed_form(K1: float, K2: float, d: LinkDistances, alpha: float) -> float:
    """alpha^3 (K1 K2)^2 / (d_r d_s d_t)^2."""
    _positive(K1=K1, K2=K2, alpha=alpha)
    return alpha**3 * (K1 * K2) ** 2 / (d.d_r * d.d_s * d.d_t) ** 2


def optimal_split(K: int) -> tuple[int, int]:
    """Element split maximizing K1^2 (K - K1)^2; odd K returns (floor, ceil)."""
    if K < 2:
        raise ValueError(f"need at least 2 elements to split, got {K}")
    half = K // 2
    return half, K - half


def optimal_double_gain(K: float, d: LinkDistances, alpha: float) -> float:
    """alpha^3 K^4 / (4 d_r d_s d_t)^2, the balanced-split gain."""
    if not K >= 2:
        raise ValueError(f"need at least 2 elements, got {K}")
    _positive(alpha=alpha)
    return alpha**3 * K**4 / (4 * d.d_r * d.d_s * d.d_t) ** 2


def single_gain_closed_form(K: float, d: LinkDistances, alpha: float) -> float:
    """alpha^2 K^2 / (d_r d_s)^2, with the BS-to-IRS distance taken as d_s."""
    _positive(K=K, alpha=alpha)
    return alpha**2 * K**2 / (d.d_r * d.d_s) ** 2


def crossover_elements(alpha: float, d_t: float) -> float:
    """Total element count where the balanced two-IRS gain meets the one-IRS gain.

    Equating the two closed forms gives K* = 4 d_t / sqrt(alpha); with d_t = 1 m
    this is 4 / sqrt(alpha).
    """
    _positive(alpha=alpha, d_t=d_t)
    return 4 * d_t / math.sqrt(alpha)

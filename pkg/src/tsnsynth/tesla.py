"""TESLA key-disclosure interval selection and interval arithmetic.

The disclosure delay is fixed at one interval: the key used in interval i is
released by the key release task instance of interval i+1, so a stream
arriving in interval i can be consumed once the key verification task of
interval i+1 has run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InfeasibleError


@dataclass(frozen=True)
class TeslaConfig:
    p_int: int
    key_size: int
    mac_size: int
    disclosure_delay: int = 1


def divisors_desc(n: int) -> list[int]:
    small, large = [], []
    i = 1
    while i * i <= n:
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
        i += 1
    return sorted(small + large, reverse=True)


def optimize_p_int(apps: Iterable[tuple[str, int, int]], hyper: int) -> int:
    """Maximum interval length accommodating every application's secure chain.

    `apps` holds (app id, period, communication depth) triples. A value is
    admissible when P_int*(C+1) <= T for every application, P_int divides the
    hyperperiod, and P_int is a multiple or divisor of the gcd of the periods.
    The divisors of the hyperperiod are scanned in descending order, so the
    first hit is the maximum.
    """
    apps = list(apps)
    if not apps:
        return hyper
    if any(t <= 0 for _, t, _ in apps):
        raise ValueError("application periods must be positive")
    g = math.gcd(*(t for _, t, _ in apps))
    for p in divisors_desc(hyper):
        if any(p * (c + 1) > t for _, t, c in apps):
            continue
        if not (p % g == 0 or g % p == 0):
            continue
        return p
    worst = max(apps, key=lambda a: (a[2] + 1) / a[1])
    raise InfeasibleError(
        "p_int",
        f"no P_int accommodates application {worst[0]} "
        f"(period {worst[1]}, communication depth {worst[2]})",
        subjects=(worst[0],))


def auth_interval(arrival_end: int, p_int: int) -> int:
    """Earliest interval whose key can authenticate an arrival ending then.

    phi = floor(a / P) + 1, the smallest index with phi > floor(a / P); an
    arrival ending exactly on a boundary counts as the next interval.
    """
    if arrival_end < 0:
        raise ValueError("arrival_end must be nonnegative")
    return arrival_end // p_int + 1


def earliest_auth_time(phi: int, p_int: int, key_verify_end: int) -> int:
    """First instant a stream authenticated in interval `phi` may be consumed.

    `key_verify_end` is the end of the key verification task within its own
    period [0, p_int); instance phi of that task ends phi*p_int later.
    """
    return phi * p_int + key_verify_end

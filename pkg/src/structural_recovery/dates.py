"""Month arithmetic for cohort windows."""

from __future__ import annotations

import calendar
from datetime import date

__all__ = ["add_months", "month_range"]


def add_months(d: date, months: int) -> date:
    """Shift a date by whole months, clamping the day to the month length."""
    total = d.year * 12 + (d.month - 1) + months
    year, month = divmod(total, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def month_range(first: date, last: date, step: int = 1) -> list[date]:
    """Dates ``first, first + step months, ...`` up to and including ``last``."""
    if first > last:
        raise ValueError(f"first start {first} is after last start {last}")
    if step < 1:
        raise ValueError(f"step must be >= 1 month, got {step}")
    out = []
    k = 0
    while (d := add_months(first, k * step)) <= last:
        out.append(d)
        k += 1
    return out

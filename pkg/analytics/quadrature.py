import logging
from typing import Callable

from config import settings
from core.errors import NumericFailureError

logger = logging.getLogger(__name__)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = None, max_intervals: int = None) -> float:
    """
    Integrates a smooth scalar function on [a, b] with adaptive Simpson.

    Each interval is split until the Richardson error estimate |S_left + S_right - S| / 15
    is below its share of the absolute tolerance (halved at every split). Endpoint values are
    reused from the parent interval, so each split costs two new evaluations.

    Raises NumericFailureError with the achieved error estimate when the interval budget
    runs out before the tolerance is met.
    """
    tol = settings.QUADRATURE_TOL if tol is None else tol
    max_intervals = settings.QUADRATURE_MAX_INTERVALS if max_intervals is None else max_intervals
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_intervals)

    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    stack = [(a, b, fa, fm, fb, whole, tol)]
    total = 0.0
    error = 0.0
    intervals = 1
    exhausted = False
    while stack:
        lo, hi, flo, fmid, fhi, s, eps = stack.pop()
        m = 0.5 * (lo + hi)
        lm = 0.5 * (lo + m)
        rm = 0.5 * (m + hi)
        # interval no longer splittable in floating point
        if not (lo < lm < m < rm < hi):
            total += s
            continue
        flm, frm = f(lm), f(rm)
        left = (m - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - m) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - s
        if abs(delta) <= 15.0 * eps or intervals >= max_intervals:
            if abs(delta) > 15.0 * eps:
                exhausted = True
            total += left + right + delta / 15.0
            error += abs(delta) / 15.0
            continue
        intervals += 1
        stack.append((m, hi, fmid, frm, fhi, right, 0.5 * eps))
        stack.append((lo, m, flo, flm, fmid, left, 0.5 * eps))

    if exhausted and error > tol:
        logger.error(f"Adaptive Simpson exhausted {max_intervals} intervals, error estimate {error:.3g}")
        raise NumericFailureError(
            f"Quadrature on [{a}, {b}] did not converge: estimated error {error:.3g} > {tol:.3g}",
            achieved_tolerance=error,
        )
    return total

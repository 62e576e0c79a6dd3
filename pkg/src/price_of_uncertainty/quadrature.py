"""Adaptive Simpson quadrature."""
from __future__ import annotations

import math


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 48,
                     min_depth: int = 4) -> tuple[float, float]:
    """Integrate scalar ``f`` over ``[a, b]``.

    Returns ``(value, error_estimate)``.  ``min_depth`` forces a few uniform
    splits first so narrow features are not skipped by a lucky coarse rule.
    Subintervals that hit ``max_depth`` are accepted and their local error is
    still added to the estimate.
    """
    if b <= a:
        return 0.0, 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    err = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - s
        if depth >= min_depth and (abs(delta) <= 15.0 * eps or depth >= max_depth
                                   or not math.isfinite(delta)):
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
            continue
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total, err

"""Shared high-precision oracles for the test suite."""

import mpmath


def beta_quantile_oracle(a, b, prob):
    """Quantile of Beta(a, b) by mpmath quadrature of the density + bisection.

    Integrates in the arcsine-transformed variable t = sin^2(theta), where
    the integrand 2 sin^(2a-1) cos^(2b-1) is bounded for a, b >= 1/2, and
    splits the quadrature panels geometrically toward the endpoint so the
    sharp mass of large-parameter Betas is resolved.
    """
    mpmath.mp.dps = 25
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    norm = mpmath.beta(a, b)

    def integrand(theta):
        return 2 * mpmath.sin(theta) ** (2 * a - 1) * mpmath.cos(theta) ** (2 * b - 1)

    if a > 0.5 and b > 0.5:
        peak = mpmath.atan(mpmath.sqrt((2 * a - 1) / (2 * b - 1)))
    else:
        peak = None

    def cdf(x):
        if x <= 0:
            return mpmath.mpf(0)
        if x >= 1:
            return mpmath.mpf(1)
        end = mpmath.asin(mpmath.sqrt(x))
        points = sorted({end * (1 - mpmath.mpf(2) ** (-k)) for k in range(14)} | {end})
        if peak is not None and 0 < peak < end:
            points = sorted(set(points) | {peak})
        return mpmath.quad(integrand, points) / norm

    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    for _ in range(45):
        mid = (lo + hi) / 2
        if cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)

"""Named test functions, referenced from the CLI and configs.

Names:

``hermite:q``      H_q
``poly:[a0,a1,..]`` a0 + a1 x + a2 x^2 + ...
``sign``           sign(x)
``abs-centered``   |x| - sqrt(2/pi)
``cube``           x^3
``indicator:a``    1{x > a} - P(N > a)
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy.special import ndtr

from .chaos import (
    DEFAULT_QUAD_ORDER,
    DEFAULT_TRUNCATION,
    HermiteExpansion,
    expand,
    hermite_eval,
)
from .errors import UnknownFunction


def resolve(name: str):
    """Return a vectorized callable for a registry name."""
    head, _, arg = name.strip().partition(":")
    try:
        if head == "hermite":
            q = int(arg)
            if q < 0:
                raise ValueError("negative degree")
            return lambda x: hermite_eval(q, x)
        if head == "poly":
            coeffs = [float(a) for a in json.loads(arg)]
            if not coeffs:
                raise ValueError("empty coefficient list")
            rev = coeffs[::-1]
            return lambda x: np.polyval(rev, x)
        if head == "indicator":
            a = float(arg)
            tail = float(ndtr(-a))
            return lambda x: (np.asarray(x) > a).astype(float) - tail
    except (ValueError, TypeError) as exc:
        raise UnknownFunction(f"bad argument in function spec {name!r}: {exc}") from None
    if arg:
        raise UnknownFunction(f"function {head!r} takes no argument")
    if head == "sign":
        return np.sign
    if head == "abs-centered":
        c = math.sqrt(2.0 / math.pi)
        return lambda x: np.abs(x) - c
    if head == "cube":
        return lambda x: np.asarray(x, dtype=float) ** 3
    raise UnknownFunction(f"unknown function {name!r}")


def _gaussian_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _from_raw_moments(moments, variance: float) -> HermiteExpansion:
    """Coefficients from exact moments E[f(N) H_q(N)], q = 0..Q."""
    Q = len(moments) - 1
    coeffs = np.array([moments[q] * math.exp(-math.lgamma(q + 1)) for q in range(Q + 1)])
    e = HermiteExpansion(coeffs)
    return HermiteExpansion(coeffs, rank=e.rank, discarded_mass=max(0.0, variance - e.l2_norm_sq()))


def closed_form(name: str, Q: int = DEFAULT_TRUNCATION) -> HermiteExpansion | None:
    """Exact expansion of a registry function, or None when only quadrature applies.

    Uses E[1{N>a} H_q(N)] = pdf(a) H_{q-1}(a) for q >= 1 and
    x H_q = H_{q+1} + q H_{q-1}.
    """
    head, _, arg = name.strip().partition(":")
    if head == "hermite":
        return None
    if head == "cube":
        c = np.zeros(max(Q, 3) + 1)
        c[1], c[3] = 3.0, 1.0
        return HermiteExpansion(c[: Q + 1], discarded_mass=0.0 if Q >= 3 else 6.0)
    if head == "indicator":
        a = float(arg)
        h = [hermite_eval(q, a) for q in range(Q)]
        p = float(ndtr(-a))
        moments = [0.0] + [_gaussian_pdf(a) * h[q - 1] for q in range(1, Q + 1)]
        return _from_raw_moments(moments, p * (1.0 - p))
    if head == "sign" and not arg:
        h0 = [hermite_eval(q, 0.0) for q in range(Q)]
        moments = [0.0] + [2.0 * _gaussian_pdf(0.0) * h0[q - 1] for q in range(1, Q + 1)]
        return _from_raw_moments(moments, 1.0)
    if head == "abs-centered" and not arg:
        h0 = [hermite_eval(q, 0.0) for q in range(Q + 1)]
        moments = [0.0, 0.0]
        for q in range(2, Q + 1):
            moments.append(2.0 * _gaussian_pdf(0.0) * (h0[q] + q * h0[q - 2]))
        return _from_raw_moments(moments[: Q + 1], 1.0 - 2.0 / math.pi)
    return None


def expansion_from_spec(
    spec,
    Q: int = DEFAULT_TRUNCATION,
    quad_order: int = DEFAULT_QUAD_ORDER,
    exact: bool = True,
) -> HermiteExpansion:
    """Build an expansion from a registry name or ``{"coeffs": [...]}``.

    ``hermite:q`` and the registry functions with a closed form (``sign``,
    ``abs-centered``, ``cube``, ``indicator:a``) are returned exactly;
    ``exact=False`` forces quadrature for the latter.
    """
    if isinstance(spec, dict):
        if "coeffs" not in spec:
            raise UnknownFunction("function spec object needs a 'coeffs' list")
        return HermiteExpansion.from_dict(spec)
    if not isinstance(spec, str):
        raise UnknownFunction(f"function spec must be a string or object, got {spec!r}")
    head, _, arg = spec.partition(":")
    if head == "hermite":
        try:
            q = int(arg)
        except ValueError:
            raise UnknownFunction(f"bad degree in {spec!r}") from None
        if q < 1:
            raise UnknownFunction("hermite:q needs q >= 1")
        return HermiteExpansion.hermite(q)
    f = resolve(spec)
    if exact:
        e = closed_form(spec, Q)
        if e is not None:
            return e
    return expand(f, Q=Q, quad_order=quad_order)

"""Log-gamma, digamma and trigamma on the positive half-line.

Thin validated wrappers over ``scipy.special``. Every likelihood formula in the
package goes through these so that a zero, negative or non-finite argument
surfaces as ``SpecialDomainError`` instead of a silent ``nan``/``inf``.
Scalars in give floats out; arrays in give arrays out.
"""

import numpy as np
from scipy import special as sp


class SpecialDomainError(ValueError):
    """Argument outside (0, inf) or not finite."""
    pass


def _checked(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
        bad = arr[~(np.isfinite(arr) & (arr > 0))]
        raise SpecialDomainError(f"{name} requires finite x > 0, got {bad.ravel()[0]!r}")
    return arr


def _out(result: np.ndarray, x):
    if np.ndim(x) == 0:
        return float(result)
    return result


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    arr = _checked(x, "log_gamma")
    return _out(sp.gammaln(arr), x)


def digamma(x):
    """Psi(x) = Gamma'(x) / Gamma(x) for x > 0."""
    arr = _checked(x, "digamma")
    return _out(sp.psi(arr), x)


def trigamma(x):
    """Psi_1(x), the derivative of digamma, for x > 0."""
    arr = _checked(x, "trigamma")
    return _out(sp.polygamma(1, arr), x)

"""Parameter-count formulas and dimension budgeting for bounded-parameter runs."""
from __future__ import annotations

import warnings
from fractions import Fraction

from .errors import BudgetError, ConfigError

MODELS = ("boxte", "boxte-f", "de-simple", "tcomplex", "tntcomplex")

# Search cap for dimension_for_budget.
MAX_DIM = 1_000_000


def param_count(model: str, sizes, d: int, k: int = 1, b: int | None = None,
                gamma: float | str | Fraction | None = None) -> int:
    """Closed-form parameter count.

    ``sizes`` is ``(|E|, |R|, |T|)``. ``b`` is needed for ``boxte-f``, ``gamma``
    for ``de-simple``; the latter's fractional count is rounded to the nearest
    integer.

    >>> param_count("boxte", (7128, 230, 365), 154, k=2)
    2379144
    """
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {MODELS}")
    E, R, T = (int(s) for s in sizes)
    if min(E, R, T) < 1:
        raise ConfigError("dataset sizes must be positive")
    if d < 1:
        raise ConfigError("d must be >= 1")
    if model in ("boxte", "boxte-f") and k < 1:
        raise ConfigError("k must be >= 1")
    if model == "boxte":
        return d * (2 * E + k * T + 2 * R) + k * R
    if model == "boxte-f":
        if b is None or b < 1:
            raise ConfigError("boxte-f needs a factor rank b >= 1")
        return d * (2 * E + k * b + 2 * R) + k * R + b * k * T
    if model == "de-simple":
        if gamma is None:
            raise ConfigError("de-simple needs its temporal feature share gamma")
        g = Fraction(str(gamma)) if isinstance(gamma, float) else Fraction(gamma)
        if not 0 <= g <= 1:
            raise ConfigError("gamma must lie in [0, 1]")
        return round(2 * d * ((3 * g + (1 - g)) * E + R))
    if model == "tcomplex":
        return 2 * d * (E + T + 2 * R)
    return 2 * d * (E + T + 4 * R)


def dimension_for_budget(model: str, sizes, budget: int, k: int = 1, b: int | None = None,
                         gamma=None, max_dim: int = MAX_DIM) -> int:
    """Largest ``d`` whose count stays within ``budget`` (bisection; counts grow with ``d``)."""
    count = lambda d: param_count(model, sizes, d, k, b, gamma)  # noqa: E731
    if count(1) > budget:
        raise BudgetError(f"budget {budget} is below the d=1 count {count(1)}")
    if count(max_dim) <= budget:
        warnings.warn(f"budget admits d >= {max_dim}; returning the search cap", RuntimeWarning)
        return max_dim
    lo, hi = 1, max_dim  # count(lo) <= budget < count(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if count(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


DATASET_SIZES = {
    "icews14": (7128, 230, 365),
    "icews05-15": (10488, 251, 4017),
    "gdelt": (500, 20, 366),
}

# Best configurations per dataset; factor_rank 0 means no factorisation.
PRESETS = {
    "icews14": dict(dim=1000, learning_rate=0.001, num_negatives=75, batch_size=256, k=2,
                    reg_weight=0.1, factor_rank=0),
    "icews05-15": dict(dim=1500, learning_rate=0.001, num_negatives=75, batch_size=512, k=5,
                       reg_weight=0.1, factor_rank=0),
    "gdelt": dict(dim=1500, learning_rate=0.001, num_negatives=75, batch_size=256, k=5,
                  reg_weight=0.0, factor_rank=0),
    "icews14-bounded": dict(dim=154, learning_rate=0.001, num_negatives=75, batch_size=256, k=2,
                            reg_weight=1.0, factor_rank=0),
    "icews05-15-bounded": dict(dim=104, learning_rate=0.001, num_negatives=75, batch_size=256, k=3,
                               reg_weight=0.0, factor_rank=0),
    "gdelt-bounded": dict(dim=124, learning_rate=0.001, num_negatives=75, batch_size=256, k=1,
                          reg_weight=0.1, factor_rank=80),
}


def preset_sizes(name: str) -> tuple[int, int, int]:
    return DATASET_SIZES[name.removesuffix("-bounded")]

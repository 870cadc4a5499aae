"""Target letters: monotone target functions scaled so total target width hits ``t``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import UnknownFunction, WidthOutOfRange
from .model import ABS_TOL, ProblemInstance, width_profile

BISECTION_STEPS = 200


def _sqrt(p):
    return np.sqrt(p)


def _constant(p):
    return np.ones_like(np.asarray(p, dtype=float))


def _proportional(p):
    return np.asarray(p, dtype=float)


TARGET_FUNCTIONS = {
    "sqrt": _sqrt,
    "constant": _constant,
    "proportional": _proportional,
}


class TabulatedFunction:
    """Monotone function given by ``(share, value)`` pairs, linearly interpolated."""

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        order = np.argsort(xs)
        self.xs, self.ys = xs[order], ys[order]
        if np.any(np.diff(self.ys) < 0):
            raise ValueError("tabulated target function must be non-decreasing")

    def __call__(self, p):
        return np.interp(p, self.xs, self.ys)


def target_function(name: Union[str, Callable]) -> Callable:
    """Look up a target function by name (``sqrt``, ``constant``, ``proportional``)."""
    if callable(name):
        return name
    try:
        return TARGET_FUNCTIONS[name]
    except KeyError:
        raise UnknownFunction(f"unknown target function {name!r}") from None


@dataclass(frozen=True, eq=False)
class TargetProfile:
    tau: np.ndarray
    widths: np.ndarray
    kappa: float
    function_name: str
    t: float

    @property
    def total_width(self) -> float:
        return math.fsum(self.widths)

    def to_dict(self, digest: Optional[str] = None) -> dict:
        return {
            "function": self.function_name,
            "kappa": self.kappa,
            "t": self.t,
            "tau": [float(v) for v in self.tau],
            "widths": [float(v) for v in self.widths],
            "instance_digest": digest,
        }


def scaled_targets(share: np.ndarray, letters: float, caps: np.ndarray, fvals: np.ndarray,
                   kappa: float) -> np.ndarray:
    return np.maximum(share * letters, np.minimum(caps, kappa * fvals))


def _width(fair, caps, fvals, kappa):
    tau = np.maximum(fair, np.minimum(caps, kappa * fvals))
    return math.fsum(fair / tau)


def solve_kappa(instance: ProblemInstance, f: Union[str, Callable] = "sqrt",
                t: Optional[float] = None) -> TargetProfile:
    """Smallest scaling ``kappa`` whose clamped targets have total width ``t``.

    The width is non-increasing and continuous in ``kappa``; it is bracketed by
    bisection and then solved exactly on the final piece, where the width has
    the form ``A + B / kappa``.
    """
    t = instance.budget if t is None else t
    func = target_function(f)
    name = f if isinstance(f, str) else getattr(f, "__name__", "custom")
    fair = np.asarray(instance.fair_share, dtype=float)
    caps = np.asarray(instance.u, dtype=float)
    fvals = np.asarray(func(instance.pi), dtype=float)
    if np.any(fvals <= 0):
        raise ValueError("target function must be positive on every population share")

    low = width_profile(instance).total
    n = instance.n
    if t < low - ABS_TOL or t > n + ABS_TOL:
        raise WidthOutOfRange(t, low, n)

    if t >= n - ABS_TOL:
        kappa = 0.0
    else:
        lo, hi = 0.0, float(np.max(caps / fvals))
        if _width(fair, caps, fvals, hi) > t:
            kappa = hi
        else:
            for _ in range(BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                if _width(fair, caps, fvals, mid) <= t:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-15 * hi:
                    break
            kappa = _polish(fair, caps, fvals, t, lo, hi)

    tau = scaled_targets(instance.pi, instance.letters, caps, fvals, kappa)
    tau = np.clip(tau, fair, caps)
    return TargetProfile(tau, fair / tau, float(kappa), name, float(t))


def _polish(fair, caps, fvals, t, lo, hi):
    """Solve ``A + B / kappa = t`` on the piece containing the bracket ``[lo, hi]``."""
    k = hi
    scaled = k * fvals
    free = (scaled > fair) & (scaled < caps)
    fixed_tau = np.where(scaled >= caps, caps, fair)
    a = math.fsum((fair / fixed_tau)[~free])
    b = math.fsum((fair / fvals)[free])
    if b > 0 and t - a > 0:
        cand = b / (t - a)
        tau = np.maximum(fair, np.minimum(caps, cand * fvals))
        same_piece = np.array_equal((cand * fvals > fair) & (cand * fvals < caps), free)
        if same_piece and abs(math.fsum(fair / tau) - t) <= abs(_width(fair, caps, fvals, hi) - t):
            return cand
    return hi

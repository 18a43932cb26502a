"""Phenomenological RRAM model: sinh IV law, exponential switching sensitivity and
voltage-dependent state boundaries, with quadratic or exponential window.

All functions take the terminal voltage ``v`` (p-terminal minus n-terminal).
The switching-direction sign ``eta`` is applied by evaluating the device
equations at ``eta * v``; with the default ``eta = +1`` every formula below is
used verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

EXP_CLAMP = 700.0

# sigmoid widths used by the smoothed evaluation mode
SENSITIVITY_SMOOTH_B = 1e-6
WINDOW_SMOOTH_B = 1e-3


class WindowKind(str, Enum):
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ModelParams:
    """Fitting parameters of one device model variant.

    ``A_p``/``A_n`` are opaque fitted magnitudes; their units differ between the
    quadratic and exponential windows. ``r_*`` are boundary polynomial
    coefficients in ohm, ohm/V and ohm/V^2.
    """

    window_kind: WindowKind
    a_p: float
    a_n: float
    b_p: float
    b_n: float
    A_p: float
    A_n: float
    t_p: float
    t_n: float
    r_p0: float
    r_p1: float = 0.0
    r_p2: float = 0.0
    r_n0: float = 0.0
    r_n1: float = 0.0
    r_n2: float = 0.0
    k_p: float = 0.0
    k_n: float = 0.0
    eta: int = 1
    v_guard: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "window_kind", WindowKind(self.window_kind))
        for name in ("a_p", "a_n", "b_p", "b_n", "t_p", "t_n"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.A_p < 0 or self.A_n > 0:
            raise ValueError("sensitivity amplitudes need A_p >= 0 and A_n <= 0")
        if self.window_kind is WindowKind.EXPONENTIAL and not (self.k_p > 0 and self.k_n > 0):
            raise ValueError("exponential window needs k_p > 0 and k_n > 0")
        if self.eta not in (1, -1):
            raise ValueError(f"eta must be +1 or -1, got {self.eta}")
        if self.v_guard < 0:
            raise ValueError("v_guard must be >= 0")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass
class DeviceState:
    """Resistive state of one device and its absolute admissible bounds."""

    R: float
    r_floor: float
    r_ceil: float

    def __post_init__(self):
        if not self.r_floor > 0:
            raise ValueError("r_floor must be > 0")
        if not self.r_floor <= self.R <= self.r_ceil:
            raise ValueError(
                f"R={self.R} outside admissible bounds [{self.r_floor}, {self.r_ceil}]"
            )

    def clamp(self, R: float) -> float:
        return min(max(R, self.r_floor), self.r_ceil)


# Values of the Pt/TiOx/Pt fits for the two operating ranges.
BUILTIN_PARAMS: dict[str, ModelParams] = {
    "exp-4k5-6k": ModelParams(
        window_kind=WindowKind.EXPONENTIAL,
        a_p=0.24, a_n=0.24, b_p=2.81, b_n=2.81,
        A_p=0.12, A_n=-79.03, t_p=0.59, t_n=1.12,
        k_p=8.10e-3, k_n=9.43e-3,
        r_p0=3085.0, r_p1=1862.0, r_p2=0.0,
        r_n0=5193.0, r_n1=378.0, r_n2=0.0,
    ),
    "exp-10k17k": ModelParams(
        window_kind=WindowKind.EXPONENTIAL,
        a_p=0.24, a_n=0.24, b_p=2.81, b_n=2.81,
        A_p=743.47, A_n=-6.8e4, t_p=6.51, t_n=0.31,
        k_p=5.11e-4, k_n=1.17e-3,
        r_p0=16.71e3, r_p1=0.0, r_p2=0.0,
        r_n0=29.30e3, r_n1=23.69e3, r_n2=0.0,
    ),
}

BUILTIN_BOUNDS: dict[str, tuple[float, float]] = {
    "exp-4k5-6k": (4.5e3, 6.0e3),
    "exp-10k17k": (10e3, 17e3),
}


def builtin(name: str) -> ModelParams:
    try:
        return BUILTIN_PARAMS[name]
    except KeyError:
        raise KeyError(f"unknown built-in parameter set {name!r}; "
                       f"choose from {sorted(BUILTIN_PARAMS)}") from None


def _exp(x: float) -> float:
    return math.exp(min(x, EXP_CLAMP))


def _sinh(x: float) -> float:
    return math.sinh(min(max(x, -EXP_CLAMP), EXP_CLAMP))


def current(p: ModelParams, R: float, v: float) -> float:
    """Device current for resistive state ``R`` at bias ``v``."""
    if not R > 0:
        raise ValueError(f"resistive state must be positive, got {R}")
    ve = p.eta * v
    if ve >= 0:
        i = p.a_p / R * _sinh(p.b_p * ve)
    else:
        i = p.a_n / R * _sinh(p.b_n * ve)
    return p.eta * i


def current_array(p: ModelParams, R, v) -> np.ndarray:
    """Vectorized :func:`current` over arrays of states and biases."""
    R = np.asarray(R, dtype=float)
    ve = p.eta * np.asarray(v, dtype=float)
    pos = ve >= 0
    a = np.where(pos, p.a_p, p.a_n)
    b = np.where(pos, p.b_p, p.b_n)
    return p.eta * (a / R * np.sinh(np.clip(b * ve, -EXP_CLAMP, EXP_CLAMP)))


def current_slope_array(p: ModelParams, R, v) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    ve = p.eta * np.asarray(v, dtype=float)
    pos = ve >= 0
    a = np.where(pos, p.a_p, p.a_n)
    b = np.where(pos, p.b_p, p.b_n)
    return a * b / R * np.cosh(np.clip(b * ve, -EXP_CLAMP, EXP_CLAMP))


def current_slope(p: ModelParams, R: float, v: float) -> float:
    """d(current)/dv, used by the nodal solvers."""
    ve = p.eta * v
    a, b = (p.a_p, p.b_p) if ve >= 0 else (p.a_n, p.b_n)
    return a * b / R * math.cosh(min(max(b * ve, -EXP_CLAMP), EXP_CLAMP))


def device_current(params: ModelParams | None, R: float, v: float) -> float:
    """Current of a memristive branch; ``params=None`` means an ohmic resistor of value R."""
    if params is None:
        return v / R
    return current(params, R, v)


def device_slope(params: ModelParams | None, R: float, v: float) -> float:
    if params is None:
        return 1.0 / R
    return current_slope(params, R, v)


def read_resistance(params: ModelParams | None, v: float, i: float) -> float:
    """Invert the IV law: the resistive state that passes ``i`` at bias ``v``.

    For an ohmic element this is plain ``v / i``. For the sinh law it is
    ``a sinh(b v) / i``, so a read at the model's own IV returns R itself.
    """
    return device_current(params, 1.0, v) / i


def sensitivity(p: ModelParams, v: float) -> float:
    ve = p.eta * v
    if ve > 0:
        return p.A_p * math.expm1(min(p.t_p * ve, EXP_CLAMP))
    if ve < 0:
        return p.A_n * math.expm1(min(p.t_n * -ve, EXP_CLAMP))
    return 0.0


def boundary(p: ModelParams, v: float) -> float:
    """State boundary r_p(v) for positive bias, r_n(v) otherwise."""
    ve = p.eta * v
    if ve > 0:
        return p.r_p0 + p.r_p1 * ve + p.r_p2 * ve * ve
    return p.r_n0 + p.r_n1 * ve + p.r_n2 * ve * ve


def window(p: ModelParams, R: float, v: float) -> float:
    if not R > 0:
        raise ValueError(f"resistive state must be positive, got {R}")
    ve = p.eta * v
    if ve == 0:
        return 0.0
    r = boundary(p, v)
    if ve > 0:
        if R >= r:
            return 0.0
        gap = r - R
        if p.window_kind is WindowKind.QUADRATIC:
            return gap * gap
        return math.expm1(min(p.k_p * gap, EXP_CLAMP))
    if R <= r:
        return 0.0
    gap = R - r
    if p.window_kind is WindowKind.QUADRATIC:
        return gap * gap
    return math.expm1(min(p.k_n * gap, EXP_CLAMP))


def rate(p: ModelParams, R: float, v: float) -> float:
    """dR/dt = s(v) f(R, v), without the read guard."""
    return sensitivity(p, v) * window(p, R, v)


def _held(p: ModelParams, R0: float, v: float) -> bool:
    ve = p.eta * v
    if ve == 0 or abs(v) <= p.v_guard:
        return True
    r = boundary(p, v)
    return R0 >= r if ve > 0 else R0 <= r


def _check_step_args(R0: float, t: float) -> None:
    if t < 0:
        raise ValueError(f"duration must be >= 0, got {t}")
    if not R0 > 0:
        raise ValueError(f"resistive state must be positive, got {R0}")


def analytical_step(p: ModelParams, R0: float, Vb: float, t: float) -> float:
    """Closed-form state after holding bias ``Vb`` for ``t`` seconds.

    The state moves monotonically toward the active boundary and never crosses
    it. Bias magnitudes at or below ``p.v_guard`` leave the state untouched.
    """
    _check_step_args(R0, t)
    if t == 0 or _held(p, R0, Vb):
        return R0
    s = sensitivity(p, Vb)
    r = boundary(p, Vb)
    if s == 0:
        return R0
    if p.eta * Vb > 0:
        u0 = r - R0
        if p.window_kind is WindowKind.QUADRATIC:
            x = s * u0 * t
            R = R0 + u0 * (x / (1.0 + x))
        else:
            k = p.k_p
            frac = -math.expm1(-k * u0)
            u = -math.log1p(-frac * math.exp(-min(k * s * t, EXP_CLAMP))) / k
            R = r - u
        return min(R, r)
    w0 = R0 - r
    if p.window_kind is WindowKind.QUADRATIC:
        x = -s * w0 * t
        R = R0 - w0 * (x / (1.0 + x))
    else:
        # ODE dw/dt = s (e^{k w} - 1) with s < 0, integrated directly.
        k = p.k_n
        frac = -math.expm1(-k * w0)
        w = -math.log1p(-frac * math.exp(max(k * s * t, -EXP_CLAMP))) / k
        R = r + w
    return max(R, r)


def numeric_step(p: ModelParams | Sequence[ModelParams], R0, Vb, t, n_substeps: int = 10_000, smooth: bool = False):
    """Fixed-step RK4 integration of dR/dt = s(v) f(R, v).

    Shares only the right-hand side with :func:`analytical_step`, so it serves
    as an independent check of the closed forms. Accepts scalars or
    equal-shape arrays for ``R0``, ``Vb`` and ``t``; array input returns an
    array. ``p`` may also be a sequence with one parameter set per element.
    ``smooth=True`` replaces the piecewise branches by sigmoid gates.
    """
    if n_substeps < 1:
        raise ValueError("n_substeps must be >= 1")
    if isinstance(p, ModelParams) and np.ndim(R0) == 0 and np.ndim(Vb) == 0 and np.ndim(t) == 0:
        return _numeric_step_scalar(p, float(R0), float(Vb), float(t), n_substeps, smooth)
    return _numeric_step_array(p, R0, Vb, t, n_substeps, smooth)


def _smooth_rate(p: ModelParams, R: float, v: float) -> float:
    ve = p.eta * v
    rp = p.r_p0 + p.r_p1 * ve + p.r_p2 * ve * ve
    rn = p.r_n0 + p.r_n1 * ve + p.r_n2 * ve * ve
    sp = p.A_p * math.expm1(min(p.t_p * abs(ve), EXP_CLAMP))
    sn = p.A_n * math.expm1(min(p.t_n * abs(ve), EXP_CLAMP))
    gp = smooth_theta(ve, SENSITIVITY_SMOOTH_B)
    gn = smooth_theta(-ve, SENSITIVITY_SMOOTH_B)
    if p.window_kind is WindowKind.QUADRATIC:
        fp = (rp - R) ** 2
        fn = (R - rn) ** 2
    else:
        fp = math.expm1(min(p.k_p * (rp - R), EXP_CLAMP))
        fn = math.expm1(min(p.k_n * (R - rn), EXP_CLAMP))
    fp *= smooth_theta(rp - R, WINDOW_SMOOTH_B)
    fn *= smooth_theta(R - rn, WINDOW_SMOOTH_B)
    return gp * sp * fp + gn * sn * fn


def _numeric_step_scalar(p, R0, Vb, t, n, smooth):
    _check_step_args(R0, t)
    if t == 0 or _held(p, R0, Vb):
        return R0
    r = boundary(p, Vb)
    up = p.eta * Vb > 0
    f = _smooth_rate if smooth else rate
    h = t / n
    R = R0
    for _ in range(n):
        k1 = f(p, R, Vb)
        k2 = f(p, R + 0.5 * h * k1, Vb)
        k3 = f(p, R + 0.5 * h * k2, Vb)
        k4 = f(p, R + h * k3, Vb)
        R = R + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        R = min(R, r) if up else max(R, r)
    return R


def _field(params, name: str, shape) -> np.ndarray:
    if isinstance(params, ModelParams):
        return np.full(shape, float(getattr(params, name)))
    return np.array([float(getattr(q, name)) for q in params]).reshape(shape)


def _numeric_step_array(p, R0, Vb, t, n, smooth):
    """RK4 over arrays; ``p`` is one parameter set or one per element (same window kind)."""
    R0, Vb, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (R0, Vb, t)))
    shape = R0.shape
    plist = [p] * R0.size if isinstance(p, ModelParams) else list(p)
    if len(plist) != R0.size:
        raise ValueError(f"expected {R0.size} parameter sets, got {len(plist)}")
    if smooth:
        out = [_numeric_step_scalar(q, a, b, c, n, True)
               for q, a, b, c in zip(plist, R0.ravel().tolist(), Vb.ravel().tolist(), t.ravel().tolist())]
        return np.array(out).reshape(shape)
    kinds = {q.window_kind for q in plist}
    if len(kinds) > 1:
        raise ValueError("array integration needs a single window kind")
    if np.any(t < 0):
        raise ValueError("duration must be >= 0")
    if np.any(R0 <= 0):
        raise ValueError("resistive state must be positive")
    held = np.array([_held(q, a, b) for q, a, b in zip(plist, R0.ravel(), Vb.ravel())], dtype=bool).reshape(shape)
    held |= t == 0
    # bias-dependent factors are constant over the step
    s = np.array([sensitivity(q, b) for q, b in zip(plist, Vb.ravel())]).reshape(shape)
    r = np.array([boundary(q, b) for q, b in zip(plist, Vb.ravel())]).reshape(shape)
    up = (_field(plist, "eta", shape) * Vb) > 0
    sign = np.where(up, 1.0, -1.0)
    quadratic = kinds == {WindowKind.QUADRATIC}
    k = np.where(up, _field(plist, "k_p", shape), _field(plist, "k_n", shape))
    s = np.where(held, 0.0, s)

    def f(R):
        gap = sign * (r - R)
        w = gap * gap if quadratic else np.expm1(np.minimum(k * gap, EXP_CLAMP))
        return np.where(gap > 0, s * w, 0.0)

    h = t / n
    R = R0.copy()
    for _ in range(n):
        k1 = f(R)
        k2 = f(R + 0.5 * h * k1)
        k3 = f(R + 0.5 * h * k2)
        k4 = f(R + h * k3)
        R = R + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        R = np.where(up, np.minimum(R, r), np.maximum(R, r))
    return np.where(held, R0, R)


def smooth_theta(x: float, b: float) -> float:
    """Logistic step (1 + exp(-x/b))^-1.

    Evaluated on |x| and reflected, so that theta(x) + theta(-x) == 1 holds
    exactly in floating point.
    """
    if not b > 0:
        raise ValueError(f"sigmoid width must be > 0, got {b}")
    z = abs(x) / b
    upper = 1.0 / (1.0 + math.exp(-min(z, EXP_CLAMP)))
    return upper if x >= 0 else 1.0 - upper

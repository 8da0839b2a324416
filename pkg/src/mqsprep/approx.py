"""Cosine-series and bivariate Fourier approximants for phase synthesis."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import erfc, erfcinv

from .simcore import RegisterLayout

PARITIES = ("even", "odd", "mixed")
RECT_DEGREE_CAP = 2000


class ApproximationError(ValueError):
    pass


def _finite(values, what="function"):
    v = np.asarray(values)
    if not np.all(np.isfinite(v)):
        raise ApproximationError(f"{what} produced non-finite values")
    return v


@dataclass
class ChebSeries1D:
    """g(x) = sum_j a_j cos(j x); ``parity`` constrains the support of j."""

    coefficients: np.ndarray
    parity: str = "mixed"
    fit_report: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.coefficients))
        a = a.astype(complex if np.iscomplexobj(a) else float)
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")
        if self.parity != "mixed":
            drop = 1 if self.parity == "even" else 0
            a = a.copy()
            a[drop::2] = 0.0
        self.coefficients = a

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coefficients)[0]
        return int(nz[-1]) if len(nz) else 0

    def __call__(self, x):
        return C.chebval(np.cos(np.asarray(x, dtype=float)), self.coefficients)

    def sup_on_circle(self, points: int = 4096) -> float:
        return float(np.max(np.abs(self(np.linspace(0.0, np.pi, points)))))

    def to_dict(self) -> dict:
        a = np.asarray(self.coefficients, dtype=complex)
        return {
            "kind": "cheb1d",
            "degrees": [self.degree],
            "coefficients": [[float(z.real), float(z.imag)] for z in a],
            "parity": self.parity,
            "fit_report": _jsonable(self.fit_report),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChebSeries1D":
        a = np.array([complex(re, im) for re, im in d["coefficients"]])
        if np.all(a.imag == 0):
            a = a.real
        return cls(a, d.get("parity", "mixed"), dict(d.get("fit_report", {})))


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def cheb_fit(f: Callable, degree: int, parity: str = "mixed", report_points: int = 10000) -> ChebSeries1D:
    """Interpolate ``f`` by a cosine series at Chebyshev nodes in y = cos(x).

    ``mixed`` samples f on [0, pi]. ``even``/``odd`` sample f on [0, pi/2] and
    reflect it about pi/2 (symmetrically / antisymmetrically), which puts the
    interpolant in the even / odd cosine subspace. The sup error is reported on
    a dense grid over [0, 1].
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}")

    def g(y):
        x = np.arccos(np.clip(y, -1.0, 1.0))
        if parity == "mixed":
            return _finite(f(x))
        upper = x > np.pi / 2
        xr = np.where(upper, np.pi - x, x)
        v = _finite(f(xr)).astype(float) * np.ones_like(xr)
        return np.where(upper, -v, v) if parity == "odd" else v

    a = C.chebinterpolate(g, degree) if degree > 0 else np.array([float(g(np.array([0.0]))[0])])
    series = ChebSeries1D(a, parity)
    xs = np.linspace(0.0, 1.0, max(report_points, 10 * (degree + 1)))
    err = float(np.max(np.abs(series(xs) - _finite(f(xs)))))
    series.fit_report = {"method": "chebyshev-interpolation", "degree": degree,
                         "sup_error": err, "report_points": len(xs)}
    return series


def parity_split(series: ChebSeries1D) -> tuple[ChebSeries1D, ChebSeries1D]:
    a = series.coefficients
    even = np.zeros_like(a)
    odd = np.zeros_like(a)
    even[0::2] = a[0::2]
    odd[1::2] = a[1::2]
    return ChebSeries1D(even, "even"), ChebSeries1D(odd, "odd")


def smooth_step_profile(l: float, gap: float, eps: float) -> Callable:
    """erf step of height 1 - eps/2, within eps/4 of its plateaus outside [l -+ gap/2]."""
    height = 1.0 - eps / 2
    width = gap / (2.0 * erfcinv(eps / 2.0))
    return lambda x: 0.5 * height * erfc((np.asarray(x, dtype=float) - l) / width)


def check_rect_contract(series: ChebSeries1D, l: float, gap: float, eps: float,
                        points: int = 10000) -> dict:
    xs = np.linspace(0.0, 1.0, points)
    v = series(xs)
    low = xs <= l - gap / 2
    high = xs >= l + gap / 2
    dev_low = float(np.max(np.abs(v[low] - 1.0))) if low.any() else 0.0
    dev_high = float(np.max(np.abs(v[high]))) if high.any() else 0.0
    range_dev = float(max(0.0, np.max(v - (1 + eps)), np.max(-eps - v)))
    circle = series.sup_on_circle()
    ok = dev_low <= eps and dev_high <= eps and range_dev == 0.0 and circle < 1.0
    return {"dev_low": dev_low, "dev_high": dev_high, "range_violation": range_dev,
            "sup_circle": circle, "pass": bool(ok)}


def _search_degree(fit: Callable[[int], ChebSeries1D], check: Callable[[ChebSeries1D], dict],
                   cap: int) -> tuple[ChebSeries1D, dict]:
    lo, d = 0, 2
    while True:
        s = fit(d)
        rep = check(s)
        if rep["pass"]:
            break
        if d >= cap:
            raise ApproximationError(f"band contract not met at degree cap {cap}")
        lo, d = d, min(2 * d, cap)
    best, best_rep = s, rep
    hi = d
    while hi - lo > 2:
        mid = (lo + hi) // 4 * 2
        if mid <= lo:
            break
        s = fit(mid)
        rep = check(s)
        if rep["pass"]:
            hi, best, best_rep = mid, s, rep
        else:
            lo = mid
    return best, best_rep


def rect_approx(l: float, gap: float, eps: float, cap: int = RECT_DEGREE_CAP) -> ChebSeries1D:
    """Even cosine series approximating 1[x <= l] outside the band (l - gap/2, l + gap/2)."""
    if not 0 < l < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if not 0 < gap < min(l, 1 - l):
        raise ValueError("gap must satisfy 0 < gap < min(l, 1 - l)")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    profile = smooth_step_profile(l, gap, eps)
    best, rep = _search_degree(lambda d: cheb_fit(profile, d, "even", report_points=2000),
                               lambda s: check_rect_contract(s, l, gap, eps), cap)
    best.fit_report = {"method": "erf-smoothed step, chebyshev interpolation",
                       "threshold": l, "gap": gap, "eps": eps,
                       "degree": best.degree, "contract": rep}
    return best


@dataclass
class FourierSeries2D:
    """P(x1, x2) = sum_{j,k} c_{jk} e^{i j x1} e^{i k x2}; array index [j + d1, k + d2]."""

    coefficients: np.ndarray
    real: bool = False
    parity: dict = field(default_factory=dict)
    fit_report: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 2 or c.shape[0] % 2 == 0 or c.shape[1] % 2 == 0:
            raise ValueError("coefficient lattice must have odd shape (2 d1 + 1, 2 d2 + 1)")
        self.coefficients = c
        if self.real and np.max(np.abs(c - np.conj(c[::-1, ::-1])), initial=0.0) > 1e-10:
            raise ValueError("declared real but c_{-j,-k} != conj(c_{jk})")
        for axis, name in enumerate(("x1", "x2")):
            p = self.parity.get(name)
            if p is None:
                continue
            if p not in ("even", "odd"):
                raise ValueError(f"parity for {name} must be even or odd")
            deg = self.degrees[axis]
            idx = np.arange(-deg, deg + 1)
            wrong = (idx % 2 == 1) if p == "even" else (idx % 2 == 0)
            sl = c[wrong, :] if axis == 0 else c[:, wrong]
            if sl.size and np.max(np.abs(sl)) > 1e-10:
                raise ValueError(f"declared {p} parity in {name} does not match support")

    @property
    def degrees(self) -> tuple[int, int]:
        return (self.coefficients.shape[0] - 1) // 2, (self.coefficients.shape[1] - 1) // 2

    def coeff(self, j: int, k: int) -> complex:
        d1, d2 = self.degrees
        if abs(j) > d1 or abs(k) > d2:
            return 0j
        return complex(self.coefficients[j + d1, k + d2])

    def __call__(self, x1, x2):
        d1, d2 = self.degrees
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        e1 = np.exp(1j * np.multiply.outer(x1, np.arange(-d1, d1 + 1)))
        e2 = np.exp(1j * np.multiply.outer(x2, np.arange(-d2, d2 + 1)))
        out = np.einsum("...j,jk,...k->...", e1, self.coefficients, e2)
        return out.real if self.real else out

    def padded(self, d1: int, d2: int) -> "FourierSeries2D":
        c1, c2 = self.degrees
        if d1 < c1 or d2 < c2:
            raise ValueError("cannot pad to smaller degrees")
        c = np.zeros((2 * d1 + 1, 2 * d2 + 1), dtype=complex)
        c[d1 - c1:d1 + c1 + 1, d2 - c2:d2 + c2 + 1] = self.coefficients
        return FourierSeries2D(c, self.real, dict(self.parity), dict(self.fit_report))

    def to_dict(self) -> dict:
        return {
            "kind": "fourier2d",
            "degrees": list(self.degrees),
            "coefficients": [[[float(z.real), float(z.imag)] for z in row] for row in self.coefficients],
            "parity": dict(self.parity) or "mixed",
            "fit_report": _jsonable(self.fit_report),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FourierSeries2D":
        c = np.array([[complex(re, im) for re, im in row] for row in d["coefficients"]])
        parity = d.get("parity")
        return cls(c, False, parity if isinstance(parity, dict) else {}, dict(d.get("fit_report", {})))


def fourier_fit_2d(f: Callable, degrees: tuple[int, int], grid: int = 64,
                   period: float = 2 * np.pi) -> FourierSeries2D:
    """Least-squares Fourier fit on a grid x = period * k / grid in each variable.

    With the default full period the basis is orthogonal on the grid, so the
    least-squares solution is a scaled 2-D DFT and basis elements are fixed points.
    """
    d1, d2 = degrees
    if d1 < 0 or d2 < 0:
        raise ValueError("degrees must be nonnegative")
    xs = period * np.arange(grid) / grid
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    F = _finite(np.broadcast_to(f(X1, X2), X1.shape)).astype(complex)
    if np.isclose(period, 2 * np.pi) and grid >= 2 * max(d1, d2) + 1:
        full = np.fft.fft2(F) / grid**2
        j = np.arange(-d1, d1 + 1) % grid
        k = np.arange(-d2, d2 + 1) % grid
        c = full[np.ix_(j, k)]
    else:
        e1 = np.exp(1j * np.outer(xs, np.arange(-d1, d1 + 1)))
        e2 = np.exp(1j * np.outer(xs, np.arange(-d2, d2 + 1)))
        A = np.kron(e1, e2)
        sol, *_ = np.linalg.lstsq(A, F.reshape(-1), rcond=None)
        c = sol.reshape(2 * d1 + 1, 2 * d2 + 1)
    is_real = bool(np.all(np.abs(F.imag) == 0))
    if is_real:
        c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    c[np.abs(c) < 1e-15] = 0.0
    series = FourierSeries2D(c, real=is_real)
    resid = float(np.max(np.abs(series(X1, X2) - (F.real if is_real else F))))
    series.fit_report = {"method": "least-squares", "grid": grid, "period": float(period),
                         "residual_sup": resid}
    return series


@dataclass
class GridFunction:
    variable_qubits: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        self.variable_qubits = tuple(self.variable_qubits)
        v = _finite(np.asarray(self.values), "grid function")
        shape = tuple(1 << n for n in self.variable_qubits)
        if v.size != int(np.prod(shape)):
            raise ValueError(f"grid function needs {int(np.prod(shape))} values, got {v.size}")
        self.values = v.reshape(shape)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def grid_points(n: int) -> np.ndarray:
    return np.arange(1 << n) / (1 << n)


def grid_eval(f: Callable, layout: RegisterLayout | Sequence[int]) -> GridFunction:
    """Evaluate ``f(x_1, ..., x_D)`` at x^(i) = i / N for every grid point."""
    nq = layout.variable_qubits if isinstance(layout, RegisterLayout) else tuple(layout)
    axes = np.meshgrid(*[grid_points(n) for n in nq], indexing="ij")
    vals = np.broadcast_to(f(*axes), axes[0].shape)
    return GridFunction(nq, np.array(vals))


def norm_and_max(g: GridFunction) -> tuple[float, float]:
    v = g.flat
    return float(np.sqrt(np.sum(np.abs(v) ** 2))), float(np.max(np.abs(v)))


def filling_ratio(g: GridFunction, scale: float | None = None) -> float:
    n_f, fmax = norm_and_max(g)
    c = fmax if scale is None else scale
    return n_f / (np.sqrt(g.flat.size) * c)

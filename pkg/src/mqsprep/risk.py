"""Risk aggregation on S = (X_1 + ... + X_D) / D: CDF estimates, VaR by bisection
over the grid levels of S, and TVaR from a shifted-ramp expectation."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, erfcinv

from . import approx, qmc
from .approx import ChebSeries1D
from .qmc import EstimationResult, Loader
from .simcore import StateVector, apply_to_array


class RiskError(ValueError):
    pass


@dataclass
class RiskQuery:
    alpha: float = 0.6
    epsilon: float = 0.02
    delta: float = 0.1
    gap: float = 0.1
    theta_error: float = 0.002
    D: int | None = None
    bisection_tol: float = 0.0
    shots: int = qmc.DEFAULT_SHOTS
    seed: int = 0
    tail_convention: str = "estimated"
    tail_floor: float = 1e-3
    C: float = qmc.DEFAULT_C

    def __post_init__(self):
        for name in ("alpha", "epsilon", "delta", "gap", "theta_error"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.tail_convention not in ("estimated", "alpha"):
            raise ValueError("tail_convention must be 'estimated' or 'alpha'")
        if self.bisection_tol < 0:
            raise ValueError("bisection_tol must be nonnegative")


def sum_levels(variable_qubits) -> np.ndarray:
    """Distinct grid values of S in increasing order."""
    g = approx.grid_eval(lambda *xs: sum(xs) / len(xs), tuple(variable_qubits))
    return np.unique(np.round(g.flat, 12))


def _distribution(loader: Loader) -> tuple[np.ndarray, np.ndarray]:
    """Exact (S value, probability) per grid point from the loader state (desk-scale diagnostic)."""
    lay = loader.layout
    amps = apply_to_array(loader.circuit, StateVector.zero(lay).amplitudes)
    nv = sum(lay.variable_qubits)
    probs = np.abs(amps.reshape(-1, 1 << nv)[0]) ** 2
    s = approx.grid_eval(lambda *xs: sum(xs) / len(xs), lay.variable_qubits).flat
    return s, probs


def _band_mass(loader: Loader, center: float, gap: float) -> float:
    s, p = _distribution(loader)
    return float(np.sum(p[np.abs(s - center) < gap / 2]))


def _midgap(levels: np.ndarray, l: float) -> tuple[float, float]:
    """Threshold halfway between the last level <= l and the next level (or 1)."""
    below = levels[levels <= l + 1e-12]
    lev = float(below[-1]) if below.size else float(l)
    above = levels[levels > lev + 1e-12]
    nxt = float(above[0]) if above.size else 1.0
    return lev, 0.5 * (lev + nxt)


@lru_cache(maxsize=64)
def _rect(threshold: float, gap: float, eps: float) -> ChebSeries1D:
    return qmc.sqrt_rect_series(threshold, gap, eps)


class CdfEstimator:
    """Caches W_theta circuits and exact outcome probabilities per threshold; shots vary with the seed."""

    def __init__(self, loader: Loader, query: RiskQuery, snap: bool = True):
        self.loader = loader
        self.query = query
        self.snap = snap
        self.levels = sum_levels(loader.layout.variable_qubits)
        self._cache: dict = {}

    def _problem(self, threshold: float, eps: float, theta_eps: float):
        key = (round(threshold, 12), eps, theta_eps)
        if key not in self._cache:
            q = self.query
            series = _rect(round(threshold, 12), q.gap, theta_eps)
            w = qmc.w_theta_for_sum(series, self.loader.layout.variable_qubits)
            prob = qmc.make_problem(self.loader, w, eps, q.delta)
            sched = qmc.plan_schedule(eps, q.delta, q.shots)
            self._cache[key] = (prob, sched, qmc.good_probabilities(prob, sched), series.degree)
        return self._cache[key]

    def threshold(self, l: float) -> tuple[float, float]:
        if self.snap:
            return _midgap(self.levels, l)
        return float(l), float(l)

    def estimate(self, l: float, seed: int | None = None, epsilon: float | None = None,
                 theta_error: float | None = None) -> EstimationResult:
        q = self.query
        eps = q.epsilon if epsilon is None else epsilon
        teps = q.theta_error if theta_error is None else theta_error
        level, t = self.threshold(l)
        if not q.gap / 2 < t < 1 - q.gap / 2:
            raise RiskError(f"threshold {t} too close to the domain edge for gap {q.gap}")
        prob, sched, probs, degree = self._problem(t, eps, teps)
        res = qmc.amplitude_estimate(prob, seed=q.seed if seed is None else seed, shots=q.shots,
                                     schedule=sched, C=q.C, probabilities=probs)
        band = _band_mass(self.loader, t, q.gap)
        res.error_components = {"estimation": eps, "theta_approx": teps, "band_mass": band,
                                "threshold": t, "level": level, "theta_degree": degree}
        return res


def estimate_cdf(loader: Loader, l: float, query: RiskQuery, seed: int | None = None,
                 snap: bool = True) -> EstimationResult:
    """Estimate Pr(S <= l); with ``snap`` the step sits halfway to the next grid level of S."""
    return CdfEstimator(loader, query, snap).estimate(l, seed)


def value_at_risk(loader: Loader, query: RiskQuery, estimator: CdfEstimator | None = None) -> tuple[float, list]:
    """Smallest grid level l with estimated Pr(S <= l) >= alpha, by bisection over levels."""
    est = estimator or CdfEstimator(loader, query)
    levels = est.levels
    slack = 2 * (query.epsilon + query.theta_error)
    known = {len(levels) - 1: 1.0}
    audit = []
    lo, hi = 0, len(levels) - 1
    probe = 0
    while lo < hi:
        mid = (lo + hi) // 2
        res = est.estimate(float(levels[mid]), seed=query.seed + probe)
        probe += 1
        raw = res.estimate
        lower = max([v for j, v in known.items() if j < mid], default=0.0)
        upper = min([v for j, v in known.items() if j > mid], default=1.0)
        if raw < lower - slack or raw > upper + slack:
            raise RiskError(f"CDF estimate {raw:.4f} at level {levels[mid]} breaks monotonicity beyond slack")
        val = float(np.clip(raw, lower, upper))
        known[mid] = val
        audit.append({"level": float(levels[mid]), "threshold": res.error_components["threshold"],
                      "estimate": raw, "clamped": val, "band_mass": res.error_components["band_mass"],
                      "queries": res.queries["A_p"]})
        if val >= query.alpha:
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo]), audit


# ------------------------------------------------------------ TVaR

def _erf_up(center: float, width: float):
    return lambda s: 0.5 * erfc(-(np.asarray(s, dtype=float) - center) / width)


@dataclass
class RampApproximation:
    series: ChebSeries1D
    kappa: float
    level: float
    threshold: float
    report: dict = field(default_factory=dict)

    def theta(self, s):
        s = np.asarray(s, dtype=float)
        return self.kappa * np.where(s > self.threshold, s - self.level, 0.0)


def _ramp_profile(level, threshold, width, kappa, tau):
    up = _erf_up(threshold, width)
    lo_edge, hi_edge = 1.0, np.pi / 2
    down_w = (hi_edge - lo_edge) / 2 / erfcinv(1e-6)
    down_c = 0.5 * (lo_edge + hi_edge)

    def amp(s):
        s = np.asarray(s, dtype=float)
        u = (s - level) / tau
        soft = tau * np.logaddexp(0.0, u)
        down = 0.5 * erfc((s - down_c) / down_w)
        return up(s) * down * np.sqrt(kappa * soft)
    return amp


def _ramp_check(series: ChebSeries1D, theta, threshold, gap, eps, points=10000):
    xs = np.linspace(0.0, 1.0, points)
    keep = np.abs(xs - threshold) >= gap / 2
    dev = float(np.max(np.abs(series(xs[keep]) ** 2 - theta(xs[keep]))))
    circle = series.sup_on_circle()
    return {"sup_deviation": dev, "sup_circle": circle, "pass": bool(dev <= eps and circle < 1.0)}


def default_kappa(level: float) -> float:
    """Scale keeping kappa * (s - level) below 0.95 up to the end of the cosine domain."""
    return 0.95 / (np.pi / 2 - level + 0.05)


def ramp_approx(level: float, threshold: float, gap: float, eps: float, cap: int = approx.RECT_DEGREE_CAP,
                kappa: float | None = None) -> RampApproximation:
    """Even amplitude series r with |r^2 - kappa (s - level) 1[s > threshold]| <= eps outside the band."""
    if not level < threshold < 1:
        raise ValueError("threshold must lie between the level and 1")
    if kappa is None:
        kappa = default_kappa(level)
    tau = min(0.01, (threshold - gap / 2 - level) / 8) if threshold - gap / 2 > level else 0.005
    tau = max(tau, 1e-4)

    def theta(s):
        s = np.asarray(s, dtype=float)
        return kappa * np.where(s > threshold, s - level, 0.0)

    # widest erf edge whose exact profile already meets half the budget
    xs = np.linspace(0.0, 1.0, 10000)
    keep = np.abs(xs - threshold) >= gap / 2
    lo_w, hi_w = 1e-5, gap
    for _ in range(60):
        w = 0.5 * (lo_w + hi_w)
        prof = _ramp_profile(level, threshold, w, kappa, tau)
        if np.max(np.abs(prof(xs[keep]) ** 2 - theta(xs[keep]))) <= eps / 2:
            lo_w = w
        else:
            hi_w = w
    width = lo_w
    prof = _ramp_profile(level, threshold, width, kappa, tau)
    series, rep = approx._search_degree(lambda d: approx.cheb_fit(prof, d, "even", report_points=2000),
                                        lambda s: _ramp_check(s, theta, threshold, gap, eps), cap)
    series.fit_report = {"method": "erf-gated square-root ramp, chebyshev interpolation",
                         "degree": series.degree, "kappa": kappa, "edge_width": width, "contract": rep}
    return RampApproximation(series, float(kappa), float(level), float(threshold),
                             {"degree": series.degree, "contract": rep, "edge_width": width})


def step_degree(threshold: float, gap: float, eps: float) -> int:
    return _rect(round(threshold, 12), gap, eps).degree


def tail_value_at_risk(loader: Loader, l_alpha: float, query: RiskQuery,
                       estimator: CdfEstimator | None = None, cdf_hint: float | None = None) -> tuple[float, dict]:
    """TVaR = D (E[(S - l)^+] / Pr(S > l) + l) with l = l_alpha.

    The target error on TVaR is epsilon + theta_error (+ band mass); internal
    estimation and approximation precisions are tightened so the propagated
    error stays within that budget.
    """
    est = estimator or CdfEstimator(loader, query)
    D = query.D or loader.layout.num_variables
    levels = est.levels
    level, thr = _midgap(levels, l_alpha)
    if level >= levels[-1] - 1e-12:
        raise RiskError("empty tail: l_alpha is the largest level of S")
    span = 1.0 - level
    if cdf_hint is None:
        cdf_hint = est.estimate(level, seed=query.seed + 1000).estimate
    t_lb = 1.0 - cdf_hint - query.epsilon - query.theta_error
    if query.tail_convention == "alpha":
        t_lb = 1.0 - query.alpha
    if t_lb < query.tail_floor:
        raise RiskError(f"tail mass lower bound {t_lb:.4f} below floor {query.tail_floor}")
    g = t_lb / (2.0 * D)

    if query.tail_convention == "estimated":
        tail_res = est.estimate(level, seed=query.seed + 2000, epsilon=g * query.epsilon / span,
                                theta_error=g * query.theta_error / span)
        tail = 1.0 - tail_res.estimate
        tail_band = tail_res.error_components["band_mass"]
        tail_q = tail_res.queries["A_p"]
    else:
        tail, tail_band, tail_q = 1.0 - query.alpha, 0.0, 0
    if tail <= 0:
        raise RiskError("estimated tail mass is not positive")

    kappa = default_kappa(level)
    ramp = ramp_approx(level, thr, query.gap, kappa * g * query.theta_error, kappa=kappa)
    w = qmc.w_theta_for_sum(ramp.series, loader.layout.variable_qubits)
    eps_e = kappa * g * query.epsilon
    prob = qmc.make_problem(loader, w, eps_e, query.delta)
    res = qmc.amplitude_estimate(prob, seed=query.seed + 3000, shots=query.shots, C=query.C)
    mu = res.estimate / kappa
    tvar = D * (mu / tail + level)
    band = _band_mass(loader, thr, query.gap) + tail_band
    s_vals, p_vals = _distribution(loader)
    boundary = float(np.sum(p_vals[np.abs(s_vals - level) < 1e-12]))
    ramp_q = ramp_approx(level, thr, query.gap, query.theta_error, kappa=kappa)
    comps = {
        "level": level,
        "threshold": thr,
        "ramp_expectation": mu,
        "tail_mass": tail,
        "tail_convention": query.tail_convention,
        "boundary_mass": boundary,
        "kappa": kappa,
        "budget": query.epsilon + query.theta_error + band,
        "error_components": {"estimation": query.epsilon, "theta_approx": query.theta_error,
                             "band_mass": band, "grid": 0.0},
        "internal": {"ramp_estimation_eps": eps_e, "ramp_theta_eps": kappa * g * query.theta_error,
                     "tail_lower_bound": t_lb, "ramp_degree": ramp.series.degree},
        "ramp_degree": ramp_q.series.degree,
        "step_degree": step_degree(thr, query.gap, query.theta_error),
        "queries": {"tail": tail_q, "ramp": res.queries["A_p"]},
    }
    return float(tvar), comps


def risk_report(loader: Loader, query: RiskQuery) -> dict:
    est = CdfEstimator(loader, query)
    var, audit = value_at_risk(loader, query, est)
    D = query.D or loader.layout.num_variables
    out = {"alpha": query.alpha, "var": var, "var_scaled": D * var, "audit": audit}
    try:
        hint = next((a["clamped"] for a in audit if abs(a["level"] - var) < 1e-12), None)
        tvar, comps = tail_value_at_risk(loader, var, query, est, cdf_hint=hint)
        out.update(tvar=tvar, error_components=comps["error_components"], tvar_components=comps)
    except RiskError as exc:
        out.update(tvar=None, error_components={"estimation": query.epsilon, "theta_approx": query.theta_error,
                                                "band_mass": 0.0, "grid": 0.0}, tvar_error=str(exc))
    return out

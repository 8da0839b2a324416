"""Single-variable QSP in the e^{ixX} signal convention.

U_Phi(x) = e^{i phi_0 Z} prod_{k=1}^d W(x) e^{i phi_k Z},  W(x) = [[cos x, i sin x], [i sin x, cos x]].

The top-left entry P is an even cosine series and the top-right entry Q an
odd sine series, both of degree d with frequency parity d mod 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import mpmath as mp
from scipy.optimize import least_squares

from . import kernels
from .approx import ChebSeries1D


class SynthesisError(RuntimeError):
    """Phase synthesis failed; ``layer`` names the stripping layer when relevant."""

    def __init__(self, msg: str, layer: int | None = None, condition: str | None = None):
        super().__init__(msg)
        self.layer = layer
        self.condition = condition


def canonical_angle(phi):
    """Map angles to (-pi, pi]."""
    out = -np.remainder(-np.asarray(phi, dtype=float) + np.pi, 2 * np.pi) + np.pi
    return out


@dataclass
class PhaseSequence:
    phases: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if p.ndim != 1 or p.size == 0:
            raise ValueError("need at least one phase")
        if not np.all(np.isfinite(p)):
            raise ValueError("phases must be finite")
        self.phases = canonical_angle(p)

    @property
    def degree(self) -> int:
        return len(self.phases) - 1

    def negated(self) -> "PhaseSequence":
        return PhaseSequence(-self.phases)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "phases": [float(v) for v in self.phases]}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseSequence":
        seq = cls(np.array(d["phases"], dtype=float))
        if "degree" in d and int(d["degree"]) != seq.degree:
            raise ValueError("degree does not match the number of phases")
        return seq


def _as_phases(phi) -> np.ndarray:
    return phi.phases if isinstance(phi, PhaseSequence) else np.asarray(phi, dtype=float)


def qsp_matrices(phi, xs) -> np.ndarray:
    """U_Phi at each x in ``xs``; shape (len(xs), 2, 2)."""
    phases = np.ascontiguousarray(_as_phases(phi), dtype=float)
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(xs, dtype=float)).reshape(-1, 1))
    word = np.zeros(len(phases) - 1, dtype=np.int64)
    return kernels.qsp_products(phases, word, xs)


def evaluate_qsp(phi, x: float) -> np.ndarray:
    return qsp_matrices(phi, [x])[0]


def products_with_grad(phases, word, X):
    """Interleaved products and their phase derivatives.

    ``X`` has shape (npts, nvars); ``word[k]`` selects the signal variable of
    layer k+1. Returns U (npts, 2, 2) and dU (d+1, npts, 2, 2).
    """
    phases = np.asarray(phases, dtype=float)
    X = np.asarray(X, dtype=float)
    npts, d = X.shape[0], len(word)
    c, s = np.cos(X), 1j * np.sin(X)
    e = np.exp(1j * phases)

    def rmul_w(M, k):
        v = word[k]
        cc, ss = c[:, v, None], s[:, v, None]
        out = np.empty_like(M)
        out[:, :, 0] = M[:, :, 0] * cc + M[:, :, 1] * ss
        out[:, :, 1] = M[:, :, 0] * ss + M[:, :, 1] * cc
        return out

    def lmul_w(M, k):
        v = word[k]
        cc, ss = c[:, v, None], s[:, v, None]
        out = np.empty_like(M)
        out[:, 0, :] = cc * M[:, 0, :] + ss * M[:, 1, :]
        out[:, 1, :] = ss * M[:, 0, :] + cc * M[:, 1, :]
        return out

    def rmul_d(M, k):
        out = M.copy()
        out[:, :, 0] *= e[k]
        out[:, :, 1] *= np.conj(e[k])
        return out

    def lmul_d(M, k):
        out = M.copy()
        out[:, 0, :] *= e[k]
        out[:, 1, :] *= np.conj(e[k])
        return out

    eye = np.broadcast_to(np.eye(2, dtype=complex), (npts, 2, 2)).copy()
    prefix = np.empty((d + 1, npts, 2, 2), dtype=complex)
    prefix[0] = eye
    for k in range(1, d + 1):
        prefix[k] = rmul_w(rmul_d(prefix[k - 1], k - 1), k - 1)
    suffix = np.empty((d + 1, npts, 2, 2), dtype=complex)
    suffix[d] = eye
    for k in range(d - 1, -1, -1):
        suffix[k] = lmul_w(lmul_d(suffix[k + 1], k + 1), k)
    U = rmul_d(prefix[d], d)
    dU = np.empty((d + 1, npts, 2, 2), dtype=complex)
    for k in range(d + 1):
        mid = lmul_d(suffix[k], k)
        mid[:, 1, :] *= -1
        dU[k] = 1j * (prefix[k] @ mid)
    return U, dU


# ---------------------------------------------------------------- coefficients

def _trig_design(xs, d):
    j = np.arange(d + 1)
    return np.cos(np.outer(xs, j)), np.sin(np.outer(xs, j[1:]))


def extract_pq_coefficients(phi, samples: int | None = None) -> tuple[np.ndarray, np.ndarray, dict]:
    """Cosine coefficients a_j of P and sine coefficients of Q (index 0 is zero).

    Samples at ``samples >= 2d + 1`` equispaced points and solves the
    trigonometric least-squares system.
    """
    phases = _as_phases(phi)
    d = len(phases) - 1
    if d > 64:
        raise ValueError("extraction supports d <= 64")
    m = max(samples or 0, 4 * d + 4)
    xs = 2 * np.pi * np.arange(m) / m
    U = qsp_matrices(phases, xs)
    Cm, Sm = _trig_design(xs, d)
    cond = float(np.linalg.cond(Cm)) if d >= 0 else 1.0
    a, *_ = np.linalg.lstsq(Cm, U[:, 0, 0], rcond=None)
    if d > 0:
        b, *_ = np.linalg.lstsq(Sm, U[:, 0, 1], rcond=None)
        cond = max(cond, float(np.linalg.cond(Sm)))
        qb = np.concatenate([[0j], b])
        resid_q = np.max(np.abs(Sm @ b - U[:, 0, 1]))
    else:
        qb = np.zeros(1, dtype=complex)
        resid_q = np.max(np.abs(U[:, 0, 1]))
    resid = float(max(np.max(np.abs(Cm @ a - U[:, 0, 0])), resid_q))
    if cond > 1e8:
        raise SynthesisError(f"ill-conditioned trigonometric solve (cond {cond:.3e})")
    if resid > 1e-9:
        raise SynthesisError(f"extraction residual {resid:.3e} above 1e-9")
    return a, qb, {"residual": resid, "condition": cond, "samples": m}


def eval_cos(a, xs):
    return np.cos(np.outer(np.atleast_1d(xs), np.arange(len(a)))) @ np.asarray(a)


def eval_sin(b, xs):
    return np.sin(np.outer(np.atleast_1d(xs), np.arange(len(b)))) @ np.asarray(b)


def _pad(a, n):
    a = np.asarray(a, dtype=complex)
    out = np.zeros(n, dtype=complex)
    out[: len(a)] = a
    return out


def check_qsp_conditions(p_coeffs, q_coeffs, degree: int | None = None, tol: float = 1e-8,
                         grid: int = 1001) -> dict:
    """Report on basis form / degree, pi-shift parity and normalization."""
    p = np.asarray(p_coeffs, dtype=complex)
    q = np.asarray(q_coeffs, dtype=complex)
    n = max(len(p), len(q))
    p, q = _pad(p, n), _pad(q, n)
    if degree is None:
        nz = np.nonzero((np.abs(p) > tol) | (np.abs(q) > tol))[0]
        degree = int(nz[-1]) if len(nz) else 0
    d = degree
    above = np.concatenate([np.abs(p[d + 1:]), np.abs(q[d + 1:]), [abs(q[0])]])
    dev_i = float(np.max(above, initial=0.0))
    xs = np.linspace(-np.pi, np.pi, grid)
    P, Q = eval_cos(p, xs), eval_sin(q, xs)
    Ps, Qs = eval_cos(p, xs + np.pi), eval_sin(q, xs + np.pi)
    sign = (-1) ** d
    dev_ii = float(max(np.max(np.abs(Ps - sign * P)), np.max(np.abs(Qs - sign * Q))))
    dev_iii = float(np.max(np.abs(np.abs(P) ** 2 + np.abs(Q) ** 2 - 1)))
    rep = {
        "degree": d,
        "i": {"pass": dev_i <= tol, "max_deviation": dev_i},
        "ii": {"pass": dev_ii <= tol, "max_deviation": dev_ii},
        "iii": {"pass": dev_iii <= tol, "max_deviation": dev_iii},
    }
    rep["pass"] = all(rep[k]["pass"] for k in ("i", "ii", "iii"))
    return rep


# ---------------------------------------------------------------- completion

@dataclass
class Completion:
    """Completed pair: ``P = p + i B`` (cosine series) and sine series ``Q``."""

    p: np.ndarray
    q: np.ndarray
    imag_part: np.ndarray
    report: dict = field(default_factory=dict)


def _fejer_riesz_even(t_cos: np.ndarray, d: int) -> np.ndarray:
    """Real h_0..h_d with |sum_m h_m w^m|^2 = t(w) for t(e^{2ix}) = sum_j t_j cos(2 j x)."""
    lau = np.zeros(2 * d + 1)
    lau[d] = t_cos[0]
    for j in range(1, d + 1):
        lau[d + j] = lau[d - j] = t_cos[j] / 2
    if d == 0:
        return np.array([np.sqrt(lau[0])])
    roots = np.roots(lau[::-1])
    roots = roots[np.argsort(np.abs(roots))][:d]
    h = np.real_if_close(np.poly(roots)[::-1], tol=1e6).real
    w = np.exp(1j * np.linspace(0, np.pi, 64))
    target = np.polynomial.polynomial.polyval(w, lau) / w**d
    scale = np.sqrt(np.mean(target.real) / np.mean(np.abs(np.polynomial.polynomial.polyval(w, h)) ** 2))
    return h * scale


def complete_partner(p_coeffs, eta: float = 1e-6, grid: int = 2001, tol: float = 1e-9) -> Completion:
    """Complete a real cosine series p (sup|p| <= 1 - eta) to a valid QSP pair.

    A real p cannot be the whole top-left entry when |p(0)| < 1 (the entry is
    unimodular at x = 0), so the completion also returns an imaginary part B:
    the pair (p + iB, Q) satisfies |p + iB|^2 + |Q|^2 = 1 with Q a sine series.
    """
    p = np.asarray(p_coeffs)
    if np.iscomplexobj(p):
        if np.max(np.abs(p.imag), initial=0.0) > 1e-12:
            raise ValueError("completion expects real coefficients")
        p = p.real
    p = p.astype(float)
    d = len(p) - 1
    xs = np.linspace(-np.pi, np.pi, grid)
    vals = eval_cos(p, xs).real
    k = int(np.argmax(np.abs(vals)))
    if abs(vals[k]) > 1 - eta:
        raise SynthesisError(f"|P| = {abs(vals[k]):.6g} exceeds 1 - eta at x = {xs[k]:.6g}", condition="sup")
    if d > 0 and (np.max(np.abs(p[(d + 1) % 2::2]), initial=0.0) > 1e-12):
        raise SynthesisError("P does not have parity d mod 2", condition="parity")
    # 1 - p^2 as a cosine series in 2x of degree d
    m = 4 * d + 8
    ts = np.pi * (np.arange(m) + 0.5) / m
    tv = 1 - eval_cos(p, ts).real ** 2
    basis = np.cos(np.outer(ts, 2 * np.arange(d + 1)))
    t_cos, *_ = np.linalg.lstsq(basis, tv, rcond=None)
    h = _fejer_riesz_even(t_cos, d)
    freqs = 2 * np.arange(d + 1) - d
    B = np.zeros(d + 1)
    Qs = np.zeros(d + 1)
    for hm, f in zip(h, freqs):
        B[abs(f)] += hm
        Qs[abs(f)] += np.sign(f) * hm
    Pfull = p + 1j * B
    resid = float(np.max(np.abs(np.abs(eval_cos(Pfull, xs)) ** 2 + np.abs(eval_sin(Qs, xs)) ** 2 - 1)))
    if resid > tol:
        raise SynthesisError(f"completion residual {resid:.3e} above {tol:g}", condition="completion")
    return Completion(Pfull, Qs.astype(complex), B, {"residual": resid, "degree": d})


# ---------------------------------------------------------------- phase finding

def _to_laurent(p_cos, q_sin, d):
    """Laurent coefficient lists (index j + d) of P and Q as mpmath numbers."""
    zero = mp.mpc(0)
    p = [mp.mpc(v) for v in p_cos] + [zero] * (d + 1 - len(p_cos))
    q = [mp.mpc(v) for v in q_sin] + [zero] * (d + 1 - len(q_sin))
    P = [zero] * (2 * d + 1)
    Q = [zero] * (2 * d + 1)
    P[d] = p[0]
    for j in range(1, d + 1):
        P[d + j] = P[d - j] = p[j] / 2
        Q[d + j] = q[j] / mp.mpc(0, 2)
        Q[d - j] = -Q[d + j]
    return P, Q


def _strip(p_cos, q_sin, d, dps: int | None = None):
    """Layer stripping in extended precision; returns float phases."""
    with mp.workdps(dps or 40 + 2 * d):
        P, Q = _to_laurent(p_cos, q_sin, d)
        tiny = mp.mpf(10) ** (-(mp.mp.dps - 10))
        phases = np.zeros(d + 1)
        k = d
        while k > 0:
            top_p, top_q = P[d + k], Q[d + k]
            if max(abs(top_p), abs(top_q)) < tiny:
                if k < 2:
                    raise SynthesisError("degree collapsed to an odd remainder", layer=k)
                phases[k], phases[k - 1] = -np.pi / 2, np.pi / 2
                k -= 2
                continue
            if abs(top_q) < tiny or abs(top_p) < tiny:
                raise SynthesisError("leading coefficients are not balanced", layer=k)
            phi = mp.arg(top_p / top_q) / 2
            phases[k] = float(phi)
            ep, em = mp.exp(mp.mpc(0, -phi)), mp.exp(mp.mpc(0, phi))
            Pe = [z * ep for z in P]
            Qe = [z * em for z in Q]
            # [P', Q'] = [Pe, Qe] W^{-1}, W^{-1} = [[c, -is], [-is, c]]; up = times e^{ix}
            up_p, dn_p = [0] + Pe[:-1], Pe[1:] + [0]
            up_q, dn_q = [0] + Qe[:-1], Qe[1:] + [0]
            k -= 1
            P = [(up_p[i] + dn_p[i] - up_q[i] + dn_q[i]) / 2 if abs(i - d) <= k else mp.mpc(0)
                 for i in range(2 * d + 1)]
            Q = [(-up_p[i] + dn_p[i] + up_q[i] + dn_q[i]) / 2 if abs(i - d) <= k else mp.mpc(0)
                 for i in range(2 * d + 1)]
        # a non-unimodular remainder only means digits were lost; refinement handles it
        phases[0] = float(mp.arg(P[d]))
    return phases


def laurent_pq(phi, dps: int = 50) -> tuple[list, list]:
    """Exact cosine / sine coefficients of P and Q as mpmath numbers.

    Multiplies the Laurent matrix polynomials layer by layer at ``dps`` digits,
    so the result carries no sampling or solve error.
    """
    phases = _as_phases(phi)
    d = len(phases) - 1
    with mp.workdps(dps):
        half = mp.mpf(1) / 2
        # row [P, Q] as Laurent lists over e^{ijx}, j = -d..d
        e0 = mp.exp(mp.mpc(0, mp.mpf(phases[0])))
        P = [mp.mpc(0)] * (2 * d + 1)
        Q = [mp.mpc(0)] * (2 * d + 1)
        P[d] = e0
        for k in range(1, d + 1):
            up_p, dn_p = [0] + P[:-1], P[1:] + [0]
            up_q, dn_q = [0] + Q[:-1], Q[1:] + [0]
            # [P, Q] W: c = (up + dn)/2, i s = (up - dn)/2
            Pn = [half * (up_p[i] + dn_p[i]) + half * (up_q[i] - dn_q[i]) for i in range(2 * d + 1)]
            Qn = [half * (up_p[i] - dn_p[i]) + half * (up_q[i] + dn_q[i]) for i in range(2 * d + 1)]
            e = mp.exp(mp.mpc(0, mp.mpf(phases[k])))
            P = [z * e for z in Pn]
            Q = [z / e for z in Qn]
        a = [P[d]] + [2 * P[d + j] for j in range(1, d + 1)]
        b = [mp.mpc(0)] + [2 * mp.mpc(0, 1) * Q[d + j] for j in range(1, d + 1)]
    return a, b


def _pq_residual(phases, p_cos, q_sin, xs):
    U = qsp_matrices(phases, xs)
    return max(np.max(np.abs(U[:, 0, 0] - eval_cos(p_cos, xs))),
               np.max(np.abs(U[:, 0, 1] - eval_sin(q_sin, xs))))


def _refine_pq(phases, p_cos, q_sin, xs):
    tp, tq = eval_cos(p_cos, xs), eval_sin(q_sin, xs)
    word = np.zeros(len(phases) - 1, dtype=np.int64)
    X = xs.reshape(-1, 1)

    def fun(ph):
        U = qsp_matrices(ph, xs)
        r = np.concatenate([U[:, 0, 0] - tp, U[:, 0, 1] - tq])
        return np.concatenate([r.real, r.imag])

    def jac(ph):
        _, dU = products_with_grad(ph, word, X)
        J = np.concatenate([dU[:, :, 0, 0], dU[:, :, 0, 1]], axis=1).T
        return np.concatenate([J.real, J.imag])

    sol = least_squares(fun, phases, jac=jac, method="dogbox", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=4000)
    if np.max(np.abs(sol.fun)) > 1e-12:
        sol = least_squares(fun, sol.x, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x


def find_phases(p_coeffs, q_coeffs, tol: float = 1e-7, check_tol: float = 1e-8) -> PhaseSequence:
    """Phases reproducing the pair (P, Q) given as cosine / sine coefficients.

    Coefficients may be floats or mpmath numbers (e.g. from ``laurent_pq``);
    stripping runs in extended precision either way, and a least-squares polish
    takes over when the float input has lost too many digits.
    """
    raw_p, raw_q = list(p_coeffs), list(q_coeffs)
    n = max(len(raw_p), len(raw_q))
    raw_p += [0] * (n - len(raw_p))
    raw_q += [0] * (n - len(raw_q))
    while n > 1 and abs(complex(raw_p[n - 1])) <= 1e-15 and abs(complex(raw_q[n - 1])) <= 1e-15:
        n -= 1
    raw_p, raw_q = raw_p[:n], raw_q[:n]
    p = np.array([complex(v) for v in raw_p])
    q = np.array([complex(v) for v in raw_q])
    rep = check_qsp_conditions(p, q, degree=n - 1, tol=check_tol)
    if not rep["pass"]:
        bad = [k for k in ("i", "ii", "iii") if not rep[k]["pass"]]
        raise SynthesisError(f"pair fails condition(s) {','.join(bad)}", condition=bad[0])
    d = rep["degree"]
    xs = np.linspace(-np.pi, np.pi, 2001)
    try:
        phases = _strip(raw_p[: d + 1], raw_q[: d + 1], d)
        err = _pq_residual(phases, p, q, xs)
    except SynthesisError:
        phases, err = None, np.inf
    if err > 1e-9:
        start = phases if phases is not None else np.zeros(d + 1)
        fit_x = np.linspace(-np.pi, np.pi, 4 * d + 8, endpoint=False)
        phases = _refine_pq(start, p, q, fit_x)
        err = _pq_residual(phases, p, q, xs)
        if err > tol:
            raise SynthesisError(f"phase finding residual {err:.3e} above {tol:g}", layer=d)
    return PhaseSequence(phases)


# ---------------------------------------------------------------- real-part fitting

def _symmetric_expand(red, d):
    full = np.empty(d + 1)
    h = len(red)
    full[:h] = red
    full[h:] = red[: d + 1 - h][::-1]
    return full


def fit_real_part(target: ChebSeries1D, degree: int | None = None, tol: float = 1e-12,
                  max_nfev: int = 200) -> tuple[PhaseSequence, dict]:
    """Symmetric phases with Re P = target (a real cosine series of definite parity).

    Solves Re P(x_j) = f(x_j) at the ceil((d+1)/2) positive Chebyshev nodes
    starting from (pi/4, 0, ..., 0, pi/4), where Re P vanishes identically.
    """
    a = np.asarray(target.coefficients)
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag), initial=0.0) > 1e-14:
            raise ValueError("real-part fitting needs real coefficients")
        a = a.real
    d = target.degree if degree is None else degree
    if np.max(np.abs(a[d + 1:]), initial=0.0) > 0:
        raise ValueError("target has terms above the requested degree")
    a = np.concatenate([a[: d + 1], np.zeros(max(0, d + 1 - len(a)))])
    if d > 0 and np.max(np.abs(a[(d + 1) % 2::2]), initial=0.0) > 1e-12:
        raise SynthesisError("target lacks parity d mod 2", condition="parity")
    if d == 0:
        c = float(a[0])
        if abs(c) > 1:
            raise SynthesisError("constant target exceeds 1", condition="sup")
        return PhaseSequence([np.arccos(c)]), {"residual": 0.0, "nfev": 0}
    sup = float(np.max(np.abs(eval_cos(a, np.linspace(0, np.pi, 8 * d + 64)))))
    if sup >= 1:
        raise SynthesisError(f"sup |target| = {sup:.6g} is not below 1", condition="sup")
    nred = (d + 2) // 2
    j = np.arange(1, nred + 1)
    xs = np.arccos(np.cos((2 * j - 1) * np.pi / (4 * nred)))
    fx = eval_cos(a, xs).real
    word = np.zeros(d, dtype=np.int64)
    X = xs.reshape(-1, 1)
    h = nred

    def fun(red):
        U = qsp_matrices(_symmetric_expand(red, d), xs)
        return U[:, 0, 0].real - fx

    def jac(red):
        _, dU = products_with_grad(_symmetric_expand(red, d), word, X)
        g = dU[:, :, 0, 0].real
        J = g[:h].copy()
        for k in range(d + 1 - h):
            J[k] += g[d - k]
        return J.T

    x0 = np.zeros(nred)
    x0[0] = np.pi / 4
    sol = least_squares(fun, x0, jac=jac, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev * nred)
    phases = _symmetric_expand(sol.x, d)
    dense = np.linspace(0, np.pi, 4 * d + 101)
    err = float(np.max(np.abs(qsp_matrices(phases, dense)[:, 0, 0].real - eval_cos(a, dense).real)))
    report = {"residual": err, "node_residual": float(np.max(np.abs(sol.fun))), "nfev": int(sol.nfev),
              "method": "symmetric-phase least squares"}
    if err > max(tol, 1e-9) * 1e3:
        raise SynthesisError(f"real-part fit residual {err:.3e}", layer=d)
    return PhaseSequence(phases), report


def fit_p_phases(p_coeffs, restarts: int = 8, seed: int = 0, tol: float = 1e-10) -> tuple[PhaseSequence, float]:
    """Least-squares phases whose full top-left entry matches the cosine series P."""
    p = np.asarray(p_coeffs, dtype=complex)
    d = len(p) - 1
    xs = np.linspace(0, np.pi, 4 * d + 8)
    tp = eval_cos(p, xs)
    word = np.zeros(d, dtype=np.int64)
    X = xs.reshape(-1, 1)

    def fun(ph):
        r = qsp_matrices(ph, xs)[:, 0, 0] - tp
        return np.concatenate([r.real, r.imag])

    def jac(ph):
        _, dU = products_with_grad(ph, word, X)
        J = dU[:, :, 0, 0].T
        return np.concatenate([J.real, J.imag])

    rng = np.random.default_rng(seed)
    best, best_err = None, np.inf
    for r in range(restarts):
        x0 = np.zeros(d + 1) if r == 0 else rng.uniform(-np.pi, np.pi, d + 1)
        sol = least_squares(fun, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        dense = np.linspace(-np.pi, np.pi, 2001)
        err = float(np.max(np.abs(qsp_matrices(sol.x, dense)[:, 0, 0] - eval_cos(p, dense))))
        if err < best_err:
            best, best_err = sol.x, err
        if best_err <= tol:
            break
    return PhaseSequence(best), best_err

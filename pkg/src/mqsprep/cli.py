"""Command-line entry point: ``mqsprep <command> --config run.yaml``.

Exit codes: 0 success, 2 invalid input, 3 synthesis failure (including a
failed necessary-condition check), 4 numerical breakdown.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import approx, mqsp, qmc, qsp, risk, stateprep
from .approx import FourierSeries2D
from .config import ConfigError, RunConfig, load_config
from .simcore import LayoutError

EXIT_OK, EXIT_INPUT, EXIT_SYNTH, EXIT_NUMERIC = 0, 2, 3, 4


class SynthesisFailed(RuntimeError):
    def __init__(self, code: str, msg: str):
        super().__init__(msg)
        self.code = code


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_amplitudes(amps: np.ndarray, nbits: int, path: Path) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "basis", "re", "im"])
        for i, a in enumerate(amps):
            w.writerow([i, format(i, f"0{nbits}b"), repr(float(a.real)), repr(float(a.imag))])
    return path


# ------------------------------------------------------------ helpers

def _load_coefficients(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
        out = {"P": FourierSeries2D.from_dict(data["P"])}
        if data.get("Q") is not None:
            out["Q"] = FourierSeries2D.from_dict(data["Q"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read coefficient file {path}: {exc}") from None
    for key in ("d1", "d2", "degree"):
        if key in data:
            out[key] = int(data[key])
    return out


def _bivariate_target(cfg: RunConfig) -> tuple[FourierSeries2D, int, dict]:
    if cfg.degrees is None:
        raise ConfigError("synthesis.degrees is required for two-variable targets")
    f = cfg.target.function(2)
    series = approx.fourier_fit_2d(f, cfg.degrees)
    xs = np.linspace(-np.pi, np.pi, 201)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    peak = float(np.max(np.abs(series(X1, X2))))
    if peak == 0:
        raise ConfigError("target vanishes identically")
    P = FourierSeries2D(series.coefficients / peak)
    return P, sum(cfg.degrees), {"fourier_fit": series.fit_report, "scale": peak}


def _fit_bivariate(P, d, cfg, Q=None) -> mqsp.FitResult:
    try:
        res = mqsp.fit_phases_2d(P, d, attempts=cfg.attempts, Q=Q, tol=cfg.fit_tol, seed=cfg.seed)
    except mqsp.PrescreenError as exc:
        raise SynthesisFailed(f"precheck-failed:{exc.condition}", str(exc)) from None
    if not res.success:
        raise SynthesisFailed("synthesis-failed", f"no sequence found within budget (best residual {res.residual:.3e})")
    return res


def _loader(cfg: RunConfig) -> qmc.Loader:
    dist = cfg.distribution or cfg.target
    if dist.name == "uniform":
        return qmc.uniform_loader(cfg.qubits)
    if dist.name == "grid":
        return qmc.grid_loader(dist.grid(cfg.qubits), cfg.qubits)
    if dist.name == "coefficients":
        raise ConfigError("a coefficient file does not define a distribution")
    g = approx.grid_eval(dist.function(cfg.D), cfg.qubits)
    return qmc.grid_loader(g.values, cfg.qubits)


def _query(cfg: RunConfig) -> risk.RiskQuery:
    return risk.RiskQuery(alpha=cfg.alpha, epsilon=cfg.epsilon, delta=cfg.delta, gap=cfg.gap,
                          theta_error=cfg.theta_error, D=cfg.D, shots=cfg.shots, seed=cfg.seed)


def _classical_cdf(loader: qmc.Loader, level: float) -> float:
    s, p = risk._distribution(loader)
    return float(np.sum(p[s <= level + 1e-12]))


# ------------------------------------------------------------ commands

def cmd_solve_phases(cfg: RunConfig, out: Path) -> dict:
    if cfg.target.name == "coefficients":
        data = _load_coefficients(cfg.target.file)
        P = data["P"]
        d = data.get("degree", sum(P.degrees))
        res = _fit_bivariate(P, d, cfg, data.get("Q"))
        write_json(res.sequence.to_dict(), out / "phases.json")
        report = {"kind": "bivariate", "fit": res.to_dict()}
    elif cfg.D == 1:
        f = cfg.target.function(1)
        ap = stateprep.split_approximation(f, cfg.qubits[0], cfg.degree)
        xs = np.linspace(0.0, 1.0, 4001)
        re_e = qsp.qsp_matrices(ap.phi_even.phases, xs)[:, 0, 0].real
        re_o = qsp.qsp_matrices(ap.phi_odd.phases, xs)[:, 0, 0].real
        recheck = float(np.max(np.abs(ap.scale * (re_e + re_o) - ap.series(xs))))
        fit_res = max(ap.report["fits"]["even"]["residual"], ap.report["fits"]["odd"]["residual"])
        write_json({"even": ap.phi_even.to_dict(), "odd": ap.phi_odd.to_dict(), "scale": ap.scale},
                   out / "phases.json")
        report = {"kind": "single-variable", "approximation": ap.report, "residual": fit_res * ap.scale,
                  "reverification": recheck}
    elif cfg.D == 2:
        P, d, info = _bivariate_target(cfg)
        res = _fit_bivariate(P, d, cfg)
        xs = np.linspace(-np.pi, np.pi, 73)
        X1, X2 = np.meshgrid(xs, xs, indexing="ij")
        U = mqsp.mqsp_matrices(res.sequence, np.stack([X1.ravel(), X2.ravel()], axis=1))
        recheck = float(np.max(np.abs(U[:, 0, 0] - P(X1.ravel(), X2.ravel()))))
        write_json(res.sequence.to_dict(), out / "phases.json")
        report = {"kind": "bivariate", "fit": res.to_dict(), "target": info, "reverification": recheck}
    else:
        raise ConfigError("solve-phases supports one or two variables")
    write_json(report, out / "fit_report.json")
    return report


def cmd_check_mqsp(path: str, out: Path) -> tuple[dict, bool]:
    data = _load_coefficients(path)
    P, Q = data["P"], data.get("Q")
    if Q is None:
        raise ConfigError("condition check needs both P and Q")
    d1 = data.get("d1", max(P.degrees[0], Q.degrees[0]))
    d2 = data.get("d2", max(P.degrees[1], Q.degrees[1]))
    rep = mqsp.check_necessary_conditions(P, Q, d1, d2)
    write_json(rep.to_dict(), out / "condition_report.json")
    return rep.to_dict(), rep.passed


def cmd_prepare(cfg: RunConfig, out: Path) -> dict:
    name = cfg.target.name
    if name == "uniform":
        state, plan = stateprep.prepare_word(cfg.target.function(cfg.D), [0.0], [], cfg.qubits)
    elif cfg.D == 1:
        state, plan = stateprep.prepare_single_variable(cfg.target.function(1), cfg.qubits[0], cfg.degree)
    elif cfg.D == 2:
        P, d, info = _bivariate_target(cfg)
        res = _fit_bivariate(P, d, cfg)
        g = approx.grid_eval(cfg.target.function(2), cfg.qubits)
        state, plan = stateprep.prepare_bivariate(g, res.sequence, cfg.qubits, convention="one-is-x1")
        plan.report["target"] = info
    else:
        raise ConfigError("prepare supports one or two variables, or a uniform target")
    amps = stateprep.variable_amplitudes(state)
    write_amplitudes(amps, sum(cfg.qubits), out / "amplitudes.csv")
    d = plan.to_dict()
    d["ancilla_leakage"] = float(1.0 - np.linalg.norm(amps) ** 2)
    write_json(d, out / "plan.json")
    return d


def cmd_estimate(cfg: RunConfig, out: Path) -> dict:
    loader = _loader(cfg)
    theta = cfg.theta or ({"kind": "step", "threshold": cfg.threshold} if cfg.threshold is not None else {})
    if not theta:
        raise ConfigError("estimate needs estimation.theta or estimation.threshold")
    if theta["kind"] == "constant":
        val = float(theta["value"])
        res = qmc.estimate_expectation(loader, qmc.constant_series(val), cfg.epsilon, cfg.delta,
                                       seed=cfg.seed, shots=cfg.shots)
        classical = val
    else:
        res = risk.estimate_cdf(loader, float(theta["threshold"]), _query(cfg), seed=cfg.seed)
        classical = _classical_cdf(loader, res.error_components["level"])
    d = res.to_dict()
    d["classical"] = classical
    write_json(d, out / "estimate.json")
    return d


def cmd_var(cfg: RunConfig, out: Path) -> dict:
    loader = _loader(cfg)
    q = _query(cfg)
    var, audit = risk.value_at_risk(loader, q)
    d = {"alpha": q.alpha, "var": var, "var_scaled": cfg.D * var, "tvar": None, "audit": audit,
         "error_components": {"estimation": q.epsilon, "theta_approx": q.theta_error,
                              "band_mass": max((a["band_mass"] for a in audit), default=0.0), "grid": 0.0}}
    write_json(d, out / "risk_report.json")
    return d


def cmd_tvar(cfg: RunConfig, out: Path) -> dict:
    d = risk.risk_report(_loader(cfg), _query(cfg))
    if d.get("tvar") is None:
        raise risk.RiskError(d.get("tvar_error", "TVaR unavailable"))
    write_json(d, out / "risk_report.json")
    return d


COMMANDS = ("solve-phases", "check-mqsp", "prepare", "estimate", "var", "tvar")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mqsprep", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "check-mqsp":
            p.add_argument("coefficients", help="JSON file with P, Q and optional d1, d2")
            p.add_argument("--config", help="unused; accepted for symmetry")
        else:
            p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override estimation.seed")
        p.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check-mqsp":
            out = Path(args.out or "out")
            out.mkdir(parents=True, exist_ok=True)
            rep, ok = cmd_check_mqsp(args.coefficients, out)
            print(json.dumps({"pass": ok, "report": str(out / "condition_report.json")}))
            return EXIT_OK if ok else EXIT_SYNTH
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seed = args.seed
        out = cfg.out_dir(args.out)
        fn = {"solve-phases": cmd_solve_phases, "prepare": cmd_prepare, "estimate": cmd_estimate,
              "var": cmd_var, "tvar": cmd_tvar}[args.command]
        result = fn(cfg, out)
        summary = {k: result[k] for k in ("estimate", "var", "tvar", "filling_ratio") if k in result}
        print(json.dumps(_plain(summary), sort_keys=True))
        return EXIT_OK
    except (ConfigError, LayoutError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SynthesisFailed as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    except (qsp.SynthesisError, mqsp.PrescreenError) as exc:
        cond = getattr(exc, "condition", None)
        print(f"precheck-failed:{cond}: {exc}" if cond else f"synthesis-failed: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    except (qmc.EstimationError, risk.RiskError, stateprep.PreparationError, approx.ApproximationError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

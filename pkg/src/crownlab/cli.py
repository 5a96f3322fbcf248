"""Batch runner: one subcommand per experiment, CSV and JSON tables, exit 0 iff every verdict passes."""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import CrownlabError

COLUMNS = ["experiment", "n", "k", "eps", "value", "error_estimate", "target", "tolerance", "verdict"]

DEFAULTS: dict[str, dict[str, str]] = {
    "general": {"out_dir": "results", "seed": "0", "q_factor": "0.75", "sigma": "0.1"},
    "constants": {"n": "3,4,5", "rel_tol": "1e-6"},
    "crown-energy": {"n": "4", "k": "8,16,32", "exponent_window": "-2.5,-1.0"},
    "gram": {"n": "4", "k": "16", "rel_tol": "0.05"},
    "kernels": {"n": "3,4", "k": "16,8", "probes": "50", "rel_tol": "1e-5"},
    "projection": {"n": "3", "eps": "1e-3,1e-4,1e-5,1e-6", "d": "1.0", "tau1": "0.1", "rel_tol": "0.1"},
    "expansion": {"n": "3", "eps": "1e-4,1e-5,1e-6,1e-7", "rel_tol": "0.15", "derivative_d_factor": "1.2"},
    "reduced": {"n": "3", "profile": "bubble", "crown_n": "4", "crown_k": "8", "tol": "1e-8"},
    "residual": {"n": "3,4", "eps": "1e-3,1e-4,1e-5,1e-6", "d": "1.0", "rel_tol": "0.1"},
    "bounds": {"n": "3", "a": "0.5", "b": "0.5", "y_a": "1,3,10,30,100", "y_b": "0.5,0.2,0.1,0.05,0.02",
               "rel_tol": "0.2"},
}


@dataclass
class Row:
    experiment: str
    n: int
    k: str = ""
    eps: str = ""
    value: float = float("nan")
    error_estimate: float = float("nan")
    target: float = float("nan")
    tolerance: float = float("nan")
    verdict: str = "info"

    def formatted(self) -> dict:
        out = {}
        for c in COLUMNS:
            v = getattr(self, c)
            out[c] = repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
        return out


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


# ------------------------------------------------------------------ experiments

def run_constants(cfg) -> list[Row]:
    from .energy import constants

    tol = float(cfg["rel_tol"])
    rows = []
    for n in _ints(cfg["n"]):
        c = constants(n)
        rows.append(Row("c_tilde_vs_closed_form", n, value=c.c_tilde, error_estimate=c.errors["c_tilde"],
                        target=c.c_tilde_closed_form, tolerance=tol,
                        verdict=_verdict(abs(c.c_tilde / c.c_tilde_closed_form - 1) <= tol)))
        rows.append(Row("c_tilde_vs_exact_integral", n, value=c.c_tilde, error_estimate=c.errors["c_tilde"],
                        target=c.c_tilde_exact, tolerance=tol,
                        verdict=_verdict(abs(c.c_tilde / c.c_tilde_exact - 1) <= tol)))
        rows.append(Row("S_n", n, value=c.S_n, error_estimate=c.errors["S_n"]))
        rows.append(Row("c1_bubble", n, value=c.c1, error_estimate=c.errors["c1"], target=c.S_n, tolerance=tol,
                        verdict=_verdict(abs(c.c1 / c.S_n - 1) <= tol)))
        rows.append(Row("c2_bubble", n, value=c.c2, error_estimate=c.errors["c2"]))
    return rows


def run_crown_energy(cfg) -> list[Row]:
    from .crown import CrownSpec, crown
    from .energy import energy_entire, sobolev_energy
    from .fitting import loglog_fit
    from .quadrature import QuadratureSpec

    lo, hi = _floats(cfg["exponent_window"])
    rows = []
    for n in _ints(cfg["n"]):
        ks = _ints(cfg["k"])
        S = sobolev_energy(n)
        dev = []
        for k in ks:
            r = energy_entire(crown(CrownSpec.build(n, k)), QuadratureSpec(rel_tol=1e-9))
            d = float(r.value) / ((k + 1) * S) - 1
            dev.append(d)
            rows.append(Row("crown_energy_ratio_minus_1", n, str(k), value=d,
                            error_estimate=float(r.error) / ((k + 1) * S), target=0.0))
        mono = all(abs(b) < abs(a) for a, b in zip(dev, dev[1:]))
        rows.append(Row("crown_energy_decreasing", n, ",".join(map(str, ks)), value=float(mono), target=1.0,
                        verdict=_verdict(mono)))
        if len(ks) > 1:
            fit = loglog_fit(ks, dev)
            rows.append(Row("crown_energy_k_exponent", n, ",".join(map(str, ks)), value=fit.slope,
                            target=float(2 - n), tolerance=hi - lo, verdict=_verdict(lo <= fit.slope <= hi)))
            changes = int(np.sum(np.diff(np.sign(dev)) != 0))
            rows.append(Row("crown_energy_sign_changes", n, ",".join(map(str, ks)), value=float(changes)))
    return rows


def run_gram(cfg) -> list[Row]:
    from .crown import CrownSpec
    from .energy import gram_matrix, gram_rate

    tol = float(cfg["rel_tol"])
    rows = []
    for n in _ints(cfg["n"]):
        for k in _ints(cfg["k"]):
            g = gram_matrix(CrownSpec.build(n, k))
            N = g.normalized
            err = g.error / ((k + 1) * g.c_tilde)
            diag = np.diag(N)
            rows.append(Row("gram_diagonal_max_dev", n, str(k), value=float(np.max(np.abs(diag - 1))),
                            error_estimate=err, target=0.0, tolerance=tol,
                            verdict=_verdict(bool(np.max(np.abs(diag - 1)) <= tol))))
            for i, j in ((1, n + 2), (2, n + 3)):
                v = float(N[i, j])
                rows.append(Row(f"gram_entry_{i}_{j}", n, str(k), value=v, error_estimate=err, target=1.0,
                                tolerance=tol, verdict=_verdict(abs(v - 1) <= tol)))
            off = N.copy()
            np.fill_diagonal(off, 0.0)
            for i, j in ((1, n + 2), (2, n + 3)):
                off[i, j] = off[j, i] = 0.0
            rows.append(Row("gram_other_offdiag_max", n, str(k), value=float(np.max(np.abs(off))),
                            error_estimate=err, target=0.0, tolerance=tol,
                            verdict=_verdict(bool(np.max(np.abs(off)) <= tol))))
            rows.append(Row("gram_min_eigenvalue_over_c_tilde", n, str(k), value=g.min_eigenvalue / g.c_tilde,
                            error_estimate=g.error / g.c_tilde, target=0.0))
            rows.append(Row("gram_predicted_rate", n, str(k), value=gram_rate(n, k)))
            rows.append(Row("gram_mu_squared_times_diag_mean", n, str(k),
                            value=float(np.mean(diag[1:n + 1])) * g.mu**2))
    return rows


def run_kernels(cfg) -> list[Row]:
    from .crown import CrownSpec, crown, crown_probes
    from .kelvin import ParamSet, derivative_identity_check, linearized_residual_check

    tol = float(cfg["rel_tol"])
    rows = []
    for n, k in zip(_ints(cfg["n"]), _ints(cfg["k"])):
        cs = CrownSpec.build(n, k)
        Q = crown(cs)
        probes = crown_probes(cs, int(cfg["probes"]))
        lines = linearized_residual_check(Q, probes)
        worst = max(l.weighted_residual / ((1 + l.margin) * l.budget + l.tolerance * l.scale) for l in lines)
        rows.append(Row("linearized_residual_over_budget_max", n, str(k), value=worst, target=1.0,
                        tolerance=0.0, verdict=_verdict(all(l.passed for l in lines))))
        rows.append(Row("linearized_mismatch_over_budget_max", n, str(k),
                        value=max(l.mismatch / l.budget for l in lines)))
        rep = derivative_identity_check(ParamSet.identity(n), Q, probes[: len(probes) // 2],
                                        step=1e-3 * cs.mu, tol=tol)
        rows.append(Row("derivative_identities_max_rel_error", n, str(k), value=rep.max_error(), target=0.0,
                        tolerance=tol, verdict=_verdict(rep.passed)))
        rows.append(Row("derivative_identities_up_to_sign", n, str(k), value=rep.max_error(True), target=0.0,
                        tolerance=tol, verdict="info"))
        for name in rep.flipped:
            rows.append(Row(f"sign_flipped_{name}", n, str(k), value=1.0))
    return rows


def _point(n: int, d: float, tau1: float = 0.0):
    from .kelvin import ReducedPoint

    tau = [0.0] * n
    tau[0] = tau1
    return ReducedPoint(d, tuple(tau))


def run_projection(cfg) -> list[Row]:
    from .crown import bubble
    from .projection import defect_sweep

    tol = float(cfg["rel_tol"])
    eps = _floats(cfg["eps"])
    rows = []
    for n in _ints(cfg["n"]):
        out = defect_sweep(_point(n, float(cfg["d"]), float(cfg["tau1"])), eps, bubble(n), rel_tol=tol)
        for name, rep in out.items():
            rows.append(Row(f"boundary_defect_{name}_slope", n, eps=cfg["eps"], value=rep.exponent,
                            error_estimate=rep.residual, target=rep.target_exponent, tolerance=tol,
                            verdict=_verdict(rep.exponent_ok)))
    return rows


def run_expansion(cfg) -> list[Row]:
    from .crown import bubble
    from .energy import constants
    from .kelvin import ReducedPoint
    from .reduced import d_critical, expansion_check, expansion_derivative_check

    tol = float(cfg["rel_tol"])
    eps = _floats(cfg["eps"])
    rows = []
    for n in _ints(cfg["n"]):
        U = bubble(n)
        c = constants(n)
        zero_th = (0.0,) * (2 * n - 3)
        d0 = d_critical(np.zeros(n), (0.0, 0.0), zero_th, c, U)
        pt = ReducedPoint.origin(n, d0)
        rep = expansion_check(pt, eps, c, U, rel_tol=tol)
        rows.append(Row("energy_expansion_K_over_psi", n, eps=cfg["eps"], value=rep.coefficient / rep.target_coefficient,
                        target=1.0, tolerance=tol, verdict=_verdict(rep.coefficient_ok)))
        rows.append(Row("energy_expansion_K", n, eps=cfg["eps"], value=rep.coefficient,
                        target=rep.target_coefficient))
        rows.append(Row("energy_expansion_sign_of_K", n, eps=cfg["eps"], value=float(rep.notes["sign"])))
        rows.append(Row("energy_expansion_slope", n, eps=cfg["eps"], value=rep.exponent,
                        target=rep.target_exponent))
        q = pt.replace(d=float(cfg["derivative_d_factor"]) * d0)
        der = expansion_derivative_check(q, eps, c, U, rel_tol=tol)
        rows.append(Row("energy_expansion_d_derivative_ratio", n, eps=cfg["eps"],
                        value=der.coefficient / der.target_coefficient, target=1.0, tolerance=tol,
                        verdict=_verdict(der.coefficient_ok)))
    return rows


def run_reduced(cfg) -> list[Row]:
    from .crown import CrownSpec, bubble, crown
    from .energy import constants
    from .kelvin import ReducedPoint
    from .reduced import (d_critical, golden_section_argmin, optimize, psi_coefficients, psi_vector,
                          richardson_hessian, tau_a_hessian, to_vector)

    tol = float(cfg["tol"])
    rows = []
    n = int(cfg["n"])
    if cfg["profile"] == "bubble":
        Q = bubble(n)
        k = ""
    else:
        k = cfg.get("k", cfg["crown_k"])
        Q = crown(CrownSpec.build(n, int(k)))
    c = constants(n, Q)
    zt = (0.0,) * (2 * n - 3)
    B, C = psi_coefficients(np.zeros(n), (0.0, 0.0), zt, c, Q)
    d0 = d_critical(np.zeros(n), (0.0, 0.0), zt, c, Q)
    gs = golden_section_argmin(B, C, n, 0.5 * d0, 2.0 * d0)
    rows.append(Row("d0_closed_form", n, str(k), value=d0))
    rows.append(Row("d0_golden_section_diff", n, str(k), value=abs(gs - d0), target=0.0, tolerance=tol,
                    verdict=_verdict(abs(gs - d0) <= tol)))
    pt = ReducedPoint.origin(n, d0)
    hdd = richardson_hessian(lambda v: psi_vector(v, c, Q), to_vector(pt), [0])[0, 0]
    rows.append(Row("psi_dd_at_d0", n, str(k), value=float(hdd), target=0.0, verdict=_verdict(hdd > 0)))

    cn, ck = int(cfg["crown_n"]), int(cfg["crown_k"])
    Qc = crown(CrownSpec.build(cn, ck))
    cc = constants(cn, Qc)
    ztc = (0.0,) * (2 * cn - 3)
    ptc = ReducedPoint.origin(cn, d_critical(np.zeros(cn), (0.0, 0.0), ztc, cc, Qc))
    ev = np.linalg.eigvalsh(tau_a_hessian(ptc, cc, Qc))
    rows.append(Row("tau_a_hessian_max_eigenvalue", cn, str(ck), value=float(ev.max()), target=0.0,
                    verdict=_verdict(bool(ev.max() < 0))))
    start = ReducedPoint(ptc.d * 0.8, (0.05, -0.03) + (0.0,) * (cn - 2), (0.1, 0.05), (0.1,) * (2 * cn - 3))
    res = optimize(cc, Qc, start)
    rows.append(Row("saddle_search_grad_norm", cn, str(ck), value=res.grad_norm, target=0.0, tolerance=1e-9,
                    verdict=_verdict(res.converged)))
    rows.append(Row("saddle_search_d", cn, str(ck), value=res.point.d, target=ptc.d))
    rows.append(Row("saddle_search_theta_flat", cn, str(ck), value=float(res.theta_flat)))
    return rows


def run_residual(cfg) -> list[Row]:
    from .crown import bubble
    from .projection import error_norm_scaling

    tol = float(cfg["rel_tol"])
    eps = _floats(cfg["eps"])
    rows = []
    for n in _ints(cfg["n"]):
        rep = error_norm_scaling(_point(n, float(cfg["d"])), eps, bubble(n), rel_tol=tol)
        rows.append(Row("error_norm_slope", n, eps=cfg["eps"], value=rep.exponent, error_estimate=rep.residual,
                        target=rep.target_exponent, tolerance=tol, verdict=_verdict(rep.exponent_ok)))
    return rows


def run_bounds(cfg) -> list[Row]:
    from .appendix import convolution_bound_a, convolution_bound_b

    tol = float(cfg["rel_tol"])
    rows = []
    for n in _ints(cfg["n"]):
        for a in _floats(cfg["a"]):
            r = convolution_bound_a(n, a, _floats(cfg["y_a"]))
            rows.append(Row(f"convolution_a_{a}_constant", n, value=r.constant, error_estimate=max(r.errors)))
            rows.append(Row(f"convolution_a_{a}_final_decade_spread", n, value=r.final_decade_spread, target=0.0,
                            tolerance=tol, verdict=_verdict(r.stable(tol))))
            rows.append(Row(f"convolution_a_{a}_oracle_max_rel_diff", n,
                            value=max(abs(v / o - 1) for v, o in zip(r.integrals, r.oracle))))
        for b in _floats(cfg["b"]):
            r = convolution_bound_b(n, b, _floats(cfg["y_b"]))
            rows.append(Row(f"convolution_b_{b}_constant", n, value=r.constant, error_estimate=max(r.errors),
                            target=r.notes["sup_constant"]))
            rows.append(Row(f"convolution_b_{b}_final_decade_spread", n, value=r.final_decade_spread, target=0.0,
                            tolerance=tol, verdict=_verdict(r.stable(tol))))
            rows.append(Row(f"convolution_b_{b}_oracle_max_rel_diff", n,
                            value=max(abs(v / o - 1) for v, o in zip(r.integrals, r.oracle))))
    return rows


EXPERIMENTS: dict[str, Callable] = {
    "constants": run_constants,
    "crown-energy": run_crown_energy,
    "gram": run_gram,
    "kernels": run_kernels,
    "projection": run_projection,
    "expansion": run_expansion,
    "reduced": run_reduced,
    "residual": run_residual,
    "bounds": run_bounds,
}


# ------------------------------------------------------------------ plumbing

def load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.read_dict(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(str(exc)) from exc
        unknown = [s for s in cp.sections() if s not in DEFAULTS]
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(unknown)}")
    return cp


class ConfigError(Exception):
    pass


def write_outputs(command: str, rows: list[Row], cp: configparser.ConfigParser, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{command}.csv"
    json_path = out_dir / f"{command}.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.formatted())
    sections = [command] if command in DEFAULTS else [s for s in DEFAULTS if s != "general"]
    payload = {
        "command": command,
        "config": {s: dict(cp[s]) for s in ["general"] + sections},
        "rows": [r.formatted() for r in rows],
        "all_pass": all(r.verdict != "fail" for r in rows),
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crownlab", description="Run numerical experiments on crown-shaped profiles.")
    ap.add_argument("--config", help="INI file overriding the built-in defaults")
    ap.add_argument("--out", help="output directory (default from config)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(EXPERIMENTS) + ["all"]:
        p = sub.add_parser(name)
        p.add_argument("--n", help="dimension(s), comma separated")
        p.add_argument("--k", help="number(s) of outer bubbles, comma separated")
        p.add_argument("--eps", help="hole radii, comma separated")
        p.add_argument("--profile", choices=["bubble", "crown"])
    return ap


def _apply_overrides(cp: configparser.ConfigParser, section: str, args) -> None:
    for key in ("n", "k", "eps", "profile"):
        v = getattr(args, key, None)
        if v is not None:
            cp[section][key] = v


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cp = load_config(args.config)
        out_dir = Path(args.out or cp["general"]["out_dir"])
        commands = list(EXPERIMENTS) if args.command == "all" else [args.command]
        all_rows = []
        for cmd in commands:
            if args.command != "all":
                _apply_overrides(cp, cmd, args)
            rows = EXPERIMENTS[cmd](cp[cmd])
            for r in rows:
                r.experiment = f"{cmd}:{r.experiment}" if args.command == "all" else r.experiment
            all_rows.extend(rows)
            if args.command != "all":
                write_outputs(cmd, rows, cp, out_dir)
        if args.command == "all":
            write_outputs("all", all_rows, cp, out_dir)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (CrownlabError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3
    for r in all_rows:
        print(f"{r.verdict:5s} {r.experiment} n={r.n} k={r.k} value={r.value:.6g} target={r.target:.6g}")
    return 0 if all(r.verdict != "fail" for r in all_rows) else 1


if __name__ == "__main__":
    sys.exit(main())

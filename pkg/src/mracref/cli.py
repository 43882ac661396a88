"""Command-line front end: ``mracref design|run|verify SCENARIO...``.

Exit codes: 0 success, 2 parse error, 3 assumption violation, 4 divergence
(``verify`` also returns 3 when any check breaches its threshold).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .design import (DesignError, DesignReport, OutputFbMatch, Scheme, output_matching_residual,
                     parse_keyvalue, state_matching_residual, to_keyvalue)
from .lti import LTIError, char_poly, is_hurwitz, relative_degree, tf_from_ss
from .scenario import ScenarioParseError, load_scenario
from .sim import Scenario, build_wiring, integrate, metrics

EXIT_OK, EXIT_PARSE, EXIT_ASSUMPTION, EXIT_DIVERGED = 0, 2, 3, 4
RESIDUAL_TOL = 1e-6

log = logging.getLogger("mracref")


def _g(x) -> str:
    return np.array2string(np.asarray(x, dtype=float), precision=6, separator=", ",
                           max_line_width=100, floatmode="maxprec")


def _load(path, args) -> Scenario:
    scheme = Scheme.parse(args.scheme) if getattr(args, "scheme", None) else None
    sc = load_scenario(path, scheme)
    changes = {}
    if getattr(args, "dt", None) is not None:
        changes["dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    return sc.replace(**changes) if changes else sc


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------


def certificate(report: DesignReport, sc: Scenario) -> str:
    G = report.plant_tf
    lines = [f"# scheme {report.scheme.name}: n = {sc.plant.n}, n* = {report.n_star}, "
             f"p = {report.nominal.theta_star.size}",
             f"# k_p = {G.gain:.6g}, zeros {_g(np.real_if_close(G.num.roots()))}",
             f"# alpha1 = {_g(report.axm.alpha1)}, alpha2 = {report.axm.alpha2:.6g}"]
    if report.ofb is not None:
        r = output_matching_residual(G, sc.lam, sc.pm, report.ofb)
        lines.append(f"# theta1 = {_g(report.ofb.theta1)}, theta2 = {_g(report.ofb.theta2)}, "
                     f"theta20 = {report.ofb.theta20:.6g}, theta3 = {report.ofb.theta3:.6g}")
        lines.append(f"# output matching residual {r:.3g}")
    if report.sfb is not None:
        r = state_matching_residual(sc.plant, sc.pm, report.sfb)
        lines.append(f"# k1 = {_g(report.sfb.k1)}, k2 = {report.sfb.k2:.6g}")
        lines.append(f"# state matching residual {r:.3g}")
    if report.observer is not None:
        lines.append(f"# L_r = {_g(report.observer.L_r)}")
    lines.append(f"# theta* = {_g(report.nominal.theta_star)}")
    lines.append(f"# rho* = {report.nominal.rho_star:.6g}")
    return "\n".join(lines) + "\n" + to_keyvalue(report)


def cmd_design(args) -> int:
    code = EXIT_OK
    for path in args.scenario:
        sc = _load(path, args)
        report = sc.validate()
        text = certificate(report, sc)
        sys.stdout.write(text)
        if args.out:
            Path(args.out).write_text(text)
    return code


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _run_one(path: str, args_dict: dict, out: Optional[str]) -> tuple[int, str]:
    args = argparse.Namespace(**args_dict)
    try:
        sc = _load(path, args)
        trace = integrate(sc)
    except ScenarioParseError as exc:
        return EXIT_PARSE, f"{path}: parse error: {exc}"
    except (DesignError, LTIError) as exc:
        return EXIT_ASSUMPTION, f"{path}: {_describe(exc)}"
    if out is None:
        out = Path(path).with_suffix(".csv").name
    with open(out, "w") as fh:
        trace.to_csv(fh, args.stride)
        if trace.diverged:
            fh.write(f"# DIVERGED at t={trace.t[-1]:.6g}; trace is partial\n")
    m = metrics(trace)
    status = "diverged" if trace.diverged else "ok"
    line = f"{path}: status={status} engine={trace.engine} {m.summary()} csv={out}"
    return (EXIT_DIVERGED if trace.diverged else EXIT_OK), line


def cmd_run(args) -> int:
    paths = args.scenario
    if len(paths) == 1:
        outs = [args.out]
    else:
        outdir = Path(args.out or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        outs = [str(outdir / Path(p).with_suffix(".csv").name) for p in paths]
    a = {k: getattr(args, k) for k in ("scheme", "dt", "horizon", "stride")}
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, paths, [a] * len(paths), outs))
    else:
        results = [_run_one(p, a, o) for p, o in zip(paths, outs)]
    for code, line in results:
        (sys.stdout if code in (EXIT_OK, EXIT_DIVERGED) else sys.stderr).write(line + "\n")
    return max(code for code, _ in results)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        val = f"{self.value:.3g}" if np.isfinite(self.value) else str(self.value)
        return f"{tag}  {self.name:<28} {val:>10}  (limit {self.limit:g}) {self.note}".rstrip()


def _resid(name, value, tol=RESIDUAL_TOL, note="") -> Check:
    return Check(name, float(value), tol, bool(np.isfinite(value) and value < tol), note)


def _flag(name, ok, note="") -> Check:
    return Check(name, 0.0 if ok else 1.0, 0.5, bool(ok), note)


def tracking_residual(wiring, theta, freqs=None) -> float:
    """``max |H_e(jw)| / |H_ym(jw)|`` of the frozen-``theta`` loop from ``v_m``."""
    freqs = np.logspace(-2, 1, 20) if freqs is None else freqs
    Acl, bcl = wiring.closed_loop_matrix(np.asarray(theta, dtype=float))
    k = wiring.slices["zeta"].start
    Acl, bcl = Acl[:k, :k], bcl[:k]
    ce = (wiring.cy - wiring.cym)[:k]
    cym = wiring.cym[:k]
    worst = 0.0
    for w in freqs:
        sol = np.linalg.solve(1j * w * np.eye(k) - Acl, bcl)
        worst = max(worst, abs(ce @ sol) / max(abs(cym @ sol), 1e-300))
    return float(worst)


def _observer_checks(ob, lambda_e) -> list[Check]:
    cp = char_poly(ob.F)
    cres = np.max(np.abs(np.asarray(cp.coeffs) - np.asarray(lambda_e.coeffs)))
    cres /= max(1.0, np.max(np.abs(lambda_e.coeffs)))
    checks = [_resid("observer char-poly", cres)]
    m = ob.F.shape[0]
    for name, inp, Theta in (("Theta1", ob.g, ob.Theta1), ("Theta2", ob.h, ob.Theta2)):
        worst = 0.0
        for w in np.logspace(-2, 1, 10):
            s = 1j * w
            res = np.linalg.solve(s * np.eye(m) - ob.F, inp)
            ref = (Theta @ s ** np.arange(Theta.shape[1])) / lambda_e(s)
            worst = max(worst, np.max(np.abs(res - ref)) / max(np.max(np.abs(res)), 1e-300))
        checks.append(_resid(f"observer {name} frequency", worst))
    return checks


def verify_checks(sc: Scenario, supplied: Optional[dict] = None) -> list[Check]:
    checks: list[Check] = []
    G = tf_from_ss(sc.plant)
    zeros_ok = G.num.degree == 0 or is_hurwitz(G.num)
    checks.append(_flag("(A1) plant minimum phase", zeros_ok,
                        "" if zeros_ok else f"zeros {_g(np.real_if_close(G.num.roots()))}"))
    sign_ok = np.sign(G.gain) == sc.sign_kp
    checks.append(_flag("(A1) sign of k_p", sign_ok, f"k_p = {G.gain:.6g}"))
    n_star = relative_degree(G)
    try:
        nm_star = sc.ref.relative_degree()
    except LTIError:
        nm_star = -1
    checks.append(_flag("(A2) n_m* >= n*", nm_star >= n_star, f"n_m* = {nm_star}, n* = {n_star}"))
    lead_ok = is_hurwitz(char_poly(sc.ref_closed))
    checks.append(_flag("(A2) leader loop Hurwitz", lead_ok))
    if not (zeros_ok and nm_star >= n_star and lead_ok):
        return checks
    report = sc.validate()
    theta_star = report.nominal.theta_star
    if supplied is not None:
        if "theta_star" in supplied:
            theta_star = np.asarray(supplied["theta_star"], dtype=float)
        if report.ofb is not None and {"theta1", "theta2", "theta20", "theta3"} <= supplied.keys():
            ofb = OutputFbMatch(supplied["theta1"], supplied["theta2"],
                                float(supplied["theta20"][0]), float(supplied["theta3"][0]))
            report = dataclasses.replace(report, ofb=ofb)
    if report.ofb is not None:
        checks.append(_resid("output matching", output_matching_residual(
            report.plant_tf, sc.lam, sc.pm, report.ofb)))
    if report.sfb is not None:
        checks.append(_resid("state matching (frequency)", state_matching_residual(
            sc.plant, sc.pm, report.sfb)))
    if report.observer is not None:
        checks += _observer_checks(report.observer, sc.lambda_e)
    if theta_star.size != report.nominal.theta_star.size:
        checks.append(_flag("theta* length", False,
                            f"{theta_star.size} != {report.nominal.theta_star.size}"))
        return checks
    w = build_wiring(sc, report)
    checks.append(_resid("closed-loop tracking", tracking_residual(w, theta_star)))
    return checks


def cmd_verify(args) -> int:
    supplied = parse_keyvalue(Path(args.design).read_text()) if args.design else None
    code = EXIT_OK
    for path in args.scenario:
        sc = _load(path, args)
        checks = verify_checks(sc, supplied)
        print(f"{path}: {sc.scheme.name}")
        for c in checks:
            print("  " + c.line())
        if not all(c.passed for c in checks):
            failed = ", ".join(c.name for c in checks if not c.passed)
            print(f"  FAILED: {failed}")
            code = EXIT_ASSUMPTION
    return code


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _describe(exc) -> str:
    tag = getattr(exc, "assumption", None)
    return f"assumption violation ({tag}): {exc}" if tag else f"assumption violation: {exc}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mracref", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", nargs="+", help="scenario file(s)")
        p.add_argument("--scheme", help="override the scheme (SFB_XM, SFB_YM, OFB_XM, OFB_YM)")
        p.add_argument("--dt", type=float, help="step size in seconds")
        p.add_argument("--horizon", type=float, help="simulation horizon in seconds")
        p.add_argument("--out", help="output file (directory when several scenarios are run)")

    p = sub.add_parser("design", help="compute the nominal parameters")
    common(p)
    p.set_defaults(func=cmd_design)
    p = sub.add_parser("run", help="simulate and write a CSV trace")
    common(p)
    p.add_argument("--stride", type=int, default=10, help="keep every N-th sample (default 10)")
    p.add_argument("--jobs", type=int, default=1, help="run scenario files in parallel")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="check assumptions and design residuals")
    common(p)
    p.add_argument("--design", help="key-value block to verify instead of the computed design")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "stride", 1) < 1:
        print("error: --stride must be >= 1", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        if isinstance(exc, (DesignError, LTIError)):
            print(_describe(exc), file=sys.stderr)
            return EXIT_ASSUMPTION
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

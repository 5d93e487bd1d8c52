"""Command-line entry point: every subsystem as a subcommand.

Conventions shared by all subcommands:

* outputs are written atomically (temp file + rename), never left partial;
* every report embeds the resolved configuration and the tool version;
* the seed defaults to 0 and is never taken from the clock, so identical
  invocations produce byte-identical artifacts;
* exit codes: 0 success, 1 usage/configuration error, 2 a verification
  verdict failed (or a certificate could not be issued).

CSV files carry '#' header comments with the same provenance.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .bubble import BubbleParams
from .constants import ALPHA4, C4, OMEGA3, TABLE, radial_integral_quadrature
from .domains import Domain, domain_from_file, read_keyvalue_file
from .errors import ConfigError, NotCertifiableError, SpikeLabError
from .green_robin import RobinEvaluator, brouwer_degree, find_robin_critical_points
from .projection import interior_grid, projection_defect
from .quadrature import (fit_loglog_slope, fit_two_term_log,
                         integrate_bubble_power, interaction_integral,
                         interaction_norms, taylor_bound_check)
from .radial_solver import concentration_study, profile_energy, solve_ball
from .reduced_energy import (SpikeEnsemble, beta_admissible,
                             beta_schedule_from_spec, energy_terms_asymptotic,
                             energy_terms_quadrature, solve_reduced_system)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".spikelab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _report(payload: dict, config: dict) -> dict:
    return {"tool": "spikelab", "version": __version__,
            "config": config, **payload}


def _write_csv(path: str, header_cols, rows, config: dict):
    lines = [f"# spikelab {__version__}"]
    for k in sorted(config):
        lines.append(f"# {k} = {config[k]}")
    lines.append(",".join(header_cols))
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _load_domain(path: str) -> Domain:
    return domain_from_file(path)


# -- subcommand implementations ----------------------------------------------


def cmd_constants(args):
    table = TABLE.as_dict()
    out = _report({"constants": table}, {"command": "constants"})
    text = _json_dump(out)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_robin(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    pts = interior_grid(dom, args.grid, tube=0.1, seed=args.seed)
    taus = ev.robin_batch(pts)
    rows = []
    for p, t in zip(pts, taus):
        g = ev.robin_grad(p, fast=not ev.use_kelvin)
        rows.append([float(p[0]), float(p[1]), float(p[2]), float(p[3]),
                     float(t)] + [float(c) for c in g])
    cfg = {"command": "robin", "domain": args.domain, "grid": args.grid,
           "seed": args.seed}
    _write_csv(args.out, ["x1", "x2", "x3", "x4", "tau", "g1", "g2", "g3", "g4"],
               rows, cfg)
    return EXIT_OK


def cmd_critical_points(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    vals = [float(v) for v in args.box.split(",")]
    if len(vals) != 8:
        raise ConfigError("--box needs 8 comma-separated reals "
                          "(lo1,hi1,lo2,hi2,lo3,hi3,lo4,hi4)")
    lo = np.array(vals[0::2])
    hi = np.array(vals[1::2])
    cfg = {"command": "critical-points", "domain": args.domain,
           "box": vals, "certify": bool(args.certify), "seed": args.seed,
           "starts": args.starts}
    payload = {}
    code = EXIT_OK
    cps = find_robin_critical_points(ev, [(lo, hi)],
                                     starts_per_box=args.starts, seed=args.seed)
    payload["critical_points"] = [cp.as_dict() for cp in cps]
    if args.certify:
        try:
            cert = brouwer_degree(ev, (lo, hi), seed=args.seed)
            payload["certificate"] = cert.as_dict()
        except (NotCertifiableError, SpikeLabError) as exc:
            payload["certificate_error"] = str(exc)
            code = EXIT_VERIFY
    text = _json_dump(_report(payload, cfg))
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return code


def cmd_project_check(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    xi = tuple(float(v) for v in args.xi.split(","))
    deltas = [float(v) for v in args.deltas.split(",")]
    rows = []
    prev = None
    monotone = True
    for d in deltas:
        b = BubbleParams(d, xi)
        defect = projection_defect(dom, b, ev)
        ratio = defect / d
        if prev is not None and ratio >= prev:
            monotone = False
        prev = ratio
        rows.append([d, defect, ratio])
    cfg = {"command": "project-check", "domain": args.domain,
           "xi": list(xi), "deltas": deltas, "seed": args.seed}
    _write_csv(args.out, ["delta", "defect", "defect_over_delta"], rows, cfg)
    return EXIT_OK if monotone else EXIT_VERIFY


def _suite_a1(dom, ev):
    checks = []
    deltas = [1e-1, 1e-2, 1e-3]
    ratios = []
    for d in deltas:
        b = BubbleParams(d, tuple(dom.interior_seed()))
        ratios.append(projection_defect(dom, b, ev) / d)
    checks.append({"name": "defect_over_delta_decreasing",
                   "values": ratios,
                   "ok": all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))})
    return checks


def _suite_a2(dom, ev):
    checks = []
    deltas = [1e-2, 1e-3, 1e-4, 1e-5]
    vals = [integrate_bubble_power(dom, BubbleParams(d, tuple(dom.interior_seed())),
                                   2.0).value for d in deltas]
    rep = fit_two_term_log(deltas, vals, C4**2 * OMEGA3, 0.02)
    checks.append({"name": "p2_leading_coefficient", **rep.as_dict(),
                   "ok": rep.verdict})
    for p, target in ((4.0 / 3.0, 4.0 / 3.0), (3.0, 1.0)):
        ds = [1e-2, 1e-3, 1e-4]
        vs = [integrate_bubble_power(dom, BubbleParams(d, tuple(dom.interior_seed())),
                                     p).value for d in ds]
        rep = fit_loglog_slope(ds, vs, target, 0.05)
        checks.append({"name": f"p{p:.4g}_rate", **rep.as_dict(),
                       "ok": rep.verdict})
    return checks


def _suite_a3(dom, ev, samples: int = 1_000_000):
    checks = []
    for kind in (1, 2, 3, 4):
        cs = [taylor_bound_check(kind, samples, 10.0, seed=s)[0]
              for s in range(5)]
        spread = (max(cs) - min(cs)) / max(cs)
        checks.append({"name": f"pointwise_bound_{kind}", "constants": cs,
                       "rel_spread": spread,
                       "ok": bool(math.isfinite(max(cs)) and spread <= 0.05)})
    return checks


def _a4_centers(dom):
    seed_pt = dom.interior_seed()
    off = np.zeros(4)
    off[0] = 0.4 * dom.inradius
    return tuple(seed_pt + off), tuple(seed_pt - off)


def _suite_a4(dom, ev):
    checks = []
    c1, c2 = _a4_centers(dom)
    scaled = []
    for d in (1e-2, 1e-3):
        val = interaction_integral(dom, BubbleParams(d, c1), BubbleParams(d, c2),
                                   2.0, 2.0).value
        scaled.append(val / (d**4 * abs(math.log(d * d))))
    ratio = scaled[1] / scaled[0]
    checks.append({"name": "pair_p2q2_log_rate", "scaled_values": scaled,
                   "ratio": ratio, "ok": bool(1 / 3 <= ratio <= 3)})
    ds = [1e-2, 3e-3, 1e-3]
    vals = [interaction_integral(dom, BubbleParams(d, c1), BubbleParams(d, c2),
                                 8.0 / 3.0, 4.0 / 3.0).value for d in ds]
    rep = fit_loglog_slope(ds, vals, 8.0 / 3.0, 0.15)
    checks.append({"name": "pair_p83_q43_rate", **rep.as_dict(), "ok": rep.verdict})
    return checks


def _suite_a5(dom, ev):
    checks = []
    c1, c2 = _a4_centers(dom)
    deltas = [3e-2, 1e-2, 3e-3]
    n1s, n2s = [], []
    for d in deltas:
        n1, n2 = interaction_norms(dom, BubbleParams(d, c1), BubbleParams(d, c2),
                                   0, ev)
        n1s.append(n1)
        n2s.append(n2)
    for name, ns in (("pair_sq_times_kernel_norm", n1s),
                     ("pair_product_kernel_norm", n2s)):
        rep = fit_loglog_slope(deltas, ns, 2.0, 0.15)
        checks.append({"name": name, **rep.as_dict(), "ok": rep.verdict})
    return checks


_SUITES = {"A1": _suite_a1, "A2": _suite_a2, "A3": _suite_a3,
           "A4": _suite_a4, "A5": _suite_a5}


def cmd_asymptotics(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    checks = _SUITES[args.lemma](dom, ev)
    ok = all(c["ok"] for c in checks)
    cfg = {"command": "asymptotics", "lemma": args.lemma,
           "domain": args.domain, "seed": args.seed}
    text = _json_dump(_report({"checks": checks, "all_ok": ok}, cfg))
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_ensemble(path: str):
    kv = read_keyvalue_file(path)
    try:
        m = int(kv.pop("m"))
        lambdas = [float(v) for v in kv.pop("lambdas").split(",")]
        mus = [float(v) for v in kv.pop("mus").split(",")]
        eta = float(kv.pop("eta", "0.25"))
    except KeyError as exc:
        raise ConfigError(f"ensemble file is missing the key {exc}")
    if len(lambdas) != m or len(mus) != m:
        raise ConfigError("lambdas/mus must list exactly m values")
    beta_spec = kv.pop("beta", None)
    sched_spec = kv.pop("beta_schedule", None)
    if beta_spec is None and sched_spec is None:
        raise ConfigError("ensemble file is missing the key 'beta' "
                          "(or 'beta_schedule')")
    beta = float(beta_spec) if beta_spec is not None else None
    boxes = []
    for i in range(m):
        dkey, xkey = f"box{i + 1}_d", f"box{i + 1}_xi"
        if dkey not in kv or xkey not in kv:
            raise ConfigError(f"ensemble file is missing the key '{dkey}'"
                              f" or '{xkey}'")
        dlo, dhi = (float(v) for v in kv.pop(dkey).split(","))
        xs = [float(v) for v in kv.pop(xkey).split(",")]
        if len(xs) != 8:
            raise ConfigError(f"{xkey} needs 8 reals (lo/hi per coordinate)")
        boxes.append(((dlo, dhi), (np.array(xs[0::2]), np.array(xs[1::2]))))
    deltas = [float(v) for v in kv.pop("deltas").split(",")] \
        if "deltas" in kv else [1e-2] * m
    if kv:
        raise ConfigError(f"unknown ensemble key '{sorted(kv)[0]}'")
    return m, lambdas, mus, beta, sched_spec, eta, boxes, deltas


def cmd_reduced_energy(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    m, lambdas, mus, beta, sched_spec, eta, boxes, deltas = \
        _parse_ensemble(args.ensemble)
    cfg = {"command": "reduced-energy", "domain": args.domain,
           "ensemble": args.ensemble, "mode": args.mode, "seed": args.seed}
    payload = {}
    code = EXIT_OK
    if sched_spec is not None:
        kind, _, val = sched_spec.partition(":")
        taus = []
        for (dlo, dhi), (lo, hi) in boxes:
            taus.append(ev.robin(0.5 * (lo + hi)))
        c1 = float(C4 / OMEGA3 * TABLE.A**2 * taus[0])
        sched = beta_schedule_from_spec(kind, float(val or 0.0), c1)
        rep = beta_admissible(sched, sorted(set(lambdas), reverse=True) or lambdas,
                              taus)
        payload["beta_admissibility"] = rep.as_dict()
        if not rep.verdict:
            code = EXIT_VERIFY
        beta_eff = sched(min(lambdas))
    else:
        beta_eff = beta
    try:
        rep = solve_reduced_system(ev, lambdas, mus, boxes, mode=args.mode,
                                   eta=eta, seed=args.seed, beta=beta_eff or 0.0)
        payload["solution"] = rep.as_dict()
    except SpikeLabError as exc:
        payload["solver_error"] = str(exc)
        code = EXIT_VERIFY
    else:
        bubbles = [BubbleParams(deltas[i], tuple(rep.xi_star[i]), mus[i])
                   for i in range(m)]
        ens = SpikeEnsemble(bubbles, lambdas, beta=beta_eff or 0.0, eta=eta)
        payload["energy_asymptotic"] = energy_terms_asymptotic(ens, dom, ev).as_dict()
        if args.quadrature:
            payload["energy_quadrature"] = \
                energy_terms_quadrature(ens, dom, ev).as_dict()
    text = _json_dump(_report(payload, cfg))
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return code


def cmd_radial_study(args):
    lambdas = [float(v) for v in args.lambdas.split(",")]
    rep = concentration_study(lambdas, mu=args.mu)
    rows = []
    for lam, u0, de, dv in zip(rep.lambdas, rep.u0, rep.delta_eff, rep.d_values):
        prof = solve_ball(lam, args.mu)
        rows.append([lam, u0, de, dv, profile_energy(prof)])
    cfg = {"command": "radial-study", "lambdas": lambdas, "mu": args.mu}
    _write_csv(args.out, ["lambda", "u0", "delta_eff", "d_lambda", "energy"],
               rows, cfg)
    summary = _report({"study": rep.as_dict()}, cfg)
    if args.report:
        _atomic_write(args.report, _json_dump(summary))
    return EXIT_OK


def cmd_verify_all(args):
    dom = _load_domain(args.domain)
    ev = RobinEvaluator(dom)
    sections = {}

    closure = []
    a_direct = C4 / ALPHA4
    a_closed = C4**3 * TABLE.I[3.0]
    a_quad = C4**3 * radial_integral_quadrature(3.0)
    closure.append({"name": "bubble_mass_three_ways",
                    "values": [a_direct, a_closed, a_quad],
                    "ok": bool(abs(a_direct - a_closed) <= 1e-8 * a_direct
                               and abs(a_direct - a_quad) <= 1e-8 * a_direct)})
    i4_quad = radial_integral_quadrature(4.0)
    closure.append({"name": "radial_integral_p4",
                    "values": [TABLE.I[4.0], i4_quad],
                    "ok": bool(abs(TABLE.I[4.0] - i4_quad) <= 1e-8 * i4_quad)})
    sections["constants"] = closure

    for name in ("A1", "A2", "A3", "A4", "A5"):
        checks = _SUITES[name](dom, ev) if name != "A3" \
            else _suite_a3(dom, ev, samples=200_000)
        sections[name] = checks

    # reduced-functional stationarity on the configured domain
    lo = dom.interior_seed() - 0.4 * dom.inradius
    hi = dom.interior_seed() + 0.4 * dom.inradius
    rep = solve_reduced_system(ev, [0.1], [1.0], [((40.0, 52.0), (lo, hi))],
                               mode="min", seed=args.seed)
    tau_star = ev.robin(rep.xi_star[0])
    from .reduced_energy import critical_d

    d_expect = critical_d(0.1, tau_star)
    sections["reduced_system"] = [{
        "name": "stationary_scale_identity",
        "d_star": rep.d_star[0], "expected": d_expect,
        "ok": bool(abs(rep.d_star[0] - d_expect) <= 1e-9 * d_expect)}]

    # degree of the Robin gradient around the stationary point
    half = 0.35 * dom.inradius
    box = (rep.xi_star[0] - half, rep.xi_star[0] + half)
    try:
        cert = brouwer_degree(ev, box, seed=args.seed)
        sections["degree"] = [{"name": "stationary_box_degree",
                               "certificate": cert.as_dict(),
                               "ok": bool(cert.degree != 0)}]
    except SpikeLabError as exc:
        sections["degree"] = [{"name": "stationary_box_degree",
                               "error": str(exc), "ok": False}]

    ok = all(c["ok"] for checks in sections.values() for c in checks)
    cfg = {"command": "verify-all", "domain": args.domain, "seed": args.seed}
    text = _json_dump(_report({"sections": sections, "all_ok": ok}, cfg))
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFY


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spikelab",
        description="Spike ensembles, Robin functions and reduced-energy "
                    "landscapes on bounded 4-d domains.")
    p.add_argument("--version", action="version", version=f"spikelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int,
                        default=int(os.environ.get("SPIKELAB_THREADS", "1")))
        if out_required:
            sp.add_argument("--out", required=True)
        else:
            sp.add_argument("--out", default=None)

    sp = sub.add_parser("constants", help="dump the constants table as JSON")
    sp.add_argument("--json", action="store_true", default=True)
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("robin", help="Robin function and gradient on a grid")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--grid", type=int, default=256)
    common(sp)
    sp.set_defaults(func=cmd_robin)

    sp = sub.add_parser("critical-points",
                        help="multistart search, optionally with a degree certificate")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--box", required=True,
                    help="8 reals: lo1,hi1,lo2,hi2,lo3,hi3,lo4,hi4")
    sp.add_argument("--certify", action="store_true")
    sp.add_argument("--starts", type=int, default=16)
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_critical_points)

    sp = sub.add_parser("project-check", help="projection-expansion defects")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--xi", required=True, help="4 reals, comma separated")
    sp.add_argument("--deltas", default="1e-1,1e-2,1e-3")
    common(sp)
    sp.set_defaults(func=cmd_project_check)

    sp = sub.add_parser("asymptotics", help="run one verification suite")
    sp.add_argument("--lemma", required=True, choices=sorted(_SUITES))
    sp.add_argument("--domain", required=True)
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_asymptotics)

    sp = sub.add_parser("reduced-energy",
                        help="critical points of the reduced functional")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--ensemble", required=True)
    sp.add_argument("--mode", choices=("min", "degree"), default="min")
    sp.add_argument("--quadrature", action="store_true",
                    help="also cross-validate the expansion by quadrature")
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_reduced_energy)

    sp = sub.add_parser("radial-study", help="radial concentration study")
    sp.add_argument("--lambdas", default="8,7,6,5,4")
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--report", default=None, help="optional JSON summary path")
    common(sp)
    sp.set_defaults(func=cmd_radial_study)

    sp = sub.add_parser("verify-all", help="aggregate verification suite")
    sp.add_argument("--domain", required=True)
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_verify_all)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        sys.stderr.write(f"spikelab: configuration error: {exc}\n")
        return EXIT_CONFIG
    except SpikeLabError as exc:
        sys.stderr.write(f"spikelab: {type(exc).__name__}: {exc}\n")
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())

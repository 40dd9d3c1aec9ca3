"""
Command-line front end.

Each subcommand writes JSON (sorted keys, indent 2) or CSV to ``--output``
or stdout. Exit codes: 0 success, 1 a property or verification check
failed (output is still written), 2 usage error.

Complex literals for ``--alpha`` take the form ``a+bi``, ``a-bi``, ``a`` or
``bi`` with decimal reals and no whitespace, comma separated per mode.
The environment variable OSCILLAB_SEED supplies the seed when ``--seed`` is
not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import flows
from . import poisson
from .classify import NONCLOSURE_SAMPLES, classify, nonclosure_check, period_census
from .core import PhasePoint, SignatureError, fiber_rotate, make_signature, reduce
from .invariants import invariant_set

SEED_ENV = "OSCILLAB_SEED"
DRIFT_TOL = 1e-9
HOPF_TOL = 1e-12
SCAN_ACTION_LOW = 0.2
SCAN_ACTION_HIGH = 2.0
SCAN_DIAG_TAU = 100.0

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_FULL = re.compile(rf"^([+-]?{_NUM})([+-]{_NUM})i$")
_REAL = re.compile(rf"^[+-]?{_NUM}$")
_IMAG = re.compile(rf"^([+-]?{_NUM})i$")


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` / ``a-bi`` / ``a`` / ``bi``."""
    s = text.strip()
    if mt := _FULL.match(s):
        return complex(float(mt.group(1)), float(mt.group(2)))
    if _REAL.match(s):
        return complex(float(s), 0.0)
    if mt := _IMAG.match(s):
        return complex(0.0, float(mt.group(1)))
    raise UsageError(f"malformed complex literal {text!r}; expected a+bi")


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


@dataclass
class RunConfig:
    """Resolved options shared by the subcommands; defaults come from the library."""

    m: tuple = (1, 2)
    omega: float = 1.0
    seed: int = poisson.DEFAULT_SEED
    h: float = poisson.DEFAULT_H
    tol: float = poisson.DEFAULT_TOL
    eps_sing: float = flows.EPS_SING
    rtol: float = flows.RTOL
    atol: float = flows.ATOL
    output: str | None = None
    jobs: int = 1

    def validate(self):
        for name in ("h", "tol", "eps_sing", "rtol", "atol", "omega"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise UsageError(f"--{name.replace('_', '-')} must be positive, got {v}")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")

    @property
    def signature(self):
        try:
            return make_signature(self.m, self.omega)
        except SignatureError as exc:
            raise UsageError(str(exc)) from None

    def flow_options(self, **kw) -> flows.FlowOptions:
        return flows.FlowOptions(eps_sing=self.eps_sing, rtol=self.rtol, atol=self.atol, **kw)


DEFAULTS = RunConfig()


def resolve_seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return DEFAULTS.seed
    try:
        return int(env, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _config(args) -> RunConfig:
    cfg = RunConfig(
        m=tuple(parse_int_list(args.m)),
        omega=args.omega,
        seed=resolve_seed(getattr(args, "seed", None)),
        h=getattr(args, "h", DEFAULTS.h),
        tol=getattr(args, "tol", DEFAULTS.tol),
        eps_sing=getattr(args, "eps_sing", DEFAULTS.eps_sing),
        rtol=getattr(args, "rtol", DEFAULTS.rtol),
        atol=getattr(args, "atol", DEFAULTS.atol),
        output=args.output,
        jobs=getattr(args, "jobs", 1),
    )
    cfg.validate()
    return cfg


def _alpha(args, sig) -> PhasePoint:
    values = [parse_complex(v) for v in args.alpha.split(",")]
    if len(values) != sig.N:
        raise UsageError(f"--alpha has {len(values)} entries, signature has {sig.N}")
    return PhasePoint(values)


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _trace_csv(trace: flows.OrbitTrace, N: int, param: str = "tau") -> str:
    if trace.space == "upsilon":
        header = [param, "J0", "J1", "J2", "J3", "drift"]
        rows = [[t, *j, d] for t, j, d in zip(trace.taus, trace.states, trace.drift)]
        return _csv(header, rows)
    sym = "beta" if trace.space == "reduced" else "alpha"
    header = [param]
    for n in range(N):
        header += [f"re_{sym}{n}", f"im_{sym}{n}"]
    header += ["J0", "J1", "J2", "J3"] if N == 2 else ["J0"]
    header.append("drift")
    rows = []
    for t, s, j, d in zip(trace.taus, trace.states, trace.invariants, trace.drift):
        row = [t]
        for z in s:
            row += [float(z.real), float(z.imag)]
        rows.append(row + [float(v) for v in j] + [d])
    return _csv(header, rows)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _config(args)
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    try:
        rep = poisson.verify_algebra(cfg.signature, args.relation, args.samples, cfg.seed, cfg.h, cfg.tol, args.exact)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(dump_json(rep.to_dict()), cfg.output)
    return 0 if rep.passed else 1


def cmd_orbit(args) -> int:
    cfg = _config(args)
    sig = cfg.signature
    x = _alpha(args, sig)
    if not args.dt > 0 or args.t_max < 0:
        raise UsageError("--dt must be positive and --t-max non-negative")
    trace = flows.time_orbit(x, sig, args.t_max, args.dt)
    _emit(_trace_csv(trace, sig.N, "t"), cfg.output)
    return 0 if float(trace.drift.max()) < DRIFT_TOL else 1


def _generator(args, N: int) -> flows.Generator:
    kind = args.generator
    if kind is None:
        kind = "direction" if args.n is not None else "J0"
    if kind == "J0":
        return flows.Generator.j0()
    if kind == "J3":
        return flows.Generator.j3()
    if args.n is None:
        raise UsageError("--generator direction needs --n")
    try:
        return flows.Generator.direction(parse_float_list(args.n))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_flow(args) -> int:
    cfg = _config(args)
    sig = cfg.signature
    x = _alpha(args, sig)
    g = _generator(args, sig.N)
    if g.kind != "J0" and sig.N != 2:
        raise UsageError("J3 and direction generators need two modes")
    if args.tau_max < 0 or not args.sample_step > 0:
        raise UsageError("--tau-max must be non-negative and --sample-step positive")
    taus = np.arange(0.0, args.tau_max + 0.5 * args.sample_step, args.sample_step)
    taus = np.append(taus[taus < args.tau_max], args.tau_max) if args.tau_max > 0 else np.array([0.0])
    code = 0
    if args.space == "gamma":
        try:
            trace, report = flows.flow_gamma(x, sig, g, args.tau_max, cfg.flow_options(sample_step=args.sample_step))
        except flows.SingularInputError as exc:
            raise UsageError(str(exc)) from None
        if float(trace.drift.max()) > 1e-6:
            code = 1
    else:
        b = reduce(x, sig)
        if args.space == "reduced":
            trace = flows.reduced_orbit(b, g, taus)
        else:
            if g.kind == "J0":
                raise UsageError("J0 acts trivially on the invariant space; use a direction or J3")
            n = g.n if g.kind == "direction" else flows.E3
            trace = flows.upsilon_orbit(invariant_set(b), n, taus)
        report = flows.SingularityReport(hit=False)
        if sig.N == 2:
            report.normals = flows._pole_normals(invariant_set(b).four_vector)
    _emit(_trace_csv(trace, sig.N), cfg.output)
    report_text = dump_json(report.to_dict())
    target = args.report or (cfg.output + ".report.json" if cfg.output else None)
    if target is None:
        sys.stderr.write(report_text)
    else:
        _emit(report_text, target)
    return code


def _scan_one(payload):
    """One scan sample: both singular directions and the two diagonal flows."""
    m, omega, alpha, eps_sing, rtol, atol, tau_sing, tau_diag, idx = payload
    sig = make_signature(m, omega)
    x = PhasePoint(alpha)
    opts = flows.FlowOptions(eps_sing=eps_sing, rtol=rtol, atol=atol, crosscheck=False)
    rows = []
    for plane in (0, 1):
        n = flows.singular_direction(x, sig, plane)
        _, rep = flows.flow_gamma(x, sig, flows.Generator.direction(n), tau_sing, opts)
        ok = rep.hit and rep.plane == plane and rep.tau_star < tau_sing and rep.min_action < eps_sing
        rows.append([idx, f"plane{plane}", plane, int(rep.hit), -1 if rep.plane is None else rep.plane,
                     rep.tau_star if rep.hit else math.nan, rep.min_action, int(ok)])
    for name, g in (("J0", flows.Generator.j0()), ("J3", flows.Generator.j3())):
        _, rep = flows.flow_gamma(x, sig, g, tau_diag, opts)
        rows.append([idx, name, -1, int(rep.hit), -1 if rep.plane is None else rep.plane,
                     rep.tau_star if rep.hit else math.nan, rep.min_action, int(not rep.hit)])
    return rows


SCAN_HEADER = ["sample", "flow", "expected_plane", "hit", "plane", "tau_star", "min_action", "pass"]


def scan_singular(cfg: RunConfig, samples: int, tau_sing: float = 2 * math.pi, tau_diag: float = SCAN_DIAG_TAU):
    """Rows of the singularity scan in sample order."""
    sig = cfg.signature
    if sig.N != 2:
        raise UsageError("scan-singular needs a two-mode signature")
    rng = np.random.default_rng(cfg.seed)
    payloads = []
    for i in range(samples):
        actions = rng.uniform(SCAN_ACTION_LOW, SCAN_ACTION_HIGH, size=2)
        angles = rng.uniform(0.0, 2 * math.pi, size=2)
        a = PhasePoint.from_action_angle(actions, angles).alpha
        payloads.append((sig.m, sig.omega, a, cfg.eps_sing, cfg.rtol, cfg.atol, tau_sing, tau_diag, i))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            chunks = list(pool.map(_scan_one, payloads))
    else:
        chunks = [_scan_one(p) for p in payloads]
    return [r for c in chunks for r in c]


def cmd_scan(args) -> int:
    cfg = _config(args)
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    rows = scan_singular(cfg, args.samples, args.tau_max, args.diag_tau_max)
    _emit(_csv(SCAN_HEADER, rows), cfg.output)
    failed = sum(1 for r in rows if not r[-1])
    sys.stderr.write(f"scan-singular: {len(rows) - failed}/{len(rows)} checks passed\n")
    return 0 if failed == 0 else 1


def cmd_classify(args) -> int:
    cfg = _config(args)
    sig = cfg.signature
    try:
        census = period_census(sig)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = classify(sig).to_dict()
    out.update(census.to_dict())
    out["m"] = list(sig.m)
    out["omega"] = sig.omega
    out["distinct_periods"] = len(census.distinct_periods())
    code = 0
    if args.nonclosure is not None:
        try:
            rep = nonclosure_check(sig, parse_int_list(args.nonclosure), args.samples, cfg.seed)
        except (ValueError, IndexError) as exc:
            raise UsageError(str(exc)) from None
        out["nonclosure"] = rep.to_dict()
        if rep.energy_residual > 1e-8:
            code = 1
    _emit(dump_json(out), cfg.output)
    return code


def cmd_hopf(args) -> int:
    cfg = _config(args)
    sig = cfg.signature
    if sig.N != 2:
        raise UsageError("hopf needs a two-mode signature")
    if not args.energy > 0 or args.count < 1:
        raise UsageError("--energy must be positive and --count at least 1")
    radius = args.energy / (2 * sig.omega)
    phases = np.linspace(0.0, 2 * math.pi, 8, endpoint=False)
    rows, worst = [], 0.0
    for i, (b, inv) in enumerate(flows.hopf_sample(sig, args.energy, args.count, cfg.seed)):
        four = inv.four_vector
        r_err = abs(float(np.linalg.norm(four[1:])) - radius)
        f_err = max(float(np.max(np.abs(invariant_set(fiber_rotate(b, g)).jmat - inv.jmat))) for g in phases)
        worst = max(worst, r_err, f_err)
        rows.append([i, float(b.beta[0].real), float(b.beta[0].imag), float(b.beta[1].real), float(b.beta[1].imag),
                     *[float(v) for v in four], r_err, f_err])
    header = ["sample", "re_beta0", "im_beta0", "re_beta1", "im_beta1", "J0", "J1", "J2", "J3", "radius_error", "fiber_error"]
    _emit(_csv(header, rows), cfg.output)
    return 0 if worst < HOPF_TOL else 1


# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, m_default: str | None = None, seed: bool = False):
    if m_default is None:
        p.add_argument("--m", required=True, help="comma-separated divisors, e.g. 1,2")
    else:
        p.add_argument("--m", default=m_default, help=f"comma-separated divisors (default {m_default})")
    p.add_argument("--omega", type=float, default=DEFAULTS.omega, help=f"base frequency (default {DEFAULTS.omega})")
    p.add_argument("--output", default=None, help="output file (default stdout)")
    if seed:
        p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                       help=f"RNG seed (default ${SEED_ENV} or {DEFAULTS.seed:#x})")


def _flow_tols(p: argparse.ArgumentParser):
    p.add_argument("--eps-sing", type=float, default=DEFAULTS.eps_sing, help=f"singular action threshold (default {DEFAULTS.eps_sing})")
    p.add_argument("--rtol", type=float, default=DEFAULTS.rtol, help=f"integrator relative tolerance (default {DEFAULTS.rtol})")
    p.add_argument("--atol", type=float, default=DEFAULTS.atol, help=f"integrator absolute tolerance (default {DEFAULTS.atol})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscillab", description=__doc__.strip().splitlines()[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a bracket relation at random points (JSON)")
    _common(p, seed=True)
    p.add_argument("--relation", required=True, choices=poisson.RELATIONS)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--h", type=float, default=DEFAULTS.h, help=f"finite-difference step (default {DEFAULTS.h})")
    p.add_argument("--tol", type=float, default=DEFAULTS.tol, help=f"pass threshold (default {DEFAULTS.tol})")
    p.add_argument("--exact", action="store_true", help="use exact gradients instead of finite differences")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("orbit", help="time evolution with invariant drift (CSV)")
    _common(p)
    p.add_argument("--alpha", required=True, help="complex amplitudes, e.g. 1+0i,1+0i")
    p.add_argument("--t-max", type=float, default=40.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("flow", help="symmetry flow in gamma, reduced or upsilon space (CSV + JSON report)")
    _common(p)
    p.add_argument("--alpha", required=True, help="complex amplitudes, e.g. 1+0i,1+0i")
    p.add_argument("--space", choices=("gamma", "reduced", "upsilon"), default="gamma")
    p.add_argument("--generator", choices=("J0", "J3", "direction"), default=None,
                   help="generator kind (default: direction when --n is given, else J0)")
    p.add_argument("--n", default=None, help="rotation axis, e.g. 0,-1,0 (normalised)")
    p.add_argument("--tau-max", type=float, default=2 * math.pi)
    p.add_argument("--sample-step", type=float, default=0.01)
    p.add_argument("--report", default=None, help="singularity report path (default OUTPUT.report.json or stderr)")
    _flow_tols(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("scan-singular", help="singular-direction and diagonal-flow scan (CSV)")
    _common(p, m_default="1,2", seed=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tau-max", type=float, default=2 * math.pi, help="horizon for singular directions")
    p.add_argument("--diag-tau-max", type=float, default=SCAN_DIAG_TAU, help="horizon for J0 and J3 flows")
    p.add_argument("--jobs", type=int, default=1)
    _flow_tols(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("classify", help="class and period census of a signature (JSON)")
    _common(p, seed=True)
    p.add_argument("--nonclosure", default=None, help="zero-based subset, e.g. 0,1, for the non-closure check")
    p.add_argument("--samples", type=int, default=NONCLOSURE_SAMPLES)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("hopf", help="uniform samples on the energy sphere with their projections (CSV)")
    _common(p, m_default="1,2", seed=True)
    p.add_argument("--energy", type=float, default=1.5)
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(func=cmd_hopf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"oscillab {args.command}: error: {exc}\n")
        return 2


run_cli = main


if __name__ == "__main__":
    sys.exit(main())

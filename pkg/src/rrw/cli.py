"""Command-line front end.

Subcommands: urn, drift, walk, couple, classify, solomon, threshold, sweep.
Outputs are byte-deterministic given (config, seed, version): every file
starts with a provenance header (CSV comment lines or a JSON envelope).
Exit codes: 0 success, 2 usage error, 3 precondition/hypothesis violation,
4 budget cap.  Errors go to stderr as single-line JSON {error, detail}.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

from . import __version__
from .criteria import ClassifyConfig, classify, solomon_check
from .coupling import (couple_function_order, couple_mass_order,
                       couple_off_center, run_coupling_batch)
from .drift import DriftConfig, clt_check, drift_parts_profile, estimate_delta_inf
from .errors import ConfigError, RrwError
from .funcs import parse_function
from .streams import Stream
from .transition import BUDGET_EXHAUSTED, ThresholdBudget, find_threshold, sweep
from .urn import UrnState, exact_urn_dp, simulate_urn
from .walk import (EnvironmentSpec, WalkStop, exact_walk_oracle, simulate_walk,
                   walk_functionals, DEFAULT_CAP)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_env(text):
    """Environment spec: 'w:a,l' (all sites) or 'w0:a,l;wp:a,l[;wm:a,l]'."""
    parts = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"bad environment chunk {chunk!r}; expected key:alpha,l")
        key, val = chunk.split(":", 1)
        nums = val.split(",")
        if len(nums) != 2:
            raise ConfigError(f"bad environment chunk {chunk!r}; expected key:alpha,l")
        try:
            parts[key.strip()] = UrnState(float(nums[0]), float(nums[1]))
        except ValueError:
            raise ConfigError(f"bad numbers in environment chunk {chunk!r}")
    if "w" in parts:
        return EnvironmentSpec.homogeneous(parts["w"])
    if "w0" not in parts or "wp" not in parts:
        raise ConfigError("environment needs 'w:' or both 'w0:' and 'wp:'")
    return EnvironmentSpec(w0=parts["w0"], w_plus=parts["wp"], w_minus=parts.get("wm"))


def _parse_stop(text, cap):
    kind, _, arg = text.partition(":")
    if kind == "horizon":
        return WalkStop("horizon", n=int(arg), cap=max(cap, int(arg)))
    if kind == "hit":
        return WalkStop("hit_level", a=int(arg), cap=cap)
    if kind == "either":
        return WalkStop("hit_either", a=int(arg), cap=cap)
    raise ConfigError(f"bad stop spec {text!r}; expected horizon:N, hit:A or either:A")


def _load_config(path):
    with open(path) as fh:
        text = fh.read().strip()
    if not text:
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    return data


def _merge_config(args, parser, argv):
    """Apply config-file values under explicit CLI flags; flags win."""
    if not getattr(args, "config", None):
        return args
    data = _load_config(args.config)
    valid = {a.dest for a in parser._actions}
    valid.discard("help")
    explicit = _explicit_dests(parser, argv)
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        if key not in explicit:
            setattr(args, key, value)
    return args


def _explicit_dests(parser, argv):
    """Dest names of options that actually appeared on the command line."""
    explicit = set()
    for action in parser._actions:
        for opt in action.option_strings:
            if opt in argv or any(a.startswith(opt + "=") for a in argv):
                explicit.add(action.dest)
    return explicit


def _config_echo(args, skip=("out", "config", "func")):
    d = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or callable(v):
            continue
        d[k] = v
    return d


class _Output:
    def __init__(self, args):
        self.path = getattr(args, "out", None)
        self.fmt = getattr(args, "format", "csv")
        self.provenance = {
            "version": __version__,
            "command": args.command,
            "config": _config_echo(args),
        }

    def write_csv(self, render):
        buf = io.StringIO()
        buf.write(f"# rrw {__version__}\n")
        buf.write(f"# config {json.dumps(self.provenance['config'], sort_keys=True)}\n")
        render(buf)
        self._emit(buf.getvalue())

    def write_json(self, result):
        payload = {"provenance": self.provenance, "result": result}
        self._emit(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def write(self, render_csv=None, json_result=None):
        if self.fmt == "json" or render_csv is None:
            self.write_json(json_result)
        else:
            self.write_csv(render_csv)

    def _emit(self, text):
        if self.path:
            with open(self.path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _add_common(sp, default_format="csv"):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("csv", "json"), default=default_format)
    sp.add_argument("--config", default=None, help="JSON config file; flags override")


def _cmd_urn(args):
    f = parse_function(args.f)
    init = UrnState(args.alpha0, args.l0)
    out = _Output(args)
    if args.exact:
        if args.N is None:
            raise ConfigError("--exact needs --N")
        law = exact_urn_dp(f, init, args.N, keep_table=True)
        out.write(render_csv=law.to_csv,
                  json_result={"horizon": law.horizon,
                               "final_row": [float(p) for p in law.final_row],
                               "delta_mean": float(law.delta_mean[-1])})
        return EXIT_OK
    if args.steps is None:
        raise ConfigError("need --steps N (simulation) or --exact --N N (DP law)")
    traj = simulate_urn(f, init, args.steps, Stream(args.seed))
    out.write(render_csv=traj.to_csv,
              json_result={"final_alpha": float(traj.alphas[-1]),
                           "final_l": float(traj.ls[-1])})
    return EXIT_OK


def _cmd_drift(args):
    f = parse_function(args.f)
    init = UrnState(args.alpha0, args.l0)
    out = _Output(args)
    if args.mode == "estimate":
        config = DriftConfig(n_dp=args.n_dp, n_mc=args.n_mc, replicas=args.replicas,
                             seed=args.seed, method=args.method)
        est = estimate_delta_inf(f, init, config)
        out.write_json(est.to_json_dict())
        return EXIT_OK
    if args.mode == "profile":
        prof = drift_parts_profile(f, init, args.N, args.replicas,
                                   stream=args.seed, exact=args.exact)
        out.write(render_csv=prof.to_csv,
                  json_result={"pos_exponent": prof.pos_exponent,
                               "neg_exponent": prof.neg_exponent,
                               "tail_exponent": prof.tail_exponent})
        return EXIT_OK
    rep = clt_check(f, args.p, args.n, args.replicas, stream=args.seed,
                    window=args.window)
    out.write_json(rep.to_json_dict())
    return EXIT_OK


def _cmd_walk(args):
    f = parse_function(args.f)
    env = _parse_env(args.env)
    out = _Output(args)
    if args.mode == "oracle":
        orc = exact_walk_oracle(f, env, args.horizon,
                                levels=tuple(range(1, args.horizon + 1)))
        out.write_json({
            "e_m_plus": [float(v) for v in orc.e_m_plus],
            "final_dist": {str(k): v for k, v in sorted(orc.final_dist.items())},
            "hit_prob": {str(k): v for k, v in sorted(orc.hit_prob.items())},
            "total_prob": orc.total_prob,
        })
        return EXIT_OK
    stop = _parse_stop(args.stop, args.cap)
    record = args.mode == "functionals" or stop.kind == "horizon"
    rec = simulate_walk(f, env, stop, Stream(args.seed), record_path=record)
    if args.mode == "functionals":
        series = walk_functionals(rec, f)
        result = series.to_json_dict()
        result["T"] = rec.steps
        result["status"] = rec.status
        result["U"] = rec.U
        result["Dplus"] = rec.d_plus
        out.write_json(result)
    else:
        out.write(render_csv=rec.to_csv,
                  json_result={"steps": rec.steps, "final": rec.final_pos,
                               "status": rec.status, "U": rec.U,
                               "Dplus": rec.d_plus})
    return EXIT_BUDGET if rec.status == "cap" else EXIT_OK


def _cmd_couple(args):
    f = parse_function(args.f)
    out = _Output(args)
    if args.streams > 1:
        kwargs = _couple_kwargs(args, f)
        violations = run_coupling_batch(args.kind, args.n, args.streams,
                                        Stream(args.seed), **kwargs)
        out.write_json({"kind": args.kind, "streams": args.streams, "n": args.n,
                        "violations": violations})
        return EXIT_OK
    if args.kind == "order":
        run = couple_function_order(f, parse_function(args.g),
                                    UrnState(args.alpha0, args.l0),
                                    args.n, Stream(args.seed))
    elif args.kind == "offcenter":
        run = couple_off_center(f, args.alpha, args.l, args.n, Stream(args.seed))
    else:
        run = couple_mass_order(f, args.l0, args.l1, args.n, Stream(args.seed))
    out.write(render_csv=run.to_csv,
              json_result={"kind": run.kind, "violations": run.violations})
    return EXIT_OK


def _couple_kwargs(args, f):
    if args.kind == "order":
        return {"f": f, "g": parse_function(args.g),
                "init": UrnState(args.alpha0, args.l0)}
    if args.kind == "offcenter":
        return {"f": f, "alpha": args.alpha, "l": args.l}
    return {"f": f, "l0": args.l0, "l1": args.l1}


def _cmd_classify(args):
    f = parse_function(args.f)
    env = _parse_env(args.env)
    budget = ClassifyConfig(drift=DriftConfig(n_dp=args.n_dp, n_mc=args.n_mc,
                                              replicas=args.replicas,
                                              seed=args.seed, method=args.method))
    verdict = classify(f, env, budget)
    _Output(args).write_json(verdict.to_json_dict())
    return EXIT_OK


def _cmd_solomon(args):
    if args.red is not None or args.blue is not None:
        if args.red is None or args.blue is None:
            raise ConfigError("give both --red and --blue, or --alpha0/--l0")
        init = (args.red, args.blue)
    else:
        init = UrnState(args.alpha0, args.l0)
    rep = solomon_check(init, stream=args.seed, mc_horizon=args.mc_horizon,
                        mc_replicas=args.mc_replicas)
    _Output(args).write_json(rep.to_json_dict())
    return EXIT_OK


def _threshold_budget(args):
    lo, hi = (float(v) for v in args.range.split(","))
    return ThresholdBudget(search_range=(lo, hi), replicas0=args.replicas0,
                           replicas_max=args.replicas_max, n_trunc=args.n_trunc,
                           max_evals=args.max_evals, seed=args.seed,
                           method=args.method)


def _cmd_threshold(args):
    f_base = parse_function(args.f)
    budget = _threshold_budget(args)
    result = find_threshold(args.axis, f_base, fixed_other_param=args.l,
                            target=args.target, tol=args.tol, budget=budget)
    _Output(args).write_json(result.to_json_dict())
    return EXIT_BUDGET if result.status == BUDGET_EXHAUSTED else EXIT_OK


def _cmd_sweep(args):
    f_base = parse_function(args.f)
    grid = [float(v) for v in args.grid.split(",")]
    budget = ThresholdBudget(search_range=(min(grid), max(grid)),
                             replicas0=args.replicas, n_trunc=args.n_trunc,
                             seed=args.seed, method=args.method)
    curve = sweep(args.axis, f_base, grid, fixed_other_param=args.l, budget=budget)
    out = _Output(args)
    out.write(render_csv=curve.to_csv,
              json_result={"params": list(curve.params),
                           "mean": [float(v) for v in curve.mean],
                           "stderr": [float(v) for v in curve.stderr],
                           "monotone_flags": list(curve.monotone_flags)})
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="rrw", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rrw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("urn", help="simulate an urn or compute its exact DP law")
    p.add_argument("--f", required=True)
    p.add_argument("--alpha0", type=float, default=0.5)
    p.add_argument("--l0", type=float, default=2.0)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--N", type=int, default=None, help="DP horizon (with --exact)")
    p.add_argument("--steps", type=int, default=None, help="simulation length")
    _add_common(p)
    p.set_defaults(func=_cmd_urn)

    p = sub.add_parser("drift", help="drift estimation, parts profile, CLT check")
    p.add_argument("--mode", choices=("estimate", "profile", "clt"), default="estimate")
    p.add_argument("--f", required=True)
    p.add_argument("--alpha0", type=float, default=0.5)
    p.add_argument("--l0", type=float, default=2.0)
    p.add_argument("--n-dp", type=int, default=10_000)
    p.add_argument("--n-mc", type=int, default=1_000_000)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--method", choices=("dp", "mc", "dp+mc+tail"), default="dp")
    p.add_argument("--N", type=int, default=10_000, help="profile horizon")
    p.add_argument("--exact", action="store_true", help="profile from the exact DP")
    p.add_argument("--p", type=float, default=0.5, help="CLT fixed point")
    p.add_argument("--n", type=int, default=10_000, help="CLT horizon")
    p.add_argument("--window", type=float, default=0.1)
    _add_common(p, default_format="json")
    p.set_defaults(func=_cmd_drift)

    p = sub.add_parser("walk", help="simulate a walk, its functionals, or the exact oracle")
    p.add_argument("--mode", choices=("simulate", "functionals", "oracle"),
                   default="simulate")
    p.add_argument("--f", required=True)
    p.add_argument("--env", default="w:0.5,2")
    p.add_argument("--stop", default="horizon:10000")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--horizon", type=int, default=12, help="oracle horizon (<= 16)")
    _add_common(p)
    p.set_defaults(func=_cmd_walk)

    p = sub.add_parser("couple", help="pathwise couplings with dominance checks")
    p.add_argument("--kind", choices=("order", "offcenter", "massorder"), required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--g", default=None, help="dominating function (kind=order)")
    p.add_argument("--alpha0", type=float, default=0.5, help="shared init (kind=order)")
    p.add_argument("--alpha", type=float, default=0.75, help="off-center proportion")
    p.add_argument("--l", type=float, default=1.0, help="off-center mass scale")
    p.add_argument("--l0", type=float, default=1.0)
    p.add_argument("--l1", type=float, default=2.0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--streams", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("classify", help="recurrence/transience verdict")
    p.add_argument("--f", required=True)
    p.add_argument("--env", default="w:0.5,2")
    p.add_argument("--n-dp", type=int, default=4_000)
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--replicas", type=int, default=4_000)
    p.add_argument("--method", choices=("dp", "mc", "dp+mc+tail"), default="dp")
    _add_common(p, default_format="json")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("solomon", help="Solomon criterion for the identity f")
    p.add_argument("--alpha0", type=float, default=0.5)
    p.add_argument("--l0", type=float, default=2.0)
    p.add_argument("--red", type=int, default=None, help="integer red ball count")
    p.add_argument("--blue", type=int, default=None)
    p.add_argument("--mc-horizon", type=int, default=100_000)
    p.add_argument("--mc-replicas", type=int, default=1_000)
    _add_common(p, default_format="json")
    p.set_defaults(func=_cmd_solomon)

    p = sub.add_parser("threshold", help="bracket the E[delta_inf] = 1 crossing")
    p.add_argument("--axis", choices=("u", "l"), required=True)
    p.add_argument("--f", required=True, help="base function (axis=u) or fixed f (axis=l)")
    p.add_argument("--l", type=float, default=1.0,
                   help="fixed mass scale for axis=u (ignored for axis=l)")
    p.add_argument("--range", required=True, help="search range LO,HI")
    p.add_argument("--target", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=0.1, help="relative bracket width")
    p.add_argument("--replicas0", type=int, default=4_000)
    p.add_argument("--replicas-max", type=int, default=64_000)
    p.add_argument("--n-trunc", type=int, default=4_000)
    p.add_argument("--max-evals", type=int, default=40)
    p.add_argument("--method", choices=("mc", "dp"), default="mc")
    _add_common(p, default_format="json")
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("sweep", help="E[delta_inf] curve over a parameter grid")
    p.add_argument("--axis", choices=("u", "l"), required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--grid", required=True, help="comma-separated ascending values")
    p.add_argument("--replicas", type=int, default=4_000)
    p.add_argument("--n-trunc", type=int, default=4_000)
    p.add_argument("--method", choices=("mc", "dp"), default="mc")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sub = _subparser_for(parser, args.command)
        args = _merge_config(args, sub, argv)
        return args.func(args)
    except _UsageError as e:
        _err("UsageError", str(e))
        return EXIT_USAGE
    except RrwError as e:
        _err(type(e).__name__, str(e))
        return e.exit_code
    except (ValueError, OSError) as e:
        _err(type(e).__name__, str(e))
        return EXIT_USAGE


def _subparser_for(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _err(name, detail):
    sys.stderr.write(json.dumps({"error": name, "detail": detail}) + "\n")


if __name__ == "__main__":
    sys.exit(main())

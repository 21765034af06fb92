"""Command-line front end: configuration, serialization, and the verify suite.

Every output artifact carries its full run configuration in the header, so
identical configuration and inputs reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass

from . import __version__, acceptance, determinants, sibuya
from .asym import asr_roots, make_constants
from .core_ode import IntegratorConfig
from .errors import DomainError, PtspecError
from .params import accumulation_angles, make_params
from .sweep import detect_merges, sweep_eps, write_summary_json, write_sweep_csv
from .zeros import find_zeros, rect_region

_INT_KEYS = ("max_steps",)
_TOL_KEYS = ("rel_tol", "abs_tol", "initial_step", "min_step", "max_steps", "pole_guard")
_RUN_KEYS = ("output", "format", "parallelism", "seed")


def _g(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class RunConfig:
    tolerances: IntegratorConfig
    output: str | None
    format: str
    parallelism: int
    seed: int

    def _hashed_items(self) -> list:
        items = [("artifact_version", __version__)]
        for k in _TOL_KEYS:
            v = getattr(self.tolerances, k)
            items.append((k, str(v) if k in _INT_KEYS else _g(float(v))))
        items.append(("format", self.format))
        items.append(("parallelism", str(self.parallelism)))
        items.append(("seed", str(self.seed)))
        return items

    def header_items(self) -> list:
        return self._hashed_items() + [("config_hash", self.digest())]

    def digest(self) -> str:
        text = "".join(f"{k}={v}\n" for k, v in self._hashed_items())
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def _parse_config_file(path: str) -> dict:
    out: dict = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{ln}: expected key=value, got {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in _TOL_KEYS + _RUN_KEYS:
                raise DomainError(f"{path}:{ln}: unknown config key {k!r}")
            out[k] = v
    return out


def _build_config(args) -> RunConfig:
    vals: dict = {}
    if getattr(args, "config", None):
        vals.update(_parse_config_file(args.config))
    for k in _TOL_KEYS + _RUN_KEYS:
        flag = getattr(args, k, None)
        if flag is not None:
            vals[k] = flag
    tol_kwargs = {}
    for k in _TOL_KEYS:
        if k in vals:
            tol_kwargs[k] = int(vals[k]) if k in _INT_KEYS else float(vals[k])
    fmt = str(vals.get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise DomainError(f"format must be csv or json, got {fmt!r}")
    par = int(vals.get("parallelism", 1))
    if par < 1:
        raise DomainError(f"parallelism must be >= 1, got {par}")
    return RunConfig(
        tolerances=IntegratorConfig(**tol_kwargs),
        output=vals.get("output"),
        format=fmt,
        parallelism=par,
        seed=int(vals.get("seed", 0)),
    )


def _emit(rc: RunConfig, columns, rows, extra_meta=()) -> None:
    meta = list(rc.header_items()) + list(extra_meta)
    if rc.format == "json":
        doc = {
            "meta": {k: v for k, v in meta},
            "columns": list(columns),
            "rows": [list(r) for r in rows],
        }
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    else:
        lines = [f"# {k}={v}" for k, v in meta]
        lines.append(",".join(columns))
        lines.extend(",".join(r) for r in rows)
        text = "\n".join(lines) + "\n"
    if rc.output:
        with open(rc.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params_for(args) -> tuple:
    """Resolve the oscillator from --M/--eps or the --m shorthand."""
    level = getattr(args, "level", None)
    if getattr(args, "m", None) is not None:
        if args.M is not None or args.eps is not None:
            raise DomainError("give either --m or --M/--eps, not both")
        lv = level if level is not None else 1
        return make_params(M=lv, eps=args.m - 2.0 * lv, level=lv), lv
    if args.M is None or args.eps is None:
        raise DomainError("need --M and --eps (or the --m shorthand)")
    lv = level if level is not None else args.M
    return make_params(M=args.M, eps=args.eps, level=lv), lv


def _parse_points(specs) -> list:
    pts = []
    for s in specs:
        parts = s.split(",")
        try:
            if len(parts) == 1:
                pts.append(complex(float(parts[0]), 0.0))
            elif len(parts) == 2:
                pts.append(complex(float(parts[0]), float(parts[1])))
            else:
                raise ValueError
        except ValueError:
            raise DomainError(f"bad point {s!r}; expected re or re,im") from None
    return pts


def _cmd_params(args, rc: RunConfig) -> int:
    p, _ = _params_for(args)
    pair = accumulation_angles(p)
    lo, hi = min(pair), max(pair)
    doc = {
        "M": p.M,
        "eps": p.eps,
        "m": p.m,
        "rho": p.rho,
        "level": p.level,
        "omega_re": p.omega.real,
        "omega_im": p.omega.imag,
        "accumulation_angle_plus": hi,
        "accumulation_angle_minus": lo,
    }
    sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return 0


def _cmd_eval_f(args, rc: RunConfig) -> int:
    p, _ = _params_for(args)
    pts = _parse_points(args.at)
    fvs = sibuya.eval_f_many(pts, p, rc.tolerances)
    rows = []
    for z, fv in zip(pts, fvs):
        rows.append(
            (_g(z.real), _g(z.imag), _g(fv.f.logmod), _g(fv.f.phase), _g(fv.est_error))
        )
    _emit(rc, ("re", "im", "logmod", "phase", "est_error"), rows, (("function", "f"), ("m", _g(p.m))))
    return 0


def _cmd_det(args, rc: RunConfig) -> int:
    p, lv = _params_for(args)
    pts = _parse_points(args.at)
    ev = determinants.eval_C_many if lv == 1 else determinants.eval_D_many
    rows = []
    for z, dv in zip(pts, ev(pts, p, rc.tolerances)):
        rows.append(
            (
                _g(z.real),
                _g(z.imag),
                _g(dv.value.logmod),
                _g(dv.value.phase),
                _g(dv.est_error),
                "|".join(dv.flags) if dv.flags else "",
            )
        )
    _emit(
        rc,
        ("re", "im", "logmod", "phase", "est_error", "flags"),
        rows,
        (("function", "C" if lv == 1 else "D"), ("m", _g(p.m))),
    )
    return 0


def _cmd_zeros(args, rc: RunConfig) -> int:
    p, _ = _params_for(args)
    func = determinants.batched_log_func(p, args.which, rc.tolerances)
    region = rect_region(args.re_lo, args.re_hi, args.im_lo, args.im_hi)
    recs = find_zeros(func, region, max_zeros=args.max_zeros, func_id=args.which)
    rows = []
    for r in recs:
        c = r.winding_cell
        cell = f"{c.kind}({c.a0:.6g};{c.a1:.6g};{c.b0:.6g};{c.b1:.6g})"
        rows.append((_g(r.location.real), _g(r.location.imag), _g(r.newton_residual), cell))
    _emit(
        rc,
        ("re", "im", "residual", "cell_id"),
        rows,
        (("function", args.which), ("m", _g(p.m)), ("zeros", str(len(recs)))),
    )
    return 0


def _cmd_sweep(args, rc: RunConfig) -> int:
    if not rc.output:
        raise DomainError("sweep writes a file; give --output")
    recs = sweep_eps(
        args.M, args.level, args.eps_from, args.eps_to,
        step=args.step, E_max=args.e_max, cfg=rc.tolerances,
    )
    merges = detect_merges(recs, rc.tolerances, refine_rounds=args.refine_rounds)
    header = [f"{k}={v}" for k, v in rc.header_items()]
    header.append(f"merge_events={len(merges)}")
    for ev in merges:
        header.append(
            "merge interval=({},{}) indices={} values=({},{})".format(
                _g(ev.eps_interval[0]), _g(ev.eps_interval[1]), ev.eig_indices,
                _g(ev.last_real_values[0]), _g(ev.last_real_values[1]),
            )
        )
    if rc.format == "json":
        write_summary_json(recs, merges, rc.output, meta=dict(rc.header_items()))
    else:
        write_sweep_csv(recs, rc.output, header)
    return 0


def _cmd_asym(args, rc: RunConfig) -> int:
    if args.m <= 1.0 or args.m == 2.0:
        raise DomainError("asymptotic constants need m > 1, m != 2")
    c = make_constants(args.m)
    doc = {
        "m": args.m,
        "rho": c.rho,
        "K_m": c.K_m,
        "c1": c.c1,
        "a": c.a,
        "b": c.b,
    }
    if args.n_roots:
        lv = 1 if args.m < 4.0 else 2
        p = make_params(M=lv, eps=args.m - 2.0 * lv, level=lv)
        doc["predicted_roots"] = [asr_roots(n, p).real for n in range(1, args.n_roots + 1)]
    sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return 0


def _cmd_verify(args, rc: RunConfig) -> int:
    if args.criteria:
        try:
            numbers = tuple(int(s) for s in args.criteria.split(","))
        except ValueError:
            raise DomainError(f"bad criteria list {args.criteria!r}") from None
        unknown = [k for k in numbers if k not in acceptance.FULL_SUITE]
        if unknown:
            raise DomainError(f"unknown criteria {unknown}")
    else:
        numbers = acceptance.QUICK_SUITE if args.suite == "quick" else acceptance.FULL_SUITE
    cfg = rc.tolerances if any(getattr(args, k, None) is not None for k in _TOL_KEYS) else None
    results = acceptance.run_suite(numbers, cfg)
    return 0 if all(r.passed for r in results) else 1


def _add_common(sp) -> None:
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--rel-tol", dest="rel_tol", type=float)
    sp.add_argument("--abs-tol", dest="abs_tol", type=float)
    sp.add_argument("--initial-step", dest="initial_step", type=float)
    sp.add_argument("--min-step", dest="min_step", type=float)
    sp.add_argument("--max-steps", dest="max_steps", type=int)
    sp.add_argument("--pole-guard", dest="pole_guard", type=float)
    sp.add_argument("--output", dest="output")
    sp.add_argument("--format", dest="format", choices=("csv", "json"))
    sp.add_argument("--parallelism", dest="parallelism", type=int)
    sp.add_argument("--seed", dest="seed", type=int)


def _add_oscillator(sp, with_level=True) -> None:
    sp.add_argument("--M", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--m", type=float, help="shorthand: sets M=level, eps=m-2*level")
    if with_level:
        sp.add_argument("--level", type=int, choices=(1, 2))


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ptspec",
        description="Spectral determinants of PT-symmetric anharmonic oscillators",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="derived constants for an oscillator shape")
    _add_oscillator(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_params)

    sp = sub.add_parser("eval-f", help="evaluate the recessive-solution value f")
    _add_oscillator(sp)
    sp.add_argument("--at", action="append", required=True, metavar="RE[,IM]")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_eval_f)

    sp = sub.add_parser("det", help="evaluate the level-1 or level-2 determinant")
    _add_oscillator(sp)
    sp.add_argument("--at", action="append", required=True, metavar="RE[,IM]")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_det)

    sp = sub.add_parser("zeros", help="argument-principle zero search in a rectangle")
    _add_oscillator(sp)
    sp.add_argument("--which", default="numC", choices=("f", "C", "numC", "D", "numD"))
    sp.add_argument("--re-lo", type=float, required=True)
    sp.add_argument("--re-hi", type=float, required=True)
    sp.add_argument("--im-lo", type=float, required=True)
    sp.add_argument("--im-hi", type=float, required=True)
    sp.add_argument("--max-zeros", type=int, default=32)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_zeros)

    sp = sub.add_parser("sweep", help="track the spectrum across eps")
    sp.add_argument("--M", type=int, required=True)
    sp.add_argument("--level", type=int, choices=(1, 2), required=True)
    sp.add_argument("--eps-from", type=float, required=True)
    sp.add_argument("--eps-to", type=float, required=True)
    sp.add_argument("--step", type=float, required=True)
    sp.add_argument("--e-max", type=float, required=True)
    sp.add_argument("--refine-rounds", type=int, default=6)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_sweep)

    sp = sub.add_parser("asym", help="asymptotic constants and predicted roots")
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--n-roots", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_asym)

    sp = sub.add_parser("verify", help="run acceptance criteria")
    sp.add_argument("--suite", choices=("quick", "full"), default="quick")
    sp.add_argument("--criteria", help="comma-separated criterion numbers")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_verify)

    return ap


def run(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _build_config(args)
        return args.handler(args, rc)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PtspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

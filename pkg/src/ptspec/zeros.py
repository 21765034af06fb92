"""Argument-principle zero location for log-domain analytic functions.

Functions are batched callables mapping a list of complex points to a list of
LogValue results; plain scalar callables returning complex are accepted and
wrapped. Phases coming out of the evaluators are true analytic phases, so
boundary increments never need a re/im arctangent, which would overflow for
the magnitudes involved here.

When hunting zeros of f itself, build the function with an integrator config
whose pole_guard is raised (1e13 or so): the origin log-derivative blows up on
the zero set and the stock guard aborts evaluations closer than ~1e-7.
"""

import cmath
import math
from dataclasses import dataclass, replace
from statistics import median

from . import determinants, sibuya
from .asym import asr_roots, make_constants
from .errors import (
    BoundaryZeroSuspected,
    DomainError,
    InsufficientZeros,
    PoleEncountered,
    StepFailure,
    SubdivisionBudgetExceeded,
)
from .logdomain import LogValue
from .params import SpectralParams

_MAX_ROUNDS = 6
_DIP_UNITS = 30.0
_RESIDUAL_CAP = 1e-8
_MIN_DROP = math.log(1e8)
_AXIS_OFFSET = 1e-6


@dataclass(frozen=True)
class Region:
    """Rectangle or annular sector in the lambda plane."""

    kind: str
    a0: float
    a1: float
    b0: float
    b1: float

    def __post_init__(self):
        if self.kind not in ("rect", "sector"):
            raise DomainError(f"unknown region kind {self.kind!r}")
        if not (self.a1 > self.a0 and self.b1 > self.b0):
            raise DomainError("region must have positive area")
        if self.kind == "sector" and self.a0 <= 0.0:
            raise DomainError("sector inner radius must be positive")

    def center(self) -> complex:
        if self.kind == "rect":
            return complex(0.5 * (self.a0 + self.a1), 0.5 * (self.b0 + self.b1))
        r = math.sqrt(self.a0 * self.a1)
        return cmath.rect(r, 0.5 * (self.b0 + self.b1))

    def size(self) -> float:
        if self.kind == "rect":
            return math.hypot(self.a1 - self.a0, self.b1 - self.b0)
        return math.hypot(self.a1 - self.a0, self.a1 * (self.b1 - self.b0))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        if self.kind == "rect":
            return (
                self.a0 - pad <= z.real <= self.a1 + pad
                and self.b0 - pad <= z.imag <= self.b1 + pad
            )
        r, th = abs(z), cmath.phase(z)
        for wrap in (0.0, 2 * math.pi, -2 * math.pi):
            if (
                self.a0 - pad <= r <= self.a1 + pad
                and self.b0 - pad <= th + wrap <= self.b1 + pad
            ):
                return True
        return False

    def boundary_point(self, t: float) -> complex:
        # t in [0,4), one unit per side, counterclockwise
        side, frac = int(t) % 4, t - int(t)
        if self.kind == "rect":
            if side == 0:
                return complex(self.a0 + frac * (self.a1 - self.a0), self.b0)
            if side == 1:
                return complex(self.a1, self.b0 + frac * (self.b1 - self.b0))
            if side == 2:
                return complex(self.a1 - frac * (self.a1 - self.a0), self.b1)
            return complex(self.a0, self.b1 - frac * (self.b1 - self.b0))
        if side == 0:
            return cmath.rect(self.a0 + frac * (self.a1 - self.a0), self.b0)
        if side == 1:
            return cmath.rect(self.a1, self.b0 + frac * (self.b1 - self.b0))
        if side == 2:
            return cmath.rect(self.a1 - frac * (self.a1 - self.a0), self.b1)
        return cmath.rect(self.a0, self.b1 - frac * (self.b1 - self.b0))

    def perturbed(self, grow: float) -> "Region":
        if self.kind == "rect":
            ca, cb = 0.5 * (self.a0 + self.a1), 0.5 * (self.b0 + self.b1)
            ha, hb = 0.5 * (self.a1 - self.a0) * (1 + grow), 0.5 * (self.b1 - self.b0) * (1 + grow)
            return Region("rect", ca - ha, ca + ha, cb - hb, cb + hb)
        lr = 0.5 * math.log(self.a1 / self.a0) * (1 + grow)
        cr = math.sqrt(self.a0 * self.a1)
        cb, hb = 0.5 * (self.b0 + self.b1), 0.5 * (self.b1 - self.b0) * (1 + grow)
        return Region("sector", cr * math.exp(-lr), cr * math.exp(lr), cb - hb, cb + hb)

    def straddles_axis(self) -> bool:
        return self.kind == "rect" and self.b0 < 0.0 < self.b1

    def split(self, frac: float = 0.5, axis: str = "auto") -> list["Region"]:
        if self.kind == "sector":
            rm = self.a0 * (self.a1 / self.a0) ** frac
            bm = self.b0 + frac * (self.b1 - self.b0)
            return [
                Region("sector", self.a0, rm, self.b0, bm),
                Region("sector", rm, self.a1, self.b0, bm),
                Region("sector", self.a0, rm, bm, self.b1),
                Region("sector", rm, self.a1, bm, self.b1),
            ]
        if self.straddles_axis():
            # schwarz-symmetric functions put real zeros exactly on the axis:
            # subdivide along Re while the cell is wide enough, because a
            # horizontal cut would shave an edge against those zeros
            if axis == "auto":
                axis = "re" if (self.a1 - self.a0) >= 0.25 * (self.b1 - self.b0) else "imoff"
            if axis == "re":
                am = self.a0 + frac * (self.a1 - self.a0)
                return [
                    Region("rect", self.a0, am, self.b0, self.b1),
                    Region("rect", am, self.a1, self.b0, self.b1),
                ]
            # tall cell over a conjugate pair: cut just off the axis so the
            # pair separates without the edge running through axis zeros
            delta = (
                (0.5 + frac)
                * _AXIS_OFFSET
                * max(abs(self.a0), abs(self.a1), abs(self.b0), abs(self.b1))
            )
            # a cell produced by an earlier off-axis cut may already end near
            # the axis; keep the new cut strictly inside
            delta = min(delta, frac * self.b1)
            return [
                Region("rect", self.a0, self.a1, self.b0, delta),
                Region("rect", self.a0, self.a1, delta, self.b1),
            ]
        am = self.a0 + frac * (self.a1 - self.a0)
        bm = self.b0 + frac * (self.b1 - self.b0)
        return [
            Region("rect", self.a0, am, self.b0, bm),
            Region("rect", am, self.a1, self.b0, bm),
            Region("rect", self.a0, am, bm, self.b1),
            Region("rect", am, self.a1, bm, self.b1),
        ]


def rect_region(re_lo: float, re_hi: float, im_lo: float, im_hi: float) -> Region:
    return Region("rect", re_lo, re_hi, im_lo, im_hi)


def sector_region(r_lo: float, r_hi: float, th_lo: float, th_hi: float) -> Region:
    return Region("sector", r_lo, r_hi, th_lo, th_hi)


@dataclass(frozen=True)
class ZeroRecord:
    location: complex
    newton_residual: float
    winding_cell: Region
    func_id: str
    boundary_drop: float


def _normalize_func(func):
    def batched(pts):
        try:
            vals = func(list(pts))
        except TypeError:
            vals = [func(z) for z in pts]
        out = []
        for v in vals:
            out.append(v if isinstance(v, LogValue) else LogValue.from_complex(complex(v)))
        return out

    return batched


def _winding_state(batched, region: Region, samples_per_side: int):
    """Returns (winding, median boundary logmod, verified region)."""
    n = max(4, int(samples_per_side))
    reg = region
    ts = [4.0 * i / (4 * n) for i in range(4 * n)]
    vals = batched([reg.boundary_point(t) for t in ts])
    for _ in range(_MAX_ROUNDS):
        logmods = [v.logmod for v in vals]
        k = len(ts)
        dip = any(
            logmods[i] < min(logmods[i - 1], logmods[(i + 1) % k]) - _DIP_UNITS for i in range(k)
        )
        if dip:
            reg = reg.perturbed(0.011)
            vals = batched([reg.boundary_point(t) for t in ts])
            continue
        incs = [
            math.remainder(vals[(i + 1) % k].phase - vals[i].phase, 2 * math.pi) for i in range(k)
        ]
        total = sum(incs) / (2 * math.pi)
        if max(abs(w) for w in incs) < 0.5 * math.pi and abs(total - round(total)) < 0.25:
            return int(round(total)), median(logmods), reg
        mids = [0.5 * (ts[i] + (ts[i + 1] if i + 1 < k else 4.0)) for i in range(k)]
        new_vals = batched([reg.boundary_point(t) for t in mids])
        merged_t, merged_v = [], []
        for t, v, tm, vm in zip(ts, vals, mids, new_vals):
            merged_t += [t, tm]
            merged_v += [v, vm]
        ts, vals = merged_t, merged_v
    raise BoundaryZeroSuspected(
        f"boundary phase not resolved after {_MAX_ROUNDS} refinement rounds on {region}"
    )


def winding_count(func, region: Region, samples_per_side: int = 17) -> int:
    w, _, _ = _winding_state(_normalize_func(func), region, samples_per_side)
    return w


def _polish(batched, cell: Region, med_logmod: float, func_id: str):
    """Newton from the cell center; derivative by central differences.

    Values are rescaled by the boundary median so the quotient stays in
    double range; differencing the values rather than their logs keeps the
    derivative estimate sane when the iterate is within h of the zero.

    Residual quality is the smaller of two yardsticks: value over boundary
    median, and value over the producing sum's top-term scale when the
    evaluator reports one.  Inside a wide cancellation valley the boundary
    median is itself tiny and only the second test can certify convergence.
    """
    z = cell.center()
    h = 1e-4 * cell.size()
    best = None
    stall = 0
    for _ in range(40):
        try:
            raw = batched([z - h, z, z + h])
        except (PoleEncountered, StepFailure):
            break
        vm, v0, vp = (
            math.exp(min(v.logmod - med_logmod, 700.0)) * complex(math.cos(v.phase), math.sin(v.phase))
            for v in raw
        )
        rel = abs(v0)
        scale = getattr(raw[1], "scale_logmod", None)
        if scale is not None and scale > float("-inf"):
            rel = min(rel, math.exp(min(raw[1].logmod - scale, 700.0)))
        if best is None or rel < best[1]:
            best = (z, rel, med_logmod - raw[1].logmod)
            stall = 0
        else:
            stall += 1
        if rel < 1e-3 * _RESIDUAL_CAP or stall >= 3:
            break
        deriv = (vp - vm) / (2 * h)
        if deriv == 0:
            break
        step = -v0 / deriv
        cap = 0.45 * cell.size()
        if abs(step) > cap:
            step *= cap / abs(step)
        z = z + step
        if not cell.contains(z, pad=0.25 * cell.size()):
            return None
    if best is None or best[1] >= _RESIDUAL_CAP:
        return None
    # newton may slide onto a neighbouring zero; accepting it here would
    # let the later dedupe silently drop this cell's own zero
    if not cell.contains(best[0], pad=1e-9 * cell.size()):
        return None
    return ZeroRecord(best[0], best[1], cell, func_id, best[2])


_SPLIT_FRACS = (0.5, 0.536, 0.468, 0.582, 0.43, 0.55)


def _split_resolved(batched, cell: Region, hint: int):
    # a split line can land on a zero; shift the cut until every child
    # boundary resolves.  straddling cells also fall back to the other cut
    # direction: stacked real zeros need Re cuts, conjugate pairs at one Re
    # need the off-axis cut
    if cell.straddles_axis():
        primary = "re" if (cell.a1 - cell.a0) >= 0.25 * (cell.b1 - cell.b0) else "imoff"
        secondary = "imoff" if primary == "re" else "re"
        attempts = [(f, primary) for f in _SPLIT_FRACS] + [(f, secondary) for f in _SPLIT_FRACS]
    else:
        attempts = [(f, "auto") for f in _SPLIT_FRACS]
    last = None
    for frac, axis in attempts:
        children = cell.split(frac, axis)
        try:
            states = [_winding_state(batched, ch, hint) for ch in children]
        except BoundaryZeroSuspected as exc:
            last = exc
            continue
        return children, states
    raise last


def find_zeros(
    func,
    region: Region,
    max_zeros: int,
    func_id: str = "f",
    samples_per_side: int = 17,
) -> list[ZeroRecord]:
    batched = _normalize_func(func)
    records: list[ZeroRecord] = []
    # queue of cells with precomputed winding state; FIFO order keeps the
    # merge deterministic
    root_state = _winding_state(batched, region, samples_per_side)
    queue = [(1, region, root_state, samples_per_side)]
    budget = max(160, 48 * max_zeros)
    processed = 0
    while queue:
        if len(records) >= max_zeros:
            break
        depth, cell, (w, med, verified), hint = queue.pop(0)
        processed += 1
        if processed > budget:
            raise SubdivisionBudgetExceeded(
                f"{processed} cells examined, {len(records)} zeros found; unresolved cell {cell}"
            )
        if w == 0:
            continue
        if depth > 44:
            raise SubdivisionBudgetExceeded(
                f"cell {cell} at depth {depth} still has winding {w}; unresolved"
            )
        if w == 1:
            rec = _polish(batched, verified, med, func_id)
            if rec is not None:
                records.append(rec)
                continue
        child_hint = max(17, hint // 2)
        children, states = _split_resolved(batched, cell, child_hint)
        for child, state in zip(children, states):
            queue.append((depth + 1, child, state, child_hint))
    dedup: list[ZeroRecord] = []
    for rec in sorted(records, key=lambda r: (abs(r.location), r.location.real, r.location.imag)):
        if all(
            abs(rec.location - kept.location) > 1e-7 * (1.0 + abs(rec.location)) for kept in dedup
        ):
            dedup.append(rec)
    return dedup


@dataclass(frozen=True)
class PairEntry:
    f_zero: float
    numerator_zero: float
    gap: float
    spacing_bound: float


@dataclass(frozen=True)
class CancellationReport:
    m: float
    n_max: int
    pairs: tuple
    unpaired_f: tuple
    unpaired_numerator: tuple
    eigenvalue_zeros: tuple


def spacing_bound(n: int, m: float) -> float:
    # derivative of the modulus growth of the n-th predicted zero
    c = make_constants(m)
    return (c.a ** (1.0 / c.rho) / c.rho) * float(n) ** (1.0 / c.rho - 1.0)


def _bisect_many(batched_real, brackets, floor=1e-6):
    """Parallel bisection; a None value means the evaluator refused a point
    sitting essentially on a zero, which resolves that lane immediately."""
    los = [b[0] for b in brackets]
    his = [b[1] for b in brackets]
    vlos = batched_real(los)
    vhis = batched_real(his)
    roots: list = [None] * len(los)
    for i in range(len(los)):
        if vlos[i] is None:
            roots[i] = los[i]
        elif vhis[i] is None:
            roots[i] = his[i]
    for _ in range(3):
        bad = [
            i
            for i in range(len(los))
            if roots[i] is None and vlos[i] * vhis[i] >= 0
        ]
        if not bad:
            break
        for i in bad:
            c, half = 0.5 * (los[i] + his[i]), 0.8 * (his[i] - los[i])
            los[i], his[i] = c - half, c + half
        new_lo = batched_real([los[i] for i in bad])
        new_hi = batched_real([his[i] for i in bad])
        for j, i in enumerate(bad):
            vlos[i], vhis[i] = new_lo[j], new_hi[j]
            if new_lo[j] is None:
                roots[i] = los[i]
            elif new_hi[j] is None:
                roots[i] = his[i]
    else:
        bad = [i for i in range(len(los)) if roots[i] is None and vlos[i] * vhis[i] >= 0]
        if bad:
            raise InsufficientZeros(f"no sign change in bracket ({los[bad[0]]}, {his[bad[0]]})")
    while True:
        act = [i for i in range(len(los)) if roots[i] is None and his[i] - los[i] > floor]
        if not act:
            break
        vms = batched_real([0.5 * (los[i] + his[i]) for i in act])
        for j, i in enumerate(act):
            mid = 0.5 * (los[i] + his[i])
            if vms[j] is None or vms[j] == 0.0:
                roots[i] = mid
            elif (vms[j] < 0) == (vlos[i] < 0):
                los[i], vlos[i] = mid, vms[j]
            else:
                his[i] = mid
    return [r if r is not None else 0.5 * (los[i] + his[i]) for i, r in enumerate(roots)]


def _secant_polish(batched_real, roots, seed_offset=1e-6, iters=12):
    """Drive bisected axis roots to evaluator precision; the bisection floor
    (~1e-6) is far above the true residual gaps this feeds into."""
    xs0 = list(roots)
    xs1 = [x + seed_offset for x in xs0]
    f0 = batched_real(xs0)
    f1 = batched_real(xs1)
    done = [False] * len(roots)
    for i in range(len(roots)):
        if f0[i] is None or f1[i] is None:
            # a refusal means the point hugs the zero; the bisected root wins
            xs1[i] = xs0[i]
            done[i] = True
    for _ in range(iters):
        act = [i for i in range(len(roots)) if not done[i]]
        if not act:
            break
        nxt = {}
        for i in act:
            df = f1[i] - f0[i]
            if df == 0.0:
                done[i] = True
                continue
            step = -f1[i] * (xs1[i] - xs0[i]) / df
            step = max(-10.0 * seed_offset, min(10.0 * seed_offset, step))
            nxt[i] = xs1[i] + step
            if abs(step) < 1e-13 * (1.0 + abs(xs1[i])):
                done[i] = True
        move = [i for i in act if i in nxt and not done[i]]
        if not move:
            break
        vals = batched_real([nxt[i] for i in move])
        for j, i in enumerate(move):
            if vals[j] is None:
                # refused exactly where the secant landed: accept that point
                xs1[i] = nxt[i]
                done[i] = True
                continue
            xs0[i], f0[i] = xs1[i], f1[i]
            xs1[i], f1[i] = nxt[i], vals[j]
    return xs1


def _refusal_tolerant(ev):
    """The integrator refuses points hugging a zero of f; fall back to
    single-point calls so one such lane does not sink the batch."""

    def call(pts):
        try:
            return ev(pts)
        except (PoleEncountered, StepFailure):
            out = []
            for t in pts:
                try:
                    out.extend(ev([t]))
                except (PoleEncountered, StepFailure):
                    out.append(None)
            return out

    return call


def _f_axis_evaluator(p: SpectralParams, cfg):
    def ev(ts):
        fvs = sibuya.eval_f_many([complex(t) for t in ts], p, cfg)
        return [fv.f.to_complex().real for fv in fvs]

    return _refusal_tolerant(ev)


def _numerator_axis_evaluator(p: SpectralParams, cfg):
    def ev(ts):
        nvs = determinants.eval_numerator_C_many([complex(t) for t in ts], p, cfg)
        return [nv.to_complex().real for nv in nvs]

    return _refusal_tolerant(ev)


def _asr_brackets(p: SpectralParams, n_lo: int, n_hi: int):
    out = []
    for n in range(n_lo, n_hi + 1):
        c = asr_roots(n, p).real
        half = 0.45 * spacing_bound(n, p.m)
        out.append((c - half, c + half))
    return out


def axis_zeros_of_f(p: SpectralParams, n_lo: int, n_hi: int, cfg=None) -> list:
    """Negative-axis zeros of f with indices n_lo..n_hi, bracketed by the
    root asymptotics and driven to evaluator precision. A raised pole guard
    in cfg lets the secant step all the way onto the zero."""
    if n_lo < 1 or n_hi < n_lo:
        raise DomainError("zero indices must satisfy 1 <= n_lo <= n_hi")
    f_real = _f_axis_evaluator(p, cfg)
    return _secant_polish(f_real, _bisect_many(f_real, _asr_brackets(p, n_lo, n_hi)))


def cancellation_report(p: SpectralParams, cfg=None, n_max: int = 20) -> CancellationReport:
    if p.level != 1:
        raise DomainError("cancellation study is a level-1 construction")
    m = p.m
    integer_m = abs(m - round(m)) < 1e-12
    if not integer_m and not 1.0 < m < 2.0:
        raise DomainError("pairing needs m in (1,2); integer m takes the degenerate branch")

    brackets = _asr_brackets(p, 1, n_max)
    f_real = _f_axis_evaluator(p, cfg)
    num_real = _numerator_axis_evaluator(p, cfg)
    f_zeros = _secant_polish(f_real, _bisect_many(f_real, brackets))
    num_zeros = _secant_polish(num_real, _bisect_many(num_real, brackets))

    pairs = []
    bound_of = {fz: spacing_bound(n, m) for n, fz in enumerate(f_zeros, start=1)}
    unpaired_f = list(f_zeros)
    unpaired_num = list(num_zeros)
    while unpaired_f and unpaired_num:
        gap, fz, nz = min(
            (abs(fz - nz), fz, nz) for fz in unpaired_f for nz in unpaired_num
        )
        if gap > 0.5 * bound_of[fz]:
            break
        pairs.append(PairEntry(fz, nz, gap, bound_of[fz]))
        unpaired_f.remove(fz)
        unpaired_num.remove(nz)

    eigen = ()
    if integer_m:
        em = determinants.calibrate_sign(p, cfg)
        lam_zeros = determinants._real_axis_zeros(p, em.sign_convention, 0.35, 9.6, 186, cfg)
        eigen = tuple(em.E_of_lambda(z) for z in lam_zeros)
    return CancellationReport(
        m=m,
        n_max=n_max,
        pairs=tuple(sorted(pairs, key=lambda e: -e.f_zero)),
        unpaired_f=tuple(unpaired_f),
        unpaired_numerator=tuple(unpaired_num),
        eigenvalue_zeros=eigen,
    )

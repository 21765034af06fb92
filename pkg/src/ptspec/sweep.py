"""Eigenvalue tracking across the shape parameter.

Each record fixes eps, finds every determinant zero inside the search box
|Re E| <= E_max (axis strip plus upper half box), and classifies it real or
member of a conjugate pair.  Complex zeros are located in the upper half
plane only and mirrored, so conjugate closure is exact by construction.

Consecutive records reuse the previous zero set as Newton starts.  Warm
results are accepted only when winding counts over both search regions agree
with the number of tracked zeros; any mismatch, a collapsed track, or every
tenth record falls back to the full subdivision search.  This is what makes
merge steps safe: two real tracks approaching a merge point converge to the
same point or fail, the count check notices, and the full search picks up
the newborn complex pair.
"""

from __future__ import annotations

import cmath
import csv
import json
import math
from dataclasses import dataclass
from statistics import median

from . import determinants
from .asym import make_constants
from .errors import (
    BoundaryZeroSuspected,
    DomainError,
    InsufficientZeros,
    PoleEncountered,
    PtspecError,
    StepFailure,
    UnresolvedTransition,
)
from .params import SpectralParams, accumulation_angle_formula, make_params
from .zeros import Region, ZeroRecord, find_zeros, rect_region, winding_count

# |Im E| below this (times 1 + |E|) counts as real; near a merge the label is
# transient and merge detection therefore works on counts, not labels
_REAL_TOL = 1e-6
_STRIP_HALF = 0.45
_RESIDUAL_CAP = 1e-8
_FULL_EVERY = 10
_EDGE_FRACTION = 0.97


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    m: float
    level: int
    real_eigs: tuple
    complex_pairs: tuple
    zero_records: tuple
    e_max: float
    sign: int
    status: str


@dataclass(frozen=True)
class MergeEvent:
    # ascending eps interval; the pair is real on the high-eps side and
    # complex on the low side (pairs peel off as eps decreases)
    eps_interval: tuple
    eig_indices: tuple
    last_real_values: tuple


@dataclass(frozen=True)
class AccumulationReport:
    angle_target: float
    eigenvalues: tuple
    deviations: tuple
    final_deviation: float
    decreasing_tail: int
    slow_approach: bool


def _func_for(p: SpectralParams, cfg):
    return determinants.batched_log_func(p, "numC" if p.level == 1 else "numD", cfg)


def _func_tag(p: SpectralParams) -> str:
    return "numerator_C" if p.level == 1 else "numerator_D"


def _neg_rect(r: Region) -> Region:
    return Region("rect", -r.a1, -r.a0, -r.b1, -r.b0)


def _regions_lambda(E_max: float, sign: int):
    strip = rect_region(0.02, E_max, -_STRIP_HALF, _STRIP_HALF)
    upper = rect_region(0.02, E_max, _STRIP_HALF, 0.95 * E_max)
    if sign < 0:
        return _neg_rect(strip), _neg_rect(upper)
    return strip, upper


def _zero_budget(p: SpectralParams, E_max: float) -> int:
    c = make_constants(p.m)
    return max(16, 2 * (int(E_max**c.rho / c.a) + 10))


def _full_zero_set(p: SpectralParams, cfg, E_max: float, sign: int):
    func = _func_for(p, cfg)
    strip, upper = _regions_lambda(E_max, sign)
    cap = _zero_budget(p, E_max)
    tag = _func_tag(p)
    recs = list(find_zeros(func, strip, max_zeros=cap, func_id=tag))
    recs += find_zeros(func, upper, max_zeros=cap, func_id=tag)
    return recs


def _reference_logmod(func, regions) -> float:
    pts = []
    for reg in regions:
        pts += [reg.boundary_point(t) for t in (0.31, 1.27, 2.11, 3.47)]
    return median(v.logmod for v in func(pts))


def _newton_warm(func, z0: complex, med: float, drift_cap: float):
    z = complex(z0)
    h = 1e-4 * (1.0 + abs(z0))
    best = None
    for _ in range(30):
        try:
            raw = func([z - h, z, z + h])
        except (PoleEncountered, StepFailure):
            break
        vm, v0, vp = (
            math.exp(min(v.logmod - med, 700.0)) * complex(math.cos(v.phase), math.sin(v.phase))
            for v in raw
        )
        rel = abs(v0)
        if best is None or rel < best[1]:
            best = (z, rel, med - raw[1].logmod)
        if rel < 1e-3 * _RESIDUAL_CAP:
            break
        deriv = (vp - vm) / (2.0 * h)
        if deriv == 0.0:
            break
        step = -v0 / deriv
        if abs(step) > 0.5 * drift_cap:
            step *= 0.5 * drift_cap / abs(step)
        z = z + step
        if abs(z - z0) > drift_cap:
            return None
    if best is None or best[1] >= _RESIDUAL_CAP:
        return None
    return best


def _warm_zero_set(p: SpectralParams, cfg, E_max: float, sign: int, prev_records):
    func = _func_for(p, cfg)
    strip, upper = _regions_lambda(E_max, sign)
    med = _reference_logmod(func, (strip, upper))
    locs = [r.location for r in prev_records]
    tag = _func_tag(p)
    tracked = []
    for i, z0 in enumerate(locs):
        gaps = [abs(z0 - w) for j, w in enumerate(locs) if j != i]
        drift = max(0.02, 0.45 * min(gaps)) if gaps else 0.6
        got = _newton_warm(func, z0, med, drift)
        if got is None:
            return None
        z, rel, drop = got
        box = rect_region(z.real - drift, z.real + drift, z.imag - drift, z.imag + drift)
        tracked.append(ZeroRecord(z, rel, box, tag, drop))
    tracked.sort(key=lambda r: (abs(r.location), r.location.real, r.location.imag))
    for a, b in zip(tracked, tracked[1:]):
        if abs(a.location - b.location) <= 1e-7 * (1.0 + abs(b.location)):
            return None  # two tracks collapsed onto one zero
    kept = [
        r
        for r in tracked
        if strip.contains(r.location, 0.0) or upper.contains(r.location, 0.0)
    ]
    # winding totals count both members of a low conjugate pair inside the
    # strip, while only the upper representative is tracked
    n_strip = 0
    n_upper = 0
    for r in kept:
        if strip.contains(r.location, 0.0):
            E = sign * r.location
            n_strip += 1 if abs(E.imag) < _REAL_TOL * (1.0 + abs(E)) else 2
        else:
            n_upper += 1
    try:
        if winding_count(func, strip) != n_strip or winding_count(func, upper) != n_upper:
            return None
    except (BoundaryZeroSuspected, PoleEncountered, StepFailure):
        return None
    return kept


def _record_from(zrecs, p: SpectralParams, sign: int, E_max: float) -> SweepRecord:
    reals = []
    pairs = []
    keep = []
    for r in sorted(zrecs, key=lambda r: (abs(r.location), r.location.real, r.location.imag)):
        E = sign * r.location
        if abs(E.imag) < _REAL_TOL * (1.0 + abs(E)):
            reals.append(E.real)
            keep.append(r)
            continue
        up = E if E.imag > 0 else E.conjugate()
        if any(abs(up - q) <= 1e-6 * (1.0 + abs(up)) for q, _ in pairs):
            continue  # conjugate partner already represented
        pairs.append((up, r))
        keep.append(r)
    return SweepRecord(
        eps=p.eps,
        m=p.m,
        level=p.level,
        real_eigs=tuple(sorted(reals)),
        complex_pairs=tuple(
            (q, q.conjugate()) for q, _ in sorted(pairs, key=lambda t: (abs(t[0]), t[0].real))
        ),
        zero_records=tuple(keep),
        e_max=E_max,
        sign=sign,
        status="ok",
    )


def sweep_eps(M: int, level: int, eps_from: float, eps_to: float, step: float, E_max: float, cfg=None):
    if step <= 0.0:
        raise DomainError(f"step must be positive, got {step!r}")
    if E_max <= 0.0:
        raise DomainError(f"E_max must be positive, got {E_max!r}")
    n_steps = int(round(abs(eps_to - eps_from) / step))
    direction = 1.0 if eps_to >= eps_from else -1.0
    if n_steps == 0:
        eps_grid = [eps_from]
    else:
        eps_grid = [eps_from + direction * step * i for i in range(n_steps)] + [eps_to]

    records = []
    prev_ok = None
    since_full = 0
    em = None
    for eps in eps_grid:
        m = 2.0 * M + eps
        if abs(m - 2.0) < 1e-9:
            # normalization excludes m = 2; the grid point becomes a gap marker
            records.append(SweepRecord(eps, m, level, (), (), (), E_max, 0, "gap"))
            continue
        try:
            p = make_params(M=M, eps=eps, level=level)
            if em is None:
                em = determinants.calibrate_sign(p, cfg)
            zs = None
            if prev_ok is not None and since_full < _FULL_EVERY:
                zs = _warm_zero_set(p, cfg, E_max, em.sign_convention, prev_ok.zero_records)
            if zs is None:
                zs = _full_zero_set(p, cfg, E_max, em.sign_convention)
                since_full = 0
            else:
                since_full += 1
            rec = _record_from(zs, p, em.sign_convention, E_max)
            records.append(rec)
            prev_ok = rec
        except PtspecError as exc:
            records.append(SweepRecord(eps, m, level, (), (), (), E_max, 0, f"failed: {exc}"))
    return records


def _interior_counts(rec: SweepRecord):
    cut = _EDGE_FRACTION * rec.e_max
    nr = sum(1 for v in rec.real_eigs if abs(v) < cut)
    nc = sum(1 for q, _ in rec.complex_pairs if abs(q) < cut)
    return nr, nc


def _record_at(eps: float, template: SweepRecord, cfg, warm_from: SweepRecord | None):
    M = round((template.m - template.eps) / 2.0)
    p = make_params(M=M, eps=eps, level=template.level)
    em = determinants.calibrate_sign(p, cfg)
    zs = None
    if warm_from is not None and warm_from.zero_records:
        zs = _warm_zero_set(p, cfg, template.e_max, em.sign_convention, warm_from.zero_records)
    if zs is None:
        zs = _full_zero_set(p, cfg, template.e_max, em.sign_convention)
    return _record_from(zs, p, em.sign_convention, template.e_max)


def _unmatched_reals(side_a: SweepRecord, side_b: SweepRecord):
    avals = list(side_a.real_eigs)
    bvals = list(side_b.real_eigs)
    ranked = sorted((abs(x - y), i, j) for i, x in enumerate(avals) for j, y in enumerate(bvals))
    used_a: set = set()
    used_b: set = set()
    for _, i, j in ranked:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
    return [x for i, x in enumerate(avals) if i not in used_a]


def _axis_sign_changes(M: int, level: int, sign: int, eps: float, window, cfg) -> int:
    """Count sign changes of the real determinant numerator over a real window."""
    p = make_params(M=M, eps=eps, level=level)
    func = _func_for(p, cfg)
    es = [window[0] + (window[1] - window[0]) * k / 40.0 for k in range(41)]
    vals = func([complex(sign * e, 0.0) for e in es])
    top = max(v.logmod for v in vals)
    signed = [math.exp(v.logmod - top) * math.cos(v.phase) for v in vals]
    return sum(1 for a, b in zip(signed, signed[1:]) if a * b < 0.0)


def _refine_merge(hi: SweepRecord, lo: SweepRecord, cfg, rounds: int) -> MergeEvent:
    vanished = _unmatched_reals(hi, lo)
    if len(vanished) != 2:
        raise UnresolvedTransition(
            f"could not isolate the merging pair between eps {hi.eps} and {lo.eps}"
        )
    idx = tuple(sorted(hi.real_eigs.index(v) for v in vanished))
    eps_real, eps_cplx = hi.eps, lo.eps
    if rounds > 0:
        M = round((hi.m - hi.eps) / 2.0)
        center = 0.5 * (vanished[0] + vanished[1])
        born = [q.real for q in lo.complex_pairs if all(abs(q.real - r) > 1e-9 for r in hi.real_eigs)]
        target = min(born, key=lambda x: abs(x - center)) if born else center
        # half-width covers the pair plus its drift over the interval, but
        # stays clear of the neighbouring tracks
        half = 0.8 * abs(vanished[1] - vanished[0]) + 0.7 * abs(target - center) + 0.4
        others = [r for r in hi.real_eigs if r not in vanished]
        if others:
            half = min(half, 0.75 * min(abs(r - center) for r in others))
        window = (min(center, target) - half, max(center, target) + half)
        for _ in range(rounds):
            mid = 0.5 * (eps_real + eps_cplx)
            k = _axis_sign_changes(M, hi.level, hi.sign, mid, window, cfg)
            if k >= 2:
                eps_real = mid
            elif k == 0:
                eps_cplx = mid
            else:
                break  # a track straddles the window edge; keep the interval
    return MergeEvent(tuple(sorted((eps_real, eps_cplx))), idx, tuple(sorted(vanished)))


def _transition_events(hi: SweepRecord, lo: SweepRecord, cfg, rounds: int, depth: int):
    d_real = len(lo.real_eigs) - len(hi.real_eigs)
    d_pair = len(lo.complex_pairs) - len(hi.complex_pairs)
    if (d_real, d_pair) == (0, 0):
        return []
    di_real = _interior_counts(lo)[0] - _interior_counts(hi)[0]
    di_pair = _interior_counts(lo)[1] - _interior_counts(hi)[1]
    if (di_real, di_pair) == (0, 0):
        return []  # traffic across the |E| = E_max edge, not a merge
    if (di_real, di_pair) == (-2, 1):
        return [_refine_merge(hi, lo, cfg, rounds)]
    if di_real >= 0 and di_pair >= 0:
        # tracks compress downward as eps falls, so new ones drift in
        # through the top edge; pure gains are window traffic
        return []
    # anything else is a merge overlapped with traffic, or several merges in
    # one step; bisecting in eps separates events at distinct locations
    if depth < 10 and rounds > 0:
        try:
            mid = _record_at(0.5 * (hi.eps + lo.eps), hi, cfg, warm_from=hi)
        except PtspecError as exc:
            raise UnresolvedTransition(
                f"compound transition between eps {hi.eps} and {lo.eps}: {exc}"
            ) from exc
        return _transition_events(hi, mid, cfg, rounds, depth + 1) + _transition_events(
            mid, lo, cfg, rounds, depth + 1
        )
    raise UnresolvedTransition(
        f"counts changed by ({d_real} real, {d_pair} pairs) between eps {hi.eps} and {lo.eps}"
    )


def detect_merges(records, cfg=None, refine_rounds: int = 6):
    oks = [r for r in records if r.status == "ok"]
    if len(oks) < 2:
        return []
    if any(a.eps <= b.eps for a, b in zip(oks, oks[1:])):
        raise DomainError("records must be sorted by eps descending")
    events = []
    for hi, lo in zip(oks, oks[1:]):
        events += _transition_events(hi, lo, cfg, refine_rounds, depth=0)
    return events


def accumulation_check(p: SpectralParams, cfg=None, count: int = 8) -> AccumulationReport:
    eps = p.eps
    ok1 = p.M == 1 and p.level == 1 and -1.0 < eps < 0.0
    ok2 = (
        p.M == 2
        and p.level == 2
        and -3.0 < eps < 0.0
        and min(abs(eps + 1.0), abs(eps + 2.0)) > 1e-9
    )
    if not (ok1 or ok2):
        raise DomainError("accumulation study needs non-integer eps < 0 in the theorem ranges")
    if count < 2:
        raise DomainError(f"count must be at least 2, got {count!r}")

    em = determinants.calibrate_sign(p, cfg)
    c = make_constants(p.m)
    E_max = max(40.0, 1.3 * (c.a * (count + 4)) ** (1.0 / c.rho))
    prev = None
    ups: list = []
    for _ in range(4):
        zs = None
        if prev is not None and prev.zero_records:
            zs = _warm_zero_set(p, cfg, E_max, em.sign_convention, prev.zero_records)
        if zs is None:
            zs = _full_zero_set(p, cfg, E_max, em.sign_convention)
        rec = _record_from(zs, p, em.sign_convention, E_max)
        ups = sorted((q for q, _ in rec.complex_pairs), key=abs)
        if len(ups) >= count:
            break
        prev = rec
        E_max *= 1.5
    else:
        raise InsufficientZeros(f"found {len(ups)} non-real eigenvalues, need {count}")

    chosen = tuple(ups[:count]) if len(ups) == count else tuple(ups[-count:])
    angle = accumulation_angle_formula(p.m, p.level)
    devs = tuple(abs(abs(cmath.phase(E)) - angle) for E in chosen)
    tail = 1
    while tail < len(devs) and devs[-tail - 1] > devs[-tail]:
        tail += 1
    slow = devs[-1] > 0.1 or tail < min(3, len(devs))
    return AccumulationReport(
        angle_target=angle,
        eigenvalues=chosen,
        deviations=devs,
        final_deviation=devs[-1],
        decreasing_tail=tail,
        slow_approach=slow,
    )


def _g(x: float) -> str:
    return f"{x:.17g}"


def write_sweep_csv(records, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["eps", "m", "kind", "re_E", "im_E", "residual"])
        for rec in records:
            if rec.status != "ok":
                kind = "gap" if rec.status == "gap" else "failed"
                w.writerow([_g(rec.eps), _g(rec.m), kind, "", "", ""])
                continue
            for zr in rec.zero_records:
                E = rec.sign * zr.location
                if abs(E.imag) < _REAL_TOL * (1.0 + abs(E)):
                    kind, out = "real", E
                else:
                    kind, out = "pair", (E if E.imag > 0 else E.conjugate())
                w.writerow(
                    [_g(rec.eps), _g(rec.m), kind, _g(out.real), _g(out.imag), _g(zr.newton_residual)]
                )


def write_summary_json(records, merges, path, meta=None) -> None:
    doc = {
        "meta": dict(meta or {}),
        "records": [
            {
                "eps": r.eps,
                "m": r.m,
                "status": r.status,
                "n_real": len(r.real_eigs),
                "n_pairs": len(r.complex_pairs),
                "real_eigs": list(r.real_eigs),
                "pairs": [[q.real, q.imag] for q, _ in r.complex_pairs],
            }
            for r in records
        ],
        "merges": [
            {
                "eps_interval": list(ev.eps_interval),
                "eig_indices": list(ev.eig_indices),
                "last_real_values": list(ev.last_real_values),
            }
            for ev in merges
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")

import csv
import json

import pytest

from ptspec.errors import DomainError, UnresolvedTransition
from ptspec.params import make_params
from ptspec.sweep import (
    MergeEvent,
    SweepRecord,
    accumulation_check,
    detect_merges,
    sweep_eps,
    write_summary_json,
    write_sweep_csv,
)
from ptspec.zeros import ZeroRecord, rect_region

# frozen from a subdivision search at eps = 0.5, E_max = 12
REALS_EPS05 = (1.048956, 3.434539, 6.051737, 8.791012, 11.620695)


def _rec(eps, reals=(), pairs=(), e_max=10.0, status="ok"):
    return SweepRecord(
        eps=eps,
        m=2.0 + eps,
        level=1,
        real_eigs=tuple(reals),
        complex_pairs=tuple((q, q.conjugate()) for q in pairs),
        zero_records=(),
        e_max=e_max,
        sign=1,
        status=status,
    )


def test_sweep_rejects_bad_arguments():
    with pytest.raises(DomainError):
        sweep_eps(1, 1, 0.5, 0.4, step=-0.1, E_max=10.0)
    with pytest.raises(DomainError):
        sweep_eps(1, 1, 0.5, 0.4, step=0.1, E_max=0.0)


def test_sweep_marks_excluded_shape_as_gap():
    recs = sweep_eps(1, 1, 0.0, 0.0, step=0.1, E_max=6.0)
    assert len(recs) == 1
    assert recs[0].status == "gap"
    assert recs[0].m == 2.0
    assert recs[0].real_eigs == ()
    assert recs[0].zero_records == ()


def test_detect_merges_requires_descending_eps():
    with pytest.raises(DomainError):
        detect_merges([_rec(-0.4, (1.0,)), _rec(-0.3, (1.0,))])


def test_detect_merges_single_event_without_refinement():
    hi = _rec(-0.3, (1.0, 2.0, 3.0, 4.0))
    lo = _rec(-0.4, (1.0, 2.0), (3.5 + 1.0j,))
    events = detect_merges([hi, lo], refine_rounds=0)
    assert len(events) == 1
    ev = events[0]
    assert isinstance(ev, MergeEvent)
    assert ev.eps_interval == (-0.4, -0.3)
    assert ev.eig_indices == (2, 3)
    assert ev.last_real_values == (3.0, 4.0)


def test_detect_merges_ignores_edge_traffic():
    # the third track sits outside 0.97 * E_max; its disappearance is a
    # window effect, not a merge
    hi = _rec(-0.3, (1.0, 2.0, 9.8))
    lo = _rec(-0.4, (1.0, 2.0))
    assert detect_merges([hi, lo], refine_rounds=0) == []


def test_detect_merges_flags_unbalanced_change():
    hi = _rec(-0.3, (1.0, 2.0, 3.0))
    lo = _rec(-0.4, (1.0, 2.0))
    with pytest.raises(UnresolvedTransition):
        detect_merges([hi, lo], refine_rounds=0)


def test_detect_merges_skips_non_ok_records():
    hi = _rec(-0.3, (1.0, 2.0, 3.0, 4.0))
    gap = _rec(-0.35, status="gap")
    lo = _rec(-0.4, (1.0, 2.0), (3.5 + 1.0j,))
    events = detect_merges([hi, gap, lo], refine_rounds=0)
    assert len(events) == 1


def test_accumulation_check_theorem_range():
    with pytest.raises(DomainError):
        accumulation_check(make_params(M=1, eps=0.5, level=1))
    with pytest.raises(DomainError):
        accumulation_check(make_params(M=2, eps=-1.0, level=2))
    with pytest.raises(DomainError):
        accumulation_check(make_params(M=2, eps=-0.5, level=2), count=1)


def _csv_fixture_records():
    cell = rect_region(0.9, 1.2, -0.1, 0.1)
    zr_real = ZeroRecord(1.0489 + 0.0j, 2.2e-12, cell, "numerator_C", 25.0)
    zr_pair = ZeroRecord(3.5 + 1.25j, 4.0e-11, cell, "numerator_C", 22.0)
    ok = SweepRecord(
        eps=-0.25,
        m=1.75,
        level=1,
        real_eigs=(1.0489,),
        complex_pairs=((3.5 + 1.25j, 3.5 - 1.25j),),
        zero_records=(zr_real, zr_pair),
        e_max=10.0,
        sign=1,
        status="ok",
    )
    gap = _rec(0.0, status="gap")
    bad = _rec(0.1, status="failed: solver gave up")
    return [ok, gap, bad]


def test_write_sweep_csv_layout(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(_csv_fixture_records(), path, header_lines=("config=abc", "v1"))
    lines = path.read_text().splitlines()
    assert lines[0] == "# config=abc"
    assert lines[1] == "# v1"
    assert lines[2] == "eps,m,kind,re_E,im_E,residual"
    rows = list(csv.reader(lines[3:]))
    assert [r[2] for r in rows] == ["real", "pair", "gap", "failed"]
    assert float(rows[0][3]) == 1.0489
    assert float(rows[0][4]) == 0.0
    assert float(rows[1][4]) == 1.25
    assert float(rows[1][5]) == 4.0e-11
    assert rows[2][3] == "" and rows[3][3] == ""
    # 17 significant digits survive a round trip
    assert float(rows[0][0]) == -0.25


def test_write_summary_json_structure(tmp_path):
    path = tmp_path / "summary.json"
    ev = MergeEvent((-0.4, -0.3), (2, 3), (3.0, 4.0))
    write_summary_json(_csv_fixture_records(), [ev], path, meta={"tag": "t"})
    doc = json.loads(path.read_text())
    assert doc["meta"] == {"tag": "t"}
    assert len(doc["records"]) == 3
    assert doc["records"][0]["n_real"] == 1
    assert doc["records"][0]["n_pairs"] == 1
    assert doc["records"][0]["pairs"] == [[3.5, 1.25]]
    assert doc["records"][1]["status"] == "gap"
    assert doc["merges"][0]["eps_interval"] == [-0.4, -0.3]
    assert doc["merges"][0]["eig_indices"] == [2, 3]


def test_short_sweep_tracks_real_spectrum():
    recs = sweep_eps(1, 1, 0.6, 0.5, step=0.05, E_max=12.0)
    assert [r.status for r in recs] == ["ok", "ok", "ok"]
    assert all(r.complex_pairs == () for r in recs)
    # the fifth track enters through the E_max edge as eps decreases
    assert [len(r.real_eigs) for r in recs] == [4, 5, 5]
    # every track present on the high-eps side continues to the next record
    for a, b in zip(recs, recs[1:]):
        for x in a.real_eigs:
            assert min(abs(x - y) for y in b.real_eigs) < 0.45
    # the endpoint reproduces the frozen search-from-scratch values
    assert len(recs[-1].real_eigs) == len(REALS_EPS05)
    for got, want in zip(recs[-1].real_eigs, REALS_EPS05):
        assert abs(got - want) < 2e-5
    for zr in recs[-1].zero_records:
        assert zr.newton_residual < 1e-8

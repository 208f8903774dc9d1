import pytest
from hypothesis import given, settings, strategies as st

from gridpop.trace import AccessEvent, DatasetMeta, Trace, TraceError, export_trace, import_trace


def _meta(ds, creation=0, size=10, replicas=1):
    return DatasetMeta(ds, creation, 0, 0, size, replicas)


def test_duplicate_rows_are_summed(tmp_path):
    ev = tmp_path / "e.csv"
    ev.write_text("dataset_id,week,count\nd1,3,2\nd1,3,1\n")
    me = tmp_path / "m.csv"
    me.write_text("dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\nd1,0,0,0,5,1\n")
    trace = import_trace(ev, me)
    assert trace.events == (AccessEvent("d1", 3, 3),)


def test_unknown_dataset_is_referential_error(tmp_path):
    ev = tmp_path / "e.csv"
    ev.write_text("dataset_id,week,count\nzz,0,1\n")
    me = tmp_path / "m.csv"
    me.write_text("dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\nd1,0,0,0,5,1\n")
    with pytest.raises(TraceError, match="unknown dataset"):
        import_trace(ev, me)


def test_shipped_fixture(fixture_trace):
    assert len(fixture_trace.metas) == 3
    assert fixture_trace.horizon_weeks == 12
    assert len(fixture_trace.events) == 18
    assert fixture_trace.counts.sum() == 3 + 4 + 3 + 5 + 4 + 4 + 3 + 5 + 4 + 3 + 4 + 5 + 2 + 1 + 1 + 1 + 4 + 1


@pytest.mark.parametrize(
    "events, metas, match",
    [
        ("d1,x,1\n", "d1,0,0,0,5,1\n", "line 2.*week is not an integer"),
        ("d1,1\n", "d1,0,0,0,5,1\n", "line 2.*expected 3 fields"),
        ("d1,0,1\n", "d1,0,0,0,0,1\n", "size_bytes"),
        ("d1,0,1\n", "d1,0,0,0,-4,1\n", "size_bytes"),
        ("d1,1,1\n", "d1,2,0,0,5,1\n", "before creation"),
        ("d1,1,0\n", "d1,0,0,0,5,1\n", "count must be"),
    ],
)
def test_import_errors(tmp_path, events, metas, match):
    ev = tmp_path / "e.csv"
    ev.write_text("dataset_id,week,count\n" + events)
    me = tmp_path / "m.csv"
    me.write_text("dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\n" + metas)
    with pytest.raises(TraceError, match=match.replace("line ", r"\S*:")):
        import_trace(ev, me)


def test_bad_header(tmp_path):
    ev = tmp_path / "e.csv"
    ev.write_text("id,week,count\n")
    me = tmp_path / "m.csv"
    me.write_text("dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\n")
    with pytest.raises(TraceError, match="expected header"):
        import_trace(ev, me)


def test_event_beyond_horizon():
    with pytest.raises(TraceError, match="outside horizon"):
        Trace.build([AccessEvent("a", 5, 1)], [_meta("a")], horizon_weeks=5)


def test_duplicate_meta():
    with pytest.raises(TraceError, match="duplicate"):
        Trace.build([], [_meta("a"), _meta("a")], horizon_weeks=3)


@st.composite
def traces(draw):
    n = draw(st.integers(1, 5))
    horizon = draw(st.integers(1, 20))
    metas = [
        DatasetMeta(
            f"id{i}",
            draw(st.integers(0, horizon - 1)),
            draw(st.integers(0, 3)),
            draw(st.integers(0, 5)),
            draw(st.integers(1, 10**12)),
            draw(st.integers(1, 4)),
        )
        for i in range(n)
    ]
    events = []
    for m in metas:
        weeks = draw(st.lists(st.integers(m.creation_week, horizon - 1), max_size=6))
        events += [AccessEvent(m.dataset_id, w, draw(st.integers(1, 50))) for w in weeks]
    return Trace.build(events, metas, horizon)


@settings(max_examples=60, deadline=None)
@given(trace=traces())
def test_export_import_round_trip(tmp_path_factory, trace):
    d = tmp_path_factory.mktemp("rt")
    export_trace(trace, d / "e.csv", d / "m.csv", comment="test")
    assert import_trace(d / "e.csv", d / "m.csv") == trace


@settings(max_examples=40, deadline=None)
@given(trace=traces(), data=st.data())
def test_normalization_is_order_independent(trace, data):
    shuffled = data.draw(st.permutations(trace.events))
    metas = data.draw(st.permutations(trace.metas))
    assert Trace.build(shuffled, metas, trace.horizon_weeks) == trace

import json

import pytest
from hypothesis import given, strategies as st

from tweetstorm.ingest import (EndOfDocument, FieldError, OrderingError, OutOfRangeError, ParseError,
                               RawTweet, assign_document, corpus_fingerprint, default_stream_start,
                               iter_corpus, parse_corpus_line, read_corpus, replay, write_corpus)

START = 1464652800


def tw(i, ts, text="x"):
    return RawTweet(str(i), ts, text)


def test_parse_line():
    t = parse_corpus_line('{"id":"1","ts":1464652800,"text":"hello"}')
    assert t == RawTweet("1", 1464652800, "hello", None)


def test_parse_trims_text_and_keeps_country():
    t = parse_corpus_line('{"id":"7","ts":5,"text":"  hi there \\n","country":"CA"}')
    assert t.text == "hi there"
    assert t.country == "CA"


def test_missing_text_is_field_error():
    with pytest.raises(FieldError) as err:
        parse_corpus_line('{"id":"2","ts":1464652800}', 4)
    assert err.value.field == "text"
    assert err.value.line_no == 4


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError) as err:
        parse_corpus_line("not json", 17)
    assert err.value.line_no == 17
    assert "line 17" in str(err.value)


@pytest.mark.parametrize("line", ['{"id":"","ts":1,"text":"a"}', '{"id":"1","ts":"1","text":"a"}',
                                  '{"id":"1","ts":1,"text":3}', '[1,2]'])
def test_bad_field_types(line):
    with pytest.raises((FieldError, ParseError)):
        parse_corpus_line(line)


def test_iter_corpus_line_numbers_and_duplicates(tmp_corpus):
    path = tmp_corpus(['{"id":"1","ts":1,"text":"a"}', "", '{"id":"1","ts":2,"text":"b"}'])
    with pytest.raises(FieldError) as err:
        read_corpus(path)
    assert err.value.line_no == 3

    path = tmp_corpus(['{"id":"1","ts":1,"text":"a"}', "oops"])
    with pytest.raises(ParseError) as err:
        list(iter_corpus(path))
    assert err.value.line_no == 2


def test_country_filter(tmp_corpus):
    path = tmp_corpus(['{"id":"1","ts":1,"text":"a","country":"US"}',
                       '{"id":"2","ts":2,"text":"b","country":"CA"}'])
    assert [t.id for t in read_corpus(path, country="CA")] == ["2"]


def test_write_read_roundtrip(tmp_path):
    tweets = [RawTweet("a", 1, "héllo", "US"), RawTweet("b", 2, "x")]
    write_corpus(tmp_path / "c.jsonl", tweets)
    assert read_corpus(tmp_path / "c.jsonl") == tweets
    assert corpus_fingerprint(tweets) == corpus_fingerprint(read_corpus(tmp_path / "c.jsonl"))
    assert corpus_fingerprint(tweets) != corpus_fingerprint(tweets[:1])


@pytest.mark.parametrize("offset,doc", [(0, 0), (359, 0), (360, 1), (721, 2)])
def test_assign_document(offset, doc):
    assert assign_document(tw(1, START + offset), START, 360) == doc


def test_assign_document_before_start():
    with pytest.raises(OutOfRangeError):
        assign_document(tw(1, START - 1), START)


def test_default_stream_start_truncates_to_window():
    assert default_stream_start(START + 400, 360) == START + 360


def _shape(items):
    return ["t" if isinstance(i, tuple) else f"EOD({i.doc})" for i in items]


def test_replay_windows():
    tweets = [tw(1, START), tw(2, START + 10), tw(3, START + 100), tw(4, START + 360), tw(5, START + 700)]
    assert _shape(replay(tweets)) == ["t", "t", "t", "EOD(0)", "t", "t", "EOD(1)"]


def test_replay_empty():
    assert list(replay([])) == []


def test_replay_emits_markers_for_empty_documents():
    items = list(replay([tw(1, START), tw(2, START + 3 * 360 + 5)]))
    assert _shape(items) == ["t", "EOD(0)", "EOD(1)", "EOD(2)", "t", "EOD(3)"]


def test_replay_explicit_stream_start():
    items = list(replay([tw(1, START + 720)], stream_start=START))
    assert _shape(items) == ["EOD(0)", "EOD(1)", "t", "EOD(2)"]
    assert items[2][1] == 2


def test_replay_rejects_out_of_order():
    with pytest.raises(OrderingError):
        list(replay([tw(1, START + 5), tw(2, START + 4)]))


def test_week_of_tweets_gives_1680_documents():
    tweets = [tw(i, START + 60 * i) for i in range(7 * 24 * 60)]
    markers = sum(isinstance(i, EndOfDocument) for i in replay(tweets))
    # counting oracle: distinct 6-minute windows touched by the minutes of one week
    assert markers == len({(60 * i) // 360 for i in range(7 * 24 * 60)}) == 1680


@given(st.lists(st.integers(min_value=0, max_value=50_000), max_size=60), st.integers(1, 1000))
def test_replay_properties(offsets, window):
    tweets = [tw(i, START + o) for i, o in enumerate(sorted(offsets))]
    items = list(replay(tweets, window))
    groups, current = [], []
    markers = []
    for item in items:
        if isinstance(item, EndOfDocument):
            markers.append(item.doc)
            groups.append(current)
            current = []
        else:
            current.append(item[0])
    assert current == []
    assert [t for g in groups for t in g] == tweets
    docs = [d for i in items if isinstance(i, tuple) for d in [i[1]]]
    assert docs == sorted(docs)
    if tweets:
        assert len(markers) == 1 + max(docs)
        assert markers == list(range(len(markers)))


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(1, 5000))
def test_assign_document_monotone(a, b, w):
    a, b = sorted((a, b))
    assert assign_document(tw(1, START + a), START, w) <= assign_document(tw(2, START + b), START, w)

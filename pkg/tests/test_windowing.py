import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medrex.schema import CORP_HUS, SAME_FRAME
from medrex.standoff import Document, Entity, Relation
from medrex.windowing import (
    LabelMap,
    RelationClassMap,
    Segment,
    Vocabulary,
    WindowingError,
    align_labels,
    count_unreachable_relations,
    encode_segment,
    make_segments,
    ordered_entity_pairs,
    segment_corpus,
    tokenize,
    window_starts,
)


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_offsets():
    tokens = tokenize("aspirin 500 mg\n")
    assert [(t.surface, t.start, t.end) for t in tokens] == [
        ("aspirin", 0, 7), ("500", 8, 11), ("mg", 12, 14), ("\n", 14, 15),
    ]


def test_tokenize_seven_words():
    assert len(tokenize("every 4 weeks from July to October")) == 7


def test_tokenize_newlines_and_punctuation_split():
    tokens = tokenize("arrêt.\njusqu'à 10mg")
    assert [t.surface for t in tokens] == ["arrêt", ".", "\n", "jusqu", "'", "à", "10mg"]


@settings(max_examples=120, deadline=None)
@given(st.text(alphabet="aé b\nc-.'x0", max_size=60))
def test_tokenize_reconstructs_text(text):
    tokens = tokenize(text)
    for prev, nxt in zip(tokens, tokens[1:]):
        assert prev.end <= nxt.start
    rebuilt = []
    pos = 0
    for t in tokens:
        rebuilt.append(text[pos:t.start])
        rebuilt.append(t.surface)
        assert text[t.start:t.end] == t.surface
        pos = t.end
    rebuilt.append(text[pos:])
    assert "".join(rebuilt) == text


def _doc_with(text, spans):
    entities = tuple(
        Entity(f"T{i + 1}", etype, start, end, text[start:end])
        for i, (etype, start, end) in enumerate(spans)
    )
    return Document("d", text, entities, ())


def test_single_entity_doc_yields_no_segments():
    doc = _doc_with("aspirin given today", [("Drug", 0, 7)])
    assert make_segments(doc, 300, 150) == []


def test_small_doc_single_window():
    text = ("aspirin 500 mg " * 16).strip()  # 239 chars
    doc = _doc_with(text, [("Drug", 0, 7), ("Dosage", 8, 14)])
    segments = make_segments(doc, 300, 150)
    assert len(segments) == 1
    seg = segments[0]
    assert seg.window_start == 0 and seg.window_end == len(text)
    assert len(seg.tokens) == 48


def test_window_snaps_outward_never_splits_tokens():
    text = "alpha " * 60  # tokens of 5 chars
    doc = _doc_with(text.strip(), [("Drug", 0, 5), ("Dosage", 6, 11), ("Route", 300, 305), ("Date", 306, 311)])
    for seg in make_segments(doc, 100, 50):
        for t in seg.tokens:
            assert t.start >= seg.window_start and t.end <= seg.window_end


def test_window_starts_examples():
    assert window_starts(250, 300, 150) == [0]
    assert window_starts(1000, 300, 150) == [0, 150, 300, 450, 600, 750]
    with pytest.raises(WindowingError):
        window_starts(100, 300, 0)
    with pytest.raises(WindowingError):
        window_starts(100, 300, 301)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2000), st.integers(1, 400), st.integers(1, 400))
def test_every_character_covered_before_filtering(length, window, stride):
    if stride > window:
        stride = window
    starts = window_starts(length, window, stride)
    covered = set()
    for ws in starts:
        covered.update(range(ws, min(ws + window, length)))
    assert covered == set(range(length))


def test_align_labels_basic():
    text = "tocilizumab IV"
    doc = _doc_with(text, [("Drug", 0, 11), ("Route", 12, 14)])
    seg = make_segments(doc, 300, 150)[0]
    labels, spans = align_labels(seg, CORP_HUS)
    label_map = LabelMap(CORP_HUS)
    assert labels == (label_map.id_for("Drug"), label_map.id_for("Route"))
    assert spans == ((0, 0), (1, 1))


def test_align_labels_multi_token_entity():
    text = "every 4 weeks from July"
    doc = _doc_with(text, [("Frequency", 0, 13), ("Date", 19, 23)])
    seg = make_segments(doc, 300, 150)[0]
    labels, spans = align_labels(seg, CORP_HUS)
    freq_id = LabelMap(CORP_HUS).id_for("Frequency")
    assert labels[:3] == (freq_id, freq_id, freq_id)
    assert labels[3] == 0  # "from" stays outside
    assert spans[0] == (0, 2)


def test_align_labels_rejects_overlap():
    seg = Segment(
        "d", 0, 20,
        tuple(tokenize("tocilizumab IV daily")),
        (
            Entity("T1", "Drug", 0, 11, "tocilizumab"),
            Entity("T2", "Route", 8, 14, "mab IV"),
        ),
    )
    with pytest.raises(WindowingError, match="T1.*T2"):
        align_labels(seg, CORP_HUS)


def _encoded(text, spans, relations):
    doc = Document(
        "d", text,
        tuple(Entity(f"T{i+1}", etype, s, e, text[s:e]) for i, (etype, s, e) in enumerate(spans)),
        tuple(relations),
    )
    seg = make_segments(doc, 300, 150)[0]
    class_map = RelationClassMap(CORP_HUS)
    vocab = Vocabulary.build([doc])
    return encode_segment(seg, vocab, CORP_HUS, doc.relations, class_map), class_map


def test_pair_targets_m2():
    enc, class_map = _encoded(
        "aspirin 500 mg",
        [("Drug", 0, 7), ("Dosage", 8, 14)],
        [Relation("R1", "Refer_to", "T2", "T1")],
    )
    assert len(enc.targets) == 2
    typed = [t for t in enc.targets if t.class_id != 0]
    assert len(typed) == 1
    assert class_map.name_for(typed[0].class_id) == "Refer_to"
    # source entity is the dosage: its head token is index 1
    assert (typed[0].i, typed[0].j) == (1, 0)


def test_pair_targets_m5_counts():
    spans = [("Drug", 0, 2), ("Dosage", 3, 5), ("Route", 6, 8), ("Date", 9, 11), ("Frequency", 12, 14)]
    rels = [
        Relation("R1", "Refer_to", "T2", "T1"),
        Relation("R2", "Refer_to", "T3", "T1"),
        Relation("R3", "Start", "T4", "T1"),
    ]
    enc, _ = _encoded("aa bb cc dd ee", spans, rels)
    assert len(enc.targets) == 5 * 4
    assert sum(1 for t in enc.targets if t.class_id != 0) == 3


def test_pair_targets_conflicting_relations_error():
    with pytest.raises(WindowingError, match="conflicting"):
        _encoded(
            "aspirin 500 mg",
            [("Drug", 0, 7), ("Dosage", 8, 14)],
            [Relation("R1", "Refer_to", "T2", "T1"), Relation("R2", "Increase", "T2", "T1")],
        )


def test_pair_targets_same_frame_requires_enabled_map():
    text = "aa bb cc"
    doc = Document(
        "d", text,
        (
            Entity("T1", "Drug", 0, 2, "aa"),
            Entity("T2", "Dosage", 3, 5, "bb"),
            Entity("T3", "Route", 6, 8, "cc"),
        ),
        (
            Relation("R1", "Refer_to", "T2", "T1"),
            Relation("R2", "Refer_to", "T3", "T1"),
            Relation("R3", SAME_FRAME, "T2", "T3"),
        ),
    )
    seg = make_segments(doc, 300, 150)[0]
    vocab = Vocabulary.build([doc])
    plain = encode_segment(seg, vocab, CORP_HUS, doc.relations, RelationClassMap(CORP_HUS))
    assert sum(1 for t in plain.targets if t.class_id != 0) == 2
    with_sf = encode_segment(seg, vocab, CORP_HUS, doc.relations, RelationClassMap(CORP_HUS, include_same_frame=True))
    assert sum(1 for t in with_sf.targets if t.class_id != 0) == 3


def test_class_map_layout():
    plain = RelationClassMap(CORP_HUS)
    assert plain.name_for(0) == "NULL_REL"
    assert len(plain) == len(CORP_HUS.relation_types) + 1
    assert SAME_FRAME not in plain
    augmented = RelationClassMap(CORP_HUS, include_same_frame=True)
    assert len(augmented) == len(plain) + 1
    assert augmented.name_for(len(augmented) - 1) == SAME_FRAME


def test_vocabulary_build_and_unk():
    doc = _doc_with("aspirin aspirin mg", [])
    vocab = Vocabulary.build([doc])
    assert vocab.tokens[:5] == ["<unk>", "<e1>", "</e1>", "<e2>", "</e2>"]
    assert vocab.id_for("aspirin") == 5  # most frequent after specials
    assert vocab.id_for("jamais-vu") == 0


# --- independent oracle: char-coverage window enumerator -------------------


def _oracle_segments(doc, window, stride):
    tokens = tokenize(doc.text)
    starts = [0]
    while starts[-1] + window < len(doc.text):
        starts.append(starts[-1] + stride)
    result = []
    for ws in starts:
        we = min(ws + window, len(doc.text))
        chars = set(range(ws, we))
        for t in tokens:
            if set(range(t.start, t.end)) & chars:
                chars.update(range(t.start, t.end))
        lo = min(chars) if chars else ws
        hi = max(chars) + 1 if chars else we
        inside = [e for e in doc.entities if e.start >= lo and e.end <= hi]
        if len(inside) >= 2:
            result.append((lo, hi, tuple(e.id for e in sorted(inside, key=lambda e: (e.start, e.end, e.id)))))
    return result


def _oracle_unreachable(doc, oracle_segments):
    unreachable = 0
    for r in doc.relations:
        if not any(r.source in ids and r.target in ids for _, _, ids in oracle_segments):
            unreachable += 1
    return unreachable


def _random_doc(rng):
    words = []
    spans = []
    pos = 0
    for _ in range(rng.randint(5, 120)):
        length = rng.randint(2, 12)
        word = "".join(rng.choice("abcdefé") for _ in range(length))
        words.append(word)
        spans.append((pos, pos + length))
        pos += length + 1
    text = " ".join(words)
    entity_words = sorted(rng.sample(range(len(words)), k=min(len(words), rng.randint(0, 10))))
    etypes = ["Drug", "Dosage", "Route", "Date", "Frequency"]
    entities = tuple(
        Entity(f"T{k+1}", rng.choice(etypes), spans[i][0], spans[i][1], words[i])
        for k, i in enumerate(entity_words)
    )
    relations = []
    if len(entities) >= 2:
        for _ in range(rng.randint(0, 6)):
            a, b = rng.sample(range(len(entities)), 2)
            triple = ("Refer_to", entities[a].id, entities[b].id)
            if any((r.rtype, r.source, r.target) == triple for r in relations):
                continue
            relations.append(Relation(f"R{len(relations)+1}", "Refer_to", entities[a].id, entities[b].id))
    return Document("rand", text, entities, tuple(relations))


def test_segments_match_char_coverage_oracle():
    rng = random.Random(2024)
    for _ in range(100):
        doc = _random_doc(rng)
        window = rng.choice([60, 120, 200, 300])
        stride = rng.choice([window // 2, window])
        segments = make_segments(doc, window, stride)
        got = [(s.window_start, s.window_end, tuple(e.id for e in s.entities)) for s in segments]
        expected = _oracle_segments(doc, window, stride)
        assert got == expected
        assert all(len(ids) >= 2 for _, _, ids in got)
        assert count_unreachable_relations(doc, segments) == _oracle_unreachable(doc, expected)


def test_segment_corpus_report_and_determinism():
    rng = random.Random(7)
    docs = [_random_doc(rng) for _ in range(20)]
    segs1, report1 = segment_corpus(docs, 120, 60)
    segs2, report2 = segment_corpus(docs, 120, 60)
    assert segs1 == segs2
    assert report1.to_dict() == report2.to_dict()
    assert report1.segments_emitted == len(segs1)
    assert sum(report1.tokens_per_segment.values()) == len(segs1)
    payload = report1.to_dict()
    assert set(payload) == {
        "segments_emitted", "segments_excluded", "unreachable_relations", "tokens_per_segment",
    }


def test_pair_cardinality_identity():
    for m in range(2, 8):
        assert len(ordered_entity_pairs(m)) == m * (m - 1)

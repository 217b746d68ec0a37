import json
import struct

import numpy as np
import pytest

from setcse import (
    AdapterCheckpoint,
    Corpus,
    CorpusParseError,
    EmbeddingMatrix,
    FormatError,
    SemanticSet,
    Sentence,
    SetOverlapWarning,
    TruncationError,
    UnknownNameError,
    ValidationError,
    load_adapter,
    load_corpus,
    load_sets,
    read_embeddings,
    save_adapter,
    write_embeddings,
)

from conftest import matrix_from


# ---------------------------------------------------------------- sentences


def test_sentence_rejects_empty_id():
    with pytest.raises(ValidationError):
        Sentence(id="", text="x")


def test_sentence_rejects_control_chars_in_id():
    with pytest.raises(ValidationError, match="control"):
        Sentence(id="a\x00b", text="x")


def test_sentence_rejects_empty_label():
    with pytest.raises(ValidationError, match="empty label"):
        Sentence(id="a", text="x", labels=("ok", ""))


def test_sentence_labels_optional():
    assert Sentence(id="a", text="x").labels == ()


def test_corpus_rejects_duplicate_ids():
    s = Sentence(id="a", text="x")
    with pytest.raises(ValidationError, match="duplicate"):
        Corpus([s, s])


def test_corpus_lookup_and_order():
    items = [Sentence(id=f"s{i}", text=f"t{i}") for i in range(4)]
    c = Corpus(items)
    assert len(c) == 4
    assert [s.id for s in c] == ["s0", "s1", "s2", "s3"]
    assert c.by_id("s2").text == "t2"
    assert "s3" in c and "nope" not in c
    with pytest.raises(UnknownNameError, match="nope"):
        c.by_id("nope")


def test_label_index_groups_in_corpus_order():
    c = Corpus(
        [
            Sentence(id="a", text="", labels=("x",)),
            Sentence(id="b", text="", labels=("y", "x")),
            Sentence(id="c", text="", labels=("y",)),
        ]
    )
    assert c.label_index() == {"x": ["a", "b"], "y": ["b", "c"]}


# ---------------------------------------------------------------- corpus files


def test_load_corpus_two_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(
        '{"id": "s1", "text": "one", "label": "a"}\n'
        '{"id": "s2", "text": "two", "label": ["a", "b"]}\n'
    )
    c = load_corpus(p)
    assert [s.id for s in c] == ["s1", "s2"]
    assert c.by_id("s2").labels == ("a", "b")


def test_load_corpus_empty_file_is_valid(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    assert len(load_corpus(p)) == 0


def test_load_corpus_skips_blank_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "s1", "text": "one"}\n\n\n{"id": "s2", "text": "two"}\n')
    assert len(load_corpus(p)) == 2


def test_load_corpus_duplicate_id_names_both_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(
        '{"id": "s1", "text": "one"}\n'
        '{"id": "s2", "text": "two"}\n'
        '{"id": "s1", "text": "again"}\n'
    )
    with pytest.raises(ValidationError) as exc:
        load_corpus(p)
    msg = str(exc.value)
    assert "'s1'" in msg and "line 3" in msg and "line 1" in msg


def test_load_corpus_bad_json_reports_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "s1", "text": "one"}\n{oops\n')
    with pytest.raises(CorpusParseError) as exc:
        load_corpus(p)
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


def test_load_corpus_missing_field(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "s1"}\n')
    with pytest.raises(CorpusParseError):
        load_corpus(p)


def test_load_corpus_bad_label_type(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "s1", "text": "x", "label": 3}\n')
    with pytest.raises(CorpusParseError):
        load_corpus(p)


# ---------------------------------------------------------------- embedding matrix


def test_matrix_values_are_float32_and_locked():
    m = matrix_from({"a": [1, 0], "b": [0, 1]})
    assert m.values.dtype == np.float32
    assert m.dim == 2
    with pytest.raises(ValueError):
        m.values[0, 0] = 9


def test_matrix_row_lookup():
    m = matrix_from({"a": [1, 0], "b": [0, 2]})
    assert m.index_of("b") == 1
    np.testing.assert_array_equal(m.row("b"), np.array([0, 2], dtype=np.float32))
    got = m.rows_for(["b", "a"])
    np.testing.assert_array_equal(got, np.array([[0, 2], [1, 0]], dtype=np.float32))
    with pytest.raises(UnknownNameError):
        m.row("zzz")
    with pytest.raises(UnknownNameError):
        m.rows_for(["a", "zzz"])


def test_matrix_rejects_bad_shapes_and_values():
    with pytest.raises(ValidationError):
        EmbeddingMatrix(["a"], np.zeros(3, dtype=np.float32))
    with pytest.raises(ValidationError):
        EmbeddingMatrix(["a", "b"], np.ones((1, 3), dtype=np.float32))
    with pytest.raises(ValidationError):
        EmbeddingMatrix(["a", "a"], np.ones((2, 3), dtype=np.float32))
    with pytest.raises(ValidationError):
        EmbeddingMatrix(["a"], np.array([[np.nan, 1.0]], dtype=np.float32))
    with pytest.raises(ValidationError, match="zero norm"):
        EmbeddingMatrix(["a", "b"], np.array([[1, 0], [0, 0]], dtype=np.float32))


# ---------------------------------------------------------------- binary files


def test_embeddings_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    values = rng.normal(size=(3, 4)).astype(np.float32)
    m = EmbeddingMatrix(["x", "y", "z"], values)
    p = tmp_path / "m.scse"
    write_embeddings(p, m)
    back = read_embeddings(p)
    assert back.ids == m.ids
    assert back.dim == 4
    assert back.values.tobytes() == m.values.tobytes()


def test_embeddings_unicode_ids_round_trip(tmp_path):
    m = matrix_from({"héllo": [1, 0], "日本語": [0, 1]})
    p = tmp_path / "m.scse"
    write_embeddings(p, m)
    assert read_embeddings(p).ids == ("héllo", "日本語")


def test_read_embeddings_bad_magic(tmp_path):
    p = tmp_path / "m.scse"
    p.write_bytes(b"XXXX" + b"\x00" * 20)
    with pytest.raises(FormatError, match="magic"):
        read_embeddings(p)


def test_read_embeddings_bad_version(tmp_path):
    p = tmp_path / "m.scse"
    p.write_bytes(struct.pack("<4sIIQ", b"SCSE", 99, 2, 0))
    with pytest.raises(FormatError, match="version"):
        read_embeddings(p)


def test_read_embeddings_short_header(tmp_path):
    p = tmp_path / "m.scse"
    p.write_bytes(b"SCSE\x01")
    with pytest.raises(TruncationError):
        read_embeddings(p)


def test_read_embeddings_truncated_records(tmp_path):
    m = matrix_from({"a": [1, 0], "b": [0, 1], "c": [1, 1], "d": [2, 1]})
    p = tmp_path / "m.scse"
    write_embeddings(p, m)
    data = p.read_bytes()
    # keep the header's count=4 but drop the last record entirely
    record = struct.calcsize("<H") + 1 + 2 * 4
    p.write_bytes(data[: len(data) - record])
    with pytest.raises(TruncationError):
        read_embeddings(p)


def test_read_embeddings_trailing_bytes(tmp_path):
    m = matrix_from({"a": [1, 0]})
    p = tmp_path / "m.scse"
    write_embeddings(p, m)
    p.write_bytes(p.read_bytes() + b"junk")
    with pytest.raises(TruncationError, match="trailing"):
        read_embeddings(p)


def test_read_embeddings_invalid_utf8_id(tmp_path):
    header = struct.pack("<4sIIQ", b"SCSE", 1, 1, 1)
    record = struct.pack("<H", 2) + b"\xff\xfe" + struct.pack("<f", 1.0)
    p = tmp_path / "m.scse"
    p.write_bytes(header + record)
    with pytest.raises(FormatError, match="UTF-8"):
        read_embeddings(p)


# ---------------------------------------------------------------- semantic sets


def test_semantic_set_validation():
    s = SemanticSet("A", ("x", "y"))
    assert len(s) == 2
    with pytest.raises(ValidationError):
        SemanticSet("", ("x",))
    with pytest.raises(ValidationError, match="no members"):
        SemanticSet("A", ())
    with pytest.raises(ValidationError, match="repeats"):
        SemanticSet("A", ("x", "x"))


def _corpus_ab():
    return Corpus([Sentence(id="s1", text="a"), Sentence(id="s2", text="b")])


def test_load_sets_two_sets(tmp_path):
    p = tmp_path / "sets.json"
    p.write_text('{"A": ["s1"], "B": ["s2"]}')
    sets = load_sets(p, _corpus_ab())
    assert sorted(sets) == ["A", "B"]
    assert sets["A"].members == ("s1",)


def test_load_sets_unknown_id_names_set_and_id(tmp_path):
    p = tmp_path / "sets.json"
    p.write_text('{"A": ["missing"]}')
    with pytest.raises(UnknownNameError) as exc:
        load_sets(p, _corpus_ab())
    assert "'A'" in str(exc.value) and "'missing'" in str(exc.value)


def test_load_sets_overlap_warns_once(tmp_path):
    p = tmp_path / "sets.json"
    p.write_text('{"A": ["s1"], "B": ["s1", "s2"], "C": ["s1"]}')
    with pytest.warns(SetOverlapWarning) as rec:
        sets = load_sets(p, _corpus_ab())
    assert len(sets) == 3
    assert len(rec) == 1
    assert "s1" in str(rec[0].message)


def test_load_sets_not_an_object(tmp_path):
    p = tmp_path / "sets.json"
    p.write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_sets(p, _corpus_ab())


# ---------------------------------------------------------------- adapter files


def test_adapter_identity_round_trip(tmp_path):
    ckpt = AdapterCheckpoint.identity(4, metadata={"note": "t"})
    p = tmp_path / "a.json"
    save_adapter(p, ckpt)
    back = load_adapter(p)
    assert back.dim == 4
    np.testing.assert_array_equal(back.weights, np.eye(4))
    np.testing.assert_array_equal(back.bias, np.zeros(4))
    assert back.metadata["note"] == "t"


def test_adapter_round_trip_preserves_float_bits(tmp_path):
    rng = np.random.default_rng(0)
    ckpt = AdapterCheckpoint(3, rng.normal(size=(3, 3)), rng.normal(size=3), {})
    p = tmp_path / "a.json"
    save_adapter(p, ckpt)
    back = load_adapter(p)
    assert back.weights.tobytes() == ckpt.weights.tobytes()
    assert back.bias.tobytes() == ckpt.bias.tobytes()


def test_adapter_rejects_non_square():
    with pytest.raises(ValidationError):
        AdapterCheckpoint(4, np.ones((3, 4)), np.zeros(4), {})


def test_adapter_rejects_nan():
    w = np.eye(2)
    w[0, 0] = np.nan
    with pytest.raises(ValidationError, match="finite"):
        AdapterCheckpoint(2, w, np.zeros(2), {})


def test_load_adapter_missing_keys(tmp_path):
    p = tmp_path / "a.json"
    p.write_text('{"dim": 2, "weights": [[1, 0], [0, 1]]}')
    with pytest.raises(FormatError, match="bias"):
        load_adapter(p)


def test_load_adapter_non_numeric(tmp_path):
    p = tmp_path / "a.json"
    p.write_text(json.dumps({"dim": 1, "weights": [["x"]], "bias": [0.0]}))
    with pytest.raises(ValidationError):
        load_adapter(p)


def test_checkpoint_buffers_locked():
    ckpt = AdapterCheckpoint.identity(2)
    with pytest.raises(ValueError):
        ckpt.weights[0, 0] = 5.0

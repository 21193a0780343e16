import pytest

from ctxner.errors import ContractViolation, ProtocolError, TransportError
from ctxner.nerbridge import (
    MockGazetteerPredictor,
    NerRequest,
    RemoteNerPredictor,
    build_request,
    load_gazetteer,
    predict_query_tags,
)
from ctxner.rerank import assemble_context
from ctxner.retrieval import Candidate

from mockworld import build_mock_docs, gazetteer
from stubservers import gazetteer_ner, stub_server


@pytest.fixture(scope="module")
def predictor(gazetteer_table=None):
    return MockGazetteerPredictor(gazetteer(), context_rule=True)


def _context(doc, query_index, selected_indices):
    query = doc.sentences[query_index]
    selected = [Candidate(doc.doc_id, i, "bm25", 0.0) for i in selected_indices]
    return assemble_context(query, selected, doc)


def test_request_validation():
    with pytest.raises(ContractViolation):
        NerRequest((), (0, 0))
    with pytest.raises(ContractViolation):
        NerRequest(("a",), (0, 2))


def test_build_request_query_span(mock_docs):
    doc = mock_docs[0]
    ctx = _context(doc, 1, [0, 2])
    req = build_request(ctx)
    start, end = req.query_span
    assert list(req.tokens[start:end]) == [t.text for t in doc.sentences[1].tokens]


def test_empty_context_equals_bare_sentence(mock_docs, predictor):
    doc = mock_docs[0]
    for query in doc.annotated_sentences:
        bare = predictor.tag([t.text for t in query.tokens],
                             (0, len(query.tokens)))
        via_bridge = predict_query_tags(predictor, _context(doc, query.index, []))
        assert via_bridge == bare


def test_gazetteer_hit_tagged_regardless_of_context(mock_docs, predictor):
    doc = mock_docs[0]
    # sentence 0 starts with the gazetteer surname Aldan
    tags = predict_query_tags(predictor, _context(doc, 0, [7, 8]))
    assert tags[0] == "B-PER"
    assert tags[3] == "B-LOC"  # Ravenholm


def test_context_tags_discarded_by_slicing(mock_docs, predictor):
    doc = mock_docs[0]
    # context sentence 0 contains gazetteer hits; query sentence 5 has none
    tags = predict_query_tags(predictor, _context(doc, 5, [0]))
    assert len(tags) == len(doc.sentences[5].tokens)
    assert all(t == "O" for t in tags)


def test_slicing_preserves_length(mock_docs, predictor):
    doc = mock_docs[1]
    for query in doc.annotated_sentences:
        for selected in ([], [6], [6, 7], [0] if query.index != 0 else [1]):
            selected = [i for i in selected if i != query.index]
            tags = predict_query_tags(predictor, _context(doc, query.index, selected))
            assert len(tags) == len(query.tokens)


# ---------------------------------------------------------------------------
# context rule

def test_unknown_capitalized_token_without_context_is_o(predictor):
    tags = predictor.tag(["Falk", "waited", "."], (0, 3))
    assert tags == ["O", "O", "O"]


def test_corroborating_context_tags_b_per(mock_docs, predictor):
    doc = mock_docs[0]
    # query 1 contains the unknown first name Falk; body sentence
    # "Falk Aldan led the column ..." corroborates it
    corroborating = next(
        s.index for s in doc.sentences
        if not s.annotated and s.tokens[0].text == "Falk"
    )
    without = predict_query_tags(predictor, _context(doc, 1, []))
    with_ctx = predict_query_tags(predictor, _context(doc, 1, [corroborating]))
    assert without[0] == "O"
    assert with_ctx[0] == "B-PER"


def test_lowercase_unknown_never_tagged(predictor):
    tags = predictor.tag(["falk", "waited", "."], (0, 3))
    assert tags == ["O", "O", "O"]


def test_context_rule_off():
    plain = MockGazetteerPredictor(gazetteer(), context_rule=False)
    doc = build_mock_docs()[0]
    corroborating = next(
        s.index for s in doc.sentences
        if not s.annotated and s.tokens[0].text == "Falk"
    )
    tags = predict_query_tags(plain, _context(doc, 1, [corroborating]))
    assert tags[0] == "O"


def test_multi_token_gazetteer_surface():
    pred = MockGazetteerPredictor({"Black Company": "ORG"})
    tags = pred.tag(["the", "Black", "Company", "marched"], (0, 4))
    assert tags == ["O", "B-ORG", "I-ORG", "O"]


def test_empty_gazetteer_rejected():
    with pytest.raises(ContractViolation):
        MockGazetteerPredictor({})


# ---------------------------------------------------------------------------
# protocol plumbing

class _BadLengthPredictor:
    def tag(self, tokens, span):
        return ["O"] * (len(tokens) - 1)


class _BadTagPredictor:
    def tag(self, tokens, span):
        return ["B-GPE"] * len(tokens)


def test_length_mismatch_rejected(mock_docs):
    doc = mock_docs[0]
    with pytest.raises(ProtocolError, match="tags"):
        predict_query_tags(_BadLengthPredictor(), _context(doc, 0, []))


def test_malformed_tag_rejected(mock_docs):
    doc = mock_docs[0]
    with pytest.raises(ProtocolError, match="malformed"):
        predict_query_tags(_BadTagPredictor(), _context(doc, 0, []))


def test_remote_predictor_roundtrip(mock_docs, predictor):
    doc = mock_docs[0]
    with stub_server(gazetteer_ner(predictor)) as url:
        remote = RemoteNerPredictor(url, retries=1)
        for query_index in (0, 1):
            ctx = _context(doc, query_index, [6, 7])
            assert predict_query_tags(remote, ctx) == predict_query_tags(
                predictor, ctx
            )


def test_remote_predictor_unreachable():
    remote = RemoteNerPredictor("http://127.0.0.1:1", retries=2, backoff=0.01)
    with pytest.raises(TransportError):
        remote.tag(["a"], (0, 1))


def test_load_gazetteer(gazetteer_file):
    table = load_gazetteer(gazetteer_file)
    assert table == gazetteer()


def test_load_gazetteer_bad_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("Frodo\tHOBBIT\n", encoding="utf-8")
    with pytest.raises(ContractViolation):
        load_gazetteer(path)

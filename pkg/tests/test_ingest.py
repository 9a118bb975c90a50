import json
import os
import sys

import pytest

from surveygen import ingest
from surveygen.arxiv import ReferenceStub
from surveygen.errors import (EmptyInput, ParserCommandFailed, ProviderUnavailable,
                              UnsupportedFormat, UploadTooLarge)
from surveygen.fakes import HashingEmbedder, ScriptedChat
from surveygen.store import VectorStore

DATA = os.path.join(os.path.dirname(__file__), "data")
STUB_PARSER = f"{sys.executable} {os.path.join(DATA, 'stub_parser.py')}"

SAMPLE_MD = """# Foo
A. Author
## Abstract
Bar.
## 1 Introduction
Baz.
"""


def test_markdown_passthrough_skips_parser():
    # parser_cmd left empty: invoking it would raise, so passthrough is proven
    body, assets = ingest.parse_document(SAMPLE_MD.encode(), "paper.md", parser_cmd="")
    assert body == SAMPLE_MD
    assert assets == []


def test_unsupported_format():
    with pytest.raises(UnsupportedFormat):
        ingest.parse_document(b"x", "paper.docx")


def test_upload_size_limit():
    with pytest.raises(UploadTooLarge):
        ingest.parse_document(b"x" * (1024 * 1024 + 1), "a.md", upload_limit_mb=1)


def test_pdf_parsed_by_external_command(tmp_path):
    assets_dir = str(tmp_path / "assets")
    body, assets = ingest.parse_document(
        b"%PDF-1.4 fake", "sample.pdf", parser_cmd=STUB_PARSER,
        assets_dir=assets_dir, asset_prefix="r1_")
    assert "## Abstract" in body
    assert "Parsed Sample Paper" in body
    assert os.path.exists(os.path.join(assets_dir, "r1_fig_1.png"))
    figs = [a for a in assets if a.kind == "figure"]
    assert figs and figs[0].caption.startswith("Figure 1")
    assert figs[0].payload == "images/r1_fig_1.png"


def test_corrupt_pdf_surfaces_stderr():
    with pytest.raises(ParserCommandFailed) as err:
        ingest.parse_document(b"CORRUPT bytes", "bad.pdf", parser_cmd=STUB_PARSER)
    assert "damaged xref" in err.value.stderr


def test_missing_parser_command():
    with pytest.raises(ParserCommandFailed):
        ingest.parse_document(b"%PDF", "a.pdf", parser_cmd="")


def test_asset_detection_rules():
    md = (
        "Intro text.\n"
        "![plot](img/a.png)\n"
        "Figure 1: Accuracy over time.\n"
        "\n"
        "Table 2: Dataset sizes.\n"
        "| name | rows |\n"
        "|------|------|\n"
        "| A    | 10   |\n"
        "\n"
        "![orphan](img/b.png)\n"
        "Not a caption line.\n"
    )
    assets = ingest.detect_assets(md)
    kinds = [(a.kind, a.caption.split(":")[0]) for a in assets]
    assert kinds == [("figure", "Figure 1"), ("table", "Table 2")]
    assert assets[1].payload.startswith("| name |")


def test_metadata_heuristic_happy_path():
    fields = ingest.extract_metadata_heuristic(SAMPLE_MD)
    assert fields == {"title": "Foo", "authors": "A. Author",
                      "abstract": "Bar.", "introduction": "Baz."}


def test_metadata_llm_fills_missing():
    md = "# Foo\nA. Author\n## 1 Introduction\nBaz.\n"
    chat = ScriptedChat(sequence=[json.dumps({
        "title": "ignored", "authors": "ignored",
        "abstract": "LLM abstract.", "introduction": ""})])
    fields, flagged = ingest.extract_metadata(md, chat)
    assert fields["abstract"] == "LLM abstract."
    assert fields["title"] == "Foo"  # heuristic result not overwritten
    assert flagged == ()
    assert len(chat.calls) == 1


def test_metadata_degrades_when_llm_fails():
    md = "no headings at all"
    chat = ScriptedChat(sequence=["garbage"])
    fields, flagged = ingest.extract_metadata(md, chat)
    assert set(flagged) == {"title", "authors", "abstract", "introduction"}


def test_arxiv_stub_metadata_wins():
    stub = ReferenceStub("1234.5678", "Feed Title", "Feed abstract.",
                         ("X. Yz",), "http://pdf", 2023)
    paper = ingest.build_reference("r1", "arxiv", SAMPLE_MD, [], stub=stub)
    assert paper.title == "Feed Title"
    assert paper.abstract == "Feed abstract."
    assert paper.authors == "X. Yz"
    assert paper.introduction == "Baz."
    assert paper.arxiv_id == "1234.5678"


def test_index_reference_chunk_count():
    emb = HashingEmbedder(dim=32)
    store = VectorStore(dim=32)
    paper = ingest.ReferencePaper(ref_id="r1", source="upload",
                                  markdown_body="x" * 9000)
    n = ingest.index_reference(paper, store, emb, chunk_size=1500, overlap=200)
    assert n == 7
    assert store.chunk_count() == 7


def test_index_reference_idempotent():
    emb = HashingEmbedder(dim=32)
    store = VectorStore(dim=32)
    paper = ingest.ReferencePaper(ref_id="r1", source="upload",
                                  markdown_body="alpha beta " * 200)
    ingest.index_reference(paper, store, emb, 100, 10)
    before = store.collections["r1"]
    ingest.index_reference(paper, store, emb, 100, 10)
    assert store.collections["r1"] == before


class FailingEmbedder:
    """Fails on the nth embed() call."""

    dim = 32

    def __init__(self, fail_on=1):
        self.calls = 0
        self.fail_on = fail_on
        self.inner = HashingEmbedder(dim=32)

    def embed(self, texts):
        self.calls += 1
        if self.calls >= self.fail_on:
            raise ProviderUnavailable("embedding backend down")
        return self.inner.embed(texts)


def test_index_reference_atomic_on_failure():
    store = VectorStore(dim=32)
    paper = ingest.ReferencePaper(
        ref_id="r1", source="upload", markdown_body="words " * 500,
        assets=[ingest.AssetRecord("r1", "figure", "Figure 1: cap", "a.png")])
    with pytest.raises(ProviderUnavailable):
        ingest.index_reference(paper, store, FailingEmbedder(fail_on=2), 100, 10)
    assert store.chunk_count() == 0
    assert store.all_assets() == []

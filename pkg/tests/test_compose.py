import re

import pytest

from surveygen.compose import (
    SectionDraft,
    assemble_document,
    compose_cluster_section,
    compose_predefined_section,
    compose_survey,
    generate_subsection,
    strip_heading_lines,
)
from surveygen.errors import EmptyScope
from surveygen.fakes import HashingEmbedder, OfflineChat, ScriptedChat
from surveygen.outline import Outline, parse_outline
from surveygen.store import ChunkRecord, VectorStore

EMBEDDER = HashingEmbedder(dim=128)


def store_with(texts_by_ref):
    store = VectorStore(dim=EMBEDDER.dim)
    for rid, texts in texts_by_ref.items():
        vecs = EMBEDDER.embed(texts)
        store.replace_collection(rid, [
            ChunkRecord(rid, i, t, (0, len(t)), tuple(v))
            for i, (t, v) in enumerate(zip(texts, vecs))])
    return store


def echo_markers(request):
    prompt = request.messages[-1].content
    return " ".join(re.findall(r"<<<chunk [^>]+>>>", prompt)) or "no markers"


def test_subsection_scope_restriction():
    store = store_with({
        "r1": ["Transformers process tokens in parallel layers."],
        "r2": ["Recurrent networks process tokens sequentially instead."],
        "r3": ["Completely different pottery text lives here."],
    })
    chat = ScriptedChat(sequence=[echo_markers])
    body = generate_subsection(chat, store, EMBEDDER, "token processing",
                               scope=["r1", "r2"], top_k=8)
    assert "<<<chunk r1:0>>>" in body
    assert "<<<chunk r2:0>>>" in body
    assert "r3" not in body


def test_subsection_empty_scope_raises():
    store = store_with({"r1": ["indexed text here"]})
    chat = ScriptedChat(sequence=["should never be called"])
    with pytest.raises(EmptyScope):
        generate_subsection(chat, store, EMBEDDER, "anything", scope=[])
    assert chat.calls == []


def test_subsection_strips_heading_lines():
    store = store_with({"r1": ["some indexed sentence for retrieval"]})
    chat = ScriptedChat(sequence=["## Title\ntext stays here"])
    body = generate_subsection(chat, store, EMBEDDER, "t", scope=["r1"])
    assert body == "text stays here"


def test_strip_heading_lines_collapses_blank_runs():
    assert strip_heading_lines("# A\n\ntext\n\n\n# B\nmore") == "text\n\nmore"


def cluster_outline():
    return parse_outline(
        "# Abstract\n# Introduction\n# Alpha\n## One\n## Two\n## Three\n"
        "# Future Directions\n# Conclusion\n")


def test_compose_cluster_section_order_and_summary():
    outline = cluster_outline()
    store = store_with({
        "r1": ["Alpha methods use graph encoders for structure."],
        "r2": ["Alpha evaluation uses held out benchmark suites."],
    })
    chat = OfflineChat()
    draft = compose_cluster_section(chat, store, EMBEDDER, outline, 2,
                                    ["r1", "r2"], topic="alpha studies")
    assert draft.status == "generated"
    assert draft.summary
    assert len(draft.summary.split()) <= 150
    body = draft.body
    one = body.index("## One")
    two = body.index("## Two")
    three = body.index("## Three")
    assert one < two < three
    # merged lead paragraph precedes the first subsection heading
    assert body[:one].strip()
    purposes = [c.purpose for c in chat.calls]
    assert purposes.count("summary") == 1
    assert purposes.count("merge") == 1
    assert purposes.count("subsection") == 3


def test_compose_single_subsection_still_summarized():
    outline = parse_outline(
        "# Abstract\n# Introduction\n# Solo\n## Only Child\n"
        "# Future Directions\n# Conclusion\n")
    store = store_with({"r1": ["A single reference chunk about the solo topic."]})
    chat = OfflineChat()
    draft = compose_cluster_section(chat, store, EMBEDDER, outline, 2, ["r1"])
    assert draft.summary
    assert "## Only Child" in draft.body


def test_compose_empty_scope_records_warning_keeps_heading():
    outline = cluster_outline()
    store = store_with({"r1": ["irrelevant"]})
    chat = OfflineChat()
    draft = compose_cluster_section(chat, store, EMBEDDER, outline, 2, [])
    assert draft.warnings
    assert "## One" in draft.body and "## Three" in draft.body
    assert draft.summary == ""


def test_predefined_sections_distinct_instructions():
    chat = ScriptedChat()
    chat.add(r"abstract of the survey", "ABS-MARK body sentence.")
    chat.add(r"introduction of the survey", "INTRO-MARK body sentence.")
    chat.add(r"future directions section", "FUTURE-MARK body sentence.")
    chat.add(r"conclusion of the survey", "CONC-MARK body sentence.")
    out = {}
    from surveygen.compose import PREDEFINED_INSTRUCTIONS
    for role, instruction in PREDEFINED_INSTRUCTIONS:
        out[role] = compose_predefined_section(
            chat, role, instruction, "測定 topic", [("Alpha", "summary text")])
    assert out["abstract"].startswith("ABS-MARK")
    assert out["introduction"].startswith("INTRO-MARK")
    assert out["future_directions"].startswith("FUTURE-MARK")
    assert out["conclusion"].startswith("CONC-MARK")


def test_predefined_topic_only_fallback():
    chat = ScriptedChat()
    seen = {}

    def capture(request):
        seen["prompt"] = request.messages[-1].content
        return "Fallback body sentence."

    chat.add(r".", capture)
    body = compose_predefined_section(chat, "conclusion", "Write the conclusion.",
                                      "sparse attention", [])
    assert body == "Fallback body sentence."
    assert "write from the topic alone" in seen["prompt"]
    assert "sparse attention" in seen["prompt"]


def test_abstract_clamped_at_250_words():
    long_reply = " ".join(
        f"Sentence number {i} fills space with several words here." for i in range(60))
    chat = ScriptedChat(sequence=[long_reply])
    body = compose_predefined_section(chat, "abstract", "Write the abstract.",
                                      "t", [])
    assert len(body.split()) <= 250
    assert body.endswith(".")


def test_summary_clamped_at_150_words():
    outline = parse_outline(
        "# Abstract\n# Introduction\n# Big\n## Child\n# Future Directions\n# Conclusion\n")
    store = store_with({"r1": ["Child topic content sentence for retrieval."]})
    long_summary = " ".join(
        f"Summary word run {i} keeps adding more words." for i in range(40))
    chat = ScriptedChat()
    chat.add(r"Source material", "Drafted subsection prose for the child topic.")
    chat.add(r"at most 150 words", long_summary)
    chat.add(r"opening\nparagraph", "Merged opening paragraph.")
    draft = compose_cluster_section(chat, store, EMBEDDER, outline, 2, ["r1"])
    assert len(draft.summary.split()) <= 150


def full_outline():
    return parse_outline(
        "# Abstract\n# Introduction\n"
        "# Alpha\n## A One\n## A Two\n"
        "# Beta\n## B One\n"
        "# Future Directions\n# Conclusion\n")


def full_store():
    return store_with({
        "r1": ["Alpha graph encoders process structured inputs with attention. "
               "They scale to large graphs via sampling."],
        "r2": ["Alpha benchmark suites measure structured prediction quality. "
               "Held out splits avoid leakage."],
        "r3": ["Beta agents coordinate through message passing protocols. "
               "Shared memory variants trade bandwidth for latency."],
    })


def test_compose_survey_end_to_end_offline():
    outline = full_outline()
    chat = OfflineChat()
    drafts = compose_survey(chat, full_store(), EMBEDDER, outline,
                            {2: ["r1", "r2"], 5: ["r3"]}, topic="test topic")
    # 2 cluster sections + 4 predefined
    assert sorted(drafts) == [0, 1, 2, 5, 7, 8]
    assert all(d.status == "generated" for d in drafts.values())
    assert drafts[2].summary and drafts[5].summary
    for idx in (0, 1, 7, 8):
        assert drafts[idx].body
        assert "#" not in drafts[idx].body


def test_compose_survey_preserves_edited_sections():
    outline = full_outline()
    chat = OfflineChat()
    store = full_store()
    scopes = {2: ["r1", "r2"], 5: ["r3"]}
    first = compose_survey(chat, store, EMBEDDER, outline, scopes, topic="t")
    edited = SectionDraft(position=2, title="Alpha",
                          body="EDIT-MARKER-7 custom text.",
                          summary="custom summary", status="edited")
    existing = dict(first)
    existing[2] = edited
    second = compose_survey(chat, store, EMBEDDER, outline, scopes, topic="t",
                            existing=existing)
    assert second[2].body == "EDIT-MARKER-7 custom text."
    assert second[2].status == "edited"
    # forced regeneration overwrites the edit
    third = compose_survey(chat, store, EMBEDDER, outline, scopes, topic="t",
                           existing=existing, force=True)
    assert "EDIT-MARKER-7" not in third[2].body


def test_assemble_document_heading_tree_matches_outline():
    outline = full_outline()
    chat = OfflineChat()
    drafts = compose_survey(chat, full_store(), EMBEDDER, outline,
                            {2: ["r1", "r2"], 5: ["r3"]}, topic="test topic")
    text = assemble_document(outline, drafts)
    headings = []
    for line in text.splitlines():
        if line.startswith("#"):
            hashes = len(line) - len(line.lstrip("#"))
            headings.append((hashes, line[hashes + 1:]))
    assert headings == list(outline.entries)


def test_assemble_document_respects_renamed_and_level3_entries():
    outline = parse_outline(
        "# Abstract\n# Opening Words\n# Alpha\n## A One\n### Deep Cut\n"
        "# Future Directions\n# Conclusion\n",
        predefined=("Abstract", "Opening Words", "Future Directions", "Conclusion"))
    chat = OfflineChat()
    drafts = compose_survey(chat, full_store(), EMBEDDER, outline,
                            {2: ["r1", "r2"]}, topic="renamed test")
    text = assemble_document(outline, drafts)
    headings = [line for line in text.splitlines() if line.startswith("#")]
    assert headings == ["# Abstract", "# Opening Words", "# Alpha", "## A One",
                        "### Deep Cut", "# Future Directions", "# Conclusion"]

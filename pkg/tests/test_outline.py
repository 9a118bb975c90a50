import random

import pytest

from surveygen.errors import FillFormatError, InvariantViolation, OutlineSyntaxError
from surveygen.fakes import OfflineChat, ScriptedChat
from surveygen.outline import (
    Outline,
    apply_edit,
    build_outline_template,
    delete_entry,
    fill_outline,
    insert_entry,
    move_entry,
    parse_outline,
    rename_entry,
    render_outline,
    replace_text,
    validate_outline,
)


def basic_outline():
    return Outline(entries=(
        (1, "Abstract"),
        (1, "Introduction"),
        (1, "Alpha"),
        (2, "Alpha One"),
        (2, "Alpha Two"),
        (1, "Beta"),
        (2, "Beta One"),
        (1, "Future Directions"),
        (1, "Conclusion"),
    ))


def test_render_then_parse_is_identity():
    outline = basic_outline()
    again = parse_outline(render_outline(outline))
    assert again.entries == outline.entries


def test_parse_skips_blank_lines_and_strips_padding():
    text = "# Abstract\n\n# Introduction\n\n#  Padded Title \n# Future Directions\n# Conclusion\n"
    outline = parse_outline(text)
    assert outline.entries[2] == (1, "Padded Title")


@pytest.mark.parametrize("text,line_no", [
    ("# Abstract\nplain prose line\n", 2),
    ("# Abstract\n#### Too Deep\n", 2),
    ("# Abstract\n#NoSpace\n", 2),
    ("# Abstract\n# \n", 2),
    ("# Abstract\n### Skips A Level\n", 2),
    ("## Starts Too Deep\n", 1),
    ("", 0),
])
def test_parse_rejects_bad_grammar(text, line_no):
    with pytest.raises(OutlineSyntaxError) as err:
        parse_outline(text)
    assert err.value.line_no == line_no


def test_validate_rejects_duplicate_predefined():
    outline = Outline(entries=(
        (1, "Abstract"), (1, "Introduction"), (1, "Abstract"),
        (1, "Future Directions"), (1, "Conclusion"),
    ))
    with pytest.raises(InvariantViolation):
        validate_outline(outline)


def test_validate_rejects_predefined_out_of_order():
    outline = Outline(entries=(
        (1, "Introduction"), (1, "Abstract"),
        (1, "Future Directions"), (1, "Conclusion"),
    ))
    with pytest.raises(InvariantViolation):
        validate_outline(outline)


def test_validate_rejects_missing_predefined():
    outline = Outline(entries=((1, "Abstract"), (1, "Introduction"), (1, "Conclusion")))
    with pytest.raises(InvariantViolation):
        validate_outline(outline)


# -- template and fill --------------------------------------------------------

def test_template_shape():
    template = build_outline_template(["Graph Models", "Text Models"], slots_per_cluster=2)
    text = template.rendered()
    assert text.splitlines() == [
        "# Abstract",
        "# Introduction",
        "# Graph Models",
        "## [slot-1-1]",
        "## [slot-1-2]",
        "# Text Models",
        "## [slot-2-1]",
        "## [slot-2-2]",
        "# Future Directions",
        "# Conclusion",
    ]
    assert len(template.slots()) == 4


def test_template_validation():
    with pytest.raises(ValueError):
        build_outline_template([])
    with pytest.raises(ValueError):
        build_outline_template(["A"], slots_per_cluster=1)
    with pytest.raises(ValueError):
        build_outline_template(["A"], slots_per_cluster=6)


def test_fill_outline_offline():
    template = build_outline_template(["Graph Models", "Text Models"])
    chat = OfflineChat()
    outline = fill_outline(chat, template, {0: ["desc a"], 1: ["desc b"]})
    validate_outline(outline)
    assert outline.level1_titles() == [
        "Abstract", "Introduction", "Graph Models", "Text Models",
        "Future Directions", "Conclusion",
    ]
    level2 = [t for lvl, t in outline.entries if lvl == 2]
    assert len(level2) == 6
    assert len(chat.calls) == 2
    # one call per cluster, each mentioning its own name
    assert "Graph Models" in chat.calls[0].messages[-1].content
    assert "Text Models" in chat.calls[1].messages[-1].content


def test_fill_blank_slot_gets_its_own_default():
    template = build_outline_template(["Only"], slots_per_cluster=3)
    chat = ScriptedChat(sequence=["1. Spectral Methods\n2.\n3. Open Benchmarks"])
    outline = fill_outline(chat, template, {0: []})
    level2 = [t for lvl, t in outline.entries if lvl == 2]
    assert level2 == ["Spectral Methods", "Methods", "Open Benchmarks"]


def test_fill_ignores_extra_unrequested_lines():
    template = build_outline_template(["Only"], slots_per_cluster=2)
    reply = "# A Whole Heading\n1. First Title\n2. Second Title\n3. Unrequested\nclosing remark"
    chat = ScriptedChat(sequence=[reply])
    outline = fill_outline(chat, template, {0: []})
    level2 = [t for lvl, t in outline.entries if lvl == 2]
    assert level2 == ["First Title", "Second Title"]


def test_fill_retries_once_then_fails():
    template = build_outline_template(["Only"])
    chat = ScriptedChat(sequence=["no list here", "still prose"])
    with pytest.raises(FillFormatError):
        fill_outline(chat, template, {0: []})
    assert len(chat.calls) == 2
    assert "numbered" in chat.calls[1].messages[-1].content


def test_fill_recovers_on_second_attempt():
    template = build_outline_template(["Only"], slots_per_cluster=2)
    chat = ScriptedChat(sequence=["nope", "1. Alpha\n2. Beta"])
    outline = fill_outline(chat, template, {0: []})
    assert [t for lvl, t in outline.entries if lvl == 2] == ["Alpha", "Beta"]


# -- edits --------------------------------------------------------------------

def test_insert_and_version_bump():
    outline = basic_outline()
    edited = insert_entry(outline, 5, 3, "Alpha Two Detail")
    assert edited.entries[5] == (3, "Alpha Two Detail")
    assert edited.version == outline.version + 1
    assert outline.entries == basic_outline().entries


def test_insert_level_skip_rejected_and_state_unchanged():
    outline = basic_outline()
    with pytest.raises(InvariantViolation):
        insert_entry(outline, 3, 3, "Too Deep")
    assert outline.entries == basic_outline().entries
    assert outline.version == 1


def test_rename_cluster_section():
    outline = basic_outline()
    edited = rename_entry(outline, 2, "Alpha Renamed")
    assert edited.entries[2] == (1, "Alpha Renamed")
    assert edited.predefined == outline.predefined


def test_rename_predefined_keeps_protection():
    outline = basic_outline()
    edited = rename_entry(outline, 8, "Concluding Remarks")
    assert edited.entries[8] == (1, "Concluding Remarks")
    assert "Concluding Remarks" in edited.predefined
    with pytest.raises(InvariantViolation):
        delete_entry(edited, 8)
    validate_outline(edited)


def test_rename_to_existing_predefined_title_rejected():
    outline = basic_outline()
    with pytest.raises(InvariantViolation):
        rename_entry(outline, 2, "Abstract")


def test_delete_removes_subtree():
    outline = basic_outline()
    edited = delete_entry(outline, 2)
    assert edited.entries == (
        (1, "Abstract"), (1, "Introduction"),
        (1, "Beta"), (2, "Beta One"),
        (1, "Future Directions"), (1, "Conclusion"),
    )


def test_delete_predefined_rejected():
    outline = basic_outline()
    for idx in (0, 1, 7, 8):
        with pytest.raises(InvariantViolation):
            delete_entry(outline, idx)


def test_move_subtree():
    outline = basic_outline()
    # move Alpha (3 entries) to sit after Beta's subtree
    edited = move_entry(outline, 2, 4)
    assert edited.entries == (
        (1, "Abstract"), (1, "Introduction"),
        (1, "Beta"), (2, "Beta One"),
        (1, "Alpha"), (2, "Alpha One"), (2, "Alpha Two"),
        (1, "Future Directions"), (1, "Conclusion"),
    )


def test_move_breaking_hierarchy_rejected():
    outline = basic_outline()
    # a level-2 entry cannot become the first entry
    with pytest.raises(InvariantViolation):
        move_entry(outline, 3, 0)
    assert outline.entries == basic_outline().entries


def test_move_predefined_out_of_order_rejected():
    outline = basic_outline()
    with pytest.raises(InvariantViolation):
        move_entry(outline, 8, 0)


def test_apply_edit_dispatch_and_unknown_op():
    outline = basic_outline()
    edited = apply_edit(outline, {"op": "rename", "index": 2, "title": "Gamma"})
    assert edited.entries[2] == (1, "Gamma")
    with pytest.raises(InvariantViolation):
        apply_edit(outline, {"op": "squash", "index": 0})


def test_replace_text_full_edit():
    outline = basic_outline()
    text = (
        "# Abstract\n# Introduction\n# Alpha\n## Alpha One\n### Fine Point\n"
        "# Future Directions\n# Conclusion\n"
    )
    edited = replace_text(outline, text)
    assert (3, "Fine Point") in edited.entries
    assert edited.version == 2


def test_replace_text_missing_predefined_rejected():
    outline = basic_outline()
    with pytest.raises(InvariantViolation):
        replace_text(outline, "# Abstract\n# Introduction\n# Alpha\n# Conclusion\n")
    assert outline.entries == basic_outline().entries


def test_replace_text_respects_renamed_predefined():
    outline = rename_entry(basic_outline(), 8, "Wrap Up")
    text = "# Abstract\n# Introduction\n# Future Directions\n# Wrap Up\n"
    edited = replace_text(outline, text)
    assert edited.entries[-1] == (1, "Wrap Up")
    with pytest.raises(InvariantViolation):
        replace_text(outline, "# Abstract\n# Introduction\n# Future Directions\n# Conclusion\n")


# -- randomized round trips and edit churn ------------------------------------

def random_outline(rng: random.Random) -> Outline:
    words = ["graph", "neural", "sparse", "retrieval", "agents", "scaling",
             "probing", "fusion", "routing", "decoding"]

    def title(prefix):
        return f"{prefix} {rng.choice(words).capitalize()} {rng.randrange(1000)}"

    entries = [(1, "Abstract"), (1, "Introduction")]
    for c in range(rng.randint(1, 4)):
        entries.append((1, title(f"Cluster{c}")))
        for s in range(rng.randint(0, 3)):
            entries.append((2, title("Sub")))
            for d in range(rng.randint(0, 2)):
                entries.append((3, title("Deep")))
    entries.extend([(1, "Future Directions"), (1, "Conclusion")])
    outline = Outline(entries=tuple(entries))
    validate_outline(outline)
    return outline


def test_random_round_trips():
    rng = random.Random(20260815)
    for _ in range(150):
        outline = random_outline(rng)
        again = parse_outline(render_outline(outline))
        assert again.entries == outline.entries


def test_random_edit_sequences_keep_invariants():
    rng = random.Random(99)
    for trial in range(40):
        outline = random_outline(rng)
        successes = 0
        for _ in range(30):
            op = rng.choice(["insert", "rename", "delete", "move"])
            n = len(outline.entries)
            try:
                if op == "insert":
                    outline = insert_entry(outline, rng.randrange(n + 1),
                                           rng.choice([1, 2, 3]),
                                           f"New {rng.randrange(10_000)}")
                elif op == "rename":
                    outline = rename_entry(outline, rng.randrange(n),
                                           f"Renamed {rng.randrange(10_000)}")
                elif op == "delete":
                    outline = delete_entry(outline, rng.randrange(n))
                else:
                    outline = move_entry(outline, rng.randrange(n),
                                         rng.randrange(n))
                successes += 1
            except InvariantViolation:
                pass
            validate_outline(outline)
        assert outline.version == 1 + successes

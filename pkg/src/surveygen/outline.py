"""Survey outline: predefined sections + cluster sections + filled subsections.

The outline is an ordered list of (level, title) with levels 1-3 and a strict
no-skip hierarchy. Four level-1 sections are predefined; they can be renamed
but never deleted, and they keep their canonical relative order. The text
grammar is one heading per line: `# `, `## `, `### `.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from . import providers
from .errors import FillFormatError, InvariantViolation, OutlineSyntaxError
from .providers import ChatProvider, chat_request
from .textutil import numbered_lines

PREDEFINED_TITLES = ("Abstract", "Introduction", "Future Directions", "Conclusion")
SLOT_DEFAULTS = ("Overview", "Methods", "Discussion", "Applications", "Challenges")

FILL_PROMPT = """A survey section is planned for the reference cluster named "{name}".

Member descriptions:
{descs}

Propose {k} subsection titles for this section, specific to the material above.
Return a numbered list with exactly {k} short titles (at most 8 words each), and
nothing else.{reminder}"""


Entry = tuple[int, str]


@dataclass(frozen=True)
class Outline:
    entries: tuple[Entry, ...]
    predefined: tuple[str, ...] = PREDEFINED_TITLES
    version: int = 1

    def level1_titles(self) -> list[str]:
        return [t for lvl, t in self.entries if lvl == 1]


def validate_entries(entries) -> None:
    """Hierarchy rules only; predefined rules are checked separately."""
    if not entries:
        raise InvariantViolation("outline cannot be empty")
    prev_level = 0
    for i, (level, title) in enumerate(entries):
        if level not in (1, 2, 3):
            raise InvariantViolation(f"entry {i}: bad level {level}")
        if not title.strip():
            raise InvariantViolation(f"entry {i}: empty title")
        # titles must survive render -> parse unchanged
        if title != title.strip() or "\n" in title:
            raise InvariantViolation(f"entry {i}: title has stray whitespace")
        if level > prev_level + 1:
            raise InvariantViolation(
                f"entry {i}: level {level} skips below level {prev_level}")
        prev_level = level


def validate_predefined(entries, predefined) -> None:
    """Each predefined title appears exactly once at level 1, canonical order."""
    level1 = [t for lvl, t in entries if lvl == 1]
    positions = []
    for title in predefined:
        count = level1.count(title)
        if count != 1:
            raise InvariantViolation(
                f"predefined section {title!r} must appear exactly once, found {count}")
        positions.append(level1.index(title))
    if positions != sorted(positions):
        raise InvariantViolation("predefined sections out of canonical order")


def validate_outline(outline: Outline) -> None:
    validate_entries(outline.entries)
    validate_predefined(outline.entries, outline.predefined)


def render_outline(outline: Outline) -> str:
    return "\n".join("#" * lvl + " " + title for lvl, title in outline.entries) + "\n"


def parse_outline(text: str, predefined=PREDEFINED_TITLES) -> Outline:
    entries: list[Entry] = []
    prev_level = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip():
            continue
        hashes = len(line) - len(line.lstrip("#"))
        if hashes == 0 or hashes > 3 or not line[hashes:].startswith(" "):
            raise OutlineSyntaxError(line_no, f"not a heading line: {line!r}")
        title = line[hashes + 1:].strip()
        if not title:
            raise OutlineSyntaxError(line_no, "empty title")
        if hashes > prev_level + 1:
            raise OutlineSyntaxError(
                line_no, f"level {hashes} skips below level {prev_level}")
        entries.append((hashes, title))
        prev_level = hashes
    if not entries:
        raise OutlineSyntaxError(0, "no outline entries")
    if entries[0][0] != 1:
        raise OutlineSyntaxError(1, "outline must start at level 1")
    return Outline(entries=tuple(entries), predefined=predefined)


# -- template fill-in ---------------------------------------------------------

@dataclass(frozen=True)
class TemplateSlot:
    cluster_index: int
    slot_index: int
    label: str


@dataclass(frozen=True)
class OutlineTemplate:
    names: tuple[str, ...]
    slots_per_cluster: int

    def slots(self) -> list[TemplateSlot]:
        return [TemplateSlot(c, s, f"slot-{c + 1}-{s + 1}")
                for c in range(len(self.names))
                for s in range(self.slots_per_cluster)]

    def rendered(self) -> str:
        lines = ["# Abstract", "# Introduction"]
        for c, name in enumerate(self.names):
            lines.append(f"# {name}")
            lines.extend(f"## [slot-{c + 1}-{s + 1}]"
                         for s in range(self.slots_per_cluster))
        lines.extend(["# Future Directions", "# Conclusion"])
        return "\n".join(lines) + "\n"


def build_outline_template(names, slots_per_cluster: int = 3) -> OutlineTemplate:
    if not names:
        raise ValueError("at least one cluster name required")
    if not 2 <= slots_per_cluster <= 5:
        raise ValueError("slots_per_cluster must be in 2..5")
    return OutlineTemplate(names=tuple(names), slots_per_cluster=slots_per_cluster)


def fill_outline(chat: ChatProvider, template: OutlineTemplate,
                 descriptions_by_cluster: dict[int, list[str]]) -> Outline:
    """One LLM call per cluster section; unfilled slots take the defaults."""
    entries: list[Entry] = [(1, "Abstract"), (1, "Introduction")]
    for c, name in enumerate(template.names):
        titles = _fill_cluster_slots(chat, name,
                                     descriptions_by_cluster.get(c, []),
                                     template.slots_per_cluster)
        entries.append((1, name))
        entries.extend((2, t) for t in titles)
    entries.extend([(1, "Future Directions"), (1, "Conclusion")])
    outline = Outline(entries=tuple(entries))
    validate_outline(outline)
    return outline


_SLOT_LINE_RE = re.compile(r"^(\d+)[.)]\s*(.*)$")


def _fill_cluster_slots(chat, name, descriptions, k) -> list[str]:
    descs = "\n".join(f"- {d}" for d in descriptions) or "- (no descriptions)"
    reminder = ""
    for attempt in range(2):
        reply = chat.complete(chat_request(
            FILL_PROMPT.format(name=name, descs=descs, k=k, reminder=reminder),
            providers.PURPOSE_FILL))
        # keep list numbers so a blank item defaults its own slot, not a later one
        by_number: dict[int, str] = {}
        for line in reply.splitlines():
            m = _SLOT_LINE_RE.match(line.strip())
            if m:
                by_number.setdefault(int(m.group(1)), m.group(2).strip())
        if by_number:
            return [by_number.get(s + 1, "") or SLOT_DEFAULTS[s] for s in range(k)]
        lines = numbered_lines(reply)
        if lines:
            return [(lines[s].strip() if s < len(lines) else "") or SLOT_DEFAULTS[s]
                    for s in range(k)]
        reminder = ("\n\nYour previous reply contained no numbered list; "
                    "reply with the numbered titles only.")
    raise FillFormatError(f"no usable slot titles for section {name!r}")


# -- edits --------------------------------------------------------------------

def _subtree_end(entries, index: int) -> int:
    level = entries[index][0]
    end = index + 1
    while end < len(entries) and entries[end][0] > level:
        end += 1
    return end


def _finish(outline: Outline, entries, predefined=None) -> Outline:
    candidate = replace(outline, entries=tuple(entries),
                        predefined=predefined or outline.predefined,
                        version=outline.version + 1)
    validate_outline(candidate)
    return candidate


def insert_entry(outline: Outline, index: int, level: int, title: str) -> Outline:
    if not 0 <= index <= len(outline.entries):
        raise InvariantViolation(f"insert position {index} out of range")
    entries = list(outline.entries)
    entries.insert(index, (level, title.strip()))
    return _finish(outline, entries)


def rename_entry(outline: Outline, index: int, new_title: str) -> Outline:
    if not 0 <= index < len(outline.entries):
        raise InvariantViolation(f"no entry at {index}")
    new_title = new_title.strip()
    level, old_title = outline.entries[index]
    entries = list(outline.entries)
    entries[index] = (level, new_title)
    predefined = outline.predefined
    if level == 1 and old_title in predefined:
        predefined = tuple(new_title if t == old_title else t for t in predefined)
    return _finish(outline, entries, predefined)


def delete_entry(outline: Outline, index: int) -> Outline:
    if not 0 <= index < len(outline.entries):
        raise InvariantViolation(f"no entry at {index}")
    level, title = outline.entries[index]
    if level == 1 and title in outline.predefined:
        raise InvariantViolation(f"predefined section {title!r} cannot be deleted")
    entries = list(outline.entries)
    del entries[index:_subtree_end(outline.entries, index)]
    return _finish(outline, entries)


def move_entry(outline: Outline, index: int, target: int) -> Outline:
    """Relocate the subtree at `index` to position `target` in the remainder."""
    if not 0 <= index < len(outline.entries):
        raise InvariantViolation(f"no entry at {index}")
    end = _subtree_end(outline.entries, index)
    block = list(outline.entries[index:end])
    rest = list(outline.entries[:index]) + list(outline.entries[end:])
    if not 0 <= target <= len(rest):
        raise InvariantViolation(f"move target {target} out of range")
    entries = rest[:target] + block + rest[target:]
    return _finish(outline, entries)


def apply_edit(outline: Outline, edit: dict) -> Outline:
    op = edit.get("op")
    if op == "insert":
        return insert_entry(outline, int(edit["index"]), int(edit["level"]),
                            str(edit["title"]))
    if op == "rename":
        return rename_entry(outline, int(edit["index"]), str(edit["title"]))
    if op == "delete":
        return delete_entry(outline, int(edit["index"]))
    if op == "move":
        return move_entry(outline, int(edit["index"]), int(edit["target"]))
    raise InvariantViolation(f"unknown outline edit op {op!r}")


def replace_text(outline: Outline, text: str) -> Outline:
    """Whole-text edit from the UI editor; predefined sections must survive."""
    parsed = parse_outline(text, predefined=outline.predefined)
    validate_predefined(parsed.entries, outline.predefined)
    return replace(outline, entries=parsed.entries, version=outline.version + 1)

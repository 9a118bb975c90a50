"""Render the composed survey to Markdown, LaTeX, and PDF bundles.

The heading tree of the rendered document reproduces the outline exactly;
the survey title and the References header are plain text lines so they never
perturb it. Citations appear as [n] numbered by first appearance. The outline
structure diagram is a DOT digraph (root -> level-1 -> level-2) rendered to an
image by an external layout command when one is configured.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
import zipfile
from dataclasses import dataclass, field
from io import BytesIO

from .citations import CitationSet
from .errors import DanglingCitation, LatexToolchainFailed, LayoutCommandFailed
from .outline import Outline


@dataclass
class ExportBundle:
    format: str
    main_name: str
    main_bytes: bytes
    assets: dict[str, bytes] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def manifest(self) -> list[str]:
        return [self.main_name] + sorted(self.assets)

    def to_zip(self) -> bytes:
        buf = BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr(self.main_name, self.main_bytes)
            for name in sorted(self.assets):
                zf.writestr(name, self.assets[name])
        return buf.getvalue()


# -- outline diagram -----------------------------------------------------------

def _dot_escape(label: str) -> str:
    return label.replace("\\", "\\\\").replace('"', '\\"')


def outline_dot(outline: Outline, title: str) -> str:
    lines = ["digraph outline {", "  rankdir=LR;", "  node [shape=box];",
             f'  n0 [label="{_dot_escape(title)}"];']
    edges = []
    counter = 1
    parent = 0
    for lvl, entry_title in outline.entries:
        if lvl > 2:
            continue
        node = counter
        counter += 1
        lines.append(f'  n{node} [label="{_dot_escape(entry_title)}"];')
        if lvl == 1:
            parent = node
            edges.append(f"  n0 -> n{node};")
        else:
            edges.append(f"  n{parent} -> n{node};")
    return "\n".join(lines + edges + ["}"]) + "\n"


def run_layout(dot_text: str, layout_cmd: str) -> bytes:
    """`<cmd> -Tpng in.dot -o out.png`; raises LayoutCommandFailed."""
    with tempfile.TemporaryDirectory() as tmp:
        dot_path = os.path.join(tmp, "in.dot")
        png_path = os.path.join(tmp, "out.png")
        with open(dot_path, "w", encoding="utf-8") as fh:
            fh.write(dot_text)
        try:
            proc = subprocess.run(
                shlex.split(layout_cmd) + ["-Tpng", dot_path, "-o", png_path],
                capture_output=True, timeout=120)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise LayoutCommandFailed(f"layout command failed to run: {exc}")
        if proc.returncode != 0 or not os.path.exists(png_path):
            raise LayoutCommandFailed(
                f"layout command exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace')[:500]}")
        with open(png_path, "rb") as fh:
            return fh.read()


def render_outline_diagram(outline: Outline, title: str,
                           layout_cmd: str = "") -> tuple[str, bytes | None, list[str]]:
    """Returns (dot_text, png_bytes or None, warnings); always yields the DOT."""
    dot_text = outline_dot(outline, title)
    if not layout_cmd:
        return dot_text, None, ["no layout command configured; diagram image skipped"]
    try:
        return dot_text, run_layout(dot_text, layout_cmd), []
    except LayoutCommandFailed as exc:
        return dot_text, None, [f"diagram image skipped: {exc}"]


# -- reference list ------------------------------------------------------------

def format_reference(ref) -> str:
    parts = []
    # authors may arrive pre-joined or as a sequence of names
    authors = (ref.authors if isinstance(ref.authors, str)
               else ", ".join(ref.authors))
    if authors:
        parts.append(authors + ".")
    parts.append(ref.title + "." if not ref.title.endswith(".") else ref.title)
    if getattr(ref, "arxiv_id", ""):
        parts.append(f"arXiv:{ref.arxiv_id}.")
    if getattr(ref, "year", 0):
        parts.append(f"{ref.year}.")
    return " ".join(parts)


def citation_numbers(citation_set: CitationSet, references) -> dict[str, int]:
    """ref_id -> [n], numbered by first appearance; all keys must resolve."""
    numbers: dict[str, int] = {}
    for a in citation_set.assignments:
        if a.ref_id not in references:
            raise DanglingCitation(f"citation to unknown reference {a.ref_id!r}")
        if a.ref_id not in numbers:
            numbers[a.ref_id] = len(numbers) + 1
    return numbers


# -- markdown ------------------------------------------------------------------

def _punctuation_insert_pos(text: str, span: tuple[int, int]) -> int:
    a, b = span
    p = b
    while p > a and text[p - 1] in ".?!":
        p -= 1
    return p if p < b else b


def _heading_positions(text: str) -> list[tuple[int, int, str]]:
    """(char offset, level, title) for each heading line."""
    out = []
    pos = 0
    for line in text.splitlines(keepends=True):
        stripped = line.rstrip("\n")
        if stripped.startswith("#"):
            hashes = len(stripped) - len(stripped.lstrip("#"))
            if stripped[hashes:hashes + 1] == " ":
                out.append((pos, hashes, stripped[hashes + 1:]))
        pos += len(line)
    return out


def _asset_block(asset, number: int | None, markdown: bool = True) -> str:
    cite = f" [{number}]" if number else ""
    if asset.kind == "figure":
        name = os.path.basename(asset.payload)
        return f"![{asset.caption}](assets/{name})\n\n*{asset.caption}*{cite}"
    return f"{asset.payload}\n\n*{asset.caption}*{cite}"


def render_markdown(title: str, outline: Outline, body_text: str,
                    citation_set: CitationSet, placements, references,
                    store, assets_dir: str | None = None,
                    layout_cmd: str = "") -> ExportBundle:
    """references: dict ref_id -> reference metadata; body_text must be the
    exact text citations were assigned over."""
    warnings: list[str] = []
    numbers = citation_numbers(citation_set, references)

    by_sentence: dict[int, list] = {}
    for a in citation_set.assignments:
        by_sentence.setdefault(a.sentence_index, []).append(a)

    insertions: list[tuple[int, str]] = []
    for _si, group in sorted(by_sentence.items()):
        pos = _punctuation_insert_pos(body_text, group[0].sentence_span)
        marks = "".join(f"[{numbers[a.ref_id]}]" for a in group)
        insertions.append((pos, f" {marks}"))

    bundle_assets: dict[str, bytes] = {}
    for p in placements:
        asset = store.assets.get(p.ref_id, [])[p.asset_index]
        number = numbers.get(p.ref_id)
        if asset.kind == "figure":
            name = os.path.basename(asset.payload)
            path = os.path.join(assets_dir, name) if assets_dir else None
            if path is None or not os.path.exists(path):
                warnings.append(f"asset file {name!r} missing; placement skipped")
                continue
            with open(path, "rb") as fh:
                bundle_assets[f"assets/{name}"] = fh.read()
        para_end = body_text.find("\n\n", p.sentence_span[1])
        pos = para_end if para_end >= 0 else len(body_text)
        insertions.append((pos, "\n\n" + _asset_block(asset, number)))

    dot_text, png, diagram_warnings = render_outline_diagram(outline, title, layout_cmd)
    warnings.extend(diagram_warnings)
    bundle_assets["outline.dot"] = dot_text.encode("utf-8")
    if png is not None:
        bundle_assets["outline.png"] = png
        intro_title = outline.predefined[1]
        headings = _heading_positions(body_text)
        level1 = [(pos, t) for pos, lvl, t in headings if lvl == 1]
        for k, (pos, t) in enumerate(level1):
            if t == intro_title and k + 1 < len(level1):
                diagram = ("![Survey outline structure](outline.png)\n\n"
                           "*Survey outline structure*")
                insertions.append((level1[k + 1][0] - 1, "\n" + diagram + "\n"))
                break

    text = body_text
    # apply bottom-up; on equal positions the later-listed insertion goes in
    # first so the earlier one ends up before it in the text
    for _pos, _seq, chunk in sorted(
            ((pos, seq, chunk) for seq, (pos, chunk) in enumerate(insertions)),
            reverse=True):
        text = text[:_pos] + chunk + text[_pos:]

    ref_lines = []
    for ref_id, n in sorted(numbers.items(), key=lambda kv: kv[1]):
        ref_lines.append(f"[{n}] {format_reference(references[ref_id])}")
    refs_block = "**References**\n\n" + "\n\n".join(ref_lines) if ref_lines \
        else "**References**\n\n(no citations)"

    main = f"{title}\n\n{text}\n{refs_block}\n"
    return ExportBundle(format="markdown", main_name="survey.md",
                        main_bytes=main.encode("utf-8"),
                        assets=bundle_assets, warnings=tuple(warnings))


# -- latex / pdf ---------------------------------------------------------------

_LATEX_SPECIALS = {
    "&": r"\&", "%": r"\%", "$": r"\$", "#": r"\#", "_": r"\_",
    "{": r"\{", "}": r"\}",
    "~": r"\textasciitilde{}", "^": r"\textasciicircum{}",
    "\\": r"\textbackslash{}",
}
_ALREADY_ESCAPED = re.compile(
    r"\\(?:[&%$#_{}]|textasciitilde\{\}|textasciicircum\{\}|textbackslash\{\})")


def escape_latex(text: str) -> str:
    """Escape LaTeX specials; already-escaped sequences pass through, so the
    function is idempotent."""
    out = []
    i = 0
    while i < len(text):
        m = _ALREADY_ESCAPED.match(text, i)
        if m:
            out.append(m.group(0))
            i = m.end()
            continue
        ch = text[i]
        out.append(_LATEX_SPECIALS.get(ch, ch))
        i += 1
    return "".join(out)


_MD_IMAGE_RE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)\)")
_SECTION_MACROS = {1: "section", 2: "subsection", 3: "subsubsection"}


def _pipe_table_to_tabular(block: str) -> str:
    rows = []
    for line in block.splitlines():
        line = line.strip().strip("|")
        cells = [c.strip() for c in line.split("|")]
        if cells and all(re.fullmatch(r":?-{2,}:?", c) for c in cells):
            continue
        rows.append(cells)
    if not rows:
        return ""
    ncol = max(len(r) for r in rows)
    lines = [r"\begin{tabular}{" + "l" * ncol + "}"]
    for r in rows:
        padded = r + [""] * (ncol - len(r))
        lines.append(" & ".join(escape_latex(c) for c in padded) + r" \\")
    lines.append(r"\end{tabular}")
    return "\n".join(lines)


def render_latex(title: str, outline: Outline, body_text: str,
                 citation_set: CitationSet, placements, references,
                 store, assets_dir: str | None = None,
                 layout_cmd: str = "") -> ExportBundle:
    md = render_markdown(title, outline, body_text, citation_set, placements,
                         references, store, assets_dir, layout_cmd)
    md_text = md.main_bytes.decode("utf-8")
    md_body = md_text.split("\n", 2)[2] if md_text.count("\n") >= 2 else md_text

    out = [r"\documentclass{article}", r"\usepackage{graphicx}",
           r"\usepackage[hidelinks]{hyperref}",
           r"\title{" + escape_latex(title) + "}", r"\date{}",
           r"\begin{document}", r"\maketitle"]
    lines = md_body.splitlines()
    i = 0
    in_refs = False
    while i < len(lines):
        line = lines[i]
        if line.startswith("#"):
            hashes = len(line) - len(line.lstrip("#"))
            macro = _SECTION_MACROS.get(hashes, "subsubsection")
            out.append(f"\\{macro}{{{escape_latex(line[hashes + 1:])}}}")
        elif line.strip() == "**References**":
            in_refs = True
            out.append(r"\begin{thebibliography}{99}")
        elif in_refs and re.match(r"\[\d+\] ", line):
            out.append(r"\bibitem{ref" + re.match(r"\[(\d+)\]", line).group(1) + "} "
                       + escape_latex(line.split("] ", 1)[1]))
        elif line.strip().startswith("|") and line.strip().count("|") >= 2:
            start = i
            while i < len(lines) and lines[i].strip().startswith("|"):
                i += 1
            out.append(_pipe_table_to_tabular("\n".join(lines[start:i])))
            continue
        elif _MD_IMAGE_RE.search(line):
            m = _MD_IMAGE_RE.search(line)
            out.append(r"\begin{figure}[h]")
            out.append(r"\includegraphics[width=\linewidth]{" + m.group(2) + "}")
            if m.group(1):
                out.append(r"\caption{" + escape_latex(m.group(1)) + "}")
            out.append(r"\end{figure}")
        else:
            out.append(escape_latex(line))
        i += 1
    if in_refs:
        out.append(r"\end{thebibliography}")
    out.append(r"\end{document}")
    return ExportBundle(format="latex", main_name="survey.tex",
                        main_bytes="\n".join(out).encode("utf-8") + b"\n",
                        assets=dict(md.assets), warnings=md.warnings)


def render_pdf(latex_bundle: ExportBundle, latex_cmd: str) -> ExportBundle:
    if not latex_cmd:
        raise LatexToolchainFailed("no LaTeX toolchain command configured")
    with tempfile.TemporaryDirectory() as tmp:
        tex_path = os.path.join(tmp, latex_bundle.main_name)
        with open(tex_path, "wb") as fh:
            fh.write(latex_bundle.main_bytes)
        for name, data in latex_bundle.assets.items():
            path = os.path.join(tmp, name)
            os.makedirs(os.path.dirname(path) or tmp, exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(data)
        try:
            proc = subprocess.run(
                shlex.split(latex_cmd) + [latex_bundle.main_name],
                cwd=tmp, capture_output=True, timeout=300)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise LatexToolchainFailed(f"LaTeX toolchain failed to run: {exc}")
        log = proc.stdout.decode(errors="replace") + proc.stderr.decode(errors="replace")
        log_path = os.path.join(tmp, "survey.log")
        if os.path.exists(log_path):
            with open(log_path, encoding="utf-8", errors="replace") as fh:
                log += fh.read()
        pdf_path = os.path.join(tmp, "survey.pdf")
        if proc.returncode != 0 or not os.path.exists(pdf_path):
            raise LatexToolchainFailed(
                f"LaTeX toolchain exited {proc.returncode}", log=log[-4000:])
        with open(pdf_path, "rb") as fh:
            pdf = fh.read()
    return ExportBundle(format="pdf", main_name="survey.pdf", main_bytes=pdf,
                        assets=dict(latex_bundle.assets),
                        warnings=latex_bundle.warnings)

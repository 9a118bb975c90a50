"""Fixed-length character chunking with whitespace snapping.

Windows are chunk_size characters with stride chunk_size - overlap. A window
that would split mid-word is snapped back to end just after the last
whitespace within 50 characters, provided that keeps the walk moving forward.
Spans are exact, so de-overlapped concatenation reproduces the source.
"""

from __future__ import annotations

from .errors import EmptyDocument

SNAP_WINDOW = 50

_WS = set(" \t\n\r\f\v")


def chunk_document(text: str, chunk_size: int, overlap: int) -> list[tuple[str, tuple[int, int]]]:
    if chunk_size <= overlap or overlap < 0:
        raise ValueError("need chunk_size > overlap >= 0")
    if not text:
        raise EmptyDocument("cannot chunk an empty document")
    n = len(text)
    chunks = []
    pos = 0
    while True:
        end = pos + chunk_size
        if end >= n:
            chunks.append((text[pos:n], (pos, n)))
            break
        snapped = _snap_back(text, pos, end, overlap)
        chunks.append((text[pos:snapped], (pos, snapped)))
        pos = snapped - overlap
    return chunks


def _snap_back(text: str, pos: int, end: int, overlap: int) -> int:
    lo = max(pos, end - SNAP_WINDOW)
    for i in range(end - 1, lo - 1, -1):
        if text[i] in _WS:
            cand = i + 1
            # keep the stride positive or snapping could stall the walk
            if cand - pos > overlap:
                return cand
            break
    return end


def expected_chunk_count(n: int, chunk_size: int, overlap: int) -> int:
    """Closed-form count for documents where no snapping can occur."""
    if n <= chunk_size:
        return 1 if n > 0 else 0
    stride = chunk_size - overlap
    return 1 + -(-(n - chunk_size) // stride)


def reconstruct(chunks: list[tuple[str, tuple[int, int]]]) -> str:
    """Merge chunks back into the document using span overlap arithmetic."""
    out = []
    prev_end = 0
    for text, (start, end) in chunks:
        out.append(text[prev_end - start:] if out else text)
        prev_end = end
    return "".join(out)

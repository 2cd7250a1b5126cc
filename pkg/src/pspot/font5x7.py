"""Built-in 5x7 dot-matrix glyphs (A-Z, 0-9) for the synthetic renderer.

Any mapping of characters to 0/1 bitmaps of a common cell size can replace
this table through SceneSpec; nothing else in the pipeline assumes 5x7.
"""
from __future__ import annotations

import numpy as np

GLYPH_H = 7
GLYPH_W = 5

_ROWS = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "G": (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "I": (".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": ("#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
}

GLYPHS = {ch: np.array([[1.0 if c == "#" else 0.0 for c in row] for row in rows])
          for ch, rows in _ROWS.items()}

ALPHABET = "".join(sorted(GLYPHS))


def glyph(ch: str) -> np.ndarray:
    """The (7, 5) bitmap for one character."""
    try:
        return GLYPHS[ch]
    except KeyError:
        raise KeyError(f"no glyph for character {ch!r}") from None


def render_text_bitmap(text: str, scale: int = 1, vertical: bool = False,
                       spacing: int = 1) -> np.ndarray:
    """Compose glyph bitmaps into one line image (floats in {0, 1}).

    Horizontal lines run left to right; vertical lines stack glyphs top to
    bottom, each glyph upright.
    """
    if not text:
        raise ValueError("empty text")
    cells = [np.kron(glyph(ch), np.ones((scale, scale))) for ch in text]
    gh, gw = cells[0].shape
    gap = spacing * scale
    if vertical:
        out = np.zeros((len(text) * gh + (len(text) - 1) * gap, gw))
        for i, cell in enumerate(cells):
            top = i * (gh + gap)
            out[top:top + gh, :] = cell
    else:
        out = np.zeros((gh, len(text) * gw + (len(text) - 1) * gap))
        for i, cell in enumerate(cells):
            left = i * (gw + gap)
            out[:, left:left + gw] = cell
    return out

"""Character vocabulary with BOS/EOS/PAD specials."""
from __future__ import annotations

PAD, BOS, EOS = 0, 1, 2
N_SPECIALS = 3


class UnknownCharacter(ValueError):
    """Text contains a character outside the configured alphabet."""


class Vocab:
    """Maps characters to ids; specials occupy the first three slots."""

    def __init__(self, alphabet: str):
        if not alphabet:
            raise ValueError("alphabet must be non-empty")
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("alphabet has duplicate characters")
        self.alphabet = alphabet
        self._index = {ch: i + N_SPECIALS for i, ch in enumerate(alphabet)}

    @property
    def size(self) -> int:
        return len(self.alphabet) + N_SPECIALS

    def __contains__(self, ch: str) -> bool:
        return ch in self._index

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as e:
            raise UnknownCharacter(f"character {e.args[0]!r} not in alphabet") from None

    def decode(self, ids) -> str:
        chars = []
        for i in ids:
            i = int(i)
            if i == EOS:
                break
            if i >= N_SPECIALS:
                chars.append(self.alphabet[i - N_SPECIALS])
        return "".join(chars)

"""Privacy amplification by Toeplitz universal hashing over GF(2).

The hash is a binary Toeplitz matrix applied to the raw key. A matrix
with ``out`` rows and ``inp`` columns is defined by ``inp + out - 1``
seed bits laid out along its diagonals: T[i][j] = seed[inp - 1 + i - j],
so seed index inp-1 is the top-left entry, lower indexes run right along
the first row and higher indexes run down the first column.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class PAParams:
    """Compression ratio plus the Toeplitz seed bits for one application."""

    ratio: Fraction
    seed_bits: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ratio", Fraction(self.ratio))
        object.__setattr__(self, "seed_bits", tuple(self.seed_bits))
        if not (0 < self.ratio <= 1):
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if any(b not in (0, 1) for b in self.seed_bits):
            raise ValueError("seed bits must be 0/1")


def output_length(input_len: int, ratio: Fraction) -> int:
    return int(input_len * Fraction(ratio))  # floor for non-negative values


def seed_length(input_len: int, ratio: Fraction) -> int:
    """Number of seed bits needed for a raw key of ``input_len`` bits."""
    if input_len == 0:
        return 0
    return input_len + output_length(input_len, ratio) - 1


def amplify(raw: Sequence[int], params: PAParams) -> list[int]:
    """Compress a raw key: output[i] = XOR over j of T[i][j] * raw[j]."""
    inp = len(raw)
    out = output_length(inp, params.ratio)
    if len(params.seed_bits) != seed_length(inp, params.ratio):
        raise ValueError(
            f"seed has {len(params.seed_bits)} bits, "
            f"need {seed_length(inp, params.ratio)} for input length {inp}"
        )
    if inp == 0 or out == 0:
        return []
    # Row i of T reads seed bits inp-1+i down to i; packing the seed and the
    # reversed key into integers turns each row into one AND + popcount.
    seed_int = 0
    for k, b in enumerate(params.seed_bits):
        seed_int |= b << k
    raw_rev = 0
    for j, b in enumerate(raw):
        if b not in (0, 1):
            raise ValueError("raw key bits must be 0/1")
        raw_rev |= b << (inp - 1 - j)
    mask = (1 << inp) - 1
    return [(((seed_int >> i) & mask) & raw_rev).bit_count() & 1 for i in range(out)]

"""Classical algebra of Bell-state codes and entanglement-swapping identities.

Every function here is pure bit arithmetic. The four Bell states carry a
two-bit code (sign bit low, psi/phi bit high) and a one-bit parity code
(1 for psi-type, 0 for phi-type). Bell measurements over reordered pairs
obey XOR rules: cycles of swapped pairs preserve the XOR of two-bit codes,
and chains terminated by Z-collapsed qubits relate the two Z results
through the XOR of all parity codes along the chain.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence


class BellType(Enum):
    """The four Bell states. Enum values are the two-bit classical codes."""

    PHI_PLUS = 0b00
    PHI_MINUS = 0b01
    PSI_PLUS = 0b10
    PSI_MINUS = 0b11


def code2(v: BellType) -> int:
    """Two-bit code of a Bell state: phi+ 00, phi- 01, psi+ 10, psi- 11."""
    return v.value


def bell_from_code(code: int) -> BellType:
    """Inverse of code2."""
    if code not in (0, 1, 2, 3):
        raise ValueError(f"bell code must be in 0..3, got {code}")
    return BellType(code)


def parity(v: BellType) -> int:
    """One-bit code: 1 for psi-type, 0 for phi-type (the high bit of code2)."""
    return v.value >> 1


def _check_bit(b: int, name: str) -> int:
    if b not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {b!r}")
    return b


def xor_rule_holds(initials: Sequence[BellType], results: Sequence[BellType]) -> bool:
    """Swapping rule for a cycle of Bell pairs: XOR of result codes equals
    XOR of initial-state codes. With a single pair this reduces to
    result == initial.
    """
    if not initials or not results:
        raise ValueError("initials and results must be nonempty")
    if len(initials) != len(results):
        raise ValueError(
            f"length mismatch: {len(initials)} initials vs {len(results)} results"
        )
    acc = 0
    for v in initials:
        acc ^= v.value
    for v in results:
        acc ^= v.value
    return acc == 0


def collapse_partner(is_: BellType, measured: int) -> int:
    """Z value of the surviving qubit after one qubit of the pair is Z-measured.

    phi-type pairs are Z-correlated, psi-type anti-correlated; the sign bit
    never shows up in Z statistics.
    """
    _check_bit(measured, "measured")
    return measured ^ parity(is_)


def bm_parity(z1: int, z2: int) -> int:
    """Parity code of any Bell measurement on the product state |z1 z2>.

    Equal bits give a phi-type result, unequal bits a psi-type result; the
    sign bit is uniformly random and not determined by (z1, z2).
    """
    _check_bit(z1, "z1")
    _check_bit(z2, "z2")
    return z1 ^ z2


@dataclass(frozen=True)
class ChainSpec:
    """A chain of Bell measurements between two Z-collapsed endpoint qubits.

    ``is1``/``is2`` are the endpoint pairs' initial states, ``intermediates``
    the initial states of the pairs strung between them, ``zmr1``/``zmr2``
    the endpoint Z results, and ``mrs`` the Bell measurement results along
    the chain (one more than there are intermediate pairs).
    """

    is1: BellType
    is2: BellType
    intermediates: tuple[BellType, ...]
    zmr1: int
    zmr2: int
    mrs: tuple[BellType, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "intermediates", tuple(self.intermediates))
        object.__setattr__(self, "mrs", tuple(self.mrs))
        _check_bit(self.zmr1, "zmr1")
        _check_bit(self.zmr2, "zmr2")
        if len(self.mrs) != len(self.intermediates) + 1:
            raise ValueError(
                f"need len(mrs) == len(intermediates) + 1, got "
                f"{len(self.mrs)} vs {len(self.intermediates)}"
            )


def chain_relation_holds(spec: ChainSpec) -> bool:
    """Whether a chain's endpoint Z results are consistent with its Bell
    measurement results.

    The relation is zmr2 == zmr1 ^ parity(is1) ^ parity(is2) ^ XOR of
    intermediate parities ^ XOR of result parities. When every initial
    state is phi+ the initial-state terms vanish, which is the only case
    an honest protocol run ever produces; the general form also covers
    adversarially prepared pairs.
    """
    return spec.zmr2 == infer_remote_bit(
        spec.zmr1, spec.is1, spec.is2, spec.intermediates, spec.mrs
    )


def infer_remote_bit(
    own_zmr: int,
    is_own: BellType,
    is_remote: BellType,
    intermediates: Sequence[BellType],
    mrs: Sequence[BellType],
) -> int:
    """Compute the far endpoint's Z result from one's own Z result and the
    published Bell measurement results of the chain in between.

    Inverse of chain_relation_holds: substituting the returned bit for the
    remote result makes the chain relation true.
    """
    _check_bit(own_zmr, "own_zmr")
    if len(mrs) != len(intermediates) + 1:
        raise ValueError(
            f"need len(mrs) == len(intermediates) + 1, got "
            f"{len(mrs)} vs {len(intermediates)}"
        )
    bit = own_zmr ^ parity(is_own) ^ parity(is_remote)
    for v in intermediates:
        bit ^= parity(v)
    for v in mrs:
        bit ^= parity(v)
    return bit

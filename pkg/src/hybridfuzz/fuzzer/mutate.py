"""Byte-level mutation operators.

Every operator returns a new byte string of the same length as its input.
``mutate`` applies exactly one randomly chosen operator per call.
"""

from __future__ import annotations

import random
from typing import Callable, Optional, Sequence

ARITH_MAX = 35
INTERESTING_8 = (-128, -1, 0, 1, 16, 32, 64, 100, 127)
INTERESTING_16 = (-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767)
INTERESTING_32 = (-2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647)

OPERATORS = ("bitflip", "byteflip", "arith", "interesting", "shuffle", "splice")


def bit_flip(data: bytes, byte: int, bit: int) -> bytes:
    out = bytearray(data)
    out[byte] ^= 1 << bit
    return bytes(out)


def byte_flip(data: bytes, byte: int) -> bytes:
    out = bytearray(data)
    out[byte] ^= 0xFF
    return bytes(out)


def arith(data: bytes, pos: int, width: int, delta: int) -> bytes:
    """Add ``delta`` to the little-endian ``width``-byte window at ``pos``."""
    out = bytearray(data)
    window = int.from_bytes(out[pos : pos + width], "little")
    window = (window + delta) % (1 << (8 * width))
    out[pos : pos + width] = window.to_bytes(width, "little")
    return bytes(out)


def interesting(data: bytes, pos: int, width: int, value: int) -> bytes:
    out = bytearray(data)
    out[pos : pos + width] = (value % (1 << (8 * width))).to_bytes(width, "little")
    return bytes(out)


def shuffle(data: bytes, i: int, j: int) -> bytes:
    out = bytearray(data)
    out[i], out[j] = out[j], out[i]
    return bytes(out)


def splice(a: bytes, b: bytes, cut: int) -> bytes:
    if len(a) != len(b):
        raise ValueError("splice needs equal-length inputs")
    return a[:cut] + b[cut:]


def _width(rng: random.Random, n: int) -> int:
    widths = [w for w in (1, 2, 4) if w <= n]
    return rng.choice(widths)


def mutate(
    data: bytes,
    rng: random.Random,
    pick_other: Optional[Callable[[], bytes]] = None,
    operator: Optional[str] = None,
) -> bytes:
    """Apply one operator chosen by ``rng`` (or forced via ``operator``)."""
    n = len(data)
    if n == 0:
        return data
    op = operator or rng.choice(OPERATORS)
    if op == "splice":
        other = pick_other() if pick_other is not None else None
        if other is None or other == data or n < 2:
            op = "bitflip"
        else:
            return splice(data, other, rng.randrange(1, n))
    if op == "bitflip":
        return bit_flip(data, rng.randrange(n), rng.randrange(8))
    if op == "byteflip":
        return byte_flip(data, rng.randrange(n))
    if op == "arith":
        w = _width(rng, n)
        delta = rng.randint(1, ARITH_MAX) * rng.choice((-1, 1))
        return arith(data, rng.randrange(n - w + 1), w, delta)
    if op == "interesting":
        w = _width(rng, n)
        table = {1: INTERESTING_8, 2: INTERESTING_8 + INTERESTING_16, 4: INTERESTING_8 + INTERESTING_16 + INTERESTING_32}[w]
        return interesting(data, rng.randrange(n - w + 1), w, rng.choice(table))
    if op == "shuffle":
        if n < 2:
            return bit_flip(data, 0, rng.randrange(8))
        i, j = rng.sample(range(n), 2)
        return shuffle(data, i, j)
    raise ValueError(f"unknown mutation operator {op!r}")

"""Deterministic 64-bit seed derivation.

Every random decision in the generation pipeline flows from a per-record
seed derived here, so results are independent of iteration order, sharding,
and worker count. The mixer is the splitmix64 finalizer, chosen because it
is published, trivially portable, and avalanche-complete, so two
implementations can agree on the exact output stream.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def mix64(value: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit value."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def per_record_seed(run_seed: int, record_id: int, kind_tag: int) -> int:
    """Derive the seed that governs all randomness for one source record."""
    return mix64(mix64(mix64(run_seed & _MASK64) ^ (record_id & _MASK64)) ^ (kind_tag & _MASK64))

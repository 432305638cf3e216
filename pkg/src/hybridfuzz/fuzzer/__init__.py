from .bitmap import DEFAULT_BITMAP_SIZE, CoverageBitmap, EdgeHasher, bucket_bit, edge_cell
from .corpus import CorpusDir, atomic_write, crash_file_name
from .engine import (
    FUZZ,
    INITIAL,
    SAMPLE,
    SOLVE,
    CrashRecord,
    Fuzzer,
    FuzzStats,
    FuzzStepResult,
    Seed,
)
from .mutate import arith, bit_flip, byte_flip, interesting, mutate, shuffle, splice

__all__ = [
    "CorpusDir",
    "CoverageBitmap",
    "CrashRecord",
    "DEFAULT_BITMAP_SIZE",
    "EdgeHasher",
    "FUZZ",
    "FuzzStats",
    "FuzzStepResult",
    "Fuzzer",
    "INITIAL",
    "SAMPLE",
    "SOLVE",
    "Seed",
    "arith",
    "atomic_write",
    "bit_flip",
    "bucket_bit",
    "byte_flip",
    "crash_file_name",
    "edge_cell",
    "interesting",
    "mutate",
    "shuffle",
    "splice",
]

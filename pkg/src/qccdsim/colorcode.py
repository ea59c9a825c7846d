"""
Triangular square-octagon (4.8.8) color code, lookup decoder and
correctable-pattern weight enumerators.

The lattice is laid out row by row on an integer grid: data-qubit rows
alternate with rows of plaquette centres, squares touch the four diagonal
neighbours of their centre and octagons the eight knight-move neighbours.
Cutting the infinite tiling this way leaves a triangle whose three sides carry
the three plaquette colors.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

SUPPORTED_DISTANCES = (3, 5, 7)
TIEBREAK_VERSION = "lex-v1"
CACHE_ENV = "QCCDSIM_CACHE_DIR"
_DATA_DIR = Path(__file__).parent / "data"
_INLINE_EXACT_MAX_N = 24


class PauliKind(str, Enum):
    X = "X"
    Z = "Z"


def _layout(d: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]], list[tuple[int, int]]]:
    data: set[tuple[int, int]] = set()
    squares: set[tuple[int, int]] = set()
    octagons: set[tuple[int, int]] = set()

    def row(x: int, y: int, count: int, steps: tuple[int, int], sinks: tuple[set, set]) -> None:
        for k in range(count):
            sinks[k % 2].add((x, y))
            x += steps[k % 2]

    for x in range(4, d // 2 * 6, 6):
        octagons.add((x, 0))
    y, count, top = 1, d, d + d // 2
    while y <= top:
        row(y - 1, y, count, (2, 4), (data, data))
        count -= 1 if y == 1 else 2
        y += 1
        if y <= top:
            row(y + 1, y, count, (2, 4), (data, data))
            y += 1
        if y <= top:
            if y % 2 == 0:
                row(y + 1, y, count, (3, 3), (squares, octagons))
            else:
                row(y - 2, y, count, (3, 3), (octagons, squares))
            y += 1
    return sorted(data, key=lambda p: (p[1], p[0])), sorted(squares), sorted(octagons)


_SQUARE_NBRS = ((-1, -1), (1, -1), (1, 1), (-1, 1))
_OCTAGON_NBRS = ((-2, -1), (-1, -2), (1, -2), (2, -1), (2, 1), (1, 2), (-1, 2), (-2, 1))


def gf2_rank(m: np.ndarray) -> int:
    a = (np.asarray(m) % 2).astype(np.uint8)
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if a[r, c]), None)
        if piv is None:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        for r in range(rows):
            if r != rank and a[r, c]:
                a[r] ^= a[rank]
        rank += 1
    return rank


def _three_color(h: np.ndarray, fixed: dict[int, int]) -> tuple[int, ...]:
    """Proper 3-coloring of plaquettes, where plaquettes sharing a qubit conflict."""
    m = h.shape[0]
    adj = [set() for _ in range(m)]
    for col in h.T:
        rows = np.flatnonzero(col)
        for a, b in itertools.combinations(rows, 2):
            adj[a].add(b)
            adj[b].add(a)
    colors = dict(fixed)

    def solve(order: list[int]) -> bool:
        if not order:
            return True
        r, rest = order[0], order[1:]
        if r in colors:
            return all(colors.get(o) != colors[r] for o in adj[r]) and solve(rest)
        for c in range(3):
            if all(colors.get(o) != c for o in adj[r]):
                colors[r] = c
                if solve(rest):
                    return True
                del colors[r]
        return False

    if not solve(list(range(m))):
        raise RuntimeError("plaquettes are not 3-colorable")
    return tuple(colors[r] for r in range(m))


@dataclass(frozen=True, eq=False)
class ColorCode:
    """CSS color code with identical X- and Z-type plaquette supports."""

    d: int
    n: int
    stabilizers_x: np.ndarray
    stabilizers_z: np.ndarray
    plaquette_colors: tuple[int, ...]
    logical_x: np.ndarray
    logical_z: np.ndarray
    coordinates: tuple[tuple[int, int], ...] = field(default=())

    def stabilizers(self, kind: PauliKind | str) -> np.ndarray:
        """Checks that detect errors of the given Pauli type."""
        return self.stabilizers_z if PauliKind(kind) is PauliKind.X else self.stabilizers_x

    @property
    def plaquette_weights(self) -> tuple[int, ...]:
        return tuple(int(w) for w in self.stabilizers_x.sum(axis=1))

    def syndrome(self, error: np.ndarray, kind: PauliKind | str = PauliKind.X) -> np.ndarray:
        return (self.stabilizers(kind).astype(np.int64) @ np.asarray(error, dtype=np.int64)) % 2

    def is_logical_failure(self, residual: np.ndarray, kind: PauliKind | str = PauliKind.X) -> bool:
        """True when a zero-syndrome residual acts as a logical operator."""
        other = self.logical_z if PauliKind(kind) is PauliKind.X else self.logical_x
        return bool(int(np.dot(other.astype(np.int64), np.asarray(residual, dtype=np.int64))) % 2)


def _column_masks(h: np.ndarray) -> np.ndarray:
    """Syndrome of each single-qubit error packed into an integer."""
    weights = (1 << np.arange(h.shape[0], dtype=np.uint64))
    return (h.astype(np.uint64) * weights[:, None]).sum(axis=0).astype(np.uint64)


def min_weight_logical(h: np.ndarray, max_weight: int) -> np.ndarray | None:
    """Lowest-weight odd-weight vector with zero syndrome, up to ``max_weight``.

    For a k=1 code with even-weight stabilizers such vectors are exactly the
    nontrivial logical operators. Candidates are scanned in lexicographic
    order, so the result is deterministic.
    """
    n = h.shape[1]
    cols = _column_masks(h)
    for w in range(1, max_weight + 1, 2):
        for chunk in _combination_chunks(n, w):
            synd = np.bitwise_xor.reduce(cols[chunk], axis=1)
            hits = np.flatnonzero(synd == 0)
            if hits.size:
                v = np.zeros(n, dtype=np.uint8)
                v[chunk[hits[0]]] = 1
                return v
    return None


def _combination_chunks(n: int, w: int, size: int = 1 << 18):
    it = itertools.combinations(range(n), w)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=np.int64).reshape(len(block), w)


@lru_cache(maxsize=None)
def build_code(d: int) -> ColorCode:
    """Build the triangular 4.8.8 color code of distance 3, 5 or 7."""
    if d not in SUPPORTED_DISTANCES:
        raise ValueError(f"unsupported distance {d}; choose from {SUPPORTED_DISTANCES}")
    data, squares, octagons = _layout(d)
    index = {p: i for i, p in enumerate(data)}
    rows: list[list[int]] = []
    fixed: dict[int, int] = {}
    for centres, nbrs in ((squares, _SQUARE_NBRS), (octagons, _OCTAGON_NBRS)):
        for (x, y) in centres:
            support = [index[(x + dx, y + dy)] for dx, dy in nbrs if (x + dx, y + dy) in index]
            if support:
                if nbrs is _SQUARE_NBRS:
                    fixed[len(rows)] = 0
                rows.append(sorted(support))
    n = len(data)
    h = np.zeros((len(rows), n), dtype=np.uint8)
    for r, support in enumerate(rows):
        h[r, support] = 1
    h.setflags(write=False)
    colors = _three_color(h, fixed)
    logical = min_weight_logical(h, d)
    if logical is None:
        raise RuntimeError("no logical operator of weight <= d found")
    logical.setflags(write=False)
    return ColorCode(d, n, h, h, colors, logical, logical, tuple(data))


# --------------------------------------------------------------------------
# Lookup decoder
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LookupTable:
    """Minimum-weight correction per syndrome (bit-packed).

    Ties resolve to the lexicographically smallest support, because patterns
    are visited weight by weight in combination order and the first hit for a
    syndrome is kept.
    """

    code_d: int
    kind: PauliKind
    corrections: np.ndarray  # uint64 bitmask of the correction, indexed by syndrome int
    weights: np.ndarray

    def decode_int(self, syndrome: int) -> int:
        return int(self.corrections[syndrome])


@lru_cache(maxsize=None)
def build_lookup_table(d: int, kind: PauliKind | str = PauliKind.X) -> LookupTable:
    code = build_code(d)
    kind = PauliKind(kind)
    h = code.stabilizers(kind)
    m, n = h.shape
    cols = _column_masks(h)
    n_synd = 1 << m
    corr = np.zeros(n_synd, dtype=np.uint64)
    wts = np.full(n_synd, -1, dtype=np.int64)
    wts[0] = 0
    reachable = 1 << gf2_rank(h)
    found = 1
    bit = np.uint64(1) << np.arange(n, dtype=np.uint64)
    w = 0
    while found < reachable:
        w += 1
        if w > n:
            raise RuntimeError("lookup table enumeration did not cover all syndromes")
        for chunk in _combination_chunks(n, w):
            synd = np.bitwise_xor.reduce(cols[chunk], axis=1).astype(np.int64)
            _, first = np.unique(synd, return_index=True)
            first.sort()
            new = first[wts[synd[first]] < 0]
            if new.size == 0:
                continue
            masks = np.bitwise_or.reduce(bit[chunk[new]], axis=1)
            corr[synd[new]] = masks
            wts[synd[new]] = w
            found += new.size
            if found >= reachable:
                break
    corr.setflags(write=False)
    wts.setflags(write=False)
    return LookupTable(d, kind, corr, wts)


def _pack(bits: np.ndarray) -> int:
    return int(sum(1 << i for i, b in enumerate(np.asarray(bits)) if b))


def _unpack(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=np.uint8)


def lookup_decode(code: ColorCode, syndrome: np.ndarray, kind: PauliKind | str = PauliKind.X) -> np.ndarray:
    """Minimum-weight correction for a syndrome of the given error type."""
    h = code.stabilizers(kind)
    syndrome = np.asarray(syndrome)
    if syndrome.shape != (h.shape[0],):
        raise ValueError(f"syndrome must have length {h.shape[0]}")
    table = build_lookup_table(code.d, PauliKind(kind))
    s = _pack(syndrome)
    if table.weights[s] < 0:
        raise ValueError("syndrome is not reachable by any error pattern")
    return _unpack(table.decode_int(s), code.n)


# --------------------------------------------------------------------------
# Weight enumerators and success polynomial
# --------------------------------------------------------------------------

class EnumeratorMode(str, Enum):
    EXACT = "exact"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class WeightEnumerator:
    """``A[w]`` counts weight-w patterns the lookup decoder corrects exactly."""

    d: int
    n: int
    kind: PauliKind
    A: tuple[int, ...]
    exact: bool
    source: str = "computed"

    @property
    def total(self) -> int:
        return sum(self.A)


def bounded_enumerator(code: ColorCode, kind: PauliKind | str = PauliKind.X) -> WeightEnumerator:
    """Guaranteed-correctable lower bound: all patterns of weight ≤ (d-1)/2."""
    t = (code.d - 1) // 2
    a = tuple(math.comb(code.n, w) if w <= t else 0 for w in range(code.n + 1))
    return WeightEnumerator(code.d, code.n, PauliKind(kind), a, False, "bounded")


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x)


def exact_enumerator(
    code: ColorCode,
    kind: PauliKind | str = PauliKind.X,
    offline: bool = False,
    chunk_bits: int = 22,
    progress=None,
) -> WeightEnumerator:
    """Decode every one of the 2^n patterns and histogram the successes by weight."""
    kind = PauliKind(kind)
    n = code.n
    if n > _INLINE_EXACT_MAX_N and not offline:
        raise PermissionError(
            f"exact enumeration over 2^{n} patterns is an offline job; pass offline=True"
        )
    h = code.stabilizers(kind)
    table = build_lookup_table(code.d, kind)
    row_masks = np.array([_pack(r) for r in h], dtype=np.uint64)
    other = code.logical_z if kind is PauliKind.X else code.logical_x
    logical_mask = np.uint64(_pack(other))
    counts = np.zeros(n + 1, dtype=np.int64)
    total = 1 << n
    step = min(total, 1 << chunk_bits)
    for start in range(0, total, step):
        e = np.arange(start, start + step, dtype=np.uint64)
        synd = np.zeros(step, dtype=np.int64)
        for r, mask in enumerate(row_masks):
            synd |= ((_popcount(e & mask) & 1).astype(np.int64) << r)
        residual = e ^ table.corrections[synd]
        ok = (_popcount(residual & logical_mask) & 1) == 0
        counts += np.bincount(_popcount(e[ok]).astype(np.int64), minlength=n + 1)
        if progress is not None:
            progress(start + step, total)
    return WeightEnumerator(code.d, n, kind, tuple(int(c) for c in counts), True, "exact")


def success_polynomial(enum: WeightEnumerator, q: float) -> float:
    """Σ_w A[w]·q^w·(1-q)^(n-w), evaluated in log space."""
    return math.exp(log_success_polynomial(enum, q))


def failure_polynomial(enum: WeightEnumerator, q: float) -> float:
    """1 - success, summed directly over the uncorrectable patterns.

    Keeps full relative precision when the failure probability is tiny.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("flip probability must lie in [0, 1]")
    n = enum.n
    if q in (0.0, 1.0):
        w = 0 if q == 0.0 else n
        return 1.0 - enum.A[w]
    lq, l1q = math.log(q), math.log1p(-q)
    total = 0.0
    for w in range(n + 1):
        bad = math.comb(n, w) - (enum.A[w] if w < len(enum.A) else 0)
        if bad:
            total += math.exp(math.log(bad) + w * lq + (n - w) * l1q)
    return min(total, 1.0)


def log_success_polynomial(enum: WeightEnumerator, q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError("flip probability must lie in [0, 1]")
    n = enum.n
    if q == 0.0:
        return math.log(enum.A[0]) if enum.A[0] else -math.inf
    if q == 1.0:
        return math.log(enum.A[n]) if enum.A[n] else -math.inf
    fail = failure_polynomial(enum, q)
    if fail < 0.5:
        return math.log1p(-fail)
    lq, l1q = math.log(q), math.log1p(-q)
    terms = [math.log(a) + w * lq + (n - w) * l1q for w, a in enumerate(enum.A) if a]
    if not terms:
        return -math.inf
    top = max(terms)
    return top + math.log(sum(math.exp(x - top) for x in terms))


# --------------------------------------------------------------------------
# Enumerator cache files
# --------------------------------------------------------------------------

def _cache_name(d: int, kind: PauliKind) -> str:
    return f"enumerator_d{d}_{kind.value}.txt"


def _checksum(lines: list[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def write_enumerator(enum: WeightEnumerator, path: Path) -> None:
    if not enum.exact:
        raise ValueError("only exact enumerators are cached")
    body = [f"{w} {a}" for w, a in enumerate(enum.A)]
    header = (
        f"# d={enum.d} kind={enum.kind.value} n={enum.n} tiebreak={TIEBREAK_VERSION} "
        f"total={enum.total} sha256={_checksum(body)}"
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([header, *body]) + "\n")


def read_enumerator(path: Path, d: int, kind: PauliKind | str) -> WeightEnumerator:
    """Load a cached enumerator, refusing files whose header or checksum disagree."""
    kind = PauliKind(kind)
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing header")
    fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    body = lines[1:]
    n = build_code(d).n
    expect = {"d": str(d), "kind": kind.value, "n": str(n), "tiebreak": TIEBREAK_VERSION}
    for key, val in expect.items():
        if fields.get(key) != val:
            raise ValueError(f"{path}: header {key}={fields.get(key)!r}, expected {val!r}")
    if fields.get("sha256") != _checksum(body):
        raise ValueError(f"{path}: checksum mismatch")
    a = [0] * (n + 1)
    for ln in body:
        w, count = (int(x) for x in ln.split())
        a[w] = count
    if sum(a) != int(fields["total"]):
        raise ValueError(f"{path}: total mismatch")
    return WeightEnumerator(d, n, kind, tuple(a), True, f"cache:{Path(path).name}")


def cache_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(CACHE_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(_DATA_DIR)
    return dirs


@lru_cache(maxsize=None)
def load_enumerator(d: int, kind: PauliKind | str = PauliKind.X, allow_bounded: bool = True) -> WeightEnumerator:
    """Enumerator used by the analyser.

    Small codes are enumerated inline; larger ones come from a cache file and
    fall back to the bounded enumerator when no cache exists.
    """
    kind = PauliKind(kind)
    code = build_code(d)
    if code.n <= _INLINE_EXACT_MAX_N:
        return exact_enumerator(code, kind)
    for directory in cache_dirs():
        path = directory / _cache_name(d, kind)
        if path.exists():
            return read_enumerator(path, d, kind)
    if not allow_bounded:
        raise FileNotFoundError(f"no cached enumerator for d={d} kind={kind.value}")
    return bounded_enumerator(code, kind)


def correctable_enumerator(
    code: ColorCode,
    kind: PauliKind | str = PauliKind.X,
    mode: EnumeratorMode | str = EnumeratorMode.EXACT,
    offline: bool = False,
) -> WeightEnumerator:
    if EnumeratorMode(mode) is EnumeratorMode.BOUNDED:
        return bounded_enumerator(code, kind)
    return exact_enumerator(code, kind, offline=offline)


def cache_enumerator(d: int, directory: Path, progress=None) -> list[Path]:
    """Offline job: enumerate both Pauli types exactly and write cache files."""
    code = build_code(d)
    paths = []
    x = exact_enumerator(code, PauliKind.X, offline=True, progress=progress)
    for kind in PauliKind:
        # Identical supports make the Z enumerator equal to the X one.
        enum = x if kind is PauliKind.X else WeightEnumerator(d, code.n, kind, x.A, True, "exact")
        path = Path(directory) / _cache_name(d, kind)
        write_enumerator(enum, path)
        paths.append(path)
    load_enumerator.cache_clear()
    return paths

"""Reproducible i.i.d. Exp(1) weight environments with random cell access.

A weight field is addressed by a (seed, replicate) key; every lattice cell
(x, y) gets an independent Exp(1) weight that is a pure function of
(seed, replicate, x, y).  Repeated queries return bit-identical values, and
any rectangle can be materialized without generating anything outside it,
which is what the checkpointed tracebacks in the DP engines rely on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .errors import CapacityError, DomainError

_U64 = 2 ** 64

DEFAULT_BLOCK_CELL_BUDGET = 2 ** 26  # 512 MiB of float64 per materialized block

_MAGIC = b"LPPBLK01"
_HEADER = struct.Struct("<8s4iII")  # magic, x_min, x_max, y_min, y_max, bits, pad
assert _HEADER.size == 32


@dataclass(frozen=True)
class Rect:
    """Inclusive integer rectangle [x_min, x_max] x [y_min, y_max]."""

    x_min: int
    x_max: int
    y_min: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise DomainError(f"empty rect {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, x: int, y: int) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x_min <= other.x_min and other.x_max <= self.x_max
                and self.y_min <= other.y_min and other.y_max <= self.y_max)


@dataclass(frozen=True)
class FieldKey:
    """Identifies one i.i.d. environment: a seed and a replicate index."""

    seed: int
    replicate: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < _U64):
            raise DomainError(f"seed {self.seed} out of 64-bit range")
        if not (0 <= self.replicate < _U64):
            raise DomainError(f"replicate {self.replicate} out of 64-bit range")

    @property
    def hash64(self) -> np.uint64:
        return np.uint64(_kernels.field_hash(np.uint64(self.seed), np.uint64(self.replicate)))


@dataclass(frozen=True)
class WeightField:
    """An Exp(1) environment restricted to an optional domain rectangle.

    Stateless after construction; concurrent reads from any number of
    workers are safe.
    """

    key: FieldKey
    domain: Rect | None = None
    max_block_cells: int = DEFAULT_BLOCK_CELL_BUDGET
    _h: np.uint64 = dc_field(init=False, repr=False, compare=False, default=np.uint64(0))

    def __post_init__(self):
        object.__setattr__(self, "_h", self.key.hash64)

    def _check_domain(self, x: int, y: int) -> None:
        if self.domain is not None and not self.domain.contains(x, y):
            raise DomainError(f"vertex ({x}, {y}) outside field domain {self.domain}")

    def weight_at(self, v) -> float:
        """Exp(1) weight at vertex v = (x, y)."""
        x, y = int(v[0]), int(v[1])
        self._check_domain(x, y)
        return float(_kernels.cell_weight(self._h, x, y))

    def uniform_at(self, v) -> float:
        """The uniform variate behind weight_at (diagnostics)."""
        x, y = int(v[0]), int(v[1])
        self._check_domain(x, y)
        return float(_kernels.uniform_at(self._h, x, y))

    def materialize_block(self, rect: Rect) -> np.ndarray:
        """Dense (height, width) float64 grid; entry [iy, ix] is the weight
        at (rect.x_min + ix, rect.y_min + iy)."""
        if self.domain is not None and not self.domain.contains_rect(rect):
            raise DomainError(f"rect {rect} not inside field domain {self.domain}")
        if rect.area > self.max_block_cells:
            raise CapacityError(
                f"rect has {rect.area} cells, over the block budget of "
                f"{self.max_block_cells} cells")
        out = np.empty((rect.height, rect.width), np.float64)
        _kernels.fill_weights(self._h, rect.x_min, rect.y_min, out)
        return out


def field(seed: int, replicate: int = 0, domain: Rect | None = None) -> WeightField:
    """Convenience constructor."""
    return WeightField(FieldKey(seed, replicate), domain)


def uniform_to_weight(u: float) -> float:
    """The inverse-CDF map U -> -ln(1-U) used for every cell weight."""
    if not (0.0 <= u < 1.0):
        raise DomainError(f"uniform {u} outside [0, 1)")
    return float(_kernels.uniform_to_weight(u))


def dump_block_binary(path, field: WeightField, rect: Rect) -> None:
    """Binary dump: 32-byte header then float64 little-endian, row-major
    (rows ordered by increasing y, x increasing within a row)."""
    lim = 2 ** 31
    for b in (rect.x_min, rect.x_max, rect.y_min, rect.y_max):
        if not (-lim <= b < lim):
            raise CapacityError(f"rect bound {b} outside the 32-bit header range")
    block = field.materialize_block(rect)
    header = _HEADER.pack(_MAGIC, rect.x_min, rect.x_max, rect.y_min, rect.y_max, 64, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(block.astype("<f8").tobytes(order="C"))


def read_block_binary(path) -> tuple[Rect, np.ndarray]:
    """Read a dump produced by dump_block_binary."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, x_min, x_max, y_min, y_max, bits, _ = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise DomainError(f"bad magic {magic!r}")
        if bits != 64:
            raise DomainError(f"unsupported precision tag {bits}")
        rect = Rect(x_min, x_max, y_min, y_max)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(rect.height, rect.width)
    return rect, data.copy()


def dump_block_csv(path, field: WeightField, rect: Rect) -> None:
    """CSV dump (x,y,weight) for small rectangles."""
    block = field.materialize_block(rect)
    with open(path, "w") as fh:
        fh.write("x,y,weight\n")
        for iy in range(rect.height):
            y = rect.y_min + iy
            for ix in range(rect.width):
                fh.write(f"{rect.x_min + ix},{y},{block[iy, ix]!r}\n")

"""Periodic spectral grid, field container and continuum-normalised transforms.

The forward transform approximates ``F(xi) = int f(x) exp(-i x.xi) dx`` by a
Riemann sum, the inverse approximates ``(2 pi)^-N int F(xi) exp(i x.xi) dxi``.
Their composition is the identity, so symbols such as ``exp(-t |xi|^theta)``
can be applied without tracking DFT normalisation constants.

The lattice origin sits at index 0 in every axis; physical coordinates are
the signed periodic offsets from it (FFT ordering).
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
FREQUENCY = "frequency"
_TAGS = (PHYSICAL, FREQUENCY)

_local = threading.local()


def set_fft_workers(workers: int) -> None:
    """Set the thread count used by FFTs issued from the calling thread.

    Each 1-D transform is computed identically whatever the worker count,
    so results do not depend on this setting.
    """
    _local.workers = max(1, int(workers))


def fft_workers() -> int:
    return getattr(_local, "workers", 1)


class ContractError(ValueError):
    """Raised when a field is passed in the wrong domain or on the wrong grid."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice ``[0, L)^dim`` with ``points`` samples per axis."""

    dim: int
    box_length: float
    points: int

    def __post_init__(self):
        if not (1 <= int(self.dim) <= 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        if self.points <= 0 or self.points % 2:
            raise ValueError(f"points must be a positive even integer, got {self.points}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "points", int(self.points))

    @property
    def spacing(self) -> float:
        return self.box_length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def nyquist(self) -> float:
        return np.pi * self.points / self.box_length

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """1-D frequencies ``2 pi k / L`` for ``k`` in FFT order; Nyquist is ``-M/2``."""
        return 2.0 * np.pi * sfft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def offsets(self) -> np.ndarray:
        """1-D signed periodic coordinates of the lattice (origin at index 0)."""
        k = sfft.fftfreq(self.points, d=1.0 / self.points)
        return k * self.spacing

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self.xi))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.offsets] * self.dim), indexing="ij"))

    @cached_property
    def distance(self) -> np.ndarray:
        """Periodic distance of every lattice point to the origin."""
        return np.sqrt(sum(c * c for c in self.coords))

    def nyquist_mask(self, axis: int) -> np.ndarray:
        """Boolean mask of the lattice modes sitting on the Nyquist plane of ``axis``."""
        return self.xi[axis] == -self.nyquist

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.box_length, self.points * factor)


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a function on a grid, tagged with the domain they live in."""

    grid: GridSpec
    values: np.ndarray
    domain: str = PHYSICAL

    def __post_init__(self):
        if self.domain not in _TAGS:
            raise ContractError(f"unknown domain tag {self.domain!r}")
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            if values.size != self.grid.points ** self.grid.dim:
                raise ContractError(
                    f"expected {self.grid.points ** self.grid.dim} values, got {values.size}"
                )
            values = values.reshape(self.grid.shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def physical(cls, grid: GridSpec, values) -> "Field":
        return cls(grid, np.asarray(values), PHYSICAL)

    @property
    def real(self) -> np.ndarray:
        return np.real(self.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c, self.domain)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _same(self, other)
        return Field(self.grid, self.values + other.values, self.domain)

    def __sub__(self, other: "Field") -> "Field":
        _same(self, other)
        return Field(self.grid, self.values - other.values, self.domain)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _same(a: Field, b: Field) -> None:
    if a.grid != b.grid or a.domain != b.domain:
        raise ContractError("fields live on different grids or domains")


def _require(f: Field, tag: str) -> None:
    if not isinstance(f, Field):
        raise ContractError(f"expected a Field, got {type(f).__name__}")
    if f.domain != tag:
        raise ContractError(f"expected a {tag} field, got {f.domain}")


# Array-level transforms. They operate on the trailing ``dim`` axes so that
# stacks of fields (time nodes, LP blocks) are transformed in one call.

def fwd(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.fftn(values, axes=grid.axes, workers=fft_workers()) * grid.cell_volume


def inv(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.ifftn(values, axes=grid.axes, workers=fft_workers()) / grid.cell_volume


def inv_real(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse transform keeping only the real part (input assumed Hermitian)."""
    return np.real(inv(values, grid))


def forward_transform(f: Field) -> Field:
    _require(f, PHYSICAL)
    return Field(f.grid, fwd(f.values, f.grid), FREQUENCY)


def inverse_transform(F: Field) -> Field:
    _require(F, FREQUENCY)
    return Field(F.grid, inv(F.values, F.grid), PHYSICAL)


def gradient_symbol(grid: GridSpec, axis: int) -> np.ndarray:
    """``i xi_axis`` with the Nyquist plane zeroed so real fields stay real."""
    if not 0 <= axis < grid.dim:
        raise IndexError(f"axis {axis} out of range for dim={grid.dim}")
    sym = 1j * grid.xi[axis]
    return np.where(grid.nyquist_mask(axis), 0.0, sym)


def spectral_gradient(f: Field, axis: int) -> Field:
    _require(f, PHYSICAL)
    sym = gradient_symbol(f.grid, axis)
    return Field(f.grid, inv(sym * fwd(f.values, f.grid), f.grid), PHYSICAL)


def is_hermitian(F: Field, rtol: float = 1e-12) -> bool:
    """True when ``F(-xi) = conj(F(xi))`` on the lattice, i.e. ``F`` is the transform of a real field."""
    _require(F, FREQUENCY)
    v = F.values
    flipped = v
    for ax in range(-F.grid.dim, 0):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    scale = max(np.max(np.abs(v)), np.finfo(float).tiny)
    return bool(np.max(np.abs(v - np.conj(flipped))) <= rtol * scale)


def resample(f: Field, grid: GridSpec) -> Field:
    """Spectral (zero-padding / truncation) interpolation onto ``grid``.

    Both grids must share ``dim`` and ``box_length``. The Nyquist mode of the
    coarser lattice is split evenly between ``+-M/2`` of the finer one.
    """
    _require(f, PHYSICAL)
    src = f.grid
    if grid.dim != src.dim or not np.isclose(grid.box_length, src.box_length):
        raise ContractError("resample needs the same dim and box length")
    F = fwd(f.values, src)
    for ax in range(src.dim):
        F = _resize_axis(F, ax, grid.points)
    return Field(grid, inv(F, grid), PHYSICAL)


def _resize_axis(F: np.ndarray, axis: int, m_new: int) -> np.ndarray:
    m_old = F.shape[axis]
    if m_new == m_old:
        return F
    F = np.moveaxis(F, axis, 0)
    out = np.zeros((m_new,) + F.shape[1:], dtype=complex)
    if m_new > m_old:
        h = m_old // 2
        out[:h] = F[:h]
        out[m_new - h + 1:] = F[h + 1:]
        out[h] = 0.5 * F[h]
        out[m_new - h] = 0.5 * F[h]
    else:
        h = m_new // 2
        out[:h] = F[:h]
        out[h + 1:] = F[m_old - h + 1:]
        out[h] = F[h] + F[m_old - h]
    return np.moveaxis(out, 0, axis)


# Binary "FBMF" field format (little endian):
#   b"FBMF", u32 version, u8 dim, dim*u64 points, dim*f64 box length,
#   u8 domain tag (0 physical, 1 frequency), points**dim complex128 row-major.

FBMF_MAGIC = b"FBMF"
FBMF_VERSION = 1


def write_fbmf(path, f: Field) -> None:
    g = f.grid
    head = FBMF_MAGIC + struct.pack("<IB", FBMF_VERSION, g.dim)
    head += struct.pack(f"<{g.dim}Q", *([g.points] * g.dim))
    head += struct.pack(f"<{g.dim}d", *([g.box_length] * g.dim))
    head += struct.pack("<B", _TAGS.index(f.domain))
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    Path(path).write_bytes(head + body)


def read_fbmf(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != FBMF_MAGIC:
        raise ValueError(f"{path}: not an FBMF file")
    version, dim = struct.unpack_from("<IB", raw, 4)
    if version != FBMF_VERSION:
        raise ValueError(f"{path}: unsupported FBMF version {version}")
    off = 9
    points = struct.unpack_from(f"<{dim}Q", raw, off)
    off += 8 * dim
    lengths = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    (tag,) = struct.unpack_from("<B", raw, off)
    off += 1
    if len(set(points)) != 1 or len(set(lengths)) != 1:
        raise ValueError(f"{path}: anisotropic grids are not supported")
    if tag > 1:
        raise ValueError(f"{path}: bad domain tag {tag}")
    grid = GridSpec(dim, lengths[0], points[0])
    n = points[0] ** dim
    values = np.frombuffer(raw, dtype="<c16", count=n, offset=off)
    if values.size != n:
        raise ValueError(f"{path}: truncated payload")
    return Field(grid, values.astype(complex).reshape(grid.shape), _TAGS[tag])

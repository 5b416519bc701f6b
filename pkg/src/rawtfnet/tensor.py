"""Dense float64 tensors, seeded random streams and a finite-difference checker.

Layers work on plain ``numpy.ndarray`` values for speed; :class:`Tensor` is the
immutable, validated wrapper used at API boundaries and in tests. Layout is
always C order (row-major), so ``data[i]`` of a flattened tensor is element
``np.unravel_index(i, shape)``.
"""

from __future__ import annotations

import math
import os
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NumericError

_DEBUG = os.environ.get("RAWTFNET_DEBUG", "") not in ("", "0")


def set_debug(enabled: bool) -> None:
    """Toggle the finite-value assertion run after every tensor op."""
    global _DEBUG
    _DEBUG = bool(enabled)


def debug_enabled() -> bool:
    return _DEBUG


class Tensor:
    """Immutable dense array of 64-bit floats.

    Construction always validates finiteness. Results of ops are validated
    again only in debug mode.
    """

    __slots__ = ("_data",)

    def __init__(self, data, shape: Sequence[int] | None = None, *, _check: bool = True):
        arr = np.array(data, dtype=np.float64, copy=True, order="C")
        if shape is not None:
            shape = tuple(int(s) for s in shape)
            if any(s < 1 for s in shape):
                raise DimensionError(f"dimension sizes must be positive, got {shape}")
            if math.prod(shape) != arr.size:
                raise DimensionError(
                    f"{arr.size} values do not fill shape {shape} (needs {math.prod(shape)})"
                )
            arr = arr.reshape(shape)
        if _check and not np.all(np.isfinite(arr)):
            raise NumericError("tensor contains NaN or infinity")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls(arr, _check=_DEBUG)
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def data(self) -> np.ndarray:
        """Read-only flat view in row-major order."""
        return self._data.reshape(-1)

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def numpy(self) -> np.ndarray:
        """Writable copy of the values with the tensor's shape."""
        return self._data.copy()

    def __len__(self) -> int:
        return self._data.shape[0]

    def __getitem__(self, idx):
        out = self._data[idx]
        if isinstance(out, np.ndarray):
            return Tensor._wrap(out)
        return float(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={np.array2string(self._data, threshold=8)})"

    def __add__(self, other):
        return elementwise("add", self, other)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __mul__(self, other):
        return elementwise("mul", self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _values(x) -> np.ndarray:
    if isinstance(x, Tensor):
        return x._data
    return np.asarray(x, dtype=np.float64)


_OPS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(op: str, a, b) -> Tensor:
    """Apply ``add``, ``sub`` or ``mul`` to equal-shaped tensors or tensor and scalar."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}; choose from {sorted(_OPS)}") from None
    av = _values(a)
    bv = _values(b)
    if bv.ndim != 0 and bv.size == 1 and av.size != 1 and bv.shape != av.shape:
        bv = bv.reshape(())
    if bv.ndim != 0 and bv.shape != av.shape:
        raise DimensionError(f"shape mismatch in {op}: {av.shape} vs {bv.shape}")
    return Tensor._wrap(fn(av, bv))


def _normalize_axes(axes: Iterable[int] | int | None, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, (int, np.integer)):
        axes = (axes,)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise DimensionError(f"axis {ax} out of range for {ndim}-d tensor")
        out.append(ax % ndim)
    return tuple(sorted(set(out)))


def reduce_mean(x, axes=None, keep_dims: bool = False) -> Tensor:
    """Arithmetic mean over ``axes`` (all axes when None)."""
    v = _values(x)
    ax = _normalize_axes(axes, v.ndim)
    out = v.mean(axis=ax, keepdims=keep_dims)
    return Tensor._wrap(np.atleast_1d(out) if out.ndim == 0 else out)


def reshape(x, new_shape: Sequence[int]) -> Tensor:
    v = _values(x)
    new_shape = tuple(int(s) for s in new_shape)
    if math.prod(new_shape) != v.size:
        raise DimensionError(f"cannot reshape {v.shape} ({v.size} values) into {new_shape}")
    return Tensor._wrap(v.reshape(new_shape))


def transpose(x, permutation: Sequence[int]) -> Tensor:
    v = _values(x)
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != list(range(v.ndim)):
        raise DimensionError(f"{perm} is not a permutation of the {v.ndim} axes")
    return Tensor._wrap(np.ascontiguousarray(v.transpose(perm)))


class Rng:
    """Seeded stream over numpy's PCG64, whose output is bit-exact across platforms."""

    algorithm = "PCG64"

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, size) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def spawn(self, *keys: int) -> "Rng":
        """Independent child stream keyed by integers (e.g. epoch, item index)."""
        ss = np.random.SeedSequence([self.seed, *[int(k) for k in keys]])
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child.generator = np.random.Generator(np.random.PCG64(ss))
        return child


def finite_difference_gradient(f: Callable, x, h: float = 1e-5):
    """Central-difference gradient of scalar ``f`` at ``x``.

    Returns the same container type as ``x`` (``Tensor`` or ``ndarray``).
    ``f`` receives a fresh array or Tensor per evaluation.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    is_tensor = isinstance(x, Tensor)
    base = _values(x).astype(np.float64).copy()
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)

    def call(arr):
        val = f(Tensor(arr) if is_tensor else arr.copy())
        val = float(val) if not isinstance(val, Tensor) else float(val.data[0])
        if not math.isfinite(val):
            raise NumericError("objective is not finite at a perturbed point")
        return val

    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = call(base)
        flat[i] = orig - h
        fm = call(base)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return Tensor(grad) if is_tensor else grad


def relative_error(analytic, numeric, floor: float = 1e-12) -> float:
    """Norm-wise relative error ``|a - n| / max(|a|, |n|)`` between two gradients."""
    a = _values(analytic).ravel()
    n = _values(numeric).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)

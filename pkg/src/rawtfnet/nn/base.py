"""Layer protocol: cached forward, explicit backward, named parameters."""

from __future__ import annotations

import contextlib
from typing import Iterator

import numpy as np

from ..errors import StateError

_CACHING = True


@contextlib.contextmanager
def no_cache():
    """Skip activation caching (inference only; backward raises inside)."""
    global _CACHING
    prev, _CACHING = _CACHING, False
    try:
        yield
    finally:
        _CACHING = prev


def caching() -> bool:
    return _CACHING


class Layer:
    """Base class.

    Subclasses fill ``params`` (trainable arrays), ``buffers`` (non-trainable
    state such as BN running statistics) and register sublayers with
    :meth:`add`. ``backward`` must store parameter gradients in ``grads``
    under the same keys as ``params`` and return the input gradient.
    """

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, Layer] = {}
        self._cache = None

    def add(self, name: str, layer: "Layer") -> "Layer":
        self._children[name] = layer
        return layer

    def children(self) -> dict[str, "Layer"]:
        return self._children

    def __getattr__(self, name):
        children = self.__dict__.get("_children", {})
        if name in children:
            return children[name]
        raise AttributeError(f"{type(self).__name__} has no attribute or sublayer {name!r}")

    def __call__(self, x, train: bool = False):
        return self.forward(x, train)

    def forward(self, x, train: bool = False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def _save(self, *values):
        self._cache = values if _CACHING else None

    def _load(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before a cached forward")
        return self._cache

    # parameter plumbing

    def named_layers(self, prefix: str = "") -> Iterator[tuple[str, "Layer"]]:
        yield prefix, self
        for name, child in self._children.items():
            yield from child.named_layers(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self) -> Iterator[tuple[str, "Layer", str]]:
        """Yield ``(qualified_name, owning_layer, key)`` for each trainable array."""
        for lname, layer in self.named_layers():
            for key in layer.params:
                yield (f"{lname}.{key}" if lname else key), layer, key

    def named_buffers(self) -> Iterator[tuple[str, "Layer", str]]:
        for lname, layer in self.named_layers():
            for key in layer.buffers:
                yield (f"{lname}.{key}" if lname else key), layer, key

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {name: layer.params[key].copy() for name, layer, key in self.named_parameters()}
        out.update({name: layer.buffers[key].copy() for name, layer, key in self.named_buffers()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        slots = [(n, l.params, k) for n, l, k in self.named_parameters()]
        slots += [(n, l.buffers, k) for n, l, k in self.named_buffers()]
        expected = {n for n, _, _ in slots}
        if set(state) != expected:
            missing = sorted(expected - set(state))
            extra = sorted(set(state) - expected)
            raise StateError(f"state mismatch: missing={missing[:5]} unexpected={extra[:5]}")
        for name, store, key in slots:
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != store[key].shape:
                raise StateError(f"{name}: shape {value.shape} != {store[key].shape}")
            store[key] = value.copy()

    def zero_grads(self) -> None:
        for _, layer in self.named_layers():
            layer.grads = {k: np.zeros_like(v) for k, v in layer.params.items()}

    # complexity accounting; shapes exclude the batch axis

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def macs(self, in_shape: tuple[int, ...]) -> int:
        return 0

    def param_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def describe(self, in_shape, prefix: str = ""):
        """Return ``(rows, out_shape)``; rows are ``(name, params, macs)`` per leaf layer."""
        rows = []
        n, m = self.param_count(), self.macs(in_shape)
        if n or m:
            rows.append((prefix or type(self).__name__, n, m))
        return rows, self.output_shape(in_shape)


class Sequential(Layer):
    def __init__(self, *named_layers: tuple[str, Layer]):
        super().__init__()
        for name, layer in named_layers:
            self.add(name, layer)

    def forward(self, x, train=False):
        for layer in self._children.values():
            x = layer.forward(x, train)
        return x

    def backward(self, grad):
        for layer in reversed(list(self._children.values())):
            grad = layer.backward(grad)
        return grad

    def describe(self, in_shape, prefix=""):
        rows = []
        shape = in_shape
        for name, layer in self._children.items():
            sub, shape = layer.describe(shape, f"{prefix}.{name}" if prefix else name)
            rows.extend(sub)
        return rows, shape

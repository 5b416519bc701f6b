"""Parameter and multiply-accumulate accounting by static shape propagation.

Conventions: convolution MACs are ``Cout * Cin/groups * Kh * Kw * Hout * Wout``
(padded taps included); linear layers count ``n_in * n_out``; batch norm,
activations, pooling and broadcast additions count zero MACs. Parameters are
trainable scalars only; BN running statistics are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .nn.base import Layer


@dataclass
class ComplexityReport:
    rows: list[tuple[str, int, int]] = field(default_factory=list)
    input_length: int | None = None

    @property
    def total_params(self) -> int:
        return sum(r[1] for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r[2] for r in self.rows)

    def to_tsv(self) -> str:
        """One ``layer<TAB>params<TAB>macs`` line per layer, then a ``TOTAL`` line."""
        lines = [f"{name}\t{p}\t{m}" for name, p, m in self.rows]
        lines.append(f"TOTAL\t{self.total_params}\t{self.total_macs}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max([len(r[0]) for r in self.rows] + [5])
        head = f"{'layer':<{width}}  {'params':>10}  {'MACs':>15}"
        lines = [head, "-" * len(head)]
        lines += [f"{n:<{width}}  {p:>10,d}  {m:>15,d}" for n, p, m in self.rows]
        lines.append("-" * len(head))
        lines.append(f"{'TOTAL':<{width}}  {self.total_params:>10,d}  {self.total_macs:>15,d}")
        if self.input_length is not None:
            lines.append(
                f"params = {self.total_params / 1e6:.3f}M, MACs = {self.total_macs / 1e9:.3f}G "
                f"at {self.input_length} input samples"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str, input_length: int | None = None) -> "ComplexityReport":
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            name, p, m = line.split("\t")
            if name != "TOTAL":
                rows.append((name, int(p), int(m)))
        return cls(rows, input_length)


def _input_shape(model: Layer, input_length):
    cfg = getattr(model, "cfg", None)
    if input_length is None and cfg is not None:
        input_length = cfg.segment_len
    return input_length


def complexity_report(model: Layer, input_length: int | None = None, in_shape=None) -> ComplexityReport:
    """Per-layer params and MACs. Full models take a waveform length; single
    layers take an explicit unbatched ``in_shape``."""
    input_length = _input_shape(model, input_length)
    if in_shape is None:
        in_shape = (input_length,)
    rows, _ = model.describe(tuple(in_shape))
    return ComplexityReport(rows, input_length)


def count_params(model: Layer) -> int:
    """Trainable scalars (identical to summing the report's param column)."""
    return int(sum(layer.params[key].size for _, layer, key in model.named_parameters()))


def count_macs(model: Layer, input_length: int | None = None, in_shape=None) -> int:
    return complexity_report(model, input_length, in_shape).total_macs

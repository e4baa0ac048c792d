"""Neural surrogate for the PLL step: weights loading and evaluation.

The stepper computes  y_hat = y_prev + dt * rate(features)  where rate comes
from a small feedforward net with tanh applied at *every* layer, output
included.  Raw outputs are therefore confined to (-1, 1); an affine
(offset, scale) pair stored alongside the weights maps them back to physical
rates, and per-feature [lo, hi] ranges squash the inputs to [-1, 1].  The
same ranges double as the validity domain: a query outside the trained range
raises DomainViolation instead of extrapolating silently.

Weights travel as a JSON document::

    {"format_version": 1,
     "activation": "tanh",
     "input_spec":  [{"name": ..., "lo": ..., "hi": ...}, ...],
     "output_spec": [{"name": ..., "offset": ..., "scale": ...}, ...],
     "layers": [{"rows": R, "cols": C, "w": [R*C row-major], "b": [R]}, ...]}

with every float printed to 17 significant digits so values round-trip
bit-exactly.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .control import PllState, wrap_angle
from .errors import (
    DimensionMismatch,
    DomainViolation,
    ParseError,
    ShapeMismatch,
    UnknownActivation,
)

FORMAT_VERSION = 1

# feature/output contract of the PLL stepper (order as stored in the file)
PLL_FEATURES = ("dt", "v_a", "v_b", "v_c", "sin_theta", "cos_theta", "omega_integ")
PLL_OUTPUTS = ("theta_rate", "omega_integ_rate")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    lo: float
    hi: float


@dataclass(frozen=True)
class OutputSpec:
    name: str
    offset: float
    scale: float


class MlpParams:
    """Immutable container for a loaded network."""

    def __init__(self, layers, activation, input_spec, output_spec):
        if activation != "tanh":
            raise UnknownActivation(f"unsupported activation {activation!r}")
        if not layers:
            raise ShapeMismatch("network needs at least one layer")
        self.layers = [(np.asarray(w, dtype=float), np.asarray(b, dtype=float))
                       for w, b in layers]
        self.activation = activation
        self.input_spec = tuple(input_spec)
        self.output_spec = tuple(output_spec)

        prev_rows = None
        for idx, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ShapeMismatch(f"layer {idx}: bias/weight shapes disagree")
            if prev_rows is not None and w.shape[1] != prev_rows:
                raise ShapeMismatch(
                    f"layer {idx} expects {w.shape[1]} inputs, previous layer emits {prev_rows}"
                )
            prev_rows = w.shape[0]
        self.n_in = self.layers[0][0].shape[1]
        self.n_out = self.layers[-1][0].shape[0]
        if len(self.input_spec) != self.n_in:
            raise ShapeMismatch(
                f"{len(self.input_spec)} input features declared, first layer takes {self.n_in}"
            )
        if len(self.output_spec) != self.n_out:
            raise ShapeMismatch(
                f"{len(self.output_spec)} outputs declared, last layer emits {self.n_out}"
            )
        for spec in self.input_spec:
            if not spec.lo < spec.hi:
                raise ParseError(f"feature {spec.name!r}: lo must be < hi")

        self.input_names = tuple(s.name for s in self.input_spec)
        self.output_names = tuple(s.name for s in self.output_spec)
        # cached arrays for the hot path
        self._lo = np.array([s.lo for s in self.input_spec])
        self._hi = np.array([s.hi for s in self.input_spec])
        self._inv_halfspan = 2.0 / (self._hi - self._lo)
        self._out_offset = np.array([s.offset for s in self.output_spec])
        self._out_scale = np.array([s.scale for s in self.output_spec])

    @property
    def arch(self):
        """(number of hidden layers, tuple of their widths)."""
        hidden = self.layers[:-1]
        return len(hidden), tuple(w.shape[0] for w, _ in hidden)

    @property
    def mac_count(self):
        """Multiply-adds per forward call — fixed by the shapes alone."""
        return sum(w.shape[0] * w.shape[1] for w, _ in self.layers)


def scale_features(p, raw):
    """Affine map of raw features onto [-1, 1] per the stored ranges."""
    return (np.asarray(raw, dtype=float) - p._lo) * p._inv_halfspan - 1.0


def check_domain(p, raw):
    """Raise DomainViolation for any feature outside its trained [lo, hi]."""
    for spec, x in zip(p.input_spec, raw):
        if x < spec.lo or x > spec.hi:
            raise DomainViolation(spec.name, x, spec.lo, spec.hi)


def forward(p, z):
    """Evaluate the net on an already-scaled input vector."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != p.n_in:
        raise DimensionMismatch(f"expected {p.n_in} features, got {z.shape[-1]}")
    for w, b in p.layers:
        z = np.tanh(w @ z + b)
    return z


def pll_step_pinn(p, s, v_abc_now, dt):
    """Advance the PLL state by one step of the learned explicit rule.

    dt = 0 is the exact identity whatever the weights: the rate is still
    evaluated but enters multiplied by dt.
    """
    if p.input_names != PLL_FEATURES or p.output_names != PLL_OUTPUTS:
        raise ParseError(
            "weights file does not implement the PLL stepper contract "
            f"(inputs {p.input_names}, outputs {p.output_names})"
        )
    raw = (dt, v_abc_now[0], v_abc_now[1], v_abc_now[2],
           math.sin(s.theta), math.cos(s.theta), s.omega_integ)
    check_domain(p, raw)
    rate = p._out_offset + p._out_scale * forward(p, scale_features(p, raw))
    theta = float(wrap_angle(s.theta + dt * rate[0]))
    integ = float(s.omega_integ + dt * rate[1])
    omega = float(rate[0]) if dt != 0.0 else s.omega  # dt=0: exact identity
    return PllState(theta, integ, s.t + dt, s.v_q_prev, omega)


def _fmt(x):
    return format(float(x), ".17g")


def _vec(xs):
    return "[" + ", ".join(_fmt(x) for x in xs) + "]"


def save_weights(p, dest=None):
    """Serialize MlpParams to the JSON format above (17 significant digits).

    dest may be a path, an open file object, or None (return the text only).
    """
    chunks = ["{\n"]
    chunks.append(f'  "format_version": {FORMAT_VERSION},\n')
    chunks.append(f'  "activation": "{p.activation}",\n')
    ins = ",\n".join(
        f'    {{"name": "{s.name}", "lo": {_fmt(s.lo)}, "hi": {_fmt(s.hi)}}}'
        for s in p.input_spec
    )
    chunks.append(f'  "input_spec": [\n{ins}\n  ],\n')
    outs = ",\n".join(
        f'    {{"name": "{s.name}", "offset": {_fmt(s.offset)}, "scale": {_fmt(s.scale)}}}'
        for s in p.output_spec
    )
    chunks.append(f'  "output_spec": [\n{outs}\n  ],\n')
    layers = ",\n".join(
        f'    {{"rows": {w.shape[0]}, "cols": {w.shape[1]},\n'
        f'     "w": {_vec(w.ravel())},\n'
        f'     "b": {_vec(b)}}}'
        for w, b in p.layers
    )
    chunks.append(f'  "layers": [\n{layers}\n  ]\n}}\n')
    text = "".join(chunks)
    if hasattr(dest, "write"):
        dest.write(text)
    elif dest is not None:
        with open(dest, "w") as f:
            f.write(text)
    return text


def load_weights(source):
    """Parse a weights document from a path, file object, or JSON string."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, bytes):
        text = source.decode()
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        with open(source) as f:
            text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"weights file is not valid JSON: {e}") from None

    try:
        version = doc["format_version"]
        activation = doc["activation"]
        in_spec = [FeatureSpec(d["name"], float(d["lo"]), float(d["hi"]))
                   for d in doc["input_spec"]]
        out_spec = [OutputSpec(d["name"], float(d["offset"]), float(d["scale"]))
                    for d in doc["output_spec"]]
        raw_layers = doc["layers"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"weights file missing field: {e}") from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}")

    layers = []
    for idx, entry in enumerate(raw_layers):
        try:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            w_flat = np.asarray(entry["w"], dtype=float)
            b = np.asarray(entry["b"], dtype=float)
        except (KeyError, TypeError) as e:
            raise ParseError(f"layer {idx} missing field: {e}") from None
        if w_flat.size != rows * cols:
            raise ShapeMismatch(
                f"layer {idx}: {w_flat.size} weights for a {rows}x{cols} matrix"
            )
        if b.size != rows:
            raise ShapeMismatch(f"layer {idx}: {b.size} biases for {rows} rows")
        layers.append((w_flat.reshape(rows, cols), b))
    return MlpParams(layers, activation, in_spec, out_spec)

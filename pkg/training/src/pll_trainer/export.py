"""Serialization to the simulator's weights format, with a cross-check.

The format (its "format_version": 1) is a JSON document holding the
activation name, per-feature [lo, hi] input ranges, per-output
(offset, scale) pairs, and row-major flattened layer matrices, every float
printed to 17 significant digits so the file round-trips bit-exactly.
numpy_rates() re-evaluates a parsed document from scratch -- no torch --
which is what the export cross-check compares against.
"""

import json

import numpy as np

from .model import FEATURES, OUTPUTS

FORMAT_VERSION = 1


def _fmt(x):
    return format(float(x), ".17g")


def _vec(xs):
    return "[" + ", ".join(_fmt(x) for x in xs) + "]"


def weights_document(model):
    """The trained model as JSON text in the simulator's format."""
    lo = model.in_lo.cpu().numpy()
    hi = model.in_hi.cpu().numpy()
    off = model.out_offset.cpu().numpy()
    sc = model.out_scale.cpu().numpy()
    chunks = ["{\n"]
    chunks.append(f'  "format_version": {FORMAT_VERSION},\n')
    chunks.append('  "activation": "tanh",\n')
    ins = ",\n".join(
        f'    {{"name": "{name}", "lo": {_fmt(l)}, "hi": {_fmt(h)}}}'
        for name, l, h in zip(FEATURES, lo, hi)
    )
    chunks.append(f'  "input_spec": [\n{ins}\n  ],\n')
    outs = ",\n".join(
        f'    {{"name": "{name}", "offset": {_fmt(o)}, "scale": {_fmt(s)}}}'
        for name, o, s in zip(OUTPUTS, off, sc)
    )
    chunks.append(f'  "output_spec": [\n{outs}\n  ],\n')
    layers = ",\n".join(
        f'    {{"rows": {w.shape[0]}, "cols": {w.shape[1]},\n'
        f'     "w": {_vec(w.ravel())},\n'
        f'     "b": {_vec(b)}}}'
        for w, b in model.layer_arrays()
    )
    chunks.append(f'  "layers": [\n{layers}\n  ]\n}}\n')
    return "".join(chunks)


def export_weights(model, path):
    with open(path, "w") as f:
        f.write(weights_document(model))
    return path


def numpy_rates(doc, feats):
    """Independent numpy evaluation of a weights document.

    doc may be JSON text, a path, or an already-parsed dict; feats is a raw
    (n, 7) feature matrix.  Returns physical rates (n, 2).
    """
    if isinstance(doc, str):
        if doc.lstrip().startswith("{"):
            doc = json.loads(doc)
        else:
            with open(doc) as f:
                doc = json.load(f)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc['format_version']}")
    lo = np.array([d["lo"] for d in doc["input_spec"]])
    hi = np.array([d["hi"] for d in doc["input_spec"]])
    off = np.array([d["offset"] for d in doc["output_spec"]])
    sc = np.array([d["scale"] for d in doc["output_spec"]])
    z = (np.asarray(feats, dtype=float) - lo) * (2.0 / (hi - lo)) - 1.0
    for entry in doc["layers"]:
        w = np.asarray(entry["w"], dtype=float).reshape(entry["rows"], entry["cols"])
        b = np.asarray(entry["b"], dtype=float)
        z = np.tanh(z @ w.T + b)
    return off + sc * z


def crosscheck(model, path, n=100, seed=1234):
    """Max |torch - file| rate gap on random in-domain features."""
    import torch

    rng = np.random.default_rng(seed)
    lo = model.in_lo.cpu().numpy()
    hi = model.in_hi.cpu().numpy()
    feats = rng.uniform(lo, hi, (n, len(FEATURES)))
    with torch.no_grad():
        ours = model.rates(torch.tensor(feats, dtype=torch.float64)).numpy()
    theirs = numpy_rates(path, feats)
    return float(np.max(np.abs(ours - theirs)))

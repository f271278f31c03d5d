"""Text formats for networks, expert banks, heatmaps and adaptation traces.

Floats are written with ``repr`` (shortest round-trip decimal), so files
reload bit-exactly and reruns produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .nn import DenseNet

POLICY_FORMAT = "ssep-policy"
BANK_FORMAT = "ssep-bank"
FORMAT_VERSION = 1
HEATMAP_VERSION = "# ssep-heatmap v1"
TRACE_VERSION = "# ssep-trace v1"
RETURNS_VERSION = "# ssep-returns v1"


class FormatError(ValueError):
    """Malformed input file; the message names the offending location."""


def _num(v) -> str:
    return repr(float(v))


def net_to_dict(net: DenseNet) -> dict:
    if not isinstance(net, DenseNet):
        raise TypeError(f"only networks can be serialised, got {type(net).__name__}")
    return {
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _array(data, shape, where):
    try:
        arr = np.array(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc
    if arr.shape != shape:
        raise FormatError(f"{where}: shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}: non-finite values")
    return arr


def net_from_dict(d, where="network") -> DenseNet:
    if not isinstance(d, dict):
        raise FormatError(f"{where}: expected an object")
    try:
        sizes = [int(s) for s in d["layer_sizes"]]
        weights = [
            _array(W, (sizes[k], sizes[k + 1]), f"{where}.weights[{k}]") for k, W in enumerate(d["weights"])
        ]
        biases = [_array(b, (sizes[k + 1],), f"{where}.biases[{k}]") for k, b in enumerate(d["biases"])]
        return DenseNet(sizes, weights, biases, d["hidden_activation"], d["output_activation"])
    except KeyError as exc:
        raise FormatError(f"{where}: missing key {exc}") from exc
    except IndexError as exc:
        raise FormatError(f"{where}: layer count does not match layer_sizes") from exc
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{where}: {exc}") from exc


def _dump(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _load(path, fmt):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "format" not in doc:
        raise FormatError(f"{path}: not a self-describing ssep document")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    if fmt is not None and doc["format"] != fmt:
        raise FormatError(f"{path}: expected format {fmt!r}, found {doc['format']!r}")
    return doc


def policy_document(net: DenseNet, point=None, metadata=None) -> str:
    doc = {"format": POLICY_FORMAT, "version": FORMAT_VERSION}
    if point is not None:
        doc["point"] = [float(v) for v in point]
    doc["metadata"] = metadata or {}
    doc["network"] = net_to_dict(net)
    return _dump(doc)


def bank_document(bank) -> str:
    doc = {
        "format": BANK_FORMAT,
        "version": FORMAT_VERSION,
        "M": len(bank),
        "experts": [
            {"index": j + 1, "point": p.tolist(), "metadata": meta, "network": net_to_dict(actor)}
            for j, (p, actor, meta) in enumerate(zip(bank.points, bank.actors, bank.metadata))
        ],
    }
    return _dump(doc)


def write_text(path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def load_policy(path):
    """Returns ``(net, point_or_None, metadata)``."""
    doc = _load(path, POLICY_FORMAT)
    net = net_from_dict(doc.get("network"), f"{path}: network")
    point = doc.get("point")
    return net, (None if point is None else np.array(point, dtype=np.float64)), doc.get("metadata", {})


def load_bank(path):
    from .expert import ExpertBank

    doc = _load(path, BANK_FORMAT)
    experts = doc.get("experts")
    if not isinstance(experts, list):
        raise FormatError(f"{path}: 'experts' must be a list")
    if doc.get("M") != len(experts):
        raise FormatError(f"{path}: M={doc.get('M')!r} but {len(experts)} experts listed")
    if not experts:
        raise FormatError(f"{path}: an expert bank needs at least one expert")
    points, actors, meta = [], [], []
    for j, e in enumerate(experts):
        where = f"{path}: experts[{j}]"
        if not isinstance(e, dict) or "point" not in e:
            raise FormatError(f"{where}: missing 'point'")
        if e.get("index") != j + 1:
            raise FormatError(f"{where}: index {e.get('index')!r} out of order")
        points.append(_array(e["point"], (len(e["point"]),), f"{where}.point"))
        actors.append(net_from_dict(e.get("network"), f"{where}.network"))
        meta.append(e.get("metadata", {}))
    try:
        return ExpertBank(points, actors, meta)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load_any(path):
    """Load a policy or a bank; returns ``("policy", (net, point, meta))`` or ``("bank", bank)``."""
    doc = _load(path, None)
    if doc["format"] == BANK_FORMAT:
        return "bank", load_bank(path)
    if doc["format"] == POLICY_FORMAT:
        return "policy", load_policy(path)
    raise FormatError(f"{path}: unknown format {doc['format']!r}")


def heatmap_csv(rows, n_experts: int | None = None) -> str:
    """``rows`` are ``(xi, G)`` or, for banks, ``(xi, G, per_expert_scores)``."""
    header = ["xi1", "xi2", "G"]
    if n_experts:
        header += [f"G_expert_{j + 1}" for j in range(n_experts)] + ["G_max"]
    lines = [HEATMAP_VERSION, ",".join(header)]
    for row in sorted(rows, key=lambda r: tuple(r[0])):
        xi, G = row[0], row[1]
        cells = [_num(xi[0]), _num(xi[1]), _num(G)]
        if n_experts:
            per = row[2]
            cells += [_num(v) for v in per] + [_num(max(per))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def read_heatmap(path):
    """Header and rows of a heatmap CSV, as floats."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [[float(c) for c in ln.split(",")] for ln in lines[1:] if ln]


def trace_csv(trace) -> str:
    m = trace.w.shape[1]
    lines = [TRACE_VERSION, ",".join(["t", "x1", "x2", "a", "r"] + [f"w_{j + 1}" for j in range(m)])]
    for i in range(len(trace)):
        cells = [str(int(trace.t[i])), _num(trace.x[i, 0]), _num(trace.x[i, 1]), _num(trace.a[i]),
                 _num(trace.r[i])] + [_num(v) for v in trace.w[i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def returns_csv(returns) -> str:
    lines = [RETURNS_VERSION, "episode,return"]
    lines += [f"{i + 1},{_num(r)}" for i, r in enumerate(returns)]
    return "\n".join(lines) + "\n"


def json_document(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"

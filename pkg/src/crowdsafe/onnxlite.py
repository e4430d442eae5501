"""Minimal ONNX model loader and numpy executor.

Decodes the protobuf wire format directly (only the message fields this
toolkit consumes) and evaluates a small operator set on the CPU, enough to
run the exported person / face / mask graphs without a heavyweight
inference runtime.  Tensors are float32 end to end, matching the usual
runtime behaviour closely enough for the 1e-4 parity budget.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class GraphParseError(ValueError):
    """The byte stream is not a model this loader understands."""


class UnsupportedOperator(RuntimeError):
    """The graph uses operators outside the supported subset."""

    def __init__(self, ops):
        self.ops = tuple(sorted(ops))
        super().__init__(f"unsupported operator(s): {', '.join(self.ops)}")


# ---------------------------------------------------------------------------
# protobuf wire format

def _varint(buf: bytes, pos: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise GraphParseError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise GraphParseError("varint too long")


def _signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(buf: bytes):
    """Yield (field_number, wire_type, payload) triplets of one message."""
    pos = 0
    end = len(buf)
    while pos < end:
        tag, pos = _varint(buf, pos)
        fno, wt = tag >> 3, tag & 7
        if wt == 0:
            val, pos = _varint(buf, pos)
        elif wt == 1:
            val = buf[pos:pos + 8]
            pos += 8
        elif wt == 5:
            val = buf[pos:pos + 4]
            pos += 4
        elif wt == 2:
            ln, pos = _varint(buf, pos)
            val = buf[pos:pos + ln]
            if len(val) != ln:
                raise GraphParseError("truncated length-delimited field")
            pos += ln
        else:
            raise GraphParseError(f"unsupported wire type {wt}")
        yield fno, wt, val


def _packed_varints(buf: bytes) -> List[int]:
    out = []
    pos = 0
    while pos < len(buf):
        v, pos = _varint(buf, pos)
        out.append(_signed(v))
    return out


# ---------------------------------------------------------------------------
# message decode

_DTYPES = {
    1: np.dtype("<f4"),   # FLOAT
    6: np.dtype("<i4"),   # INT32
    7: np.dtype("<i8"),   # INT64
    9: np.dtype("bool"),  # BOOL
    11: np.dtype("<f8"),  # DOUBLE
}


@dataclass
class TensorP:
    name: str = ""
    dims: List[int] = field(default_factory=list)
    data_type: int = 0
    raw: bytes = b""
    float_data: List[float] = field(default_factory=list)
    int_data: List[int] = field(default_factory=list)

    def to_array(self) -> np.ndarray:
        dt = _DTYPES.get(self.data_type)
        if dt is None:
            raise GraphParseError(f"tensor {self.name!r}: unsupported data type {self.data_type}")
        if self.raw:
            arr = np.frombuffer(self.raw, dtype=dt)
        elif self.float_data and self.data_type in (1, 11):
            arr = np.asarray(self.float_data, dtype=dt)
        elif self.int_data:
            arr = np.asarray(self.int_data, dtype=dt)
        else:
            arr = np.zeros(0, dtype=dt)
        shape = tuple(self.dims)
        expected = int(np.prod(shape)) if shape else 1
        if arr.size != expected:
            # scalar tensors may carry one value with empty dims
            if not (shape == () and arr.size == 1):
                raise GraphParseError(
                    f"tensor {self.name!r}: {arr.size} values for shape {shape}")
        return arr.reshape(shape).copy()


def _decode_tensor(buf: bytes) -> TensorP:
    t = TensorP()
    for fno, wt, val in _fields(buf):
        if fno == 1:
            t.dims.extend(_packed_varints(val) if wt == 2 else [_signed(val)])
        elif fno == 2:
            t.data_type = val
        elif fno == 4:
            if wt == 2:
                t.float_data.extend(np.frombuffer(val, dtype="<f4").tolist())
            else:
                t.float_data.append(struct.unpack("<f", val)[0])
        elif fno == 5 or fno == 7:
            t.int_data.extend(_packed_varints(val) if wt == 2 else [_signed(val)])
        elif fno == 8:
            t.name = val.decode("utf-8")
        elif fno == 9:
            t.raw = bytes(val)
        elif fno == 10:
            if wt == 2:
                t.float_data.extend(np.frombuffer(val, dtype="<f8").tolist())
            else:
                t.float_data.append(struct.unpack("<d", val)[0])
    return t


def _decode_attribute(buf: bytes) -> Tuple[str, object]:
    name = ""
    atype = 0
    f_val = 0.0
    i_val = 0
    s_val = b""
    t_val: Optional[TensorP] = None
    floats: List[float] = []
    ints: List[int] = []
    for fno, wt, val in _fields(buf):
        if fno == 1:
            name = val.decode("utf-8")
        elif fno == 2:
            f_val = struct.unpack("<f", val)[0]
        elif fno == 3:
            i_val = _signed(val)
        elif fno == 4:
            s_val = bytes(val)
        elif fno == 5:
            t_val = _decode_tensor(val)
        elif fno == 7:
            if wt == 2:
                floats.extend(np.frombuffer(val, dtype="<f4").tolist())
            else:
                floats.append(struct.unpack("<f", val)[0])
        elif fno == 8:
            ints.extend(_packed_varints(val) if wt == 2 else [_signed(val)])
        elif fno == 20:
            atype = val
    # AttributeType: 1 FLOAT, 2 INT, 3 STRING, 4 TENSOR, 6 FLOATS, 7 INTS
    if atype == 1:
        return name, float(f_val)
    if atype == 2:
        return name, int(i_val)
    if atype == 3:
        return name, s_val.decode("utf-8")
    if atype == 4:
        return name, t_val.to_array() if t_val is not None else None
    if atype == 6:
        return name, [float(v) for v in floats]
    if atype == 7:
        return name, [int(v) for v in ints]
    # writers that omit the type field: fall back on whichever field is set
    if ints:
        return name, [int(v) for v in ints]
    if floats:
        return name, [float(v) for v in floats]
    if t_val is not None:
        return name, t_val.to_array()
    if s_val:
        return name, s_val.decode("utf-8")
    if f_val:
        return name, float(f_val)
    return name, int(i_val)


@dataclass
class NodeP:
    op_type: str = ""
    name: str = ""
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    attrs: Dict[str, object] = field(default_factory=dict)


def _decode_node(buf: bytes) -> NodeP:
    n = NodeP()
    for fno, _wt, val in _fields(buf):
        if fno == 1:
            n.inputs.append(val.decode("utf-8"))
        elif fno == 2:
            n.outputs.append(val.decode("utf-8"))
        elif fno == 3:
            n.name = val.decode("utf-8")
        elif fno == 4:
            n.op_type = val.decode("utf-8")
        elif fno == 5:
            k, v = _decode_attribute(val)
            n.attrs[k] = v
    return n


@dataclass
class ValueInfoP:
    name: str = ""
    shape: Optional[List[Optional[int]]] = None  # None entries are dynamic dims


def _decode_value_info(buf: bytes) -> ValueInfoP:
    vi = ValueInfoP()
    for fno, _wt, val in _fields(buf):
        if fno == 1:
            vi.name = val.decode("utf-8")
        elif fno == 2:
            for tno, _twt, tval in _fields(val):
                if tno != 1:  # tensor_type
                    continue
                for sno, _swt, sval in _fields(tval):
                    if sno != 2:  # shape
                        continue
                    dims: List[Optional[int]] = []
                    for dno, _dwt, dval in _fields(sval):
                        if dno != 1:
                            continue
                        dim: Optional[int] = None
                        for eno, _ewt, eval_ in _fields(dval):
                            if eno == 1:
                                dim = _signed(eval_)
                        dims.append(dim)
                    vi.shape = dims
    return vi


@dataclass
class GraphP:
    name: str = ""
    nodes: List[NodeP] = field(default_factory=list)
    initializers: List[TensorP] = field(default_factory=list)
    inputs: List[ValueInfoP] = field(default_factory=list)
    outputs: List[ValueInfoP] = field(default_factory=list)


@dataclass
class ModelP:
    ir_version: int = 0
    opset: int = 0
    graph: GraphP = field(default_factory=GraphP)


def load_model(data: bytes) -> ModelP:
    """Decode serialized model bytes into the parsed graph structure."""
    model = ModelP()
    seen_graph = False
    try:
        for fno, _wt, val in _fields(data):
            if fno == 1:
                model.ir_version = _signed(val)
            elif fno == 7:
                seen_graph = True
                g = GraphP()
                for gno, _gwt, gval in _fields(val):
                    if gno == 1:
                        g.nodes.append(_decode_node(gval))
                    elif gno == 2:
                        g.name = gval.decode("utf-8")
                    elif gno == 5:
                        g.initializers.append(_decode_tensor(gval))
                    elif gno == 11:
                        g.inputs.append(_decode_value_info(gval))
                    elif gno == 12:
                        g.outputs.append(_decode_value_info(gval))
                model.graph = g
            elif fno == 8:
                for ono, _owt, oval in _fields(val):
                    if ono == 2:
                        model.opset = max(model.opset, _signed(oval))
    except (GraphParseError, struct.error, IndexError) as e:
        raise GraphParseError(f"not a readable model graph: {e}") from e
    if not seen_graph or not model.graph.nodes:
        raise GraphParseError("model contains no computation graph")
    return model


# ---------------------------------------------------------------------------
# operator kernels

def _attr_pair(attrs, key, default):
    v = list(attrs.get(key, default))
    if len(v) != 2:
        raise GraphParseError(f"{key} must have 2 entries, got {v}")
    return int(v[0]), int(v[1])


def _op_conv(inputs, attrs):
    x, w = inputs[0], inputs[1]
    bias = inputs[2] if len(inputs) > 2 and inputs[2] is not None else None
    group = int(attrs.get("group", 1))
    sh, sw = _attr_pair(attrs, "strides", [1, 1])
    pads = [int(p) for p in attrs.get("pads", [0, 0, 0, 0])]
    dil = list(attrs.get("dilations", [1, 1]))
    if [int(d) for d in dil] != [1, 1]:
        raise UnsupportedOperator(["Conv(dilations!=1)"])
    auto_pad = attrs.get("auto_pad", "NOTSET")
    if auto_pad not in ("NOTSET", ""):
        raise UnsupportedOperator([f"Conv(auto_pad={auto_pad})"])
    n, _cin, h, wd = x.shape
    m, cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pads[0], pads[2]), (pads[1], pads[3])))
    ho = (h + pads[0] + pads[2] - kh) // sh + 1
    wo = (wd + pads[1] + pads[3] - kw) // sw + 1
    out = np.zeros((n, m, ho, wo), dtype=np.float32)
    mg = m // group
    for g in range(group):
        xg = xp[:, g * cg:(g + 1) * cg]
        wg = w[g * mg:(g + 1) * mg]
        sub = out[:, g * mg:(g + 1) * mg]
        for i in range(kh):
            for j in range(kw):
                patch = xg[:, :, i:i + (ho - 1) * sh + 1:sh, j:j + (wo - 1) * sw + 1:sw]
                sub += np.einsum("nchw,mc->nmhw", patch, wg[:, :, i, j])
    if bias is not None:
        out += bias.reshape(1, -1, 1, 1)
    return out


def _op_gemm(inputs, attrs):
    a, b = inputs[0], inputs[1]
    c = inputs[2] if len(inputs) > 2 and inputs[2] is not None else None
    if int(attrs.get("transA", 0)):
        a = a.T
    if int(attrs.get("transB", 0)):
        b = b.T
    y = np.float32(attrs.get("alpha", 1.0)) * (a @ b)
    if c is not None:
        y = y + np.float32(attrs.get("beta", 1.0)) * c
    return y


def _op_clip(inputs, attrs):
    x = inputs[0]
    lo = inputs[1] if len(inputs) > 1 and inputs[1] is not None else attrs.get("min")
    hi = inputs[2] if len(inputs) > 2 and inputs[2] is not None else attrs.get("max")
    if lo is not None:
        x = np.maximum(x, np.float32(np.asarray(lo).reshape(())))
    if hi is not None:
        x = np.minimum(x, np.float32(np.asarray(hi).reshape(())))
    return x


def _op_sigmoid(inputs, attrs):
    x = inputs[0]
    with np.errstate(over="ignore"):
        return (1.0 / (1.0 + np.exp(-x.astype(np.float32)))).astype(np.float32)


def _op_flatten(inputs, attrs):
    x = inputs[0]
    axis = int(attrs.get("axis", 1))
    if axis < 0:
        axis += x.ndim
    lead = int(np.prod(x.shape[:axis])) if axis > 0 else 1
    return x.reshape(lead, -1)


def _op_reshape(inputs, attrs):
    x, shape = inputs[0], [int(v) for v in np.asarray(inputs[1]).ravel()]
    resolved = [x.shape[i] if v == 0 else v for i, v in enumerate(shape)]
    return x.reshape(resolved)


def _op_transpose(inputs, attrs):
    perm = attrs.get("perm")
    return np.transpose(inputs[0], axes=[int(p) for p in perm] if perm else None)


_KERNELS = {
    "Conv": _op_conv,
    "Gemm": _op_gemm,
    "MatMul": lambda inputs, attrs: inputs[0] @ inputs[1],
    "Add": lambda inputs, attrs: inputs[0] + inputs[1],
    "Mul": lambda inputs, attrs: inputs[0] * inputs[1],
    "Relu": lambda inputs, attrs: np.maximum(inputs[0], np.float32(0.0)),
    "Clip": _op_clip,
    "Sigmoid": _op_sigmoid,
    "Transpose": _op_transpose,
    "Flatten": _op_flatten,
    "Reshape": _op_reshape,
    "Identity": lambda inputs, attrs: inputs[0].copy(),
    "Concat": lambda inputs, attrs: np.concatenate(inputs, axis=int(attrs.get("axis", 0))),
    "GlobalAveragePool": lambda inputs, attrs: inputs[0].mean(axis=(2, 3), keepdims=True,
                                                              dtype=np.float32),
}

SUPPORTED_OPS = frozenset(_KERNELS)


class GraphSession:
    """Executable wrapper around a parsed model."""

    def __init__(self, model: ModelP):
        graph = model.graph
        unknown = {n.op_type for n in graph.nodes} - SUPPORTED_OPS
        if unknown:
            raise UnsupportedOperator(unknown)
        self._constants = {t.name: t.to_array() for t in graph.initializers}
        self._nodes = graph.nodes
        feed_inputs = [vi for vi in graph.inputs if vi.name not in self._constants]
        if len(feed_inputs) != 1:
            raise GraphParseError(f"expected exactly one graph input, found {len(feed_inputs)}")
        self.input_name = feed_inputs[0].name
        self.input_shape = feed_inputs[0].shape  # may contain None for dynamic dims
        self.output_names = [vi.name for vi in graph.outputs]
        self.opset = model.opset

    def run(self, feed: np.ndarray) -> List[np.ndarray]:
        """Evaluate the graph on one input tensor; outputs in declared order."""
        values: Dict[str, np.ndarray] = dict(self._constants)
        values[self.input_name] = np.asarray(feed, dtype=np.float32)
        for node in self._nodes:
            args = []
            for name in node.inputs:
                if name == "":
                    args.append(None)  # optional input slot
                elif name in values:
                    args.append(values[name])
                else:
                    raise GraphParseError(
                        f"node {node.name or node.op_type!r} reads undefined tensor {name!r}")
            results = _KERNELS[node.op_type](args, node.attrs)
            if isinstance(results, np.ndarray):
                results = [results]
            for out_name, arr in zip(node.outputs, results):
                values[out_name] = arr
        missing = [n for n in self.output_names if n not in values]
        if missing:
            raise GraphParseError(f"graph outputs never produced: {missing}")
        return [np.asarray(values[n]) for n in self.output_names]


def load_session(data: bytes) -> GraphSession:
    return GraphSession(load_model(data))

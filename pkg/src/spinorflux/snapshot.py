"""Snapshot container: a text header followed by raw little-endian float64
payloads, one block per declared field, row-major.

Header layout (all lines ``key: value``, terminated by ``end-header``)::

    spinorflux-snapshot: 1
    n: 2
    k: 1
    sizes: 16,16
    lengths: 6.283185307179586,6.283185307179586
    order: 2
    t: 0.0
    fields: g:metric:4,E:frame:4,psi:spinor:4,H:form1:2,phi:scalar:1
    end-header

Field kinds: scalar (1 float/node), metric and frame (n*n), form<k>
(C(n,k)), spinor (2*dim_s floats/node, interleaved re/im).  Payload blocks
follow in the declared order.  Round trips are bit-exact.
"""

import io

import numpy as np

from . import exterior, flow, grid
from .errors import SnapshotFormatError

MAGIC = "spinorflux-snapshot"
VERSION = 1


def _field_spec(state):
    n = state.n
    ds = state.psi.shape[-1]
    return [
        ("g", "metric", n * n),
        ("E", "frame", n * n),
        ("psi", "spinor", 2 * ds),
        ("H", f"form{state.k}", state.H.shape[-1]),
        ("phi", "scalar", 1),
    ]


def _payload(state, name):
    if name == "g":
        return state.g
    if name == "E":
        return state.E
    if name == "psi":
        # interleave re/im as a trailing axis of doubled length
        out = np.empty(state.psi.shape[:-1] + (2 * state.psi.shape[-1],))
        out[..., 0::2] = state.psi.real
        out[..., 1::2] = state.psi.imag
        return out
    if name == "H":
        return state.H
    if name == "phi":
        return state.phi
    raise SnapshotFormatError(f"unknown field {name}")


def write_state(path, state):
    """Serialize a FlowState; arrays are written exactly (bit-level)."""
    spec = _field_spec(state)
    header = io.StringIO()
    header.write(f"{MAGIC}: {VERSION}\n")
    header.write(f"n: {state.n}\n")
    header.write(f"k: {state.k}\n")
    header.write("sizes: " + ",".join(str(s) for s in state.grid.sizes) + "\n")
    header.write("lengths: " + ",".join(repr(x) for x in state.grid.lengths) + "\n")
    header.write(f"order: {state.grid.order}\n")
    header.write(f"t: {state.t!r}\n")
    header.write(
        "fields: " + ",".join(f"{n}:{kind}:{m}" for n, kind, m in spec) + "\n"
    )
    header.write("end-header\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("ascii"))
        for name, _kind, _m in spec:
            arr = np.ascontiguousarray(_payload(state, name), dtype="<f8")
            fh.write(arr.tobytes())


def _parse_header(fh):
    meta = {}
    offset = 0
    while True:
        line = fh.readline()
        if not line:
            raise SnapshotFormatError("header ended before end-header", offset=offset)
        offset += len(line)
        try:
            text = line.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise SnapshotFormatError("non-ASCII header byte", offset=offset) from exc
        if text == "end-header":
            return meta, offset
        if ":" not in text:
            raise SnapshotFormatError(f"bad header line {text!r}", offset=offset)
        key, _, val = text.partition(":")
        meta[key.strip()] = val.strip()


def read_state(path):
    """Deserialize a FlowState (inverse of write_state, bit-exact)."""
    with open(path, "rb") as fh:
        meta, offset = _parse_header(fh)
        if meta.get(MAGIC) != str(VERSION):
            raise SnapshotFormatError("missing or unsupported snapshot magic", offset=0)
        n = int(meta["n"])
        k = int(meta["k"])
        sizes = tuple(int(s) for s in meta["sizes"].split(","))
        lengths = tuple(float(x) for x in meta["lengths"].split(","))
        order = int(meta.get("order", 2))
        t = float(meta["t"])
        G = grid.Grid(sizes, lengths, order=order)
        if G.n != n:
            raise SnapshotFormatError("header n disagrees with sizes", offset=offset)
        fields = {}
        for part in meta["fields"].split(","):
            name, kind, m = part.split(":")
            m = int(m)
            count = G.num_nodes * m
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise SnapshotFormatError(
                    f"truncated payload for field {name!r}: wanted {8 * count} "
                    f"bytes, got {len(raw)}",
                    offset=offset,
                )
            offset += len(raw)
            arr = np.frombuffer(raw, dtype="<f8").reshape(G.sizes + (m,))
            fields[name] = (kind, arr)
        trailing = fh.read(1)
        if trailing:
            raise SnapshotFormatError("trailing bytes after declared payload",
                                      offset=offset)

    def take(name, shape):
        kind, arr = fields[name]
        return arr.reshape(G.sizes + shape).copy()

    g = take("g", (n, n))
    E = take("E", (n, n))
    raw_psi = fields["psi"][1]
    ds = raw_psi.shape[-1] // 2
    psi = raw_psi[..., 0::2] + 1j * raw_psi[..., 1::2]
    C = exterior.num_components(n, k)
    H = take("H", (C,))
    phi = fields["phi"][1].reshape(G.sizes)
    return flow.FlowState(G, k, g, E, psi.copy(), H, phi.copy(), t)


def describe(path):
    """Header echo plus per-field norms and the normalization residual."""
    state = read_state(path)
    lines = [
        f"n: {state.n}",
        f"k: {state.k}",
        f"sizes: {state.grid.sizes}",
        f"lengths: {state.grid.lengths}",
        f"t: {state.t}",
        f"|g|_max: {np.max(np.abs(state.g)):.6e}",
        f"|E|_max: {np.max(np.abs(state.E)):.6e}",
        f"|psi|_max: {np.max(np.abs(state.psi)):.6e}",
        f"|H|_max: {np.max(np.abs(state.H)):.6e}",
        f"|phi|_max: {np.max(np.abs(state.phi)):.6e}",
        f"normalization_residual: {state.normalization_residual():.6e}",
    ]
    return state, "\n".join(lines)

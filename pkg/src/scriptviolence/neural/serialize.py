"""Versioned plain-text tensor files.

Layout::

    format=1
    D=<input dim>
    H=<hidden units>
    A=<attention width>
    G=<genre bits>
    seed=<init seed>
    W_z 4 6
    <row 1 values>
    ...

Values use ``repr(float)`` (shortest round-trip), so load-then-save is
byte-identical.
"""
from __future__ import annotations

from typing import TextIO

import numpy as np

from ..errors import ModelFormatError, TruncatedModelError
from .lstm import BiLstmParams
from .model import ModelParams, zero_model

FORMAT_VERSION = 1


def _write_tensor(out: list[str], name: str, arr: np.ndarray) -> None:
    mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
    rows, cols = mat.shape
    out.append(f"{name} {rows} {cols}")
    for row in mat:
        out.append(" ".join(repr(float(v)) for v in row))


def _header(stream) -> tuple[dict[str, str], list[str]]:
    text = stream if isinstance(stream, str) else stream.read()
    lines = text.splitlines()
    header: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and "=" in lines[pos]:
        key, _, value = lines[pos].partition("=")
        header[key.strip()] = value.strip()
        pos += 1
    if header.get("format") != str(FORMAT_VERSION):
        raise ModelFormatError(f"model format version mismatch: got {header.get('format')!r}, expected {FORMAT_VERSION}")
    return header, lines[pos:]


def _int(header, key):
    try:
        return int(header[key])
    except (KeyError, ValueError):
        raise ModelFormatError(f"missing or invalid header field {key!r}") from None


def _read_tensors(lines: list[str], expected: list[tuple[str, np.ndarray]]) -> None:
    """Fill each expected array in place from the tensor sections."""
    tokens = iter(lines)
    for name, arr in expected:
        try:
            head = next(tokens).split()
        except StopIteration:
            raise TruncatedModelError(f"missing tensor section {name}") from None
        mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
        if len(head) != 3 or head[0] != name:
            raise ModelFormatError(f"expected section header for {name}, got {' '.join(head)!r}")
        try:
            shape = (int(head[1]), int(head[2]))
        except ValueError:
            raise ModelFormatError(f"bad shape in section {name}") from None
        if shape != mat.shape:
            raise ModelFormatError(f"{name}: shape {shape} does not match header dims {mat.shape}")
        for r in range(shape[0]):
            line = next(tokens, None)
            values = [] if line is None else line.split()
            if len(values) != shape[1]:
                raise TruncatedModelError(f"{name}: row {r} has {len(values)} values, expected {shape[1]}")
            try:
                mat[r] = [float(v) for v in values]
            except ValueError:
                raise ModelFormatError(f"{name}: non-numeric value in row {r}") from None
    rest = [ln for ln in tokens if ln.strip()]
    if rest:
        raise ModelFormatError(f"unexpected trailing content: {rest[0]!r}")


def dumps_model(m: ModelParams) -> str:
    out = [f"format={FORMAT_VERSION}", f"D={m.input_dim}", f"H={m.hidden_dim}",
           f"A={m.attention_dim}", f"G={m.genre_dim}", f"seed={m.rng_seed}"]
    for name, arr in m.tensors():
        _write_tensor(out, name, arr)
    return "\n".join(out) + "\n"


def loads_model(text: str | TextIO) -> ModelParams:
    header, lines = _header(text)
    m = zero_model(_int(header, "D"), _int(header, "H"), _int(header, "G"), _int(header, "A"), _int(header, "seed"))
    _read_tensors(lines, list(m.tensors()))
    return m


def save_model(m: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(m))


def load_model(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


def dumps_bilstm(p: BiLstmParams, seed: int = 0) -> str:
    out = [f"format={FORMAT_VERSION}", "kind=bilstm", f"D={p.forward.input_dim}",
           f"H={p.forward.hidden_dim}", f"seed={seed}"]
    for name, arr in p.tensors():
        _write_tensor(out, name, arr)
    return "\n".join(out) + "\n"


def loads_bilstm(text: str | TextIO) -> BiLstmParams:
    header, lines = _header(text)
    if header.get("kind") != "bilstm":
        raise ModelFormatError("not a bilstm tensor file")
    p = BiLstmParams.zeros(_int(header, "D"), _int(header, "H"))
    _read_tensors(lines, list(p.tensors()))
    return p


def load_bilstm(path) -> BiLstmParams:
    with open(path, encoding="utf-8") as fh:
        return loads_bilstm(fh.read())

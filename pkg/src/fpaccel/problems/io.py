"""Plain-text dataset dump/load.

Layout::

    # fpaccel-dataset 1
    # kind: probit
    # seed: 7
    # dims: n=500 p=10
    # param nu: 1.0
    @X 500 10
    <500 rows of 10 numbers>
    @y 500 1
    ...

Every block is a matrix; ``inf`` is written literally. Values use ``repr`` so a round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .interval import IntervalCensorData
from .mvt import MvtData
from .probit import ProbitData

FORMAT_VERSION = 1


def _blocks(data) -> tuple[str, dict, dict]:
    if isinstance(data, ProbitData):
        return "probit", {"n": data.n, "p": data.p}, {"X": data.X, "y": data.y}
    if isinstance(data, MvtData):
        return ("mvt", {"n": data.n, "q": data.q, "nu": data.nu, "packing": data.packing},
                {"Y": data.Y})
    if isinstance(data, IntervalCensorData):
        blocks = {"A": data.A, "support": data.support}
        if data.left is not None:
            blocks.update(left=data.left, right=data.right)
        return "ic", {"n": data.n, "p": data.p}, blocks
    raise TypeError(f"cannot dump {type(data).__name__}")


def dump_dataset(data, path) -> None:
    kind, dims, blocks = _blocks(data)
    lines = [f"# fpaccel-dataset {FORMAT_VERSION}", f"# kind: {kind}", f"# seed: {data.seed}",
             "# dims: " + " ".join(f"{k}={v}" for k, v in dims.items())]
    for name, arr in blocks.items():
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        if name in ("y", "support", "left", "right"):
            arr = arr.reshape(-1, 1)
        lines.append(f"@{name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in arr)
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path):
    header: dict[str, str] = {}
    blocks: dict[str, np.ndarray] = {}
    lines = Path(path).read_text().splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("#"):
            if ":" in line:
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            i += 1
        elif line.startswith("@"):
            name, rows, cols = line[1:].split()
            rows, cols = int(rows), int(cols)
            body = [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
            blocks[name] = np.array(body, dtype=float).reshape(rows, cols)
            i += rows + 1
        else:
            i += 1

    dims = dict(item.split("=") for item in header["dims"].split())
    seed = None if header.get("seed") in (None, "None") else int(header["seed"])
    kind = header["kind"]
    if kind == "probit":
        return ProbitData(X=blocks["X"], y=blocks["y"].ravel(), seed=seed)
    if kind == "mvt":
        return MvtData(Y=blocks["Y"], nu=float(dims["nu"]), packing=dims["packing"], seed=seed)
    if kind == "ic":
        left = blocks.get("left")
        right = blocks.get("right")
        return IntervalCensorData(
            A=blocks["A"], support=blocks["support"].ravel(),
            left=None if left is None else left.ravel(),
            right=None if right is None else right.ravel(), seed=seed)
    raise ValueError(f"unknown dataset kind {kind!r}")

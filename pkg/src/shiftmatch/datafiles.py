"""CSV datasets and the small ``h`` expression language used by the CLI.

Dataset files have a header row with covariate columns ``x1..xd`` and any
of ``y`` (outcome), ``w`` (0/1 treatment) and ``label`` (precomputed
``h(x, y)``). Reals are written in shortest round-trip form.
"""

from __future__ import annotations

import ast
import csv
import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_XCOL = re.compile(r"^x(\d+)$")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class Table:
    x: np.ndarray
    y: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    label: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.x.shape[1]


def _parse_float(text: str, line: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {col!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: column {col!r} is not finite")
    return value


def read_table(path) -> Table:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    xcols = sorted(
        (int(m.group(1)), i) for i, h in enumerate(header) if (m := _XCOL.match(h))
    )
    if not xcols:
        raise DataError(f"{path}: no covariate columns x1..xd in header")
    if [j for j, _ in xcols] != list(range(1, len(xcols) + 1)):
        raise DataError(f"{path}: covariate columns must be x1..x{len(xcols)} without gaps")
    known = {"y", "w", "label"} | {header[i] for _, i in xcols}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise DataError(f"{path}: unexpected columns {unknown}")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")
    cols: dict[str, list] = {h: [] for h in header}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            cols[h].append(_parse_float(cell.strip(), lineno, h))
    x = np.column_stack([cols[header[i]] for _, i in xcols])
    w = None
    if "w" in cols:
        w = np.asarray(cols["w"])
        if not np.all((w == 0) | (w == 1)):
            raise DataError(f"{path}: column 'w' must contain only 0 and 1")
        w = w.astype(np.int64)
    return Table(
        x=x,
        y=np.asarray(cols["y"]) if "y" in cols else None,
        w=w,
        label=np.asarray(cols["label"]) if "label" in cols else None,
    )


def write_table(path, x, y=None, w=None, label=None) -> None:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    header = [f"x{j + 1}" for j in range(x.shape[1])]
    extra = [(name, col) for name, col in (("y", y), ("w", w), ("label", label)) if col is not None]
    header += [name for name, _ in extra]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(x.shape[0]):
            cells = [repr(float(v)) for v in x[i]]
            for name, col in extra:
                v = col[i]
                cells.append(str(int(v)) if name == "w" else repr(float(v)))
            writer.writerow(cells)


# ---------------------------------------------------------------------------
# h expressions
# ---------------------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExprError(ValueError):
    """Expression outside the supported grammar."""


def compile_h(expr: str, d: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile ``expr`` over identifiers ``x1..xd`` and ``y`` into ``h(x, y)``.

    Supported: numeric constants, ``+ - * /``, ``**`` or ``^``, unary
    minus, and ``sin``, ``cos``, ``exp``. ``x`` has shape (..., d) and ``y``
    broadcasts against ``x[..., 0]``.
    """
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse h expression {expr!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            value = float(node.value)
            return lambda x, y: value
        if isinstance(node, ast.Name):
            if node.id == "y":
                return lambda x, y: y
            m = _XCOL.match(node.id)
            if m and 1 <= int(m.group(1)) <= d:
                j = int(m.group(1)) - 1
                return lambda x, y: x[..., j]
            raise ExprError(f"unknown identifier {node.id!r} (have x1..x{d}, y)")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, left, right = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x, y: op(left(x, y), right(x, y))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda x, y: sign * inner(x, y)
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            fn, arg = _FUNCS[node.func.id], build(node.args[0])
            return lambda x, y: fn(arg(x, y))
        raise ExprError(f"unsupported syntax in h expression: {ast.dump(node)[:60]}")

    body = build(tree)

    def h(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape)
        with np.errstate(all="ignore"):
            out = np.asarray(body(x, y), dtype=float)
        return np.broadcast_to(out, shape)

    return h

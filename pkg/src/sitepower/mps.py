"""Fixed-format MPS export for cross-validation against external solvers.

Column names follow the X_t_b / Z_b_l / W_t_b convention, rows are named
by their family.  Integer columns sit inside an INTORG/INTEND marker
pair; binary columns get UP bounds, columns pinned by a reduction get FX
bounds.  Fields are column-aligned; names longer than the classic eight
characters keep the alignment by widening every field consistently.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

from .formulation import MilpModel, RowTag

_ROW_PREFIX = {
    RowTag.SINR: "SINR",
    RowTag.COVERAGE: "COVER",
    RowTag.ONE_SERVER: "SERV",
    RowTag.ONE_LEVEL: "LEVEL",
    RowTag.VUB: "VUB",
    RowTag.W_DEF: "WDEF",
}

_SENSE_LETTER = {"<=": "L", ">=": "G", "==": "E"}


def row_name(model: MilpModel, index: int) -> str:
    row = model.constraints[index]
    prefix = _ROW_PREFIX[row.tag]
    if row.key is None:
        return prefix
    return prefix + "_" + "_".join(str(k) for k in row.key)


def mps_text(model: MilpModel, problem_name: str = "SITEPOWER") -> str:
    names = [row_name(model, i) for i in range(model.n_rows)]
    if len(set(names)) != len(names):
        raise ValueError("duplicate row names; model rows must carry unique keys")
    width = max(
        8,
        max((len(n) for n in names), default=8),
        max((len(v.name) for v in model.variables), default=8),
    ) + 2

    def field(text: str) -> str:
        return text.ljust(width)

    lines = [f"NAME          {problem_name}", "ROWS", " N  COST"]
    lines.extend(f" {_SENSE_LETTER[row.sense]}  {names[i]}"
                 for i, row in enumerate(model.constraints))

    # column-major coefficient lists
    by_col: list[list[tuple[int, float]]] = [[] for _ in range(model.n_cols)]
    for i, row in enumerate(model.constraints):
        for c, v in zip(row.cols, row.vals):
            by_col[int(c)].append((i, float(v)))

    lines.append("COLUMNS")
    in_integer_block = False
    marker_count = 0
    for col, var in enumerate(model.variables):
        if var.is_integer and not in_integer_block:
            lines.append(f"    {field('MARKER')}{field(f'M{marker_count}')}"
                         "'MARKER'                 'INTORG'")
            marker_count += 1
            in_integer_block = True
        elif not var.is_integer and in_integer_block:
            lines.append(f"    {field('MARKER')}{field(f'M{marker_count}')}"
                         "'MARKER'                 'INTEND'")
            marker_count += 1
            in_integer_block = False
        if var.objective != 0.0:
            lines.append(f"    {field(var.name)}{field('COST')}{var.objective:.12g}")
        for i, v in by_col[col]:
            lines.append(f"    {field(var.name)}{field(names[i])}{v:.17g}")
    if in_integer_block:
        lines.append(f"    {field('MARKER')}{field(f'M{marker_count}')}"
                     "'MARKER'                 'INTEND'")

    lines.append("RHS")
    for i, row in enumerate(model.constraints):
        if row.rhs != 0.0:
            lines.append(f"    {field('RHS')}{field(names[i])}{row.rhs:.17g}")

    lines.append("BOUNDS")
    for var in model.variables:
        if var.lb == var.ub:
            lines.append(f" FX {field('BND')}{field(var.name)}{var.lb:.12g}")
        else:
            if var.lb != 0.0:
                lines.append(f" LO {field('BND')}{field(var.name)}{var.lb:.12g}")
            lines.append(f" UP {field('BND')}{field(var.name)}{var.ub:.12g}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def write_mps(model: MilpModel, path: Union[str, Path], problem_name: str = "SITEPOWER") -> None:
    Path(path).write_text(mps_text(model, problem_name))

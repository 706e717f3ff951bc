"""Instance and solution files.

A deliberately simple line-oriented text format: one ``key value`` line
per scalar, the fading matrix as dense rows or sparse triplets.  All
floats are written in scientific notation with 17 significant digits,
so parse -> serialize -> parse is the identity on IEEE doubles and
scaling experiments stay bit-reproducible.  Blank lines and ``#``
comments are ignored on input.

Every structural invariant of the instance is checked during parsing
and reported with the offending line number.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import Instance, InstanceDataError, Solution

INSTANCE_HEADER = "sitepower-instance v1"
SOLUTION_HEADER = "sitepower-solution v1"


class FileFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _fmt(value: float) -> str:
    return f"{value:.16e}"


class _Lines:
    """Line reader that skips blanks/comments and tracks numbers."""

    def __init__(self, text: str):
        self._raw = text.splitlines()
        self._pos = 0
        self.line_no = 0

    def next(self, what: str) -> str:
        while self._pos < len(self._raw):
            self._pos += 1
            line = self._raw[self._pos - 1].strip()
            if line and not line.startswith("#"):
                self.line_no = self._pos
                return line
        raise FileFormatError(f"unexpected end of file, expected {what}", len(self._raw))

    def error(self, message: str) -> FileFormatError:
        return FileFormatError(message, self.line_no)


def _key_value(lines: _Lines, key: str) -> str:
    line = lines.next(f"'{key} ...'")
    parts = line.split(None, 1)
    if parts[0] != key or len(parts) != 2:
        raise lines.error(f"expected '{key} <value>', got {line!r}")
    return parts[1].strip()


def _parse_float(lines: _Lines, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise lines.error(f"{key} must be a number, got {raw!r}") from None


def _parse_int(lines: _Lines, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise lines.error(f"{key} must be an integer, got {raw!r}") from None


def instance_to_text(inst: Instance, name: str = "instance") -> str:
    if any(ch.isspace() for ch in name) or not name:
        raise ValueError("instance name must be a single non-empty token")
    out = [
        INSTANCE_HEADER,
        f"name {name}",
        f"scale_factor {_fmt(inst.scale_factor)}",
        f"transmitters {inst.n_transmitters}",
        f"testpoints {inst.n_testpoints}",
        f"levels {inst.n_levels}",
        f"delta {_fmt(inst.sinr_threshold)}",
        f"mu {_fmt(inst.noise)}",
        f"alpha {inst.coverage_target}",
        "powers " + " ".join(_fmt(p) for p in inst.power_values),
        "costs " + " ".join(_fmt(c) for c in inst.level_costs),
        "fading dense",
    ]
    out.extend(" ".join(_fmt(v) for v in row) for row in inst.fading)
    out.append("end")
    return "\n".join(out) + "\n"


def instance_from_text(text: str) -> tuple[Instance, str]:
    lines = _Lines(text)
    header = lines.next("header")
    if header != INSTANCE_HEADER:
        raise lines.error(f"expected header {INSTANCE_HEADER!r}, got {header!r}")
    name = _key_value(lines, "name")

    scale = _parse_float(lines, "scale_factor", _key_value(lines, "scale_factor"))
    if not scale > 0:
        raise lines.error("scale_factor must be positive")
    n_b = _parse_int(lines, "transmitters", _key_value(lines, "transmitters"))
    if n_b < 1:
        raise lines.error("transmitters must be at least 1")
    n_t = _parse_int(lines, "testpoints", _key_value(lines, "testpoints"))
    if n_t < 1:
        raise lines.error("testpoints must be at least 1")
    n_l = _parse_int(lines, "levels", _key_value(lines, "levels"))
    if n_l < 1:
        raise lines.error("levels must be at least 1")
    delta = _parse_float(lines, "delta", _key_value(lines, "delta"))
    if not delta > 0:
        raise lines.error("delta must be positive")
    mu = _parse_float(lines, "mu", _key_value(lines, "mu"))
    if not mu > 0:
        raise lines.error("mu must be positive")
    alpha = _parse_int(lines, "alpha", _key_value(lines, "alpha"))
    if not 0 <= alpha <= n_t:
        raise lines.error(f"alpha must lie in [0, {n_t}]")

    raw_powers = _key_value(lines, "powers").split()
    if len(raw_powers) != n_l:
        raise lines.error(f"expected {n_l} power values, got {len(raw_powers)}")
    powers = [_parse_float(lines, "powers", p) for p in raw_powers]
    if powers[0] <= 0 or any(b <= a for a, b in zip(powers, powers[1:])):
        raise lines.error("power values must be positive and strictly increasing")

    raw_costs = _key_value(lines, "costs").split()
    if len(raw_costs) != n_l:
        raise lines.error(f"expected {n_l} costs, got {len(raw_costs)}")
    costs = [_parse_float(lines, "costs", c) for c in raw_costs]
    if any(c <= 0 for c in costs) or any(b < a for a, b in zip(costs, costs[1:])):
        raise lines.error("costs must be positive and nondecreasing")

    mode_line = lines.next("'fading dense' or 'fading sparse <count>'")
    mode = mode_line.split()
    if mode[0] != "fading" or len(mode) < 2 or mode[1] not in ("dense", "sparse"):
        raise lines.error(f"expected fading section header, got {mode_line!r}")

    fading = np.zeros((n_t, n_b))
    if mode[1] == "dense":
        for t in range(n_t):
            row = lines.next(f"fading row {t}").split()
            if len(row) != n_b:
                raise lines.error(f"fading row {t} needs {n_b} values, got {len(row)}")
            for b, token in enumerate(row):
                v = _parse_float(lines, "fading", token)
                if not v > 0:
                    raise lines.error(f"fading[{t}][{b}] must be strictly positive")
                fading[t, b] = v
    else:
        if len(mode) != 3:
            raise lines.error("sparse fading needs an entry count: 'fading sparse <count>'")
        count = _parse_int(lines, "fading sparse count", mode[2])
        if count != n_t * n_b:
            raise lines.error(
                f"sparse fading must list every entry exactly once "
                f"({n_t * n_b} expected, header says {count})")
        seen = np.zeros((n_t, n_b), dtype=bool)
        for _ in range(count):
            triplet = lines.next("sparse fading triplet").split()
            if len(triplet) != 3:
                raise lines.error(f"expected 't b value', got {' '.join(triplet)!r}")
            t = _parse_int(lines, "fading t", triplet[0])
            b = _parse_int(lines, "fading b", triplet[1])
            if not (0 <= t < n_t and 0 <= b < n_b):
                raise lines.error(f"fading index ({t}, {b}) out of range")
            if seen[t, b]:
                raise lines.error(f"duplicate fading entry ({t}, {b})")
            v = _parse_float(lines, "fading", triplet[2])
            if not v > 0:
                raise lines.error(f"fading[{t}][{b}] must be strictly positive")
            seen[t, b] = True
            fading[t, b] = v

    tail = lines.next("'end'")
    if tail != "end":
        raise lines.error(f"expected 'end', got {tail!r}")

    try:
        inst = Instance(
            n_transmitters=n_b,
            n_testpoints=n_t,
            power_values=np.array(powers),
            level_costs=np.array(costs),
            fading=fading,
            noise=mu,
            sinr_threshold=delta,
            coverage_target=alpha,
            scale_factor=scale,
        )
    except InstanceDataError as exc:
        raise FileFormatError(str(exc)) from exc
    return inst, name


def write_instance(inst: Instance, path: Union[str, Path], name: str = "instance") -> None:
    Path(path).write_text(instance_to_text(inst, name))


def read_instance(path: Union[str, Path]) -> tuple[Instance, str]:
    return instance_from_text(Path(path).read_text())


def solution_to_text(sol: Solution, objective_value: float, name: str = "solution") -> str:
    if any(ch.isspace() for ch in name) or not name:
        raise ValueError("solution name must be a single non-empty token")
    out = [
        SOLUTION_HEADER,
        f"name {name}",
        f"transmitters {len(sol.level)}",
        f"testpoints {len(sol.server)}",
        f"objective {_fmt(objective_value)}",
        "levels " + " ".join(str(-1 if l is None else l) for l in sol.level),
        "servers " + " ".join(str(-1 if s is None else s) for s in sol.server),
    ]
    if sol.slack is None:
        out.append("slack none")
    else:
        out.append("slack dense")
        out.extend(" ".join(str(int(v)) for v in row) for row in sol.slack)
    out.append("end")
    return "\n".join(out) + "\n"


def solution_from_text(text: str) -> tuple[Solution, str, float]:
    lines = _Lines(text)
    header = lines.next("header")
    if header != SOLUTION_HEADER:
        raise lines.error(f"expected header {SOLUTION_HEADER!r}, got {header!r}")
    name = _key_value(lines, "name")
    n_b = _parse_int(lines, "transmitters", _key_value(lines, "transmitters"))
    n_t = _parse_int(lines, "testpoints", _key_value(lines, "testpoints"))
    obj = _parse_float(lines, "objective", _key_value(lines, "objective"))

    raw_levels = _key_value(lines, "levels").split()
    if len(raw_levels) != n_b:
        raise lines.error(f"expected {n_b} levels, got {len(raw_levels)}")
    levels = tuple(None if (v := _parse_int(lines, "level", tok)) < 0 else v
                   for tok in raw_levels)

    raw_servers = _key_value(lines, "servers").split()
    if len(raw_servers) != n_t:
        raise lines.error(f"expected {n_t} servers, got {len(raw_servers)}")
    servers = tuple(None if (v := _parse_int(lines, "server", tok)) < 0 else v
                    for tok in raw_servers)

    slack_mode = _key_value(lines, "slack")
    slack = None
    if slack_mode == "dense":
        slack = np.zeros((n_t, n_b), dtype=np.int8)
        for t in range(n_t):
            row = lines.next(f"slack row {t}").split()
            if len(row) != n_b:
                raise lines.error(f"slack row {t} needs {n_b} values, got {len(row)}")
            for b, token in enumerate(row):
                v = _parse_int(lines, "slack", token)
                if v not in (0, 1):
                    raise lines.error(f"slack[{t}][{b}] must be 0 or 1")
                slack[t, b] = v
    elif slack_mode != "none":
        raise lines.error(f"slack mode must be 'dense' or 'none', got {slack_mode!r}")

    tail = lines.next("'end'")
    if tail != "end":
        raise lines.error(f"expected 'end', got {tail!r}")
    return Solution(server=servers, level=levels, slack=slack), name, obj


def write_solution(sol: Solution, objective_value: float, path: Union[str, Path],
                   name: str = "solution") -> None:
    Path(path).write_text(solution_to_text(sol, objective_value, name))


def read_solution(path: Union[str, Path]) -> tuple[Solution, str, float]:
    return solution_from_text(Path(path).read_text())

"""Cell library model: truth tables, cell types and the JSON library document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MAX_ARITY = 6
INPUT_CELL = "input"
OUTPUT_CELL = "output"
PSEUDO_CELLS = (INPUT_CELL, OUTPUT_CELL)


class LibraryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TruthTable:
    """Single-output Boolean function over ``arity`` ordered inputs.

    Row ``r`` holds the output for the assignment where input ``k`` equals
    bit ``k`` of ``r``; row ``r`` is stored in bit ``r`` of ``bits``.
    """

    arity: int
    bits: int

    def __post_init__(self):
        if not 0 <= self.arity <= MAX_ARITY:
            raise LibraryError(f"truth table arity {self.arity} outside 0..{MAX_ARITY}")
        if self.bits < 0 or self.bits >> self.rows:
            raise LibraryError(f"truth table bits 0x{self.bits:x} exceed {self.rows} rows")

    @property
    def rows(self) -> int:
        return 1 << self.arity

    @property
    def mask(self) -> int:
        return (1 << self.rows) - 1

    def __call__(self, *values) -> int:
        if len(values) != self.arity:
            raise ValueError(f"expected {self.arity} inputs, got {len(values)}")
        row = 0
        for k, v in enumerate(values):
            if v:
                row |= 1 << k
        return (self.bits >> row) & 1

    def row(self, r: int) -> int:
        return (self.bits >> r) & 1

    def complement(self) -> "TruthTable":
        return TruthTable(self.arity, self.bits ^ self.mask)

    def permute(self, perm: Sequence[int]) -> "TruthTable":
        """Return ``h`` with ``h(y_0..y_{n-1}) = f(y_{perm[0]}, .., y_{perm[n-1]})``."""
        n = self.arity
        if sorted(perm) != list(range(n)):
            raise ValueError(f"{perm!r} is not a permutation of {n} inputs")
        bits = 0
        for r in range(self.rows):
            src = 0
            for k in range(n):
                if (r >> perm[k]) & 1:
                    src |= 1 << k
            if (self.bits >> src) & 1:
                bits |= 1 << r
        return TruthTable(n, bits)

    def to_literal(self) -> str:
        return "0b" + format(self.bits, f"0{self.rows}b")

    @classmethod
    def from_literal(cls, text: str, arity: int) -> "TruthTable":
        if not text.startswith("0b"):
            raise LibraryError(f"truth literal {text!r} must start with 0b")
        digits = text[2:]
        if len(digits) != 1 << arity or set(digits) - {"0", "1"}:
            raise LibraryError(
                f"truth literal {text!r} needs exactly {1 << arity} binary digits for arity {arity}"
            )
        return cls(arity, int(digits, 2))

    @classmethod
    def from_function(cls, arity: int, fn) -> "TruthTable":
        bits = 0
        for r in range(1 << arity):
            if fn(*[(r >> k) & 1 for k in range(arity)]):
                bits |= 1 << r
        return cls(arity, bits)


@dataclass(frozen=True)
class CellType:
    name: str
    inputs: tuple[str, ...]
    output: str
    area: float
    function: TruthTable

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(set(self.inputs)) != len(self.inputs):
            raise LibraryError(f"cell {self.name}: duplicate input pins {self.inputs}")
        if self.output in self.inputs:
            raise LibraryError(f"cell {self.name}: output pin {self.output!r} is also an input")
        if len(self.inputs) > MAX_ARITY:
            raise LibraryError(f"cell {self.name}: {len(self.inputs)} inputs exceeds {MAX_ARITY}")
        if self.function.arity != len(self.inputs):
            raise LibraryError(
                f"cell {self.name}: function arity {self.function.arity} != {len(self.inputs)} pins"
            )
        if not self.area >= 0:
            raise LibraryError(f"cell {self.name}: negative area {self.area}")

    @property
    def arity(self) -> int:
        return len(self.inputs)

    def pin_index(self, pin: str) -> int:
        return self.inputs.index(pin)


def _pseudo_cells() -> dict[str, CellType]:
    return {
        INPUT_CELL: CellType(INPUT_CELL, (), "O", 0.0, TruthTable(0, 0)),
        OUTPUT_CELL: CellType(OUTPUT_CELL, ("I",), "", 0.0, TruthTable(1, 0b10)),
    }


@dataclass
class CellLibrary:
    """Named cell types plus the reserved ``input``/``output`` pseudo-cells."""

    cells: dict[str, CellType] = field(default_factory=dict)

    def __post_init__(self):
        for name in PSEUDO_CELLS:
            if name in self.cells and self.cells[name] != _pseudo_cells()[name]:
                raise LibraryError(f"cell name {name!r} is reserved")
        merged = _pseudo_cells()
        merged.update({k: v for k, v in self.cells.items() if k not in PSEUDO_CELLS})
        self.cells = merged

    @classmethod
    def from_cells(cls, cells: Iterable[CellType]) -> "CellLibrary":
        table: dict[str, CellType] = {}
        for c in cells:
            if c.name in table or c.name in PSEUDO_CELLS:
                raise LibraryError(f"duplicate cell name {c.name!r}")
            table[c.name] = c
        return cls(table)

    def __getitem__(self, name: str) -> CellType:
        try:
            return self.cells[name]
        except KeyError:
            raise LibraryError(f"unknown cell type {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.cells

    def real_cells(self) -> list[CellType]:
        return [c for n, c in self.cells.items() if n not in PSEUDO_CELLS]

    def find_function(self, table: TruthTable) -> CellType | None:
        """Smallest-area real cell whose function is exactly ``table``."""
        hits = [c for c in self.real_cells() if c.function == table]
        return min(hits, key=lambda c: (c.area, c.name)) if hits else None

    def extended(self, extra: Iterable[CellType]) -> "CellLibrary":
        cells = self.real_cells()
        return CellLibrary.from_cells([*cells, *extra])


def parse_library(text: str) -> CellLibrary:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError(f"library is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cells"), list):
        raise LibraryError('library document needs a "cells" list')
    cells = []
    for entry in doc["cells"]:
        try:
            name = entry["name"]
            inputs = tuple(entry["inputs"])
            output = entry["output"]
            area = float(entry["area"])
            truth = entry["truth"]
        except (KeyError, TypeError) as exc:
            raise LibraryError(f"malformed cell entry {entry!r}") from exc
        if len(inputs) > MAX_ARITY:
            raise LibraryError(f"cell {name}: {len(inputs)} inputs exceeds {MAX_ARITY}")
        cells.append(CellType(name, inputs, output, area, TruthTable.from_literal(truth, len(inputs))))
    return CellLibrary.from_cells(cells)


def library_to_doc(lib: CellLibrary) -> dict:
    return {
        "cells": [
            {
                "name": c.name,
                "inputs": list(c.inputs),
                "output": c.output,
                "area": c.area,
                "truth": c.function.to_literal(),
            }
            for c in lib.real_cells()
        ]
    }


def serialize_library(lib: CellLibrary) -> str:
    return json.dumps(library_to_doc(lib), indent=2) + "\n"


def load_library(path) -> CellLibrary:
    with open(path, encoding="utf-8") as fh:
        return parse_library(fh.read())


def default_library() -> CellLibrary:
    """The bundled 12-cell FreePDK45-style library."""
    from importlib.resources import files

    return parse_library(files("cellex.data").joinpath("freepdk45ish.json").read_text())

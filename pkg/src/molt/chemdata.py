"""Molecular structures, labeled data sets, splits and element filters."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ELEMENTS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn",
)
SYMBOL_TO_Z = {sym.lower(): z for z, sym in enumerate(ELEMENTS, start=1)}
UNITS = ("eV", "kcal/mol", "dimensionless")


class ParseError(ValueError):
    """Malformed structure or label input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AtomCountError(ParseError):
    pass


class UnknownElementError(ParseError):
    pass


class CoordinateError(ParseError):
    pass


class DatasetError(ValueError):
    """Inconsistent data set construction (missing files, duplicates)."""


def atomic_number(symbol: str) -> int:
    try:
        return SYMBOL_TO_Z[symbol.strip().lower()]
    except KeyError:
        raise UnknownElementError(f"unknown element symbol {symbol!r}") from None


def element_symbol(z: int) -> str:
    if not 1 <= z <= len(ELEMENTS):
        raise ValueError(f"atomic number {z} outside 1..{len(ELEMENTS)}")
    return ELEMENTS[z - 1]


@dataclass(frozen=True, eq=False)
class Molecule:
    """Atomic numbers plus Cartesian positions in Angstrom."""

    id: str
    atomic_numbers: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.atomic_numbers, dtype=np.int64).reshape(-1)
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if len(z) != len(pos):
            raise ValueError(f"{len(z)} atomic numbers but {len(pos)} positions")
        if np.any(z < 1):
            raise ValueError("atomic numbers must be >= 1")
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite coordinate")
        z.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "atomic_numbers", z)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.atomic_numbers)

    def __eq__(self, other):
        if not isinstance(other, Molecule):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.atomic_numbers, other.atomic_numbers)
            and np.array_equal(self.positions, other.positions)
        )

    __hash__ = None

    @property
    def symbols(self):
        return [element_symbol(int(z)) for z in self.atomic_numbers]

    def with_positions(self, positions):
        return Molecule(self.id, self.atomic_numbers, positions)


def parse_xyz(text: str, id: str = "") -> Molecule:
    """Parse a single-frame XYZ block.

    Layout: atom count, a free comment line, then ``Symbol x y z`` per atom.
    Errors carry the 1-based line number they were detected on.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise AtomCountError("empty input", line=1)
    try:
        n_atoms = int(lines[0].strip())
    except ValueError:
        raise AtomCountError(f"atom count expected, got {lines[0]!r}", line=1) from None
    if n_atoms < 0:
        raise AtomCountError("negative atom count", line=1)
    atom_lines = lines[2:]
    if len(atom_lines) != n_atoms:
        raise AtomCountError(
            f"declared {n_atoms} atoms, found {len(atom_lines)}",
            line=min(len(lines), 2 + n_atoms) if len(atom_lines) > n_atoms else len(lines),
        )
    z = np.empty(n_atoms, dtype=np.int64)
    pos = np.empty((n_atoms, 3), dtype=np.float64)
    for i, raw in enumerate(atom_lines):
        lineno = i + 3
        parts = raw.split()
        if len(parts) < 4:
            raise CoordinateError(f"expected 'Symbol x y z', got {raw!r}", line=lineno)
        try:
            z[i] = atomic_number(parts[0])
        except UnknownElementError as err:
            raise UnknownElementError(str(err), line=lineno) from None
        try:
            xyz = [float(v) for v in parts[1:4]]
        except ValueError:
            raise CoordinateError(f"non-numeric coordinate in {raw!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in xyz):
            raise CoordinateError(f"non-finite coordinate in {raw!r}", line=lineno)
        pos[i] = xyz
    return Molecule(id, z, pos)


def write_xyz(mol: Molecule, comment: str = "") -> str:
    out = [str(len(mol)), comment.replace("\n", " ")]
    for z, (x, y, w) in zip(mol.atomic_numbers, mol.positions):
        out.append(f"{element_symbol(int(z))} {x:.17g} {y:.17g} {w:.17g}")
    return "\n".join(out) + "\n"


def read_xyz(path) -> Molecule:
    path = Path(path)
    return parse_xyz(path.read_text(encoding="utf-8"), id=path.stem)


@dataclass(frozen=True)
class LabeledDataset:
    molecules: tuple
    labels: np.ndarray
    unit: str = "dimensionless"

    def __post_init__(self):
        mols = tuple(self.molecules)
        y = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if len(mols) != len(y):
            raise DatasetError(f"{len(mols)} molecules but {len(y)} labels")
        if self.unit not in UNITS:
            raise DatasetError(f"unit must be one of {UNITS}, got {self.unit!r}")
        if not np.all(np.isfinite(y)):
            raise DatasetError("non-finite label")
        seen = set()
        for m in mols:
            if m.id in seen:
                raise DatasetError(f"duplicate id {m.id!r}")
            seen.add(m.id)
        y.setflags(write=False)
        object.__setattr__(self, "molecules", mols)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.molecules)

    @property
    def ids(self):
        return [m.id for m in self.molecules]

    def subset(self, indices) -> "LabeledDataset":
        indices = [int(i) for i in indices]
        return LabeledDataset(
            tuple(self.molecules[i] for i in indices), self.labels[indices], self.unit
        )

    def with_labels(self, labels, unit=None) -> "LabeledDataset":
        return LabeledDataset(self.molecules, labels, unit or self.unit)

    def fingerprint(self) -> str:
        """Content hash over ids, structures and labels."""
        h = hashlib.sha256()
        for m, y in zip(self.molecules, self.labels):
            h.update(m.id.encode())
            h.update(m.atomic_numbers.astype("<i8").tobytes())
            h.update(m.positions.astype("<f8").tobytes())
            h.update(np.float64(y).astype("<f8").tobytes())
        return h.hexdigest()[:16]


def read_labels_csv(path) -> list:
    """Rows of ``(id, label)`` from an ``id,label`` CSV, in file order."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise DatasetError(f"cannot read labels file {path}: {err}") from None
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = list(reader)
    if not rows or [c.strip() for c in rows[0]] != ["id", "label"]:
        raise ParseError(f"{path}: header must be 'id,label'", line=1)
    out = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 columns, got {len(row)}", line=lineno)
        mol_id, raw = row[0].strip(), row[1].strip()
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"{path}: unparseable label {raw!r} for id {mol_id!r}", line=lineno) from None
        if not math.isfinite(value):
            raise ParseError(f"{path}: non-finite label for id {mol_id!r}", line=lineno)
        if mol_id in seen:
            raise DatasetError(f"duplicate id {mol_id!r} in {path} (line {lineno})")
        seen.add(mol_id)
        out.append((mol_id, value))
    return out


def write_labels_csv(path, ids, labels):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("id,label\n")
        for i, y in zip(ids, labels):
            fh.write(f"{i},{float(y):.17g}\n")


def load_dataset(structure_dir, labels_file, unit: str = "dimensionless") -> LabeledDataset:
    structure_dir = Path(structure_dir)
    if not structure_dir.is_dir():
        raise DatasetError(f"structure directory not found: {structure_dir}")
    rows = read_labels_csv(labels_file)
    mols = []
    for mol_id, _ in rows:
        path = structure_dir / f"{mol_id}.xyz"
        if not path.is_file():
            raise DatasetError(f"missing structure for id {mol_id!r}: {path}")
        mols.append(read_xyz(path))
    return LabeledDataset(tuple(mols), [y for _, y in rows], unit)


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if len(fr) != 3:
            raise ValueError("fractions must be (train, val, test)")
        if any(not 0.0 <= f <= 1.0 for f in fr):
            raise ValueError(f"each fraction must lie in [0, 1], got {fr}")
        if sum(fr) > 1.0 + 1e-12:
            raise ValueError(f"fractions sum to {sum(fr)} > 1")
        object.__setattr__(self, "fractions", fr)


def split_sizes(n: int, fractions) -> tuple:
    _, f_val, f_test = fractions
    n_val = int(math.floor(f_val * n + 1e-9))
    n_test = int(math.floor(f_test * n + 1e-9))
    if sum(fractions) >= 1.0 - 1e-12:
        n_train = n - n_val - n_test
    else:
        n_train = int(math.floor(fractions[0] * n + 1e-9))
    return n_train, n_val, n_test


def _split_order(ids: Sequence[str], seed: int) -> np.ndarray:
    # sort by id first so the permutation ignores input enumeration order
    canonical = np.array(sorted(range(len(ids)), key=lambda i: ids[i]), dtype=np.int64)
    rng = np.random.default_rng([int(seed), 0x5917])
    return canonical[rng.permutation(len(ids))]


def split_dataset(ds: LabeledDataset, spec: SplitSpec):
    """Seeded ``(train, val, test)`` split; floor() remainders go to train."""
    if len(ds) == 0:
        raise DatasetError("cannot split an empty data set")
    n_train, n_val, n_test = split_sizes(len(ds), spec.fractions)
    order = _split_order(ds.ids, spec.seed)
    test = order[:n_test]
    val = order[n_test:n_test + n_val]
    train = order[n_test + n_val:n_test + n_val + n_train]
    return ds.subset(sorted(train)), ds.subset(sorted(val)), ds.subset(sorted(test))


def split_by_counts(ds: LabeledDataset, counts, seed: int):
    """Split into absolute ``(train, val, test)`` sizes."""
    n_train, n_val, n_test = (int(c) for c in counts)
    if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test > len(ds):
        raise DatasetError(f"split counts {tuple(counts)} infeasible for {len(ds)} molecules")
    order = _split_order(ds.ids, seed)
    test = order[:n_test]
    val = order[n_test:n_test + n_val]
    train = order[n_test + n_val:n_test + n_val + n_train]
    return ds.subset(sorted(train)), ds.subset(sorted(val)), ds.subset(sorted(test))


def _as_z_set(items: Iterable) -> set:
    out = set()
    for item in items:
        out.add(atomic_number(item) if isinstance(item, str) else int(item))
    return out


def filter_by_elements(ds: LabeledDataset, forbidden=(), required=()) -> LabeledDataset:
    forbidden, required = _as_z_set(forbidden), _as_z_set(required)
    keep = []
    for i, mol in enumerate(ds.molecules):
        present = set(int(z) for z in mol.atomic_numbers)
        if present & forbidden:
            continue
        if not required <= present:
            continue
        keep.append(i)
    return ds.subset(keep)


def species_of(molecules) -> list:
    return sorted({int(z) for m in molecules for z in m.atomic_numbers})

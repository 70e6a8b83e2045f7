"""The 51-system control catalog: single-, two- and three-qubit Hamiltonians
with fixed initial/target states, six-entry task descriptors and per-system
amplitude scales.

Systems are defined as Pauli-term lists ("ZXI" acts with Z on qubit 1, X on
qubit 2) and compiled to dense matrices once. ``export_json`` emits the whole
catalog in a machine-readable form used for golden-file tests and hashing.
"""

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .dynamics import ControlledHamiltonian

_PAULI = {
    "I": linalg.identity(2),
    "X": linalg.SIGMA_X,
    "Y": linalg.SIGMA_Y,
    "Z": linalg.SIGMA_Z,
}

TABLE1_IDS = ("SQ3", "SQ4", "TQ25", "TQ26", "ThQ1")


@dataclass(frozen=True)
class SystemDescriptor:
    """Six-entry task condition vector.

    system_size (qubits), n_controls, static_strength (dominant drift
    coefficient, 0 when driftless), and x/y/z presence flags over the full
    Hamiltonian (drift and controls).
    """

    system_size: int
    n_controls: int
    static_strength: float
    has_x: int
    has_y: int
    has_z: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.system_size,
                self.n_controls,
                self.static_strength,
                self.has_x,
                self.has_y,
                self.has_z,
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    n_qubits: int
    ham: ControlledHamiltonian
    initial: np.ndarray
    target: np.ndarray
    descriptor: SystemDescriptor
    amplitude_scale: float
    drift_terms: tuple
    control_terms: tuple

    @property
    def dim(self) -> int:
        return self.ham.dim


def pauli_operator(label: str) -> np.ndarray:
    """Dense operator for a Pauli string like "ZXI"."""
    try:
        return linalg.kron_all(_PAULI[c] for c in label)
    except KeyError as exc:
        raise ValueError(f"unknown Pauli letter in {label!r}") from exc


def _term_sum(terms, n_qubits: int) -> np.ndarray:
    out = np.zeros((2**n_qubits, 2**n_qubits), dtype=np.complex128)
    for coef, label in terms:
        if len(label) != n_qubits:
            raise ValueError(f"label {label!r} does not match {n_qubits} qubits")
        out += coef * pauli_operator(label)
    return out


def named_state(name: str, dim: int) -> np.ndarray:
    """Normalized state vector for one of the catalog's named states.

    Accepts computational-basis bitstrings ("0", "01", "110", ...) and the
    named superpositions "+", "-", "Phi+", "Phi-", "Psi+", "Psi-", "++",
    "D31", "GHZ", "+++".
    """
    n = int(math.log2(dim))
    if 2**n != dim:
        raise ValueError(f"dim must be a power of two, got {dim}")

    def basis(bits: str) -> np.ndarray:
        v = np.zeros(dim, dtype=np.complex128)
        v[int(bits, 2)] = 1.0
        return v

    named = {
        "+": ([("0", 1.0), ("1", 1.0)], 2),
        "-": ([("0", 1.0), ("1", -1.0)], 2),
        "Phi+": ([("00", 1.0), ("11", 1.0)], 4),
        "Phi-": ([("00", 1.0), ("11", -1.0)], 4),
        "Psi+": ([("01", 1.0), ("10", 1.0)], 4),
        "Psi-": ([("01", 1.0), ("10", -1.0)], 4),
        "++": ([(b, 1.0) for b in ("00", "01", "10", "11")], 4),
        "D31": ([("100", 1.0), ("010", 1.0), ("001", 1.0)], 8),
        "GHZ": ([("000", 1.0), ("111", 1.0)], 8),
        "+++": ([(format(i, "03b"), 1.0) for i in range(8)], 8),
    }
    if name in named:
        combo, want_dim = named[name]
        if want_dim != dim:
            raise ValueError(f"state {name!r} lives in dim {want_dim}, not {dim}")
        v = sum(c * basis(b) for b, c in combo)
    elif set(name) <= {"0", "1"} and len(name) == n:
        v = basis(name)
    else:
        raise ValueError(f"unknown state name {name!r} for dim {dim}")
    return v / np.linalg.norm(v)


def _state(spec, dim: int) -> np.ndarray:
    """Resolve a state spec: a name, or ((coef, bits), ...) superposition."""
    if isinstance(spec, str):
        return named_state(spec, dim)
    v = np.zeros(dim, dtype=np.complex128)
    for coef, bits in spec:
        v[int(bits, 2)] += coef
    return v / np.linalg.norm(v)


def _sq(op):
    return [(1.0, c) for c in op.split("+")]


# Row format: (id, n_qubits, drift terms, control-channel term lists,
#              initial, target, amplitude_scale).
# fmt: off
_ROWS = [
    # Single-qubit systems.
    ("SQ1", 1, [], [[(1, "X"), (1, "Z")]], "+", "0", 1.0),
    ("SQ2", 1, [(1, "X")], [[(1, "Z")]], "0", "1", 1.0),
    ("SQ3", 1, [(1, "Z")], [[(1, "X")]], "0", "1", 1.0),
    ("SQ4", 1, [(1, "X")], [[(1, "X"), (1, "Z")]], "+", "1", 1.0),
    ("SQ5", 1, [], [[(1, "Y")], [(1, "Z")]], "0", "1", 1.0),
    ("SQ6", 1, [], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "0", "+", 1.0),
    ("SQ7", 1, [(0.5, "X")], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "0", "1", 1.0),
    ("SQ8", 1, [(0.5, "Y")], [[(1, "Z")]], "1", "0", 1.0),
    ("SQ9", 1, [(0.5, "Y")], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "1", "+", 1.0),
    ("SQ10", 1, [(0.5, "Z")], [[(1, "X")]], "0", "1", 1.0),
    ("SQ11", 1, [(0.5, "Z")], [[(1, "X")], [(1, "Z")]], "0", "1", 1.0),
    ("SQ12", 1, [(0.5, "Z")], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "0", "+", 1.0),
    ("SQ13", 1, [(0.5, "X"), (0.5, "Y")], [[(1, "X")], [(1, "Y")]], "1", "-", 1.0),
    ("SQ14", 1, [(0.5, "X"), (0.5, "Y")], [[(1, "X")], [(1, "Y")], [(1, "Z")]],
     "0", ((-1.0, "0"), (1.0, "1")), 1.0),
    ("SQ15", 1, [(0.5, "X"), (0.5, "Z")], [[(1, "Z")]], "0", "1", 1.0),
    ("SQ16", 1, [(0.5, "X"), (0.5, "Z")], [[(1, "X")], [(1, "Z")]], "0", "+", 1.0),
    ("SQ17", 1, [(0.5, "X"), (0.5, "Z")], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "1", "0", 1.0),
    ("SQ18", 1, [(0.5, "Y"), (0.5, "Z")], [[(1, "X")]], "0", "+", 1.0),
    ("SQ19", 1, [(0.5, "Y"), (0.5, "Z")], [[(1, "X")], [(1, "Y")], [(1, "Z")]], "1", "0", 1.0),
    ("SQ20", 1, [(0.5, "X"), (0.5, "Y"), (0.5, "Z")],
     [[(1, "X")], [(1, "Y")], [(1, "Z")]], "1", "+", 1.0),
    ("SQ21", 1, [(1, "X"), (1, "Y"), (1, "Z")],
     [[(1, "X")], [(1, "Y")], [(1, "Z")]], "0", "1", 1.0),
    # Two-qubit systems.
    ("TQ1", 2, [(1, "XX")], [[(1, "XI")], [(1, "IZ")]], "00", "Phi+", 1.0),
    ("TQ2", 2, [(1, "XX")], [[(1, "XI")], [(1, "IX")], [(1, "IY")]], "00", "Phi+", 1.0),
    ("TQ3", 2, [(1, "XX")], [[(1, "YI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "00", "Psi+", 1.0),
    ("TQ4", 2, [(1, "XX")],
     [[(1, "XI")], [(1, "YI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Psi+", 1.0),
    ("TQ5", 2, [(1, "XX")],
     [[(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "01", "11", 1.0),
    ("TQ6", 2, [(1, "XX")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "00", "Phi+", 1.0),
    ("TQ7", 2, [(1, "YY")],
     [[(1, "XI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Phi+", 1.0),
    ("TQ8", 2, [(1, "YY")],
     [[(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "01", ((1.0, "10"), (1.0, "11")), 1.0),
    ("TQ9", 2, [(1, "YY")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "Psi+", "00", 1.0),
    ("TQ10", 2, [(1, "ZZ")], [[(1, "YI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "Psi+", "Phi+", 1.0),
    ("TQ11", 2, [(1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Phi+", 1.0),
    ("TQ12", 2, [(1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "00", "Phi-", 1.0),
    ("TQ13", 2, [(1, "XX"), (1, "YY")], [[(1, "XI")], [(1, "IY")]], "Phi+", "Psi-", 1.0),
    ("TQ14", 2, [(1, "XX"), (1, "YY")],
     [[(1, "XI")], [(1, "YI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Psi+", 1.0),
    ("TQ15", 2, [(1, "XX"), (1, "YY")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "11", "Phi-", 1.0),
    ("TQ16", 2, [(1, "XX"), (1, "ZZ")],
     [[(1, "XI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Psi+", 1.0),
    ("TQ17", 2, [(1, "XX"), (1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "Phi-", "Psi+", 1.0),
    ("TQ18", 2, [(1, "YY"), (1, "ZZ")],
     [[(1, "XI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "00", "Psi+", 1.0),
    ("TQ19", 2, [(1, "YY"), (1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "00", "Phi+", 1.0),
    ("TQ20", 2, [(1, "XX"), (1, "YY"), (1, "ZZ")],
     [[(1, "IX")], [(1, "IY")], [(1, "IZ")]], "Phi+", "Psi-", 1.0),
    ("TQ21", 2, [(1, "XX"), (1, "YY"), (1, "ZZ")],
     [[(1, "XI")], [(1, "IY")], [(1, "IZ")]], "00", "Psi-", 1.0),
    ("TQ22", 2, [(1, "XX"), (1, "YY"), (1, "ZZ")],
     [[(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]], "Psi-", "Phi+", 1.0),
    ("TQ23", 2, [(1, "XX"), (1, "YY"), (1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IZ")]], "00", "Phi+", 1.0),
    ("TQ24", 2, [(1, "XX"), (1, "YY"), (1, "ZZ")],
     [[(1, "XI")], [(1, "YI")], [(1, "ZI")], [(1, "IX")], [(1, "IY")], [(1, "IZ")]],
     "11", "Phi+", 1.0),
    ("TQ25", 2, [(-1, "ZZ"), (-0.5, "ZI"), (-0.5, "IZ")],
     [[(-0.5, "XI"), (-0.5, "IX")]], "++", "00", 1.0),
    ("TQ26", 2, [(0.5, "XX"), (0.5, "YY"), (0.5, "ZI"), (0.5, "IZ")],
     [[(0.5, "XI")], [(0.5, "IX")]], "00", "Phi+", 1.0),
    # Three-qubit systems.
    ("ThQ1", 3, [], [[(1, "ZXI")], [(1, "IXZ")], [(1, "IXI")], [(1, "IYI")]],
     "000", ((-1j, "010"),), 2.0),
    ("ThQ2", 3, [(1, "ZZI"), (1, "ZIZ"), (1, "IZZ")],
     [[(1, "XII"), (1, "IXI"), (1, "IIX")],
      [(1, "YII"), (1, "IYI"), (1, "IIY")],
      [(1, "ZII"), (1, "IZI"), (1, "IIZ")]], "000", "D31", 1.0),
    ("ThQ3", 3, [], [[(1, "XXI"), (1, "YYI")], [(1, "IXX"), (1, "IYY")]],
     "100", "001", 2.0),
    ("ThQ4", 3, [], [[(1, "ZZI"), (1, "IZZ"), (1, "ZIZ")],
                     [(1, "XII"), (1, "IXI"), (1, "IIX")],
                     [(1, "ZII"), (1, "IZI"), (1, "IIZ")]], "+++", "GHZ", 2.0),
]
# fmt: on


def _descriptor_from_terms(n_qubits, drift_terms, control_terms, n_controls):
    static = max((abs(c) for c, _ in drift_terms), default=0.0)
    letters = {ch for _, label in drift_terms for ch in label}
    for channel in control_terms:
        for _, label in channel:
            letters |= set(label)
    return SystemDescriptor(
        system_size=n_qubits,
        n_controls=n_controls,
        static_strength=float(static),
        has_x=int("X" in letters),
        has_y=int("Y" in letters),
        has_z=int("Z" in letters),
    )


def descriptor_of(entry: CatalogEntry) -> SystemDescriptor:
    """Recompute the descriptor from the entry's term structure."""
    return _descriptor_from_terms(
        entry.n_qubits, entry.drift_terms, entry.control_terms, entry.ham.n_controls
    )


def _build_entry(row) -> CatalogEntry:
    entry_id, n_qubits, drift_terms, control_terms, initial, target, scale = row
    dim = 2**n_qubits
    ham = ControlledHamiltonian(
        drift=_term_sum(drift_terms, n_qubits),
        controls=tuple(_term_sum(ch, n_qubits) for ch in control_terms),
    )
    descriptor = _descriptor_from_terms(
        n_qubits, drift_terms, control_terms, ham.n_controls
    )
    return CatalogEntry(
        id=entry_id,
        n_qubits=n_qubits,
        ham=ham,
        initial=_state(initial, dim),
        target=_state(target, dim),
        descriptor=descriptor,
        amplitude_scale=float(scale),
        drift_terms=tuple((float(c) if not isinstance(c, complex) else c, s) for c, s in drift_terms),
        control_terms=tuple(tuple((float(c), s) for c, s in ch) for ch in control_terms),
    )


@lru_cache(maxsize=1)
def build_catalog() -> tuple:
    """The full 51-entry catalog, built once and cached."""
    entries = tuple(_build_entry(row) for row in _ROWS)
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise RuntimeError("duplicate catalog ids")
    return entries


@lru_cache(maxsize=1)
def catalog_by_id() -> dict:
    return {e.id: e for e in build_catalog()}


def get_entry(entry_id: str) -> CatalogEntry:
    try:
        return catalog_by_id()[entry_id]
    except KeyError as exc:
        raise KeyError(f"unknown system id {entry_id!r}") from exc


def resolve_ids(spec) -> list:
    """Expand a systems spec: ids plus the group tokens "all" and "table1".

    Accepts a comma-separated string or a list; order is preserved and
    duplicates dropped."""
    if spec is None:
        spec = ["all"]
    if isinstance(spec, str):
        spec = [s for s in spec.split(",") if s]
    by_id = catalog_by_id()
    out = []
    for token in spec:
        if token == "all":
            out.extend(by_id)
        elif token == "table1":
            out.extend(TABLE1_IDS)
        elif token in by_id:
            out.append(token)
        else:
            raise KeyError(f"unknown system id {token!r}")
    return list(dict.fromkeys(out))


def _complex_pairs(a: np.ndarray):
    if a.ndim == 1:
        return [[float(x.real), float(x.imag)] for x in a]
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def export_json() -> dict:
    """Machine-readable catalog dump (matrices as nested [re, im] arrays)."""
    systems = []
    for e in build_catalog():
        systems.append(
            {
                "id": e.id,
                "n_qubits": e.n_qubits,
                "dim": e.dim,
                "drift": _complex_pairs(e.ham.drift),
                "controls": [_complex_pairs(c) for c in e.ham.controls],
                "initial": _complex_pairs(e.initial),
                "target": _complex_pairs(e.target),
                "descriptor": [float(x) for x in e.descriptor.as_array()],
                "amplitude_scale": e.amplitude_scale,
            }
        )
    return {"version": 1, "n_systems": len(systems), "systems": systems}


def catalog_hash() -> str:
    payload = json.dumps(export_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()

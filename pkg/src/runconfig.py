# runconfig.py
"""
Run configuration documents (JSON) and CSV artifacts.

A config is validated field by field; the first offending field is reported
through ConfigError.path, e.g. ``hamiltonian.matrix.re[1][0]``. The validated
document is kept in canonical form, so serialize_config/parse_config round-trip
losslessly and config_fingerprint is stable.
"""
import csv
import hashlib
import io
import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core import (
    INPUT_HERMITIAN_TOL,
    LIBRARY_VERSION,
    ConfigError,
    DecoherenceError,
    DecoherenceParams,
    DensityMatrix,
    SpectralHamiltonian,
    ValidationError,
    diagonalize_hamiltonian,
    pure_state,
    validate_density_matrix,
)
from models import OscillatorScenario, coherent_state

logger = logging.getLogger(__name__)

NUMBER_FORMAT = ".17g"


# ─── Field Readers ─────────────────────────────────────────────────────────────
def _number(value, path, positive=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", path)
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum!r}, got {value!r}", path)
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value!r}", path)
    return value


def _mapping(doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"expected an object, got {type(doc).__name__}", path)
    return doc


def _required(doc, key, path):
    if key not in doc:
        raise ConfigError("required field is missing", f"{path}.{key}" if path else key)
    return doc[key]


def _one_of(doc, keys, path):
    present = [k for k in keys if k in doc]
    if len(present) != 1:
        raise ConfigError(f"expected exactly one of {', '.join(keys)}, got {sorted(doc)}", path)
    return present[0]


def _real_vector(values, path):
    if not isinstance(values, list) or not values:
        raise ConfigError("expected a non-empty list of numbers", path)
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(values)]


def _real_matrix(rows, path, n=None):
    if not isinstance(rows, list) or not rows:
        raise ConfigError("expected a non-empty list of rows", path)
    n = len(rows) if n is None else n
    if len(rows) != n:
        raise ConfigError(f"expected {n} rows, got {len(rows)}", path)
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"expected a row of {n} numbers", f"{path}[{i}]")
        out.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    return out


def _complex_matrix(doc, path, n=None):
    """{"re": N×N, "im": N×N (optional)} → (canonical dict, complex array)."""
    doc = _mapping(doc, path)
    re = _real_matrix(_required(doc, "re", path), f"{path}.re", n)
    im = _real_matrix(doc["im"], f"{path}.im", len(re)) if "im" in doc else [[0.0] * len(re) for _ in re]
    return {"re": re, "im": im}, np.array(re) + 1j * np.array(im)


def _complex_vector(value, path):
    if isinstance(value, list):
        re, im = _real_vector(value, path), None
    else:
        value = _mapping(value, path)
        re = _real_vector(_required(value, "re", path), f"{path}.re")
        im = _real_vector(value["im"], f"{path}.im") if "im" in value else None
        if im is not None and len(im) != len(re):
            raise ConfigError(f"expected {len(re)} entries", f"{path}.im")
    im = [0.0] * len(re) if im is None else im
    return {"re": re, "im": im}, np.array(re) + 1j * np.array(im)


@contextmanager
def _guard(path):
    """Re-raise library validation failures as ConfigError at ``path``."""
    try:
        yield
    except ConfigError:
        raise
    except DecoherenceError as e:
        raise ConfigError(str(e), path, residual=e.residual) from e


# ─── Run Configuration ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    count: int

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.count - 1)


@dataclass(frozen=True, eq=False)
class NamedObservable:
    name: str
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class RunConfig:
    params: DecoherenceParams
    spectrum: SpectralHamiltonian
    rho0: DensityMatrix
    times: TimeGrid
    observables: Tuple[NamedObservable, ...]
    track_elements: Tuple[Tuple[int, int], ...]
    seed: Optional[int]
    output: Optional[str]
    document: dict = field(repr=False)

    @property
    def dim(self):
        return self.spectrum.dim

    def observable(self, name: str) -> NamedObservable:
        for obs in self.observables:
            if obs.name == name:
                return obs
        known = ", ".join(obs.name for obs in self.observables) or "none"
        raise ConfigError(f"unknown observable {name!r} (known: {known})", "observables")


def _parse_hamiltonian(doc, hbar):
    doc = _mapping(doc, "hamiltonian")
    kind = _one_of(doc, ("eigenvalues", "matrix"), "hamiltonian")
    if kind == "eigenvalues":
        values = _real_vector(doc["eigenvalues"], "hamiltonian.eigenvalues")
        with _guard("hamiltonian.eigenvalues"):
            return {"eigenvalues": values}, SpectralHamiltonian.from_eigenvalues(values, hbar=hbar)
    canon, H = _complex_matrix(doc["matrix"], "hamiltonian.matrix")
    residual = float(np.max(np.abs(H - H.conj().T)))
    if residual > INPUT_HERMITIAN_TOL:
        raise ConfigError(f"Hamiltonian is not Hermitian: max|H - H†| = {residual:.3e}", "hamiltonian.matrix",
                          residual=residual)
    with _guard("hamiltonian.matrix"):
        return {"matrix": canon}, diagonalize_hamiltonian(H, hbar=hbar)


def _parse_initial_state(doc, n):
    doc = _mapping(doc, "initial_state")
    kind = _one_of(doc, ("matrix", "pure_vector", "coherent"), "initial_state")
    path = f"initial_state.{kind}"
    if kind == "matrix":
        canon, M = _complex_matrix(doc["matrix"], path, n)
        with _guard(path):
            return {"matrix": canon}, validate_density_matrix(M)
    if kind == "pure_vector":
        canon, psi = _complex_vector(doc["pure_vector"], path)
        if psi.size != n:
            raise ConfigError(f"expected {n} amplitudes, got {psi.size}", path)
        with _guard(path):
            return {"pure_vector": canon}, pure_state(psi)
    coherent = _mapping(doc["coherent"], path)
    alpha_re = _number(_required(coherent, "alpha_re", path), f"{path}.alpha_re")
    alpha_im = _number(coherent.get("alpha_im", 0.0), f"{path}.alpha_im")
    dim = _integer(coherent.get("dim", n), f"{path}.dim", minimum=1)
    if dim != n:
        raise ConfigError(f"dim {dim} does not match the Hamiltonian dimension {n}", f"{path}.dim")
    with _guard(path):
        state = coherent_state(OscillatorScenario(alpha0=complex(alpha_re, alpha_im), omega=0.0, dim=dim))
    return {"coherent": {"alpha_re": alpha_re, "alpha_im": alpha_im, "dim": dim}}, state


def _parse_times(doc):
    doc = _mapping(doc, "times")
    start = _number(_required(doc, "start", "times"), "times.start", minimum=0.0)
    stop = _number(_required(doc, "stop", "times"), "times.stop")
    if not stop > start:
        raise ConfigError(f"stop must exceed start={start!r}, got {stop!r}", "times.stop")
    count = _integer(_required(doc, "count", "times"), "times.count", minimum=2)
    return {"start": start, "stop": stop, "count": count}, TimeGrid(start, stop, count)


def _parse_observables(items, n):
    if not isinstance(items, list):
        raise ConfigError("expected a list", "observables")
    canon, out, seen = [], [], set()
    for i, item in enumerate(items):
        path = f"observables[{i}]"
        item = _mapping(item, path)
        name = _required(item, "name", path)
        if not isinstance(name, str) or not name or any(c in name for c in ",\n\r\"") or name in seen:
            raise ConfigError(f"observable names must be unique, non-empty and CSV-safe, got {name!r}", f"{path}.name")
        seen.add(name)
        matrix_canon, A = _complex_matrix(_required(item, "matrix", path), f"{path}.matrix", n)
        residual = float(np.max(np.abs(A - A.conj().T)))
        if residual > INPUT_HERMITIAN_TOL:
            raise ConfigError(f"observable is not Hermitian: max|A - A†| = {residual:.3e}", f"{path}.matrix",
                              residual=residual)
        canon.append({"name": name, "matrix": matrix_canon})
        out.append(NamedObservable(name=name, matrix=0.5 * (A + A.conj().T)))
    return canon, tuple(out)


def _parse_track_elements(items, n):
    if not isinstance(items, list):
        raise ConfigError("expected a list of [n, m] pairs", "track_elements")
    pairs = []
    for i, pair in enumerate(items):
        path = f"track_elements[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"expected an [n, m] pair, got {pair!r}", path)
        a = _integer(pair[0], f"{path}[0]", minimum=0)
        b = _integer(pair[1], f"{path}[1]", minimum=0)
        if a >= n or b >= n:
            raise ConfigError(f"index out of range for dimension {n}: {pair!r}", path)
        pairs.append((a, b))
    return [list(p) for p in pairs], tuple(pairs)


def build_config(doc) -> RunConfig:
    """Validate a decoded JSON document into a RunConfig."""
    doc = _mapping(doc, "")
    hbar = _number(doc.get("hbar", 1.0), "hbar", positive=True)
    tau1 = _number(_required(doc, "tau1", ""), "tau1", positive=True)
    tau2 = _number(_required(doc, "tau2", ""), "tau2", positive=True)
    with _guard("tau1"):
        params = DecoherenceParams(tau1=tau1, tau2=tau2, hbar=hbar)

    ham_canon, spectrum = _parse_hamiltonian(_required(doc, "hamiltonian", ""), hbar)
    n = spectrum.dim
    state_canon, rho0 = _parse_initial_state(_required(doc, "initial_state", ""), n)
    times_canon, times = _parse_times(_required(doc, "times", ""))
    obs_canon, observables = _parse_observables(doc.get("observables", []), n)
    track_canon, track = _parse_track_elements(doc.get("track_elements", []), n)
    seed = doc.get("seed")
    if seed is not None:
        seed = _integer(seed, "seed", minimum=0)
        if seed >= 2 ** 64:
            raise ConfigError(f"must fit in 64 bits, got {seed!r}", "seed")
    output = doc.get("output")
    if output is not None and (not isinstance(output, str) or not output):
        raise ConfigError(f"expected a non-empty path string, got {output!r}", "output")

    known = {"hbar", "tau1", "tau2", "hamiltonian", "initial_state", "times", "observables",
             "track_elements", "seed", "output"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}", unknown[0])

    document = {
        "hbar": hbar, "tau1": tau1, "tau2": tau2,
        "hamiltonian": ham_canon, "initial_state": state_canon, "times": times_canon,
        "observables": obs_canon, "track_elements": track_canon,
    }
    if seed is not None:
        document["seed"] = seed
    if output is not None:
        document["output"] = output
    logger.debug("[CONFIG] dim=%d, %d observables, %d tracked elements", n, len(observables), len(track))
    return RunConfig(params=params, spectrum=spectrum, rho0=rho0, times=times, observables=observables,
                     track_elements=track, seed=seed, output=output, document=document)


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e.msg} at line {e.lineno} column {e.colno}") from e
    return build_config(doc)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path!r}: {e.strerror}") from e
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.document, indent=2, sort_keys=True) + "\n"


def config_fingerprint(cfg: RunConfig) -> str:
    """SHA-256 of the canonical document with sorted keys."""
    canonical = json.dumps(cfg.document, sort_keys=True).encode()
    return hashlib.sha256(canonical).hexdigest()


# ─── CSV Artifacts ─────────────────────────────────────────────────────────────
def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), NUMBER_FORMAT)
    return str(value)


@dataclass
class CsvTable:
    """One header row, then data rows; metadata goes first as ``# key: value`` lines."""

    columns: List[str]
    rows: List[list] = field(default_factory=list)
    metadata: List[Tuple[str, str]] = field(default_factory=list)

    def add_row(self, values):
        if isinstance(values, dict):
            values = [values[c] for c in self.columns]
        if len(values) != len(self.columns):
            raise ValidationError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(list(values))

    def note(self, key: str, value):
        self.metadata.append((key, format_value(value)))

    def render(self) -> str:
        buffer = io.StringIO()
        for key, value in self.metadata:
            buffer.write(f"# {key}: {value}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buffer.getvalue()

    def write(self, path: str):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.render())


@dataclass
class TimeSeries:
    """Named real channels over strictly increasing times."""

    times: np.ndarray
    channels: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValidationError("times must be a non-empty 1-D sequence")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("times must be strictly increasing")

    def add(self, name: str, values):
        """Add a channel; complex values are split into ``<name>_re`` and ``<name>_im``."""
        values = np.asarray(values)
        if values.shape != self.times.shape:
            raise ValidationError(f"channel {name!r} has {values.size} values for {self.times.size} times")
        if np.iscomplexobj(values):
            self._put(f"{name}_re", values.real)
            self._put(f"{name}_im", values.imag)
        else:
            self._put(name, values)

    def _put(self, name, values):
        if name in self.channels or name == "time":
            raise ValidationError(f"duplicate channel {name!r}")
        self.channels[name] = np.asarray(values, dtype=float)

    def table(self) -> CsvTable:
        out = CsvTable(columns=["time"] + list(self.channels))
        for i, t in enumerate(self.times):
            out.add_row([float(t)] + [float(column[i]) for column in self.channels.values()])
        return out


def standard_metadata(table: CsvTable, params: DecoherenceParams, seed=None, fingerprint=None):
    table.note("library_version", LIBRARY_VERSION)
    table.note("tau1", params.tau1)
    table.note("tau2", params.tau2)
    table.note("hbar", params.hbar)
    if seed is not None:
        table.note("seed", seed)
    if fingerprint is not None:
        table.note("config_sha256", fingerprint)
    return table

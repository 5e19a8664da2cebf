import hashlib
import json
import logging
import re
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .classical_est import parse_classical_model
from .operators import dagger, destroy
from .qfilter_sim import default_observables, record_from_frame, record_to_frame
from .superops import MeasurementScheme, ModelSpec

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent / 'presets'
FLOAT_FORMAT = '%.17g'
OSCILLATOR_PRESET = re.compile(r'^oscillator-trunc-(\d+)$')


class QuantumInput(NamedTuple):
    """Everything a quantum command needs, decoded from model/scheme files or a preset"""
    model: ModelSpec
    scheme: MeasurementScheme
    rho0: np.ndarray
    observables: dict
    model_data: dict


def encode_matrix(m):
    """Complex matrix as rows of [re, im] pairs"""
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_entry(entry, name):
    if isinstance(entry, bool):
        raise ValidationError(f'{name}: expected a number or [re, im], got {entry!r}')
    if isinstance(entry, (int, float)):
        return complex(entry)
    if (isinstance(entry, list) and len(entry) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)):
        return complex(entry[0], entry[1])
    raise ValidationError(f'{name}: expected a number or [re, im], got {entry!r}')


def decode_matrix(data, name, dim=None):
    """Inverse of encode_matrix; plain real numbers are accepted as entries"""
    if not isinstance(data, list) or not data or not all(isinstance(row, list) for row in data):
        raise ValidationError(f'{name}: expected a non-empty list of rows')
    size = len(data)
    out = np.zeros((size, size), dtype=np.complex128)
    for i, row in enumerate(data):
        if len(row) != size:
            raise ValidationError(f'{name}[{i}]: expected {size} entries, got {len(row)}')
        for j, entry in enumerate(row):
            out[i, j] = _decode_entry(entry, f'{name}[{i}][{j}]')
    if not np.all(np.isfinite(out)):
        raise ValidationError(f'{name}: entries must be finite')
    if dim is not None and size != dim:
        raise ValidationError(f'{name}: dimension {size} does not match dim {dim}')
    return out


def load_json(path):
    """Read a JSON file; syntax errors become ValidationError with line and column"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f'{path}: cannot read file ({e.strerror})')
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f'{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}')


def default_initial_state(dim):
    """Projector on the last basis vector (the excited level of the presets)"""
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[dim - 1, dim - 1] = 1.0
    return rho


def parse_quantum_model(data):
    """
    Decode {"dim", "L", "H", "rho0"?, "observables"?}.

    Returns (ModelSpec, rho0, observables); observables default to the
    computational-basis projectors P0..P{d-1}.
    """
    if not isinstance(data, dict):
        raise ValidationError('model must be a JSON object')
    for key in ('dim', 'L', 'H'):
        if key not in data:
            raise ValidationError(f'{key}: field is required')
    dim = data['dim']
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError('dim: expected a positive integer')
    if not isinstance(data['L'], list):
        raise ValidationError('L: expected a list of matrices')
    couplings = [decode_matrix(m, f'L[{k}]', dim) for k, m in enumerate(data['L'])]
    h = decode_matrix(data['H'], 'H', dim)
    model = ModelSpec(dim=dim, L=tuple(couplings), H=h)

    rho0 = decode_matrix(data['rho0'], 'rho0', dim) if 'rho0' in data else default_initial_state(dim)
    if 'observables' in data:
        if not isinstance(data['observables'], dict) or not data['observables']:
            raise ValidationError('observables: expected a non-empty map of name to matrix')
        observables = {}
        for name, m in data['observables'].items():
            if not re.match(r'^\w+$', name):
                raise ValidationError(f'observables: name {name!r} must be alphanumeric')
            observables[name] = decode_matrix(m, f'observables[{name}]', dim)
    else:
        observables = default_observables(dim)
    return model, rho0, observables


def parse_scheme(data, n_channels):
    """
    Decode {"observed": [1-based channels], "theta": [phases]} or {"complete": true, "theta"?}.
    """
    if not isinstance(data, dict):
        raise ValidationError('scheme must be a JSON object')
    theta = data.get('theta')
    if theta is not None and (not isinstance(theta, list) or any(
            not isinstance(t, (int, float)) or isinstance(t, bool) for t in theta)):
        raise ValidationError('theta: expected a list of numbers')
    if data.get('complete'):
        if theta is not None and len(theta) != n_channels:
            raise ValidationError(f'theta: expected {n_channels} phases, got {len(theta)}')
        return MeasurementScheme.complete(n_channels, theta)
    observed = data.get('observed')
    if not isinstance(observed, list) or any(
            not isinstance(a, int) or isinstance(a, bool) for a in observed):
        raise ValidationError('observed: expected a list of 1-based channel numbers')
    for n, a in enumerate(observed):
        if not 1 <= a <= n_channels:
            raise ValidationError(f'observed[{n}]: channel {a} out of range 1..{n_channels}')
    if theta is None:
        theta = [0.0] * len(observed)
    if len(theta) != len(observed):
        raise ValidationError(f'theta: expected {len(observed)} phases, got {len(theta)}')
    return MeasurementScheme(observed=tuple(a - 1 for a in observed), theta=tuple(theta))


def list_presets():
    names = sorted(p.stem for p in PRESET_DIR.glob('*.json'))
    return names + ['oscillator-trunc-N']


def _oscillator_preset(levels):
    if not 4 <= levels <= 32:
        raise ValidationError(f'preset: oscillator truncation {levels} outside 4..32')
    a = np.asarray(destroy(levels))
    rho0 = np.zeros((levels, levels))
    rho0[1, 1] = 1.0
    return {
        'kind': 'quantum',
        'description': f'damped harmonic oscillator truncated to {levels} levels, L = a, H = a^dagger a',
        'model': {
            'dim': levels,
            'L': [encode_matrix(a)],
            'H': encode_matrix(dagger(a) @ a),
            'rho0': encode_matrix(rho0),
        },
        'scheme': {'complete': True},
    }


def load_preset(name):
    match = OSCILLATOR_PRESET.match(name)
    if match:
        return _oscillator_preset(int(match.group(1)))
    path = PRESET_DIR / f'{name}.json'
    if not path.is_file():
        raise ValidationError(f'preset: unknown preset {name!r} (available: {", ".join(list_presets())})')
    return load_json(path)


def load_quantum_input(model_path=None, scheme_path=None, preset=None):
    if preset:
        data = load_preset(preset)
        if data.get('kind') != 'quantum':
            raise ValidationError(f'preset: {preset!r} is not a quantum model')
        model_data, scheme_data = data['model'], data.get('scheme', {'complete': True})
    else:
        if not model_path:
            raise ValidationError('model: give --model or --preset')
        model_data = load_json(model_path)
        scheme_data = load_json(scheme_path) if scheme_path else {'complete': True}
    model, rho0, observables = parse_quantum_model(model_data)
    scheme = parse_scheme(scheme_data, model.n_channels)
    return QuantumInput(model, scheme, rho0, observables, model_data)


def load_classical_input(model_path=None, preset=None):
    if preset:
        data = load_preset(preset)
        if data.get('kind') != 'classical':
            raise ValidationError(f'preset: {preset!r} is not a classical model')
        return parse_classical_model(data['model'])
    if not model_path:
        raise ValidationError('model: give --model or --preset')
    return parse_classical_model(load_json(model_path))


def model_hash(model_data):
    """sha256 of the canonical JSON form of a model"""
    canonical = json.dumps(model_data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def write_json(path, data):
    """Deterministic JSON; Python floats are written with round-trip precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + '\n')
    return path


def write_table(path, frame):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_table(path):
    try:
        return pd.read_csv(path, float_precision='round_trip')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f'{path}: cannot read table ({e})')


def save_record(directory, record, model_digest):
    """record.csv plus the record.json sidecar {seed, stream, dt, T, model_hash}"""
    directory = Path(directory)
    csv_path = write_table(directory / 'record.csv', record_to_frame(record))
    write_json(directory / 'record.json', {
        'seed': record.seed,
        'stream': record.stream,
        'dt': record.dt,
        'T': record.horizon,
        'model_hash': model_digest,
    })
    return csv_path


def load_record(csv_path, expected_hash=None):
    """Read a saved record; the sidecar must sit next to it with the .json suffix"""
    csv_path = Path(csv_path)
    sidecar = load_json(csv_path.with_suffix('.json'))
    for key in ('dt', 'model_hash'):
        if key not in sidecar:
            raise ValidationError(f'{csv_path.with_suffix(".json")}: {key} is required')
    if expected_hash is not None and sidecar['model_hash'] != expected_hash:
        raise ValidationError('record: it was generated for a different model (hash mismatch)')
    frame = read_table(csv_path)
    if 't' not in frame.columns:
        raise ValidationError(f'{csv_path}: column t is required')
    try:
        record = record_from_frame(frame, sidecar['dt'], sidecar.get('seed'), sidecar.get('stream'))
    except ValueError as e:
        raise ValidationError(f'{csv_path}: {e}')
    logger.debug('loaded record with %d steps from %s', record.steps, csv_path)
    return record

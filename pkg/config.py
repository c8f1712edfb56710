# -*- coding: utf-8 -*-
"""
תצורה - Configuration for the optomechanics toolkit

Environment settings are read once at import (python-dotenv, prefix
OPTOMECH_); run parameters come from a strict JSON document whose
sections mirror the library's parameter bundles. All lengths in the file
are SI meters, powers in watts, times in seconds.
"""

import json
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from errors import ConfigurationError

load_dotenv()

CODE_VERSION = "1.0.0"

# Environment
LOG_LEVEL = os.getenv('OPTOMECH_LOG_LEVEL', 'INFO')
LOGS_MAX_PER_SEC = float(os.getenv('OPTOMECH_LOGS_MAX_PER_SEC', '100'))
ENV_THREADS = os.getenv('OPTOMECH_THREADS')
ENV_TOL = os.getenv('OPTOMECH_TOL')
ENV_OUT_DIR = os.getenv('OPTOMECH_OUT_DIR')
ENV_SEED = os.getenv('OPTOMECH_SEED')

# Physical defaults
DEFAULT_DENSITY = 2200.0  # kg/m^3, fused silica; the sphere's mass is otherwise unstated
DEFAULT_TEMPERATURE = 300.0  # K
DEFAULT_COHERENCE_TIME = 1e-4  # s

DEFAULT_QUADRATURE = {
    'radial_order': 24,
    'polar_order': 48,
    'azimuthal_order': 96,
    'scheme': 'gauss_legendre_product',
    'target_rel_tol': 1e-8,
}

# Parameter set of the optical-tweezer ring-cavity example
PAPER_PARAMS = {
    'refractive_index': 1.45,
    'radius': 100e-9,
    'cavity_length': 4e-3,
    'wavelength': 1064e-9,
    'rayleigh_range': 0.53e-6,
    'power': 15e-3,
    'photon_number': 1e6,
    'coherence_time': DEFAULT_COHERENCE_TIME,
}

PAPER_PARAMS_FILE = Path(__file__).resolve().parent / 'paper-params.json'


@dataclass
class SphereSection:
    radius: float = PAPER_PARAMS['radius']
    refractive_index: float = PAPER_PARAMS['refractive_index']
    density: Optional[float] = None
    mass: Optional[float] = None
    moment_of_inertia: Optional[float] = None
    center: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    enabled: bool = True

    @property
    def density_assumed(self) -> bool:
        return self.density is None and self.mass is None

    def build(self):
        from units_core import DielectricSphere

        if self.mass is not None:
            if self.moment_of_inertia is None:
                raise ConfigurationError("sphere.mass given without sphere.moment_of_inertia")
            return DielectricSphere(self.radius, self.refractive_index, self.mass,
                                    self.moment_of_inertia, None, tuple(self.center))
        density = DEFAULT_DENSITY if self.density is None else self.density
        return DielectricSphere.from_density(self.radius, self.refractive_index, density, self.center)


@dataclass
class BeamSection:
    wavelength: float = PAPER_PARAMS['wavelength']
    rayleigh_range: float = PAPER_PARAMS['rayleigh_range']
    cavity_length: float = PAPER_PARAMS['cavity_length']
    power: Optional[float] = PAPER_PARAMS['power']
    photon_number: Optional[float] = PAPER_PARAMS['photon_number']

    def build(self):
        """Explicit photon_number wins; otherwise it is derived from power"""
        from units_core import BeamParams

        if self.photon_number is not None:
            return BeamParams(self.wavelength, self.rayleigh_range, self.cavity_length,
                              self.photon_number, self.power)
        if self.power is None:
            raise ConfigurationError("beam needs photon_number or power")
        return BeamParams.from_power(self.wavelength, self.rayleigh_range, self.cavity_length, self.power)


@dataclass
class UnitsSection:
    """Unit system of reported JSON values; computation is always natural units with lengths in meters"""
    convention: str = "SI"
    length_scale: float = 1.0

    def build(self):
        from units_core import UnitSystem
        return UnitSystem(self.convention, self.length_scale)


@dataclass
class ModeSection:
    family: str = "gaussian"
    k_vec: Optional[List[float]] = None
    polarization: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    box: Optional[List[float]] = None
    phase: float = 0.0
    coupling_model: str = "quadrature"
    # family of the mode a comoving mode carries along
    base_family: str = "plane"

    def build(self, beam):
        from modes import comoving_mode, gaussian_paraxial_mode, plane_wave_mode, standing_wave_mode

        if self.family == "comoving":
            if self.base_family == "comoving":
                raise ConfigurationError("mode.base_family of a comoving mode cannot itself be comoving")
            return comoving_mode(replace(self, family=self.base_family).build(beam))
        if self.family == "gaussian":
            return gaussian_paraxial_mode(beam)
        k_vec = self.k_vec if self.k_vec is not None else [0.0, 0.0, beam.k]
        box = self.box if self.box is not None else [beam.wavelength] * 3
        if self.family == "standing":
            return standing_wave_mode(k_vec, self.polarization, box, self.phase)
        if self.family == "plane":
            return plane_wave_mode(k_vec, self.polarization, box)
        raise ConfigurationError(f"unknown mode family '{self.family}' (gaussian, standing, plane, comoving)")


@dataclass
class QuadratureSection:
    radial_order: int = DEFAULT_QUADRATURE['radial_order']
    polar_order: int = DEFAULT_QUADRATURE['polar_order']
    azimuthal_order: int = DEFAULT_QUADRATURE['azimuthal_order']
    scheme: str = DEFAULT_QUADRATURE['scheme']
    target_rel_tol: float = DEFAULT_QUADRATURE['target_rel_tol']

    def build(self, threads: int = 1):
        from quadrature import QuadratureSpec
        return QuadratureSpec(self.radial_order, self.polar_order, self.azimuthal_order,
                              self.scheme, self.target_rel_tol, threads)


@dataclass
class PathSection:
    """kind: axis (qz_i -> qz_f), straight (q_i -> q_f) or polyline (points)"""
    kind: str = "axis"
    qz_i: Optional[float] = None
    qz_f: Optional[float] = None
    q_i: Optional[List[float]] = None
    q_f: Optional[List[float]] = None
    points: Optional[List[List[float]]] = None
    sample_count: int = 16
    sweep_points: int = 101

    def build(self, beam):
        from geomphase import axis_path, polyline_path, straight_path

        if self.kind == "axis":
            qz_i = -beam.wavelength / 2.0 if self.qz_i is None else self.qz_i
            qz_f = beam.wavelength / 2.0 if self.qz_f is None else self.qz_f
            return axis_path(qz_i, qz_f, self.sample_count)
        if self.kind == "straight":
            if self.q_i is None or self.q_f is None:
                raise ConfigurationError("path.kind 'straight' needs q_i and q_f")
            return straight_path(self.q_i, self.q_f, self.sample_count)
        if self.kind == "polyline":
            if not self.points:
                raise ConfigurationError("path.kind 'polyline' needs points")
            return polyline_path(self.points, self.sample_count)
        raise ConfigurationError(f"unknown path kind '{self.kind}' (axis, straight, polyline)")


@dataclass
class MotionSection:
    """Where and how fast the sphere is when couplings and forces are reported"""
    q: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    velocity: Optional[List[float]] = None
    angular_velocity: Optional[List[float]] = None
    temperature: float = DEFAULT_TEMPERATURE
    coherence_time: float = DEFAULT_COHERENCE_TIME


@dataclass
class AmplitudeSection:
    """
    Coupled-mode run driven by q(t) = q0 + A sin(Omega t), Omega = |omega_1 - omega_0| + detuning.
    Without modes, two plane waves along z in a box of ten wavelengths are used.
    drive_amplitude None picks |A| so that the coupling rate is rate_fraction x Omega.
    """
    modes: List[ModeSection] = field(default_factory=list)
    initial: List[List[float]] = field(default_factory=lambda: [[1.0, 0.0], [0.0, 0.0]])
    drive_direction: List[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])
    drive_amplitude: Optional[float] = None
    rate_fraction: float = 2e-3
    detuning_in_rates: float = 0.0
    duration: Optional[float] = None
    dt: Optional[float] = None
    frozen_table: bool = True


@dataclass
class DynamicsSection:
    initial_q: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    initial_velocity: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    initial_angular_velocity: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    dt: Optional[float] = None
    duration: Optional[float] = None
    periods: float = 10.0
    method: str = "stormer_verlet"
    sample_every: int = 10
    coupling_model: str = "small_sphere"
    amplitudes: AmplitudeSection = field(default_factory=AmplitudeSection)


SECTIONS = {
    'sphere': SphereSection,
    'beam': BeamSection,
    'units': UnitsSection,
    'mode': ModeSection,
    'quadrature': QuadratureSection,
    'path': PathSection,
    'motion': MotionSection,
    'dynamics': DynamicsSection,
}
SCALARS = ('output_path', 'seed', 'threads')


@dataclass
class RunConfig:
    sphere: SphereSection = field(default_factory=SphereSection)
    beam: BeamSection = field(default_factory=BeamSection)
    units: UnitsSection = field(default_factory=UnitsSection)
    mode: ModeSection = field(default_factory=ModeSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    path: PathSection = field(default_factory=PathSection)
    motion: MotionSection = field(default_factory=MotionSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    output_path: str = "results"
    seed: int = 0
    threads: int = 1

    def quad(self):
        return self.quadrature.build(self.threads)


def _line_of(text: Optional[str], key: str, after: Optional[str] = None) -> Optional[int]:
    """1-based line of the first `"key":` (following `"after":` when given)"""
    if not text:
        return None
    start = 0
    if after:
        anchor = re.search(r'"%s"\s*:' % re.escape(after), text)
        start = anchor.end() if anchor else 0
    match = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, start)
    return text.count('\n', 0, match.start()) + 1 if match else None


def _check_type(value: Any, expected: Any, name: str, line: Optional[int]) -> None:
    if value is None:
        return
    if expected in (float, 'float'):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected in (int, 'int'):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected in (str, 'str'):
        ok = isinstance(value, str)
    elif expected in (bool, 'bool'):
        ok = isinstance(value, bool)
    else:
        return
    if not ok:
        raise ConfigurationError(f"'{name}' must be {getattr(expected, '__name__', expected)}, "
                                 f"got {type(value).__name__}", line)


def _expected_scalar(annotation: Any) -> Any:
    """float/int/str/bool behind an annotation (Optional unwrapped), else None"""
    if isinstance(annotation, type):
        return annotation
    name = str(annotation).replace('typing.', '')
    if name.startswith('Optional[') and name.endswith(']'):
        name = name[len('Optional['):-1]
    return name if name in ('float', 'int', 'str', 'bool') else None


def _build_section(cls, data: Dict[str, Any], path: str, text: Optional[str]):
    if not isinstance(data, dict):
        raise ConfigurationError(f"section '{path}' must be an object", _line_of(text, path.split('.')[-1]))
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        line = _line_of(text, key, path.split('.')[-1])
        if key not in known:
            raise ConfigurationError(f"unknown key '{path}.{key}' (allowed: {', '.join(sorted(known))})", line)
        if cls is DynamicsSection and key == 'amplitudes':
            kwargs[key] = _build_section(AmplitudeSection, value, f"{path}.{key}", text)
            continue
        if cls is AmplitudeSection and key == 'modes':
            if not isinstance(value, list):
                raise ConfigurationError(f"'{path}.modes' must be a list of mode objects", line)
            kwargs[key] = [_build_section(ModeSection, entry, f"{path}.modes", text) for entry in value]
            continue
        _check_type(value, _expected_scalar(known[key].type), f"{path}.{key}", line)
        kwargs[key] = value
    return cls(**kwargs)


def load_run_config(source: Union[str, Path, Dict[str, Any], None] = None) -> RunConfig:
    """
    Strict loader: unknown keys and mistyped values raise ConfigurationError
    carrying the line where they occur. Accepts a path, a JSON string or a dict.
    """
    text = None
    if source is None:
        data: Dict[str, Any] = {}
    elif isinstance(source, dict):
        data = source
    else:
        candidate = Path(source) if not str(source).lstrip().startswith('{') else None
        if candidate is not None:
            if not candidate.exists():
                raise ConfigurationError(f"config file not found: {candidate}")
            text = candidate.read_text(encoding='utf-8')
        else:
            text = str(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"invalid JSON: {e.msg} (column {e.colno})", e.lineno) from None

    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a JSON object", 1 if text else None)

    kwargs = {}
    for key, value in data.items():
        line = _line_of(text, key)
        if key in SECTIONS:
            kwargs[key] = _build_section(SECTIONS[key], value, key, text)
        elif key in SCALARS:
            _check_type(value, {'output_path': str, 'seed': int, 'threads': int}[key], key, line)
            kwargs[key] = value
        else:
            allowed = sorted(list(SECTIONS) + list(SCALARS))
            raise ConfigurationError(f"unknown top-level key '{key}' (allowed: {', '.join(allowed)})", line)
    return RunConfig(**kwargs)


def apply_env_overrides(cfg: RunConfig, threads: Optional[int] = None, tol: Optional[float] = None,
                        out: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """Precedence: explicit flags > OPTOMECH_* environment > file > defaults"""

    def pick(flag, env, current, cast):
        if flag is not None:
            return cast(flag)
        if env not in (None, ''):
            try:
                return cast(env)
            except ValueError:
                raise ConfigurationError(f"invalid environment override value '{env}'") from None
        return current

    cfg.threads = pick(threads, ENV_THREADS, cfg.threads, int)
    cfg.quadrature.target_rel_tol = pick(tol, ENV_TOL, cfg.quadrature.target_rel_tol, float)
    cfg.output_path = pick(out, ENV_OUT_DIR, cfg.output_path, str)
    cfg.seed = pick(seed, ENV_SEED, cfg.seed, int)
    if cfg.threads < 1:
        raise ConfigurationError("threads must be >= 1")
    return cfg


def resolved_config(cfg: RunConfig) -> Dict[str, Any]:
    """JSON-serializable resolved configuration with the code version"""
    resolved = asdict(cfg)
    resolved['code_version'] = CODE_VERSION
    resolved['assumptions'] = assumption_ledger(cfg)
    return resolved


def assumption_ledger(cfg: RunConfig) -> List[str]:
    """Modelling assumptions not fixed by the inputs, printed next to results"""
    notes = []
    if cfg.sphere.density_assumed:
        notes.append(f"sphere density assumed {DEFAULT_DENSITY:g} kg/m^3 (fused silica)")
    notes.append(f"thermal velocity sqrt(k_B T / m) per axis at T = {cfg.motion.temperature:g} K")
    notes.append("weak scattering: mode functions independent of the sphere position")
    if cfg.beam.photon_number is None:
        notes.append("photon number from P L_c / (c hbar omega)")
    return notes


def paper_config() -> RunConfig:
    """The bundled reproduction configuration"""
    if PAPER_PARAMS_FILE.exists():
        return load_run_config(PAPER_PARAMS_FILE)
    return RunConfig()

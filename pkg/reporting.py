# -*- coding: utf-8 -*-
"""
דוחות - Result serialization: JSON documents, CSV series, plain-text tables.

Every artifact embeds the resolved configuration, the code version and the
unit system so a result file is self-describing. Keys are sorted and
floats written at full precision, so identical runs give identical bytes.
"""

import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import numpy as np
import pandas as pd

from config import CODE_VERSION
from units_core import NATURAL, UnitSystem

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    """numpy arrays, enums and complex numbers to plain JSON values"""
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(value.real), 'im': float(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else str(value)
    return value


def write_json(path: PathLike, payload: Dict[str, Any], config: Optional[Dict[str, Any]] = None,
               unit_system: str = "SI") -> Path:
    """Write a result document; payload keys should carry unit suffixes"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    document = {
        'result': _jsonable(payload),
        'config': _jsonable(config or {}),
        'code_version': CODE_VERSION,
        'unit_system': unit_system,
    }
    text = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)
    target.write_text(text + "\n", encoding='utf-8')
    logger.info(f"Wrote {target}")
    return target


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    """RFC-4180 style CSV: header row, '.' decimal, round-trip float precision"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"Wrote {target} ({len(frame)} rows)")
    return target


def format_table(rows: Iterable[Mapping[str, Any]], columns: Optional[Iterable[str]] = None) -> str:
    """Plain-text table of result rows"""
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return "(no rows)"
    if columns is not None:
        frame = frame[list(columns)]
    return frame.to_string(index=False)


SI_SUFFIX = {
    'dimensionless': '',
    'length': '_m',
    'wavenumber': '_per_m',
    'time': '_s',
    'frequency': '_rad_per_s',
    'velocity': '_m_per_s',
    'mass': '_kg',
    'momentum': '_kg_m_per_s',
    'angular_momentum': '_J_s',
    'energy': '_J',
    'force': '_N',
    'moment_of_inertia': '_kg_m2',
}


def express(name: str, value: Any, quantity: str, units: UnitSystem) -> Dict[str, Any]:
    """
    {key: value} for an internal (natural, meter) value reported in `units`.
    SI keys carry the SI unit suffix; natural-unit keys end in '_nat'.
    """
    si_value = NATURAL.to_si(np.real(value), quantity)
    if units.convention == "SI":
        return {name + SI_SUFFIX[quantity]: si_value}
    return {name + ('_nat' if quantity != 'dimensionless' else ''): units.to_internal(si_value, quantity)}

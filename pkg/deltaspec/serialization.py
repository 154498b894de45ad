"""
Conversion between reports/configurations and plain JSON values.
"""
import math
from dataclasses import fields, is_dataclass, MISSING
from enum import Enum
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

import numpy as np

from deltaspec.errors import ConfigurationError


def dehydrate_json(value: Any, seen: Optional[set] = None) -> Any:
    """
    Turns ``value`` into nested lists, dicts and scalars that ``json.dumps``
    accepts. Complex numbers become ``{"re": .., "im": ..}``; non-finite
    floats become strings.

    :raises ValueError: On circular references or unsupported values.
    """
    if seen is None:
        seen = set()
    else:
        seen = set(seen)
    if id(value) in seen:
        raise ValueError(f"Error while serializing: Circular reference detected in {value!r}")
    if isinstance(value, np.ndarray):
        return dehydrate_json(value.tolist(), seen)
    if isinstance(value, np.generic):
        return dehydrate_json(value.item(), seen)
    if isinstance(value, (list, set, tuple)):
        seen.add(id(value))
        return [dehydrate_json(v, seen) for v in value]
    elif isinstance(value, dict):
        seen.add(id(value))
        return {str(dehydrate_json(k, seen)): dehydrate_json(v, seen)
                for k, v in value.items()}
    elif isinstance(value, Enum):
        return value.value
    elif isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    elif isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    elif isinstance(value, complex):
        if value.imag == 0:
            return dehydrate_json(value.real, seen)
        return {'re': dehydrate_json(value.real, seen), 'im': dehydrate_json(value.imag, seen)}
    elif is_dataclass(value) and not isinstance(value, type):
        seen.add(id(value))
        return {f.name: dehydrate_json(getattr(value, f.name), seen)
                for f in fields(value)}
    raise ValueError(
        f"Error while serializing: The {value!r} is not a number, str, list, dict, enum, array or dataclass.")


def rehydrate_json(value: Any, new_type: Any, location: str = "config") -> Any:
    """
    Rebuilds a value of ``new_type`` (a dataclass, ``List[...]``,
    ``Optional[...]`` or scalar type) from parsed JSON.

    :raises ConfigurationError: On unknown keys or values of the wrong shape,
        naming the dotted path of the entry.
    """
    origin = get_origin(new_type)
    if origin is Union:
        options = [option for option in get_args(new_type) if option is not type(None)]
        if value is None:
            return None
        return rehydrate_json(value, options[0], location)
    if origin in (list, tuple):
        if not isinstance(value, list):
            raise ConfigurationError(f"expected a list, got {value!r}", location)
        arguments = get_args(new_type)
        element_type = arguments[0] if arguments else Any
        converted = [rehydrate_json(v, element_type, f"{location}[{index}]") for index, v in enumerate(value)]
        return converted if origin is list else tuple(converted)
    if is_dataclass(new_type) and isinstance(new_type, type):
        if not isinstance(value, dict):
            raise ConfigurationError(f"expected an object, got {value!r}", location)
        known = {f.name: f for f in fields(new_type)}
        unknown = sorted(set(value) - set(known))
        if unknown:
            raise ConfigurationError(f"unknown key(s) {', '.join(unknown)}; expected some of "
                                     f"{', '.join(known)}", location)
        hints = get_type_hints(new_type)
        converted = {}
        for name, f in known.items():
            if name in value:
                converted[name] = rehydrate_json(value[name], hints[name], f"{location}.{name}")
            elif f.default is MISSING and f.default_factory is MISSING:
                raise ConfigurationError(f"missing required key {name!r}", location)
        return new_type(**converted)
    if new_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"expected a number, got {value!r}", location)
        return float(value)
    if new_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"expected an integer, got {value!r}", location)
        return value
    if new_type is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"expected true or false, got {value!r}", location)
        return value
    if new_type is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"expected a string, got {value!r}", location)
        return value
    # Fall through for untyped entries
    return value

# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`config`
====================================================

Typed configuration fields usable directly as class attributes, the `ConfigBase`
class that binds their values per instance, and YAML loading.

Example::

    class RunConfig(ConfigBase):
        seed = IntField(0, min_value=0)
        alphas = TupleField((0.1, 0.2), item=FloatField(0.1, min_value=0.0, max_value=1.0))

    config = RunConfig(seed=3).apply_overrides(["alphas=[0.1]"])

"""

from __future__ import annotations

import copy
import os
from collections import abc
from datetime import date, datetime

import yaml

try:
    from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Sequence, Type, Union
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

SECTIONS = ("backtest", "synth", "schema")
"""Top level sections of a config file."""


class Field:
    """
    Superclass of config fields. Values are validated on every assignment and
    stored on the owning `ConfigBase` instance.

    :param default: value returned until one is assigned
    :param bool optional: also accept None
    """

    def __init__(self, default: Any = None, *, optional: bool = False) -> None:
        self.name = ""
        self.optional = optional
        self.default = default

    def __set_name__(self, owner: Type["ConfigBase"], name: str) -> None:
        self.name = name

    def __get__(
        self, obj: Optional["ConfigBase"], cls: Optional[Type["ConfigBase"]] = None
    ) -> Any:
        if obj is None:
            return self
        if self.name not in obj._values:
            obj._values[self.name] = copy.deepcopy(self.default)
        return obj._values[self.name]

    def __set__(self, obj: "ConfigBase", value: Any) -> None:
        if value is None:
            if not self.optional:
                raise ValueError("{} may not be empty".format(self.name))
            obj._values[self.name] = None
            return
        obj._values[self.name] = self.validate(value)

    def validate(self, value: Any) -> Any:
        """Check and convert ``value``; raise ValueError when it is invalid."""
        return value

    def dump(self, value: Any) -> Any:
        """Plain YAML/JSON representation of ``value``."""
        return value


class IntField(Field):
    """An integer within ``[min_value, max_value]``."""

    def __init__(
        self,
        default: Optional[int] = 0,
        *,
        min_value: Optional[int] = None,
        max_value: Optional[int] = None,
        optional: bool = False,
    ) -> None:
        super().__init__(default, optional=optional)
        self._min_value = min_value
        self._max_value = max_value

    def validate(self, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            else:
                raise ValueError("{} must be an integer, got {!r}".format(self.name, value))
        if self._min_value is not None and value < self._min_value:
            raise ValueError("{} out of range".format(self.name))
        if self._max_value is not None and value > self._max_value:
            raise ValueError("{} out of range".format(self.name))
        return value


class FloatField(Field):
    """A real number within ``[min_value, max_value]``, or the open range."""

    def __init__(
        self,
        default: Optional[float] = 0.0,
        *,
        min_value: Optional[float] = None,
        max_value: Optional[float] = None,
        exclusive: bool = False,
        optional: bool = False,
    ) -> None:
        super().__init__(default, optional=optional)
        self._min_value = min_value
        self._max_value = max_value
        self._exclusive = exclusive

    def validate(self, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("{} must be a number, got {!r}".format(self.name, value))
        value = float(value)
        low, high = self._min_value, self._max_value
        if self._exclusive:
            in_range = (low is None or value > low) and (high is None or value < high)
        else:
            in_range = (low is None or value >= low) and (high is None or value <= high)
        if not in_range:
            raise ValueError("{} out of range".format(self.name))
        return value


class BoolField(Field):
    """True or False."""

    def __init__(self, default: bool = False) -> None:
        super().__init__(default)

    def validate(self, value: Any) -> bool:
        if not isinstance(value, bool):
            raise ValueError("{} must be true or false".format(self.name))
        return value


class StringField(Field):
    """Free text."""

    def validate(self, value: Any) -> str:
        if not isinstance(value, str):
            raise ValueError("{} must be text".format(self.name))
        return value


class ChoiceField(Field):
    """One of a fixed set of strings."""

    def __init__(self, default: str, choices: Sequence[str], *, optional: bool = False) -> None:
        super().__init__(default, optional=optional)
        self.choices = tuple(choices)

    def validate(self, value: Any) -> str:
        if value not in self.choices:
            raise ValueError(
                "{} must be one of {}, got {!r}".format(
                    self.name, ", ".join(self.choices), value
                )
            )
        return value


class TupleField(Field):
    """
    A sequence whose items are checked by the ``item`` field.

    :param Field item: validator applied to each item
    :param bool non_empty: reject empty sequences
    """

    def __init__(
        self,
        default: Sequence = (),
        *,
        item: Optional[Field] = None,
        non_empty: bool = True,
        optional: bool = False,
    ) -> None:
        super().__init__(tuple(default), optional=optional)
        self._item = item
        self._non_empty = non_empty

    def __set_name__(self, owner: Type["ConfigBase"], name: str) -> None:
        super().__set_name__(owner, name)
        if self._item is not None:
            self._item.name = name

    def validate(self, value: Any) -> tuple:
        if isinstance(value, (str, bytes)) or not isinstance(value, abc.Iterable):
            value = (value,)
        value = tuple(value)
        if self._non_empty and not value:
            raise ValueError("{} may not be empty".format(self.name))
        if self._item is not None:
            value = tuple(self._item.validate(item) for item in value)
        return value

    def dump(self, value: Any) -> Any:
        if value is None:
            return None
        if self._item is not None:
            return [self._item.dump(item) for item in value]
        return list(value)


class MappingField(Field):
    """
    A nested mapping, checked as a whole by ``validator``.

    Dotted override keys (``tuning_grids.knn.K``) address nested entries.
    """

    def __init__(
        self,
        default: Optional[Mapping] = None,
        *,
        validator: Optional[Callable[[Mapping], Mapping]] = None,
        optional: bool = False,
    ) -> None:
        super().__init__(dict(default or {}), optional=optional)
        self._validator = validator

    def validate(self, value: Any) -> dict:
        if not isinstance(value, abc.Mapping):
            raise ValueError("{} must be a mapping".format(self.name))
        value = copy.deepcopy(dict(value))
        if self._validator is not None:
            value = dict(self._validator(value))
        return value

    def dump(self, value: Any) -> Any:
        return _plain(value)


class DateField(Field):
    """A calendar date, accepted as a date or an ISO-8601 string."""

    def validate(self, value: Any) -> date:
        if isinstance(value, datetime):
            return value.date()
        if isinstance(value, date):
            return value
        if isinstance(value, str):
            try:
                return date.fromisoformat(value)
            except ValueError:
                raise ValueError(
                    "{} must be an ISO date, got {!r}".format(self.name, value)
                ) from None
        raise ValueError("{} must be a date".format(self.name))

    def dump(self, value: Any) -> Any:
        return None if value is None else value.isoformat()


def _plain(value: Any) -> Any:
    if isinstance(value, abc.Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


class ConfigBase:
    """
    Top level configuration class. Subclasses declare `Field` class attributes and
    instances bind their values, validated, from ``**initial_values``.

    Unknown keys raise KeyError.
    """

    def __init__(self, **initial_values) -> None:
        # Managed by the Field descriptors.
        self._values: Dict[str, Any] = {}
        for key, value in initial_values.items():
            self.set(key, value)

    @classmethod
    def fields(cls) -> Dict[str, Field]:
        """Declared fields by name."""
        result = {}
        for class_attr in dir(cls):
            if class_attr.startswith("_"):
                continue
            value = getattr(cls, class_attr)
            if isinstance(value, Field):
                result[class_attr] = value
        return result

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping[str, Any]]) -> "ConfigBase":
        """Instantiate from a parsed config section."""
        mapping = mapping or {}
        if not isinstance(mapping, abc.Mapping):
            raise ValueError("{} section must be a mapping".format(cls.__name__))
        return cls(**{str(key): value for key, value in mapping.items()})

    def set(self, key: str, value: Any) -> None:
        """Assign one field; a dotted key sets an entry inside a `MappingField`."""
        name, _, path = key.partition(".")
        fields = self.fields()
        if name not in fields:
            raise KeyError("unknown config key {!r} for {}".format(name, type(self).__name__))
        if path:
            if not isinstance(fields[name], MappingField):
                raise KeyError("{} has no nested keys".format(name))
            nested = copy.deepcopy(getattr(self, name))
            target = nested
            parts = path.split(".")
            for part in parts[:-1]:
                target = target.setdefault(part, {})
            target[parts[-1]] = value
            value = nested
        setattr(self, name, value)

    def apply_overrides(self, overrides: Iterable[str]) -> "ConfigBase":
        """
        Apply ``key=value`` strings; values are parsed as YAML scalars or flow
        collections, so ``seed=3`` is an int and ``alpha_grid=[0.1, 0.2]`` a list.
        """
        for override in overrides:
            key, sep, raw = override.partition("=")
            if not sep or not key.strip():
                raise ValueError("override must look like key=value, got {!r}".format(override))
            self.set(key.strip(), yaml.safe_load(raw))
        return self

    def as_dict(self) -> Dict[str, Any]:
        """Every field, resolved and in plain types."""
        return {
            name: field.dump(getattr(self, name)) for name, field in sorted(self.fields().items())
        }

    def __eq__(self, other) -> bool:
        if type(other) is type(self):
            return self.as_dict() == other.as_dict()
        return False

    def __str__(self) -> str:
        parts = []
        for name in sorted(self.fields()):
            parts.append("{}={}".format(name, repr(getattr(self, name))))
        return "<{} {} >".format(type(self).__name__, " ".join(parts))


def load_config(path: Union[str, os.PathLike]) -> Dict[str, Dict[str, Any]]:
    """
    Read a YAML config file into its sections.

    :return: ``{"backtest": {...}, "synth": {...}, "schema": {...}}``, empty sections
        included
    :raises KeyError: on an unknown top level section
    """
    with open(path, "r", encoding="utf-8") as stream:
        document = yaml.safe_load(stream) or {}
    if not isinstance(document, abc.Mapping):
        raise ValueError("config file must hold a mapping")
    unknown = sorted(set(document) - set(SECTIONS))
    if unknown:
        raise KeyError("unknown config section(s): {}".format(", ".join(map(str, unknown))))
    sections = {}
    for section in SECTIONS:
        value = document.get(section) or {}
        if not isinstance(value, abc.Mapping):
            raise ValueError("config section {!r} must be a mapping".format(section))
        sections[section] = dict(value)
    return sections

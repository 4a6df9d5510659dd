import typing as th

from .types import NestedMapping


def assign(name: str, value: th.Any, target: NestedMapping, create: bool = True) -> NestedMapping:
    """
    Sets a value for the dotted variable `name` inside the nested mapping `target`.

    Used to apply `section.key=value` overrides onto a sectioned raw configuration.
    A bare key (without a section) is written at the top level.

    Args:
        name (str): The dotted name of the variable to set, e.g. "learning.epsilon".
        value (typing.Any): The value to set.
        target (dict): The nested mapping to write into.
        create (bool): Create intermediate sections that do not exist yet.

    Returns:
        dict: The updated target (updated in place).
    """
    var = target
    *sections, key = name.split(".")
    for split in sections:
        if split not in var:
            if not create:
                raise KeyError('Invalid section "%s" in "%s"' % (split, name))
            var[split] = {}
        var = var[split]
        if not isinstance(var, dict):
            raise TypeError('"%s" in "%s" is not a section' % (split, name))
    var[key] = value
    return target


def flatten(mapping: NestedMapping) -> th.Dict[str, th.Any]:
    """
    Flattens a sectioned mapping into {key: value}. Sections are organisational only,
    so the last occurrence of a key wins.

    Args:
        mapping (dict): The nested mapping.

    Returns:
        dict: The flat mapping.
    """
    flat = {}
    for key, value in mapping.items():
        if isinstance(value, dict):
            flat.update(flatten(value))
        else:
            flat[key] = value
    return flat

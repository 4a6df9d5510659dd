import importlib.util
import logging
import os
import typing as th

from ..errors import UnknownNameError
from .types import ContextType, _NoValue

logger = logging.getLogger(__name__)


def _local_source(name: str) -> th.Optional[str]:
    """Path of the file defining `name` under the working directory, if there is one."""
    parts = [part for part in name.split(".") if part]
    if not parts:
        return None
    module_file = os.path.join(*parts[:-1], f"{parts[-1]}.py")
    if os.path.isfile(module_file):
        return module_file
    package_init = os.path.join(*parts, "__init__.py")
    return package_init if os.path.isfile(package_init) else None


def importer(name: str) -> ContextType:
    """
    Import `name` like importlib.import_module does, falling back to a module
    or package in the current working directory, so experiments can plug in
    allocators that are not installed.

    Args:
        name: Dotted module path, e.g. `my_allocators`.

    Returns:
        The imported module.
    """
    try:
        return importlib.import_module(name)
    except ImportError:
        source = _local_source(name)
        if source is None:
            raise
        loader_spec = importlib.util.spec_from_file_location(name, source)
        module = importlib.util.module_from_spec(loader_spec)
        loader_spec.loader.exec_module(module)
        logger.debug("imported %s from %s", name, source)
        return module


def greedy_import_context(name: str) -> th.Tuple[th.Any, str]:
    """
    Greedily try importing the longest module prefix of a dotted name, and return the
    imported module together with the remaining attribute path.

    For "x.y.z" this tries "x.y.z", then "x.y" and finally "x".

    Args:
        name (str): The dotted name of the variable to import.

    Returns:
        th.Tuple[th.Any, str]: The imported module (or _NoValue) and the name left to look up in it.
    """
    module_hierarchy = name.split(".")
    for trial_index in range(len(module_hierarchy), 0, -1):
        try:
            return importer(".".join(module_hierarchy[:trial_index])), ".".join(module_hierarchy[trial_index:])
        except (ImportError, ValueError):
            continue
    return _NoValue, name


def _walk(var: th.Any, name: str) -> th.Any:
    for split in name.split(".") if name else []:
        if isinstance(var, dict):
            if split not in var:
                raise KeyError(split)
            var = var[split]
        else:
            if not hasattr(var, split):
                raise AttributeError(split)
            var = getattr(var, split)
    return var


def lookup(name: str, context: th.Optional[ContextType] = None, strict: bool = True) -> th.Any:
    """
    Lookup and retrieve a value defined by a dotted `name`.

    The name is first looked up in `context` (a dict or any object with attributes) and,
    if that fails, resolved through a greedy import. This is how allocators and presets are
    resolved: registered short names ("mmral", "random") come from the registries passed
    as context, anything else is treated as an import path ("my_allocators.Greedy").

    Args:
        name (str): The name of the variable to retrieve.
        context (typing.Any): The context to get the variable from before falling back to imports.
        strict (bool): If True, raise an error if the lookup fails. If False, return None.

    Returns:
        typing.Any: The value of the variable.

    Raises:
        UnknownNameError: If the name cannot be resolved (and strict is True).
    """
    if context is not None:
        try:
            return _walk(context, name)
        except (KeyError, AttributeError):
            pass
    if "." in name:
        module, rest = greedy_import_context(name)
        if module is not _NoValue:
            try:
                return _walk(module, rest)
            except (KeyError, AttributeError):
                pass
    if strict:
        raise UnknownNameError(f"unknown name {name!r}")
    return None

import inspect
import math
import typing as th

from .lookup import lookup
from .types import ContextType, _NoValue

SPEED_OF_LIGHT = 299792458.0  # m/s

# registry of names available to every configuration expression
CONSTANT_REGISTRY: th.Dict[str, th.Any] = dict()


def register_constant(value: th.Any, name: th.Optional[str] = None):
    """
    Registers a value to be used in configuration expressions.

    Args:
        value (typing.Any): The value (constant, function or module) to register.
        name (str): The name to register it under (default: value.__name__).

    Returns:
        None
    """
    if name is None:
        name = value.__name__
    CONSTANT_REGISTRY[name] = value


for _name in ("pi", "sqrt", "log10", "log2", "radians", "degrees", "ceil", "floor"):
    register_constant(getattr(math, _name), _name)
register_constant(SPEED_OF_LIGHT, "c")
register_constant(math, "math")


def accepted_kwargs(function: th.Callable, **kwargs) -> th.Dict[str, th.Any]:
    """
    Filters keyword arguments down to the ones the function signature accepts.

    Args:
        function (typing.Callable): The function (or class) to inspect.
        **kwargs: The candidate keyword arguments.

    Returns:
        dict: The accepted keyword arguments.
    """
    params = inspect.signature(function).parameters
    if any(p.kind == inspect.Parameter.VAR_KEYWORD for p in params.values()):
        return dict(kwargs)
    return {name: kwargs[name] for name in params if name in kwargs}


def call_with_accepted_kwargs(function: th.Callable, *args, **kwargs) -> th.Any:
    """
    Calls a function with the keyword arguments it can take, and ignores the rest.
    Allocator factories are called this way so that plug-ins only declare what they need.

    Args:
        function (typing.Callable): The function to call.
        *args: The positional arguments to pass to the function.
        **kwargs: The candidate keyword arguments.

    Returns:
        typing.Any: The result of the function call.
    """
    return function(*args, **accepted_kwargs(function, **kwargs))


def evaluate(expression: th.Any, context: th.Optional[ContextType] = None) -> th.Any:
    """
    Evaluate a raw configuration value.

    Non-string values are returned as is. Strings are first tried as a dotted lookup in the
    context (or the constant registry), then evaluated as a python expression with the
    constant registry and the context as globals, e.g. "10 * c / carrier_frequency_hz".

    Args:
        expression (typing.Any): The value to evaluate.
        context (dict): Extra names available to the expression (other configuration fields).

    Returns:
        The result of the evaluation.

    Raises:
        ValueError: If the expression could not be evaluated.
    """
    if not isinstance(expression, str):
        return expression
    namespace = dict(CONSTANT_REGISTRY)
    namespace.update(context or {})

    value = lookup(expression.strip(), context=namespace, strict=False)
    if value is not None and value is not _NoValue:
        return value
    try:
        return eval(expression, {"__builtins__": {"min": min, "max": max, "abs": abs, "round": round}}, namespace)
    except Exception as e:
        raise ValueError("Could not evaluate expression %r: %s" % (expression, e)) from e

import typing as th
import types

# types
ContextType = th.Union[
    th.Dict[str, th.Any], types.ModuleType, th.Any
]  # anything that we can get items or attributes from
Expression = th.Union[str, int, float, bool, None]  # raw configuration values before evaluation
NestedMapping = th.Dict[str, th.Any]  # sectioned raw configuration, e.g. {"learning": {"epsilon": 0.2}}


# a singleton object to represent the absence of a value
class _NoValue:
    pass

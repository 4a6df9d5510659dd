from .lookup import lookup, importer
from .assign import assign, flatten
from .expressions import (
    evaluate,
    register_constant,
    accepted_kwargs,
    call_with_accepted_kwargs,
    CONSTANT_REGISTRY,
    SPEED_OF_LIGHT,
)
from .types import ContextType, Expression, NestedMapping

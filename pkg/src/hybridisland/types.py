from typing import Any, Callable, Dict

ConfigDict = Dict[str, Any]  # type: ignore[misc]
ConfigValue = Any  # type: ignore[misc]
Converter = Callable[[object], ConfigValue]


class ParseError(Exception):
    pass

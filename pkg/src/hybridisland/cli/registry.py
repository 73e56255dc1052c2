from abc import ABC, abstractmethod
from argparse import ArgumentParser, Namespace
from dataclasses import dataclass
from typing import Callable, Dict, Type


class Command(ABC):
    """A ``hybridisland`` subcommand.

    ``execute`` returns the process exit code.
    """

    help: str = ""

    @staticmethod
    @abstractmethod
    def add_cli_arguments(parser: ArgumentParser) -> None:
        raise NotImplementedError()

    @abstractmethod
    def execute(self, args: Namespace) -> int:
        raise NotImplementedError()


@dataclass
class Registry:
    commands: Dict[str, Type[Command]]


_REGISTRY = Registry(commands={})


def cli_register(name: str) -> Callable[[Type[Command]], Type[Command]]:
    def decorator(cls: Type[Command]) -> Type[Command]:
        if not issubclass(cls, Command):
            raise ValueError(f"Can only register classes which extend '{Command}'.")
        if name in _REGISTRY.commands:
            raise ValueError(f"Command '{name}' is already registered.")
        _REGISTRY.commands[name] = cls
        return cls

    return decorator

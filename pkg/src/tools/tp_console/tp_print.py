"""print functions

Everything goes to stderr; stdout is reserved for pooled values and reports.
"""

from typing import Optional

import click

GLOBAL_ERROR_COUNT = 0
GLOBAL_ERROR_LIST = []


class Colors:
    """Color names understood by click.style"""

    HEADER = "magenta"
    OKBLUE = "blue"
    OKGREEN = "green"
    WARNING = "yellow"
    FAIL = "red"


def message(color: str, msg: str, bold: bool = False) -> str:
    """Returns a message in color"""
    return click.style(msg, fg=color, bold=bold)


def print_color(color: str, msg: str, bold: bool = False) -> None:
    """Prints a message in color"""
    click.echo(message(color, msg, bold), err=True)


def header(msg: str) -> None:
    print_color(Colors.HEADER, msg, bold=True)


def info(msg: str) -> None:
    """Prints an info message"""
    print_color(Colors.OKBLUE, msg)


def success(msg: str) -> None:
    """Prints a success message"""
    print_color(Colors.OKGREEN, msg)


def warning(msg: str) -> None:
    """Prints a warning message"""
    print_color(Colors.WARNING, msg)


def error(msg: str, element: Optional[str] = None) -> int:
    """Prints an error message and increments the global error count"""
    global GLOBAL_ERROR_COUNT  # pylint: disable=global-statement
    global GLOBAL_ERROR_LIST  # pylint: disable=global-variable-not-assigned
    if element:
        GLOBAL_ERROR_LIST.append(element)
    GLOBAL_ERROR_COUNT += 1
    print_color(Colors.FAIL, msg)
    return GLOBAL_ERROR_COUNT


def reset_errors() -> None:
    global GLOBAL_ERROR_COUNT  # pylint: disable=global-statement
    GLOBAL_ERROR_COUNT = 0
    GLOBAL_ERROR_LIST.clear()


def summary(task: str) -> None:
    """Prints the end-of-run line, listing failed elements if there were errors"""
    if GLOBAL_ERROR_COUNT == 0:
        success(f"{task} finished with no errors!")
        return
    print_color(Colors.FAIL, f"{task} finished with {GLOBAL_ERROR_COUNT} errors!")
    if GLOBAL_ERROR_LIST:
        click.echo("Failed elements:", err=True)
        for element in GLOBAL_ERROR_LIST:
            click.echo(element, err=True)

import importlib
import sys

from utils.errors import ConfigError

# ANSI escape sequences for colors
COLORS = {
    "gray": "\033[90m",
    "red": "\033[91m",
    "green": "\033[92m",
    "yellow": "\033[93m",
    "blue": "\033[94m",
    "magenta": "\033[95m",
    "cyan": "\033[96m",
    "white": "\033[97m",
    "reset": "\033[0m",
}

LEVEL_COLORS = {
    "info": COLORS["blue"],
    "warn": COLORS["yellow"],
    "error": COLORS["red"],
    "success": COLORS["green"],
}


def snake_to_camel(snake_str):
    """Convert snake_case to CamelCase (PascalCase)."""
    return "".join(part.capitalize() for part in snake_str.split("_"))


def print_colored(message, color=None, file=None):
    """Print a status message on standard error, coloured when it is a terminal.

    `color` is a level (info, warn, error, success) or a raw color name.
    Standard output stays free for JSON lines.
    """
    stream = file if file is not None else sys.stderr
    if not getattr(stream, "isatty", lambda: False)():
        print(message, file=stream)
        return
    code = COLORS.get(color) or LEVEL_COLORS.get(color, COLORS["reset"])
    print(f"{code}{message}{COLORS['reset']}", file=stream)


def load_plugin_class(package, name, module, suffix, debug=False):
    """Resolve `<package>.<name>.<module>.<Name><suffix>`, e.g. models.mavt.model.MavtModel.

    Unknown names raise ConfigError (a ValueError) chained to the import failure.
    """
    class_name = snake_to_camel(name) + suffix
    if debug:
        print_colored(f"{suffix} class name: {class_name}", "gray")
    try:
        plugin_module = importlib.import_module(f"{package}.{name}.{module}")
    except ModuleNotFoundError as e:
        raise ConfigError(f"{suffix} '{name}' not found in {package}. Error: {e}") from e
    try:
        return getattr(plugin_module, class_name)
    except AttributeError as e:
        raise ConfigError(
            f"{suffix} class '{class_name}' not found in {package}.{name}.{module}"
        ) from e

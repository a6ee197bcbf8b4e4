"""
Reader and writer for the flat ``key = value`` text used by run configs and
serialized problems.
"""
import numbers

from .exceptions import ProblemInputError


def parse_flat_text(text):
    """
    Parse ``key = value`` lines into an ordered dict of strings.

    Blank lines and lines starting with ``#`` are skipped. A line without ``=``
    or a repeated key is an error.
    """
    entries = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ProblemInputError(f'line {line_number}: expected "key = value", got {raw!r}')
        if key in entries:
            raise ProblemInputError(f'line {line_number}: duplicate key {key!r}')
        entries[key] = value.strip()
    return entries


def split_list(value):
    """Split a comma-separated value, dropping surrounding whitespace and empty items."""
    return [item.strip() for item in value.split(',') if item.strip()]


def format_number(value):
    # repr of a Python float is the shortest string that round-trips
    if isinstance(value, numbers.Integral):
        return str(value)
    return repr(float(value))


def dump_flat_text(entries):
    return ''.join(f'{key} = {value}\n' for key, value in entries.items())

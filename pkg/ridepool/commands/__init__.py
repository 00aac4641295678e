from functools import wraps

import click

from ridepool.errors import ConfigError, DemandError, GraphError, RidepoolError


def cli_errors(fn):
    """Map library errors to click: bad user input exits 2, anything else exits 1."""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, GraphError, DemandError) as exc:
            raise click.UsageError(str(exc)) from exc
        except (RidepoolError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


def number_list(kind):
    """click callback parsing "1,2,3" into a list of `kind`."""
    def parse(ctx, param, value):
        if value is None:
            return None
        try:
            return [kind(item) for item in value.split(",") if item.strip()]
        except ValueError:
            raise click.BadParameter(f"expected a comma-separated list, got {value!r}") from None
    return parse

from datetime import datetime, timezone
import json
import logging
import traceback

import numpy as np

LOG_LEVELS = ("debug", "info", "warning", "error", "critical")

# what format_exc returns outside an except block
_NO_EXCEPTION = "NoneType: None\n"


def json_default(value):
    """
    Convert values the json module cannot serialise on its own.

    Args:
        value: Object json.dumps gave up on

    Returns:
        A JSON-compatible representation of the value
    """
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    return str(value)


def to_json(data, indent=None):
    """Serialise data to JSON, tolerating numpy scalars and arrays."""
    return json.dumps(data, indent=indent, default=json_default)


def log_event(event_type, data, level="info", include_stacktrace=True):
    """
    Log one structured event as a single JSON line.

    Args:
        event_type (str): snake_case event name, e.g. "cell_completed"
        data (dict): Event payload, numpy values allowed
        level (str): One of LOG_LEVELS
        include_stacktrace (bool): Attach the active traceback to error events
    """
    if level not in LOG_LEVELS:
        logging.warning(f"Invalid log level '{level}' for {event_type}, defaulting to 'info'")
        level = "info"

    # payloads of filtered-out debug events are never serialised
    if not logging.getLogger().isEnabledFor(getattr(logging, level.upper())):
        return

    log_data = {
        "event": event_type,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "data": data,
    }
    if level == "error" and include_stacktrace:
        stacktrace = traceback.format_exc()
        if stacktrace != _NO_EXCEPTION:
            log_data["stacktrace"] = stacktrace

    try:
        log_message = to_json(log_data)
    except (TypeError, ValueError) as e:
        # circular payloads and the like; keep the event, drop the data
        log_message = to_json(
            {
                "event": event_type,
                "timestamp": log_data["timestamp"],
                "data": repr(data),
                "encoding_error": str(e),
            }
        )
    getattr(logging, level)(log_message)

from datetime import datetime, timezone
from time import perf_counter
from typing import Any


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_audit() -> dict[str, Any]:
    return {"steps": [], "errors": []}


def start_step(audit: dict[str, Any], name: str) -> dict[str, Any]:
    step = {
        "name": name,
        "started_at": _now(),
        "ended_at": None,
        "duration_s": None,
        "notes": "",
        "_t0": perf_counter(),
    }
    audit["steps"].append(step)
    return step


def end_step(step: dict[str, Any], notes: str = "") -> float:
    """Close a step and return its wall-clock duration in seconds."""
    step["ended_at"] = _now()
    duration = perf_counter() - step.pop("_t0", perf_counter())
    step["duration_s"] = duration
    combined = notes.strip()
    duration_note = f"duration={duration:.2f}s"
    step["notes"] = f"{combined} | {duration_note}" if combined else duration_note
    return duration


def add_error(audit: dict[str, Any], message: str) -> None:
    audit.setdefault("errors", []).append(message)

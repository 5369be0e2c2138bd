"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    LINES[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    return passed

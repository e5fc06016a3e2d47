"""Shared sink for one-line acceptance verdicts."""

LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    LINES.append(line)
    print(line)
    return line

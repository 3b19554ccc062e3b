"""One PASS/FAIL line per acceptance criterion, echoed in the run summary."""
LINES = []


def verdict(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    LINES.append(line)
    return ok

import os

from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.register_profile("thorough", deadline=None, max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

#: (criterion number, title, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    merged: dict = {}
    for number, title, passed, detail in ACCEPTANCE:
        entry = merged.setdefault(number, [title, True, []])
        entry[1] = entry[1] and passed
        entry[2].append(detail)
    terminalreporter.section("acceptance criteria")
    for number in sorted(merged):
        title, passed, details = merged[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number:>2} {title}: {'; '.join(details)}")

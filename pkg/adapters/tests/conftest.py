ACCEPTANCE_CRITERIA = {
    "test_criterion_10_adapter_conformance": (
        "reference adapters: OCR regions include rendered strings, offline "
        "text classification, byte-identical replay"
    ),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            name = getattr(report, "location", (None, None, ""))[2]
            base = name.split("[")[0]
            if base in ACCEPTANCE_CRITERIA:
                verdict = "PASS" if status == "passed" else "FAIL"
                lines.append(f"criterion 10 {verdict}: {ACCEPTANCE_CRITERIA[base]}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)

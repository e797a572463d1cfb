import json
import sys
from pathlib import Path

import pytest

from cppgen.adapters import AdapterRole, AdapterSpec

# Replay adapter used by the whole primary suite: answers requests from a
# recorded transcript file, byte-for-byte, with no external backends.
REPLAY_SOURCE = '''\
#!/usr/bin/env python3
"""Replay adapter: answers wire requests from a recorded transcript."""
import json
import sys


def main():
    with open(sys.argv[1], encoding="utf-8") as fh:
        entries = json.load(fh)
    request = json.load(sys.stdin)
    for entry in entries:
        if entry["request"] == request:
            sys.stdout.write(entry["response"])
            return int(entry.get("exit", 0))
    sys.stdout.write(json.dumps({"error": "no transcript entry for request"}))
    return 3


if __name__ == "__main__":
    sys.exit(main())
'''


@pytest.fixture(scope="session")
def replay_script(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("adapters") / "replay_adapter.py"
    path.write_text(REPLAY_SOURCE, encoding="utf-8")
    return path


def make_request(role: str, payload: dict) -> dict:
    return {"role": role, "version": 1, "payload": payload}


class TranscriptBuilder:
    """Builds transcript files and AdapterSpecs that replay them."""

    def __init__(self, replay_script: Path, directory: Path):
        self.replay_script = replay_script
        self.directory = directory
        self._count = 0

    def adapter(self, role: AdapterRole, entries: list[dict]) -> AdapterSpec:
        self._count += 1
        path = self.directory / f"transcript_{self._count}.json"
        path.write_text(json.dumps(entries, indent=2), encoding="utf-8")
        return AdapterSpec(
            executable=sys.executable,
            args=(str(self.replay_script), str(path)),
            role=role,
        )

    def ocr(self, image_path, regions: list[dict]) -> AdapterSpec:
        entry = {
            "request": make_request("ocr", {"image_path": str(image_path)}),
            "response": json.dumps({"regions": regions}),
            "exit": 0,
        }
        return self.adapter(AdapterRole.OCR, [entry])


@pytest.fixture
def transcripts(replay_script, tmp_path) -> TranscriptBuilder:
    return TranscriptBuilder(replay_script, tmp_path)


# ---------------------------------------------------------------------------
# Acceptance reporting: one pass/fail line per criterion in the summary.

ACCEPTANCE_CRITERIA = {
    "test_criterion_01_iou_oracle": "IoU equals brute-force pixel counting on 1000 random pairs",
    "test_criterion_02_segment_sim": "segment_sim worked examples and lcs brute-force oracle",
    "test_criterion_03_phrase_sim": "phrase_sim fixtures and path_similarity BFS oracle",
    "test_criterion_04_icon_localization": "synthetic screenshots: glyphs recovered, distractors filtered",
    "test_criterion_05_knn": "kNN circle/cross fixture accuracy and self-classification",
    "test_criterion_06_keyword_classification": "60-case keyword classification table",
    "test_criterion_07_end_to_end": "end-to-end fixture with fallback and reproducible output",
    "test_criterion_08_eval_harness": "evaluation metrics fixture and beta monotonicity",
    "test_criterion_09_dataset_loader": "dataset loader accepts valid and rejects corrupt fixtures",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            name = getattr(report, "location", (None, None, ""))[2]
            base = name.split("[")[0]
            if base in ACCEPTANCE_CRITERIA:
                verdict = "PASS" if status == "passed" else "FAIL"
                num = base.split("_")[2]
                lines.append(f"criterion {int(num):2d} {verdict}: {ACCEPTANCE_CRITERIA[base]}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

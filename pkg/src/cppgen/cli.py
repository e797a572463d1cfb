"""Command-line entry point wiring the pipeline end to end.

Exit codes: 0 success, 1 input/config error, 2 external (network/adapter)
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .adapters import AdapterError, AdapterRole, AdapterSpec
from .config import ConfigError, RunConfig, parse_config_file
from .dataset import DatasetError, load_dataset, read_bundle, write_bundle
from .detect import KnnModel, detect_contexts, load_image, train_knn
from .evaluate import ALL_TASKS, MetricsReport, SegmentText, evaluate_all
from .model import DataType, KeywordResource
from .policy import (
    FetchError,
    PolicyParseError,
    fetch_policy,
    load_heading_rules,
    parse_structure,
    parse_text_policy,
)
from .present import (
    CppBundle,
    ScreenshotEntry,
    assemble_bundle,
    canonical_json,
    group_to_json,
    lack_of_disclosure_report,
    render_html,
    render_overlay,
)
from .segments import NbModel, extract_segments
from .taxonomy import TaxonomyError, load_default_taxonomy, load_taxonomy

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_EXTERNAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # input/usage problems must exit 1, not argparse's default 2
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cppgen", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"cppgen {__version__} (bundle schema {SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="detect privacy-related contexts on screenshots")
    _add_detect_args(detect, required_ocr=True)
    detect.add_argument("--out", required=True, help="output contexts JSON path")

    extract = sub.add_parser("extract", help="extract per-data-type policy segments")
    _add_extract_args(extract)
    extract.add_argument("--out", required=True, help="output segment groups JSON path")

    generate = sub.add_parser("generate", help="full pipeline: detect + extract + render")
    _add_detect_args(generate, required_ocr=False)
    _add_extract_args(generate)
    generate.add_argument("--app-id", required=True)
    generate.add_argument("--out", required=True, help="output directory")
    generate.add_argument("--html", action="store_true", help="write report.html")
    generate.add_argument("--overlays", action="store_true", help="write annotated screenshots")
    generate.add_argument(
        "--reproducible", action="store_true", help="zero timestamps for byte-identical output"
    )

    evaluate = sub.add_parser("evaluate", help="score predictions against a benchmark dataset")
    evaluate.add_argument("--dataset", required=True, help="benchmark dataset root")
    evaluate.add_argument("--pred", required=True, help="directory of generated bundles")
    evaluate.add_argument("--beta", type=float, default=None, help="IoU threshold (default 0.5)")
    evaluate.add_argument(
        "--segment-threshold", type=float, default=None, help="segment_sim threshold (default 0.8)"
    )
    evaluate.add_argument("--config", default=None, help="key = value config file")
    evaluate.add_argument("--format", choices=("json", "table"), default="table")
    evaluate.add_argument("--jobs", type=int, default=None)
    evaluate.add_argument("--out", required=True, help="output metrics JSON path")

    lack = sub.add_parser("lack", help="report contexts lacking policy disclosure")
    lack.add_argument("--bundle", required=True, help="bundle.json produced by generate")
    lack.add_argument("--out", required=True, help="output report JSON path")

    return parser


def _add_detect_args(parser, required_ocr: bool):
    parser.add_argument(
        "--screenshot",
        action="append",
        default=[],
        metavar="PATH",
        help="screenshot image; repeatable",
    )
    parser.add_argument(
        "--ocr-adapter",
        required=required_ocr,
        default=None,
        help="OCR adapter command, e.g. 'cpp-ocr-adapter --backend auto'",
    )
    parser.add_argument("--text-adapter", default=None, help="text classifier adapter command")
    parser.add_argument("--icon-adapter", default=None, help="icon classifier adapter command")
    parser.add_argument("--icon-model", default=None, help="icon training directory for kNN")
    parser.add_argument("--config", default=None, help="key = value config file")
    parser.add_argument("--jobs", type=int, default=None, help="parallel screenshot workers")


def _add_extract_args(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--policy", default=None, help="policy HTML/text file")
    group.add_argument("--policy-url", default=None, help="policy URL")
    parser.add_argument("--keywords", default=None, help="keyword resource JSON file")
    parser.add_argument("--taxonomy", default=None, help="taxonomy TSV file")
    parser.add_argument("--nb-model", default=None, help="relevance training file (label TAB sentence)")
    parser.add_argument("--heading-rules", default=None, help="heading phrase list, one per line")


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "detect":
            return _cmd_detect(args)
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "lack":
            return _cmd_lack(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, DatasetError, PolicyParseError, TaxonomyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FetchError as exc:
        print(f"fetch error: {exc}", file=sys.stderr)
        # a missing local policy file is an input error; network trouble is external
        return EXIT_INPUT if exc.reason == "file" else EXIT_EXTERNAL
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL


def _load_run_config(args) -> RunConfig:
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else None
    overrides: dict[str, object] = {}
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    if getattr(args, "beta", None) is not None:
        overrides["beta"] = args.beta
    if getattr(args, "segment_threshold", None) is not None:
        overrides["segment_threshold"] = args.segment_threshold
    if getattr(args, "reproducible", False):
        overrides["reproducible"] = True
    if getattr(args, "heading_rules", None):
        overrides["heading_rules"] = load_heading_rules(args.heading_rules)
    return RunConfig.build(file_values, overrides)


def _adapter(command: Optional[str], role: AdapterRole) -> Optional[AdapterSpec]:
    if not command:
        return None
    return AdapterSpec.from_command(command, role)


def _detect_all(args, cfg: RunConfig) -> list[ScreenshotEntry]:
    screenshots = [Path(p) for p in args.screenshot]
    if not screenshots:
        raise UsageError("at least one --screenshot is required")
    for path in screenshots:
        if not path.is_file():
            raise UsageError(f"screenshot {path} does not exist")
    ocr = _adapter(args.ocr_adapter, AdapterRole.OCR)
    text = _adapter(args.text_adapter, AdapterRole.TEXT_CLASSIFIER)
    icon = _adapter(args.icon_adapter, AdapterRole.ICON_CLASSIFIER)
    model: Optional[KnnModel] = None
    if args.icon_model:
        model = train_knn(args.icon_model, k=cfg.knn_k, side=cfg.knn_side)

    def run_one(path: Path) -> ScreenshotEntry:
        contexts = detect_contexts(
            path,
            screenshot_id=path.name,
            ocr_adapter=ocr,
            text_adapter=text,
            icon_adapter=icon,
            model=model,
            params=cfg.localizer,
        )
        return ScreenshotEntry(
            screenshot_id=path.name, image_path=str(path), contexts=tuple(contexts)
        )

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            entries = list(pool.map(run_one, screenshots))
    else:
        entries = [run_one(p) for p in screenshots]
    return sorted(entries, key=lambda e: e.screenshot_id)


def _cmd_detect(args) -> int:
    cfg = _load_run_config(args)
    _check_resource_files(args)
    entries = _detect_all(args, cfg)
    payload = {
        "schema": SCHEMA_VERSION,
        "screenshots": [
            {
                "screenshot_id": e.screenshot_id,
                "image": e.image_path,
                "contexts": [c.to_json() for c in e.contexts],
            }
            for e in entries
        ],
    }
    _write_text(args.out, canonical_json(payload))
    print(f"wrote {args.out}")
    return EXIT_OK


def _check_resource_files(args):
    """Resource paths must exist before any pipeline work starts."""
    checks = [
        ("--keywords", getattr(args, "keywords", None), Path.is_file),
        ("--taxonomy", getattr(args, "taxonomy", None), Path.is_file),
        ("--nb-model", getattr(args, "nb_model", None), Path.is_file),
        ("--heading-rules", getattr(args, "heading_rules", None), Path.is_file),
        ("--icon-model", getattr(args, "icon_model", None), Path.is_dir),
    ]
    for flag, value, predicate in checks:
        if value and not predicate(Path(value)):
            raise UsageError(f"{flag} path {value} does not exist")


def _load_resources(args):
    keywords = KeywordResource.default()
    if args.keywords:
        with open(args.keywords, encoding="utf-8") as fh:
            keywords = KeywordResource.from_mapping(json.load(fh))
    tax = load_taxonomy(args.taxonomy) if args.taxonomy else load_default_taxonomy()
    nb = NbModel.from_training_file(args.nb_model) if args.nb_model else None
    return keywords, tax, nb


def _extract_groups(args, cfg: RunConfig):
    source = args.policy_url if args.policy_url else args.policy
    result = fetch_policy(source)
    if args.policy and Path(args.policy).suffix.lower() == ".txt":
        doc = parse_text_policy(result.content, source=result.final_url)
    else:
        doc = parse_structure(result.content, source=result.final_url)
    keywords, tax, nb = _load_resources(args)
    groups = extract_segments(doc, keywords, tax, nb, cfg.match)
    return doc, groups


def _cmd_extract(args) -> int:
    cfg = _load_run_config(args)
    _check_resource_files(args)
    doc, groups = _extract_groups(args, cfg)
    payload = {
        "schema": SCHEMA_VERSION,
        "source": doc.source,
        "structured": doc.structured,
        "groups": {dt.value: group_to_json(groups[dt]) for dt in DataType},
    }
    _write_text(args.out, canonical_json(payload))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    cfg = _load_run_config(args)
    _check_resource_files(args)
    out_dir = Path(args.out)
    entries = _detect_all(args, cfg)
    doc, groups = _extract_groups(args, cfg)
    meta = {
        "tool_version": __version__,
        "schema": SCHEMA_VERSION,
        "config": cfg.snapshot(),
        "adapters": {
            role: command
            for role, command in (
                ("ocr", args.ocr_adapter),
                ("text_classifier", args.text_adapter),
                ("icon_classifier", args.icon_adapter),
            )
            if command
        },
        "policy_source": doc.source,
    }
    bundle = assemble_bundle(
        args.app_id, entries, groups, meta, reproducible=cfg.reproducible
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_bundle(bundle, out_dir / "bundle.json")
    if args.html:
        _write_text(out_dir / "report.html", render_html(bundle))
    if args.overlays:
        from PIL import Image

        overlay_dir = out_dir / "overlays"
        overlay_dir.mkdir(exist_ok=True)
        for entry in bundle.screenshots:
            image = load_image(entry.image_path)
            annotated = render_overlay(image, entry.contexts, cfg.palette)
            Image.fromarray(annotated).save(overlay_dir / f"{Path(entry.screenshot_id).stem}.png")
    print(f"wrote {out_dir / 'bundle.json'}")
    return EXIT_OK


def _evaluate_app(record, pred_root: Path, cfg: RunConfig):
    """Per-app metrics; apps are independent, so these run in parallel and
    merge in dataset order (count aggregation is order-independent)."""
    shots: dict[str, list] = {sid: [] for sid in record.screenshot_ids()}
    for ctx in record.gt_contexts:
        shots[ctx.screenshot_id].append(ctx)
    gt_contexts = {record.app_id: shots}
    gt_segments = {
        record.app_id: {
            dt: SegmentText(fallback=sentences is None, sentences=sentences or ())
            for dt, sentences in record.gt_segments.items()
        }
    }
    pred_contexts = {}
    pred_segments = {}
    bundle_path = pred_root / record.app_id / "bundle.json"
    if not bundle_path.is_file():
        bundle_path = pred_root / f"{record.app_id}.json"
    if bundle_path.is_file():
        bundle = read_bundle(bundle_path)
        pred_contexts[record.app_id] = {
            entry.screenshot_id: list(entry.contexts) for entry in bundle.screenshots
        }
        pred_segments[record.app_id] = {
            dt: SegmentText(fallback=group.fallback, sentences=tuple(group.sentence_texts()))
            for dt, group in bundle.groups.items()
        }
    else:
        logger.warning("no prediction bundle for app %s; counting as misses", record.app_id)
    return evaluate_all(pred_contexts, gt_contexts, pred_segments, gt_segments, cfg.eval_cfg)


def _cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    records = load_dataset(args.dataset)
    pred_root = Path(args.pred)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            partials = list(pool.map(lambda r: _evaluate_app(r, pred_root, cfg), records))
    else:
        partials = [_evaluate_app(r, pred_root, cfg) for r in records]
    report = MetricsReport()
    for task in ALL_TASKS:
        for dt in DataType:
            report.counts(task, dt)
    for partial in partials:
        report.merge(partial)
    _write_text(args.out, canonical_json(report.to_json()))
    if args.format == "json":
        print(canonical_json(report.to_json()), end="")
    else:
        print(report.format_table())
    return EXIT_OK


def _cmd_lack(args) -> int:
    bundle = read_bundle(args.bundle)
    report = lack_of_disclosure_report(bundle)
    _write_text(args.out, canonical_json(report))
    print(f"{report['total']} context(s) lack disclosure")
    return EXIT_OK


def _write_text(path: str | Path, content: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration: defaults, config-file parsing, flag precedence."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .detect import LocalizerParams
from .model import DataType, EvalConfig
from .present import DEFAULT_PALETTE
from .segments import MatchConfig


class ConfigError(ValueError):
    pass


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

_FLOAT_KEYS = {
    "max_area_ratio",
    "min_area_ratio",
    "min_squareness",
    "ocr_overlap_ratio",
    "binarize_offset",
    "phrase_sim_threshold",
    "beta",
    "segment_threshold",
}
_INT_KEYS = {"binarize_block", "knn_k", "knn_side", "jobs"}
_BOOL_KEYS = {"use_relevance_stage", "reproducible"}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """`key = value` lines, UTF-8; blank lines and `#` comments ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _parse_color(value: str) -> tuple[int, int, int]:
    v = value.strip().lstrip("#")
    if len(v) != 6:
        raise ConfigError(f"color must be #rrggbb, got {value!r}")
    try:
        return tuple(int(v[i : i + 2], 16) for i in (0, 2, 4))  # type: ignore[return-value]
    except ValueError as exc:
        raise ConfigError(f"color must be #rrggbb, got {value!r}") from exc


@dataclass
class RunConfig:
    """Merged view of all module parameters; flags > config file > defaults."""

    localizer: LocalizerParams = field(default_factory=LocalizerParams)
    match: MatchConfig = field(default_factory=MatchConfig)
    eval_cfg: EvalConfig = field(default_factory=EvalConfig)
    knn_k: int = 5
    knn_side: int = 32
    jobs: int = 1
    reproducible: bool = False
    palette: dict[DataType, tuple[int, int, int]] = field(
        default_factory=lambda: dict(DEFAULT_PALETTE)
    )

    @classmethod
    def build(
        cls,
        file_values: Optional[Mapping[str, str]] = None,
        overrides: Optional[Mapping[str, object]] = None,
    ) -> "RunConfig":
        merged: dict[str, object] = {}
        for key, raw in (file_values or {}).items():
            merged[key] = _coerce(key, raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value

        palette = dict(DEFAULT_PALETTE)
        for key in list(merged):
            if key.startswith("palette."):
                name = key.split(".", 1)[1]
                try:
                    dt = DataType.from_name(name)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
                color = merged.pop(key)
                palette[dt] = color if isinstance(color, tuple) else _parse_color(str(color))

        def take(key, default):
            return merged.pop(key, default)

        try:
            localizer = LocalizerParams(
                max_area_ratio=take("max_area_ratio", 0.10),
                min_area_ratio=take("min_area_ratio", 0.0005),
                min_squareness=take("min_squareness", 0.6),
                ocr_overlap_ratio=take("ocr_overlap_ratio", 0.5),
                binarize_block=take("binarize_block", 31),
                binarize_offset=take("binarize_offset", 10.0),
            )
            match = MatchConfig(
                phrase_sim_threshold=take("phrase_sim_threshold", 0.8),
                heading_rules=take("heading_rules", None),
                use_relevance_stage=take("use_relevance_stage", True),
            )
            eval_cfg = EvalConfig(
                iou_threshold=take("beta", 0.5),
                segment_threshold=take("segment_threshold", 0.8),
            )
            config = cls(
                localizer=localizer,
                match=match,
                eval_cfg=eval_cfg,
                knn_k=int(take("knn_k", 5)),
                knn_side=int(take("knn_side", 32)),
                jobs=int(take("jobs", 1)),
                reproducible=bool(take("reproducible", False)),
                palette=palette,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if merged:
            raise ConfigError(f"unknown config keys: {sorted(merged)}")
        if config.knn_k < 1 or config.knn_side < 1 or config.jobs < 1:
            raise ConfigError("knn_k, knn_side, and jobs must be >= 1")
        return config

    def snapshot(self) -> dict:
        """Plain-dict view recorded in bundle metadata."""
        return {
            "max_area_ratio": self.localizer.max_area_ratio,
            "min_area_ratio": self.localizer.min_area_ratio,
            "min_squareness": self.localizer.min_squareness,
            "ocr_overlap_ratio": self.localizer.ocr_overlap_ratio,
            "binarize_block": self.localizer.binarize_block,
            "binarize_offset": self.localizer.binarize_offset,
            "phrase_sim_threshold": self.match.phrase_sim_threshold,
            "use_relevance_stage": self.match.use_relevance_stage,
            "beta": self.eval_cfg.iou_threshold,
            "segment_threshold": self.eval_cfg.segment_threshold,
            "knn_k": self.knn_k,
            "knn_side": self.knn_side,
        }


def _coerce(key: str, raw: str) -> object:
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from exc
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{key} must be a boolean, got {raw!r}")
    return raw

"""Flat ``key=value`` files: training configs and run manifests.

Files are UTF-8, one entry per line, ``#`` starts a comment.  Keys accept
either dashes or underscores, mirroring the command-line flags.
"""

from __future__ import annotations

import shlex
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UsageError
from .trainer import TrainConfig


def read_key_values(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_key_values(path: str | Path, items: dict[str, object]) -> None:
    lines = [f"{k}={'' if v is None else v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _convert(name: str, tp, raw: str):
    args = typing.get_args(tp)
    if type(None) in args:
        if raw.lower() in ("", "none"):
            return None
        tp = next(a for a in args if a is not type(None))
    try:
        if tp is bool:
            return _BOOL[raw.lower()]
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
    except (KeyError, ValueError):
        raise UsageError(f"config key {name}: cannot parse {raw!r}") from None
    return raw


def train_config_from(file_values: dict[str, str], overrides: dict[str, object]) -> TrainConfig:
    """Merge dataclass defaults, file values and flag overrides (flags win)."""
    hints = typing.get_type_hints(TrainConfig)
    known = set(TrainConfig.field_names())
    kwargs: dict[str, object] = {}
    for key, raw in file_values.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
        kwargs[key] = _convert(key, hints[key], raw)
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    return TrainConfig(**kwargs)


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict[str, object] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    version: str = ""
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0
    extra: dict[str, object] = field(default_factory=dict)

    def to_items(self) -> dict[str, object]:
        items: dict[str, object] = {
            "command": self.command,
            "argv": shlex.join(self.argv),
            "version": self.version,
            "seeds": ",".join(str(s) for s in self.seeds),
            "outputs": ",".join(self.outputs),
            "duration_s": f"{self.duration_s:.3f}",
        }
        for k, v in self.config.items():
            items[f"config.{k}"] = v
        for k, v in self.extra.items():
            items[f"result.{k}"] = v
        return items

    def write(self, path: str | Path) -> None:
        write_key_values(path, self.to_items())

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        kv = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            if "=" in raw:
                k, v = raw.split("=", 1)
                kv[k] = v
        return cls(
            command=kv.get("command", ""),
            argv=shlex.split(kv.get("argv", "")),
            config={k[7:]: v for k, v in kv.items() if k.startswith("config.")},
            seeds=[int(s) for s in kv.get("seeds", "").split(",") if s],
            version=kv.get("version", ""),
            outputs=[s for s in kv.get("outputs", "").split(",") if s],
            duration_s=float(kv.get("duration_s", 0) or 0),
            extra={k[7:]: v for k, v in kv.items() if k.startswith("result.")},
        )


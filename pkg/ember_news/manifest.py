from datetime import datetime, timezone
from pathlib import Path
from pydantic import BaseModel, Field

from ember_news.config import TrainConfig
from ember_news.utils import file_digest


MANIFEST_NAME = "manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """Provenance written next to every artifact a command produces."""
    command: str
    version: str
    seed: int | None = None
    config: dict[str, object] | None = None
    arguments: dict[str, str | int | float | bool | None] = Field(default_factory=dict)
    inputs: dict[str, str] = Field(default_factory=dict)
    artifacts: dict[str, str] = Field(default_factory=dict)
    started: str = Field(default_factory=utc_now)
    finished: str | None = None

    @classmethod
    def begin(cls, command: str, config: TrainConfig | None=None, seed: int | None=None, **arguments: str | int | float | bool | None) -> "RunManifest":
        from ember_news import __version__
        return cls(
            command=command,
            version=__version__,
            seed=seed if seed is not None else (config.seed if config is not None else None),
            config=config.model_dump(mode="json") if config is not None else None,
            arguments=arguments)

    def add_input(self, path: str | Path | None):
        if path is not None:
            self.inputs[str(path)] = file_digest(path)

    def add_artifact(self, path: str | Path):
        self.artifacts[Path(path).name] = file_digest(path)

    def finish(self, out_dir: str | Path) -> Path:
        self.finished = utc_now()
        target = Path(out_dir) / MANIFEST_NAME
        with open(target, "w", encoding="utf-8") as f:
            _ = f.write(self.model_dump_json(indent=2) + "\n")
        return target


def load_manifest(path: str | Path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as f:
        return RunManifest.model_validate_json(f.read())

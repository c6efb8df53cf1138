"""Run manifests: provenance record emitted for every CLI command."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field


@dataclass
class RunManifest:
    run_id: str
    tool_version: str
    config_hash: str
    command: str
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    info: dict = field(default_factory=dict)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def config_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def new_manifest(command: str, config_path, version: str) -> RunManifest:
    digest = config_digest(config_path)
    run_id = f"{command}-{int(time.time())}-{digest[:8]}"
    return RunManifest(run_id=run_id, tool_version=version, config_hash=digest,
                       command=command, inputs=[str(config_path)])

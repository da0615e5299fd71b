"""Level definitions and the text level-file format.

A level file holds header lines followed by grid rows::

    id: 1
    time: 100
    start: 0,1,E
    start!: 2,4,E
    #C#.G

Grid characters: ``.`` void, ``#`` platform, ``C`` coin, ``K`` key,
``F`` fruit, ``G`` goal, ``S`` spike. Object characters imply a platform
beneath them. Row 0 is the northernmost row and x grows east. ``start:``
lines are training starts in order; the single optional ``start!:`` line
is the reserved validation start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import LevelError

VOID, PLATFORM, GOAL, SPIKE = 0, 1, 2, 3

TILE_CHARS = {".": VOID, "#": PLATFORM, "G": GOAL, "S": SPIKE}
OBJECT_CHARS = {"C": "coin", "K": "key", "F": "fruit"}
OBJECT_SCORES = {"coin": 250, "key": 1000, "fruit": 2500}

ORIENTATIONS = ["N", "E", "S", "W"]
DELTAS = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}  # N, E, S, W

MAX_DIM = 64


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    orientation: int  # 0 N, 1 E, 2 S, 3 W


@dataclass
class LevelSpec:
    level_id: int
    time_limit_s: int
    grid: list[list[int]]  # [y][x] tile kinds
    objects: dict[tuple[int, int], str]
    starts: list[Pose] = field(default_factory=list)
    reserved_start: Pose | None = None

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0]) if self.grid else 0

    def tile(self, x: int, y: int) -> int:
        if 0 <= y < self.height and 0 <= x < self.width:
            return self.grid[y][x]
        return VOID

    def key_count(self) -> int:
        return sum(1 for kind in self.objects.values() if kind == "key")

    def validate(self) -> None:
        if not self.grid:
            raise LevelError("level has no grid rows")
        if self.height > MAX_DIM or self.width > MAX_DIM:
            raise LevelError(f"grid exceeds {MAX_DIM}x{MAX_DIM}")
        if any(len(row) != self.width for row in self.grid):
            raise LevelError("grid rows have unequal widths")
        if not self.starts:
            raise LevelError("level needs at least one start")
        for pose in self.starts + ([self.reserved_start] if self.reserved_start else []):
            if self.tile(pose.x, pose.y) == VOID:
                raise LevelError(f"start at ({pose.x},{pose.y}) is not on a tile")
        if self.key_count() > 0:
            if not any(GOAL in row for row in self.grid):
                raise LevelError("level has keys but no goal tile")
        if self.time_limit_s <= 0:
            raise LevelError("time limit must be positive")


def _parse_pose(text: str) -> Pose:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3 or parts[2] not in ORIENTATIONS:
        raise LevelError(f"bad start pose: {text!r}")
    return Pose(int(parts[0]), int(parts[1]), ORIENTATIONS.index(parts[2]))


def parse_level(text: str) -> LevelSpec:
    level_id = None
    time_limit = None
    starts: list[Pose] = []
    reserved: Pose | None = None
    grid: list[list[int]] = []
    objects: dict[tuple[int, int], str] = {}
    in_grid = False

    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if not in_grid:
            stripped = line.strip()
            if not stripped or stripped.startswith("//"):
                continue
            if stripped.startswith("id:"):
                level_id = int(stripped[3:].strip())
                continue
            if stripped.startswith("time:"):
                time_limit = int(stripped[5:].strip())
                continue
            if stripped.startswith("start!:"):
                if reserved is not None:
                    raise LevelError("more than one reserved start")
                reserved = _parse_pose(stripped[7:])
                continue
            if stripped.startswith("start:"):
                starts.append(_parse_pose(stripped[6:]))
                continue
            in_grid = True
        if in_grid:
            if not line.strip():
                continue
            y = len(grid)
            row = []
            for x, ch in enumerate(line):
                if ch in TILE_CHARS:
                    row.append(TILE_CHARS[ch])
                elif ch in OBJECT_CHARS:
                    row.append(PLATFORM)
                    objects[(x, y)] = OBJECT_CHARS[ch]
                else:
                    raise LevelError(f"unknown grid character {ch!r} at row {y}")
            grid.append(row)

    if level_id is None or time_limit is None:
        raise LevelError("level file needs id: and time: headers")
    width = max((len(r) for r in grid), default=0)
    for row in grid:
        row.extend([VOID] * (width - len(row)))
    spec = LevelSpec(level_id, time_limit, grid, objects, starts, reserved)
    spec.validate()
    return spec


def load_level_file(path: str | Path) -> LevelSpec:
    return parse_level(Path(path).read_text(encoding="utf-8"))


def bundled_levels() -> list[LevelSpec]:
    """The levels shipped with the cartridge, ordered by id."""
    specs = []
    root = resources.files(__package__) / "levels"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".lvl"):
            specs.append(parse_level(entry.read_text(encoding="utf-8")))
    specs.sort(key=lambda s: s.level_id)
    return specs


def load_levels_dir(path: str | Path) -> list[LevelSpec]:
    specs = [load_level_file(p) for p in sorted(Path(path).glob("*.lvl"))]
    if not specs:
        raise LevelError(f"no .lvl files in {path}")
    specs.sort(key=lambda s: s.level_id)
    return specs

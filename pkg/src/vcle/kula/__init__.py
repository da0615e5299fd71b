from .cartridge import KulaCartridge, RAM_BASE, RAM_MAP_LEN
from .levels import LevelSpec, Pose, load_level_file, load_levels_dir, parse_level
from .sounds import SoundEvent, synth_sound

__all__ = [
    "KulaCartridge",
    "RAM_BASE",
    "RAM_MAP_LEN",
    "LevelSpec",
    "Pose",
    "SoundEvent",
    "load_level_file",
    "load_levels_dir",
    "parse_level",
    "synth_sound",
]

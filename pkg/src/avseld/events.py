"""Event annotations and the 13-class label set."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .geometry import SphericalDoa

# STARSS23 label set, index = class id
CLASS_NAMES = (
    "female_speech",
    "male_speech",
    "clapping",
    "telephone",
    "laughter",
    "domestic_sounds",
    "walk",
    "door",
    "music",
    "musical_instrument",
    "water_tap",
    "bell",
    "knock",
)
NUM_CLASSES = len(CLASS_NAMES)
SPEECH_CLASSES = (0, 1)

LABEL_HOP_S = 0.1
FRAMES_PER_SEGMENT = 10


@dataclass(frozen=True)
class EventAnnotation:
    frame_index: int
    class_index: int
    source_index: int
    doa: SphericalDoa
    distance_cm: Optional[float] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        if not 0 <= self.class_index < NUM_CLASSES:
            raise ValueError(f"class index {self.class_index} outside 0..{NUM_CLASSES - 1}")
        if self.distance_cm is not None and self.distance_cm < 0:
            raise ValueError("distance must be non-negative")

    def with_doa(self, doa: SphericalDoa) -> "EventAnnotation":
        return EventAnnotation(self.frame_index, self.class_index, self.source_index, doa, self.distance_cm)

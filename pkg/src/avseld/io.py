"""Readers and writers for every file format the toolkit exchanges.

Byte-level layouts are documented in docs/formats.md.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .audio_features import SAMPLE_RATE, FoaClip
from .errors import ChannelCountError, DataError, FormatError, UnsupportedRateError
from .events import NUM_CLASSES, EventAnnotation
from .geometry import PanoramaSpec, PixelCoord, SphericalDoa
from .visual_features import KEYPOINT_KINDS, VISUAL_FRAMES, KeypointFrame, KeypointObservation, frames_from_observations

# ---------------------------------------------------------------- WAV

_PCM = 1
_EXTENSIBLE = 0xFFFE
_PCM_GUID_TAIL = b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


def _parse_fmt(chunk: bytes, path) -> tuple[int, int, int]:
    if len(chunk) < 16:
        raise FormatError(f"{path}: fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", chunk[:16])
    if tag == _EXTENSIBLE:
        if len(chunk) < 40:
            raise FormatError(f"{path}: truncated WAVE_FORMAT_EXTENSIBLE header")
        sub_tag = struct.unpack("<H", chunk[24:26])[0]
        if sub_tag != _PCM or chunk[26:40] != _PCM_GUID_TAIL:
            raise FormatError(f"{path}: only integer PCM is supported")
    elif tag != _PCM:
        raise FormatError(f"{path}: unsupported WAV format tag {tag:#x}; only integer PCM is read")
    if bits not in (16, 24, 32) or block_align != channels * bits // 8:
        raise FormatError(f"{path}: unsupported sample layout ({bits} bits, block {block_align})")
    return channels, rate, bits


def read_wav_pcm(path) -> tuple[np.ndarray, int, int]:
    """Return ``(int samples (channels, n), sample_rate, bits)``."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    fmt = pcm = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = data[pos:pos + 4], struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"{path}: chunk {cid!r} truncated")
        if cid == b"fmt ":
            fmt = _parse_fmt(body, path)
        elif cid == b"data":
            pcm = body
        pos += 8 + size + (size & 1)
    if fmt is None or pcm is None:
        raise FormatError(f"{path}: missing fmt or data chunk")
    channels, rate, bits = fmt
    width = bits // 8
    if len(pcm) % (channels * width):
        raise FormatError(f"{path}: data chunk is not a whole number of frames")
    if bits == 24:
        raw = np.frombuffer(pcm, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    else:
        ints = np.frombuffer(pcm, dtype=f"<i{width}").astype(np.int32 if bits == 16 else np.int64)
    return ints.reshape(-1, channels).T, rate, bits


def read_foa_wav(path, expected_rate: int = SAMPLE_RATE) -> FoaClip:
    ints, rate, bits = read_wav_pcm(path)
    if ints.shape[0] != 4:
        raise ChannelCountError(f"{path}: expected 4 channels, found {ints.shape[0]}")
    if expected_rate is not None and rate != expected_rate:
        raise UnsupportedRateError(f"{path}: expected {expected_rate} Hz, found {rate} Hz")
    return FoaClip(ints.astype(np.float64) / float(1 << (bits - 1)), rate)


def write_foa_wav(path, clip: FoaClip, bits: int = 16) -> None:
    """Write integer PCM with a canonical 44-byte header.

    Samples are scaled by 2**(bits-1), rounded half-to-even and clipped,
    so integer-valued input read by :func:`read_foa_wav` is written back
    bit-exactly.
    """
    if bits not in (16, 32):
        raise ValueError("bits must be 16 or 32")
    scale = float(1 << (bits - 1))
    ints = np.clip(np.rint(np.asarray(clip.samples, dtype=np.float64) * scale), -scale, scale - 1)
    channels = ints.shape[0]
    payload = ints.T.astype(f"<i{bits // 8}").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, _PCM, channels, clip.sample_rate,
        clip.sample_rate * channels * bits // 8, channels * bits // 8, bits,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------- metadata CSV


def _format_angle(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _parse_number(token: str, what: str, path, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"{path}:{line}: {what} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise DataError(f"{path}:{line}: {what} is not finite")
    return value


def _parse_int(token: str, what: str, path, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise DataError(f"{path}:{line}: {what} {token!r} is not an integer") from None


def parse_metadata_rows(rows: Iterable[Sequence[str]], path="<csv>") -> list[EventAnnotation]:
    events = []
    for line, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) not in (5, 6):
            raise DataError(f"{path}:{line}: expected 5 or 6 columns, got {len(row)}")
        frame = _parse_int(row[0], "frame", path, line)
        cls = _parse_int(row[1], "class", path, line)
        src = _parse_int(row[2], "source", path, line)
        az = _parse_number(row[3], "azimuth", path, line)
        el = _parse_number(row[4], "elevation", path, line)
        dist = _parse_number(row[5], "distance", path, line) if len(row) == 6 else None
        if frame < 0:
            raise DataError(f"{path}:{line}: negative frame {frame}")
        if not 0 <= cls < NUM_CLASSES:
            raise DataError(f"{path}:{line}: class {cls} outside 0..{NUM_CLASSES - 1}")
        if not -180.0 < az <= 180.0:
            raise DataError(f"{path}:{line}: azimuth {az} outside (-180, 180]")
        if not -90.0 <= el <= 90.0:
            raise DataError(f"{path}:{line}: elevation {el} outside [-90, 90]")
        if dist is not None and dist < 0:
            raise DataError(f"{path}:{line}: negative distance")
        events.append(EventAnnotation(frame, cls, src, SphericalDoa(az, el), dist))
    return events


def read_metadata_csv(path) -> list[EventAnnotation]:
    with open(path, newline="") as fh:
        return parse_metadata_rows(csv.reader(fh), path)


def write_metadata_csv(events: Iterable[EventAnnotation], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for e in events:
            row = [e.frame_index, e.class_index, e.source_index,
                   _format_angle(e.doa.azimuth_deg), _format_angle(e.doa.elevation_deg)]
            if e.distance_cm is not None:
                row.append(_format_angle(e.distance_cm))
            writer.writerow(row)


# ---------------------------------------------------------------- keypoint documents

KEYPOINT_SCHEMA_VERSION = 1
KEYPOINT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "panorama", "num_frames", "keypoints"],
    "properties": {
        "schema_version": {"const": KEYPOINT_SCHEMA_VERSION},
        "clip_id": {"type": "string"},
        "panorama": {
            "type": "object",
            "additionalProperties": False,
            "required": ["width", "height"],
            "properties": {"width": {"type": "integer", "minimum": 2}, "height": {"type": "integer", "minimum": 2}},
        },
        "num_frames": {"type": "integer", "minimum": 0},
        "keypoints": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["time_index", "person_id", "kind", "u", "v", "confidence"],
                "properties": {
                    "time_index": {"type": "integer", "minimum": 0},
                    "person_id": {"type": "integer", "minimum": 0},
                    "kind": {"enum": list(KEYPOINT_KINDS)},
                    "u": {"type": "integer", "minimum": 0},
                    "v": {"type": "integer", "minimum": 0},
                    "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}


@dataclass
class KeypointDocument:
    frames: list
    spec: PanoramaSpec
    clip_id: Optional[str] = None


def _validate_json(doc, schema, path) -> None:
    import jsonschema

    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise DataError(f"{path}: {where}: {err.message}")


def keypoints_from_dict(doc: dict, path="<keypoints>") -> KeypointDocument:
    _validate_json(doc, KEYPOINT_SCHEMA, path)
    try:
        spec = PanoramaSpec(doc["panorama"]["width"], doc["panorama"]["height"])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    pairs = []
    for i, kp in enumerate(doc["keypoints"]):
        pos = PixelCoord(kp["u"], kp["v"])
        try:
            pos.check_bounds(spec)
        except IndexError as exc:
            raise DataError(f"{path}: keypoints/{i}: {exc}") from None
        pairs.append((kp["time_index"], KeypointObservation(kp["person_id"], kp["kind"], pos, float(kp["confidence"]))))
    try:
        frames = frames_from_observations(pairs, doc["num_frames"])
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return KeypointDocument(frames, spec, doc.get("clip_id"))


def keypoints_to_dict(frames: Sequence[KeypointFrame], spec: PanoramaSpec, clip_id: Optional[str] = None) -> dict:
    doc = {"schema_version": KEYPOINT_SCHEMA_VERSION}
    if clip_id is not None:
        doc["clip_id"] = clip_id
    doc["panorama"] = {"width": spec.width_px, "height": spec.height_px}
    doc["num_frames"] = len(frames)
    doc["keypoints"] = [
        {"time_index": f.time_index, "person_id": o.person_id, "kind": o.kind,
         "u": o.position.u, "v": o.position.v, "confidence": o.confidence}
        for f in frames for o in f.observations
    ]
    return doc


def read_keypoints(path) -> KeypointDocument:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    return keypoints_from_dict(doc, path)


def write_keypoints(path, frames: Sequence[KeypointFrame], spec: PanoramaSpec = PanoramaSpec(),
                    clip_id: Optional[str] = None) -> None:
    Path(path).write_text(json.dumps(keypoints_to_dict(frames, spec, clip_id), indent=1) + "\n")


def empty_keypoint_frames(n: int = VISUAL_FRAMES) -> list[KeypointFrame]:
    return [KeypointFrame(t, ()) for t in range(n)]


# ---------------------------------------------------------------- feature container

FEATURE_MAGIC = b"AVSF"
FEATURE_VERSION = 1
_DTYPE_TAGS = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_LAYOUT_TAGS = {"audio": 1, "visual": 2, "fused": 3, "raw": 0}


def write_feature(path, tensor: np.ndarray, layout: str = "raw", dtype: str = "float32") -> None:
    tag = {"float32": 1, "float64": 2}[dtype]
    arr = np.ascontiguousarray(tensor, dtype=_DTYPE_TAGS[tag])
    header = FEATURE_MAGIC + struct.pack("<BBBB", FEATURE_VERSION, tag, _LAYOUT_TAGS[layout], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_feature(path) -> tuple[np.ndarray, str]:
    data = Path(path).read_bytes()
    if data[:4] != FEATURE_MAGIC or len(data) < 8:
        raise FormatError(f"{path}: not a feature container")
    version, tag, layout, ndim = struct.unpack("<BBBB", data[4:8])
    if version != FEATURE_VERSION or tag not in _DTYPE_TAGS:
        raise FormatError(f"{path}: unsupported container version {version} / dtype tag {tag}")
    names = {v: k for k, v in _LAYOUT_TAGS.items()}
    if layout not in names:
        raise FormatError(f"{path}: unknown layout tag {layout}")
    shape = struct.unpack(f"<{ndim}I", data[8:8 + 4 * ndim])
    dtype = _DTYPE_TAGS[tag]
    body = data[8 + 4 * ndim:]
    if len(body) != int(np.prod(shape)) * dtype.itemsize:
        raise FormatError(f"{path}: payload size does not match header shape {shape}")
    return np.frombuffer(body, dtype=dtype).reshape(shape), names[layout]


# ---------------------------------------------------------------- manifest

SPLITS = ("dev-train", "dev-test")


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    audio: Path
    metadata: Path
    keypoints: Optional[Path]
    split: str


@dataclass
class DatasetManifest:
    entries: list
    root: Path

    def to_dict(self) -> dict:
        def rel(p):
            return None if p is None else Path(p).relative_to(self.root).as_posix()

        return {"schema_version": 1, "clips": [
            {"clip_id": e.clip_id, "audio": rel(e.audio), "metadata": rel(e.metadata),
             "keypoints": rel(e.keypoints), "split": e.split}
            for e in self.entries
        ]}


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1) + "\n")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != 1 or not isinstance(doc.get("clips"), list):
        raise DataError(f"{path}: expected a version-1 manifest with a 'clips' list")
    root = path.parent
    entries, seen_ids, audio_split = [], set(), {}
    for i, c in enumerate(doc["clips"]):
        if not isinstance(c, dict) or set(c) - {"clip_id", "audio", "metadata", "keypoints", "split"}:
            raise DataError(f"{path}: clips/{i}: unexpected fields")
        if c.get("split") not in SPLITS:
            raise DataError(f"{path}: clips/{i}: split must be one of {SPLITS}")
        if c.get("clip_id") in seen_ids:
            raise DataError(f"{path}: clips/{i}: duplicate clip id {c.get('clip_id')!r}")
        seen_ids.add(c.get("clip_id"))
        files = {}
        for key in ("audio", "metadata", "keypoints"):
            rel = c.get(key)
            if rel is None and key == "keypoints":
                files[key] = None
                continue
            if not isinstance(rel, str):
                raise DataError(f"{path}: clips/{i}: missing {key} path")
            p = root / rel
            if not p.is_file():
                raise DataError(f"{path}: clips/{i}: {key} file {rel} does not exist")
            files[key] = p
        prev = audio_split.setdefault(files["audio"].resolve(), c["split"])
        if prev != c["split"]:
            raise DataError(f"{path}: clips/{i}: audio {c['audio']} appears in both {prev} and {c['split']}")
        entries.append(ManifestEntry(c["clip_id"], files["audio"], files["metadata"], files["keypoints"], c["split"]))
    return DatasetManifest(entries, root)

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avseld.audio_features import FoaClip
from avseld.errors import ChannelCountError, DataError, FormatError, UnsupportedRateError
from avseld.events import EventAnnotation
from avseld.geometry import PanoramaSpec, PixelCoord, SphericalDoa
from avseld.io import (
    DatasetManifest,
    ManifestEntry,
    keypoints_from_dict,
    keypoints_to_dict,
    parse_metadata_rows,
    read_feature,
    read_foa_wav,
    read_keypoints,
    read_manifest,
    read_metadata_csv,
    read_wav_pcm,
    write_feature,
    write_foa_wav,
    write_keypoints,
    write_manifest,
    write_metadata_csv,
)
from avseld.visual_features import KeypointFrame, KeypointObservation

PCM_GUID = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


def wav_bytes(ints, rate=24000, bits=16, extensible=False, extra_chunk=False):
    """Hand-built RIFF file: ints is (channels, n) of integer samples."""
    channels = ints.shape[0]
    width = bits // 8
    inter = ints.T.reshape(-1)
    if bits == 24:
        u = (inter.astype(np.int64) & 0xFFFFFF).astype(np.uint32)
        payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    else:
        payload = inter.astype(f"<i{width}").tobytes()
    common = struct.pack("<HIIHH", channels, rate, rate * channels * width, channels * width, bits)
    if extensible:
        fmt = struct.pack("<H", 0xFFFE) + common + struct.pack("<HHI", 22, bits, 0) + PCM_GUID
    else:
        fmt = struct.pack("<H", 1) + common
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if extra_chunk:
        body += b"LIST" + struct.pack("<I", 3) + b"abc\x00"
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


class TestWav:
    def test_round_trip_16(self, tmp_path):
        ints = np.random.default_rng(0).integers(-32768, 32768, (4, 2400))
        clip = FoaClip(ints / 32768.0)
        write_foa_wav(tmp_path / "a.wav", clip)
        back = read_foa_wav(tmp_path / "a.wav")
        assert back.samples.tobytes() == clip.samples.tobytes()
        write_foa_wav(tmp_path / "b.wav", back)
        assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()

    def test_round_trip_32(self, tmp_path):
        ints = np.random.default_rng(1).integers(-2**31, 2**31, (4, 100))
        clip = FoaClip(ints / 2.0**31)
        write_foa_wav(tmp_path / "a.wav", clip, bits=32)
        np.testing.assert_array_equal(read_wav_pcm(tmp_path / "a.wav")[0], ints)

    def test_full_length_clip(self, tmp_path):
        write_foa_wav(tmp_path / "a.wav", FoaClip(np.zeros((4, 240000))))
        assert read_foa_wav(tmp_path / "a.wav").samples.shape == (4, 240000)

    def test_header_is_44_bytes(self, tmp_path):
        write_foa_wav(tmp_path / "a.wav", FoaClip(np.zeros((4, 10))))
        assert len((tmp_path / "a.wav").read_bytes()) == 44 + 4 * 10 * 2

    def test_clipping(self, tmp_path):
        write_foa_wav(tmp_path / "a.wav", FoaClip(np.full((4, 3), 1.5)))
        assert np.all(read_wav_pcm(tmp_path / "a.wav")[0] == 32767)

    def test_24_bit_and_extensible(self, tmp_path):
        ints = np.random.default_rng(2).integers(-2**23, 2**23, (4, 50))
        (tmp_path / "a.wav").write_bytes(wav_bytes(ints, bits=24, extensible=True, extra_chunk=True))
        got, rate, bits = read_wav_pcm(tmp_path / "a.wav")
        assert (rate, bits) == (24000, 24)
        np.testing.assert_array_equal(got, ints)
        np.testing.assert_array_equal(read_foa_wav(tmp_path / "a.wav").samples, ints / 2.0**23)

    def test_channel_count(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(wav_bytes(np.zeros((2, 10), dtype=int)))
        with pytest.raises(ChannelCountError):
            read_foa_wav(tmp_path / "a.wav")

    def test_rate(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(wav_bytes(np.zeros((4, 10), dtype=int), rate=48000))
        with pytest.raises(UnsupportedRateError):
            read_foa_wav(tmp_path / "a.wav")

    @pytest.mark.parametrize("mutate", [
        lambda b: b"RIFX" + b[4:],
        lambda b: b[:-3],
        lambda b: b[:20] + struct.pack("<H", 3) + b[22:],
        lambda b: b[:12],
    ], ids=["magic", "truncated", "float-format", "no-chunks"])
    def test_malformed(self, tmp_path, mutate):
        (tmp_path / "a.wav").write_bytes(mutate(wav_bytes(np.zeros((4, 10), dtype=int))))
        with pytest.raises(FormatError):
            read_foa_wav(tmp_path / "a.wav")


class TestMetadataCsv:
    def test_example_row(self):
        (e,) = parse_metadata_rows([["5", "1", "0", "30", "10"]])
        assert e == EventAnnotation(5, 1, 0, SphericalDoa(30, 10))

    def test_distance_column(self):
        (e,) = parse_metadata_rows([["5", "1", "0", "30", "10", "152"]])
        assert e.distance_cm == 152

    def test_empty_file(self, tmp_path):
        (tmp_path / "m.csv").write_text("")
        assert read_metadata_csv(tmp_path / "m.csv") == []

    @pytest.mark.parametrize("row,needle", [
        ("5,1,0,30", "columns"),
        ("x,1,0,30,10", "frame"),
        ("5,13,0,30,10", "class 13"),
        ("5,1,0,190,10", "azimuth"),
        ("5,1,0,-180,10", "azimuth"),
        ("5,1,0,30,95", "elevation"),
        ("5,1,0,30,nan", "finite"),
        ("-1,1,0,30,10", "negative frame"),
        ("5,1,0,30,10,-3", "distance"),
    ])
    def test_errors_carry_line_number(self, tmp_path, row, needle):
        (tmp_path / "m.csv").write_text("0,0,0,0,0\n" + row + "\n")
        with pytest.raises(DataError, match=rf"m.csv:2: .*{needle}"):
            read_metadata_csv(tmp_path / "m.csv")

    def test_non_integer_angles_lossless(self, tmp_path):
        e = EventAnnotation(3, 2, 1, SphericalDoa(12.345678901234, -0.1))
        write_metadata_csv([e], tmp_path / "m.csv")
        assert read_metadata_csv(tmp_path / "m.csv") == [e]

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 600), st.integers(0, 12), st.integers(0, 5),
                              st.integers(-179, 180), st.integers(-90, 90),
                              st.one_of(st.none(), st.integers(0, 1000))), max_size=30))
    def test_fuzz_round_trip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("csv") / "m.csv"
        events = [EventAnnotation(f, c, s, SphericalDoa(a, e), d) for f, c, s, a, e, d in rows]
        write_metadata_csv(events, path)
        assert read_metadata_csv(path) == events
        text = path.read_text()
        write_metadata_csv(read_metadata_csv(path), path)
        assert path.read_text() == text


class TestKeypoints:
    spec = PanoramaSpec(16, 8)

    def _frames(self):
        frames = [KeypointFrame(t) for t in range(4)]
        frames[2] = KeypointFrame(2, [KeypointObservation(1, "mouth", PixelCoord(3, 4), 0.75),
                                      KeypointObservation(0, "left_foot", PixelCoord(15, 7), 1.0)])
        return frames

    def test_round_trip(self, tmp_path):
        write_keypoints(tmp_path / "k.json", self._frames(), self.spec, "clip7")
        doc = read_keypoints(tmp_path / "k.json")
        assert doc.frames == self._frames() and doc.spec == self.spec and doc.clip_id == "clip7"

    def test_unknown_kind(self):
        doc = keypoints_to_dict(self._frames(), self.spec)
        doc["keypoints"][0]["kind"] = "nose"
        with pytest.raises(DataError, match="keypoints/0/kind"):
            keypoints_from_dict(doc)

    @pytest.mark.parametrize("mutate", [
        lambda d: d.update(schema_version=2),
        lambda d: d.update(extra=1),
        lambda d: d["keypoints"][0].update(score=1),
        lambda d: d["keypoints"][0].update(confidence=1.5),
        lambda d: d["keypoints"][0].update(u=16),
        lambda d: d["keypoints"][0].update(time_index=4),
        lambda d: d["keypoints"][0].pop("v"),
        lambda d: d["panorama"].update(width=17),
    ], ids=["version", "extra-field", "extra-kp-field", "confidence", "u-bounds", "time", "missing", "spec"])
    def test_strict(self, mutate):
        doc = keypoints_to_dict(self._frames(), self.spec)
        mutate(doc)
        with pytest.raises(DataError):
            keypoints_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        (tmp_path / "k.json").write_text("{")
        with pytest.raises(DataError):
            read_keypoints(tmp_path / "k.json")


class TestFeatureContainer:
    def test_round_trip_and_header(self, tmp_path):
        x = np.random.default_rng(0).standard_normal((500, 7, 64))
        write_feature(tmp_path / "f.bin", x, "audio")
        raw = (tmp_path / "f.bin").read_bytes()
        assert raw[:4] == b"AVSF" and raw[4:8] == bytes([1, 1, 1, 3])
        assert struct.unpack("<3I", raw[8:20]) == (500, 7, 64)
        assert len(raw) == 20 + x.size * 4
        y, layout = read_feature(tmp_path / "f.bin")
        assert layout == "audio" and y.dtype == np.float32
        np.testing.assert_array_equal(y, x.astype(np.float32))

    def test_float64(self, tmp_path):
        x = np.arange(6.0).reshape(2, 3)
        write_feature(tmp_path / "f.bin", x, "raw", "float64")
        y, _ = read_feature(tmp_path / "f.bin")
        assert y.dtype == np.float64 and y.tobytes() == x.tobytes()

    def test_corrupt(self, tmp_path):
        write_feature(tmp_path / "f.bin", np.zeros((2, 2)))
        raw = (tmp_path / "f.bin").read_bytes()
        for bad in (b"XXXX" + raw[4:], raw[:-1], raw[:4] + bytes([9]) + raw[5:], raw[:6] + bytes([9]) + raw[7:]):
            (tmp_path / "g.bin").write_bytes(bad)
            with pytest.raises(FormatError):
                read_feature(tmp_path / "g.bin")


class TestManifest:
    def _files(self, root, name):
        for ext in ("wav", "csv", "json"):
            (root / f"{name}.{ext}").write_text("")
        return ManifestEntry(name, root / f"{name}.wav", root / f"{name}.csv", root / f"{name}.json", "dev-train")

    def test_round_trip(self, tmp_path):
        entries = [self._files(tmp_path, "a"), self._files(tmp_path, "b")]
        write_manifest(DatasetManifest(entries, tmp_path), tmp_path / "manifest.json")
        back = read_manifest(tmp_path / "manifest.json")
        assert [e.clip_id for e in back.entries] == ["a", "b"]
        assert back.entries[0].audio == tmp_path / "a.wav"

    def _write(self, tmp_path, clips):
        (tmp_path / "manifest.json").write_text(json.dumps({"schema_version": 1, "clips": clips}))
        return tmp_path / "manifest.json"

    def test_split_disjointness(self, tmp_path):
        self._files(tmp_path, "a")
        clip = {"clip_id": "a", "audio": "a.wav", "metadata": "a.csv", "keypoints": None, "split": "dev-train"}
        path = self._write(tmp_path, [clip, dict(clip, clip_id="a2", split="dev-test")])
        with pytest.raises(DataError, match="both"):
            read_manifest(path)

    @pytest.mark.parametrize("mutate", [
        lambda c: c.update(audio="missing.wav"),
        lambda c: c.update(split="eval"),
        lambda c: c.update(extra=1),
    ], ids=["missing-file", "split", "extra"])
    def test_errors(self, tmp_path, mutate):
        self._files(tmp_path, "a")
        clip = {"clip_id": "a", "audio": "a.wav", "metadata": "a.csv", "keypoints": "a.json", "split": "dev-train"}
        mutate(clip)
        with pytest.raises(DataError):
            read_manifest(self._write(tmp_path, [clip]))

    def test_duplicate_ids(self, tmp_path):
        self._files(tmp_path, "a")
        self._files(tmp_path, "b")
        clip = {"clip_id": "a", "audio": "a.wav", "metadata": "a.csv", "keypoints": None, "split": "dev-train"}
        with pytest.raises(DataError, match="duplicate"):
            read_manifest(self._write(tmp_path, [clip, dict(clip, audio="b.wav", metadata="b.csv")]))

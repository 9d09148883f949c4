"""RIFF/WAVE reading and writing for PCM-16 and IEEE float-32 audio.

PCM-16 samples map to floats by dividing by 32768 in both directions, so a
PCM round trip is bit-exact. Writing rounds half away from zero and clips
to ``[-32768, 32767]``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, WavFormatError

PCM16 = "pcm16"
FLOAT32 = "float32"
_FORMAT_PCM = 1
_FORMAT_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


def _to_pcm16(x: np.ndarray) -> np.ndarray:
    scaled = x * 32768.0
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -32768, 32767).astype("<i2")


def wav_write(path, channels, fs: float, encoding: str = FLOAT32) -> None:
    """Write ``channels`` (shape ``(n_channels, n_samples)`` or 1-D) to ``path``."""
    data = np.asarray(channels)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2 or not 1 <= data.shape[0] <= 64:
        raise InvalidParameterError("wav_write expects 1 to 64 equal-length channels")
    n_ch, n = data.shape
    frames = data.T
    if encoding == PCM16:
        payload = _to_pcm16(frames.astype(float)).tobytes()
        tag, width = _FORMAT_PCM, 2
    elif encoding == FLOAT32:
        payload = frames.astype("<f4").tobytes()
        tag, width = _FORMAT_FLOAT, 4
    else:
        raise InvalidParameterError(f"unsupported WAV encoding {encoding!r}")
    rate = int(round(fs))
    fmt = struct.pack("<HHIIHH", tag, n_ch, rate, rate * n_ch * width, n_ch * width, 8 * width)
    chunks = []
    if tag == _FORMAT_FLOAT:
        fmt += struct.pack("<H", 0)
        chunks.append(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        chunks.append(b"fact" + struct.pack("<II", 4, n))
    else:
        chunks.append(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
    pad = b"\x00" if len(payload) % 2 else b""
    chunks.append(b"data" + struct.pack("<I", len(payload)) + payload + pad)
    body = b"WAVE" + b"".join(chunks)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as exc:
        raise OSError(f"cannot write WAV file {path}: {exc}") from exc


def wav_read(path):
    """Read a WAV file; returns ``(channels, fs)`` with channels ``(n_ch, n)`` float64."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: missing RIFF/WAVE header")
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        name = cid.decode("latin-1")
        if len(body) < size:
            raise WavFormatError(f"{path}: chunk {name!r} truncated ({len(body)} of {size} bytes)")
        if cid == b"fmt ":
            fmt = _parse_fmt(path, body)
        elif cid == b"data":
            if fmt is None:
                raise WavFormatError(f"{path}: 'data' chunk precedes 'fmt ' chunk")
            tag, n_ch, rate, width = fmt
            if size % (n_ch * width):
                raise WavFormatError(f"{path}: chunk 'data' size {size} is not a whole number of frames")
            if tag == _FORMAT_PCM:
                samples = np.frombuffer(body, dtype="<i2").astype(float) / 32768.0
            else:
                samples = np.frombuffer(body, dtype="<f4").astype(float)
            return samples.reshape(-1, n_ch).T.copy(), rate
        pos += 8 + size + (size % 2)
    if fmt is None:
        raise WavFormatError(f"{path}: no 'fmt ' chunk")
    raise WavFormatError(f"{path}: no 'data' chunk")


def _parse_fmt(path, body: bytes):
    if len(body) < 16:
        raise WavFormatError(f"{path}: chunk 'fmt ' too short ({len(body)} bytes)")
    tag, n_ch, rate, _, align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _FORMAT_EXTENSIBLE:
        if len(body) < 26:
            raise WavFormatError(f"{path}: chunk 'fmt ' extensible header too short")
        (tag,) = struct.unpack("<H", body[24:26])
    if n_ch < 1:
        raise WavFormatError(f"{path}: chunk 'fmt ' declares no channels")
    if (tag, bits) == (_FORMAT_PCM, 16):
        return tag, n_ch, rate, 2
    if (tag, bits) == (_FORMAT_FLOAT, 32):
        return tag, n_ch, rate, 4
    raise WavFormatError(
        f"{path}: chunk 'fmt ' has unsupported encoding (format tag {tag}, {bits} bits); "
        "only PCM-16 and float-32 are read")

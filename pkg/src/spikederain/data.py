"""Images, synthetic rain and paired datasets.

Images are float64 arrays in [0, 1], shaped (H, W, 3) for colour or (H, W)
for grey. Files are binary NetPBM: P6 (colour) and P5 (grey).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
from scipy.ndimage import gaussian_filter


class NetpbmError(ValueError):
    """Malformed or truncated NetPBM data. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


# -- NetPBM ------------------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and (buf[pos] in _WS or buf[pos] == ord("#")):
            if buf[pos] == ord("#"):
                while pos < n and buf[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise NetpbmError("truncated header", pos)
        start = pos
        while pos < n and buf[pos] not in _WS and buf[pos] != ord("#"):
            pos += 1
        tokens.append(buf[start:pos])
    if pos >= n or buf[pos] not in _WS:
        raise NetpbmError("expected a single whitespace byte after the header", pos)
    return tokens, pos + 1


def decode_netpbm(buf: bytes) -> np.ndarray:
    if buf[:2] not in (b"P5", b"P6"):
        raise NetpbmError(f"unsupported magic {buf[:2]!r}; only P5 and P6 are read", 0)
    channels = 3 if buf[:2] == b"P6" else 1
    tokens, data_start = _header_tokens(buf, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise NetpbmError(f"non-integer header field in {tokens[1:]!r}", 2) from None
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise NetpbmError(f"bad dimensions or maxval: {width}x{height}, maxval {maxval}", 2)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * channels * dtype.itemsize
    have = len(buf) - data_start
    if have < need:
        raise NetpbmError(f"truncated raster: need {need} bytes, have {have}", len(buf))
    raster = np.frombuffer(buf, dtype=dtype, count=width * height * channels, offset=data_start)
    img = raster.astype(np.float64) / maxval
    return img.reshape(height, width, 3) if channels == 3 else img.reshape(height, width)


def encode_netpbm(img) -> bytes:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim == 2:
        magic = b"P5"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {a.shape}")
    q = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    return magic + f"\n{a.shape[1]} {a.shape[0]}\n255\n".encode() + q.tobytes()


def load_image(path) -> np.ndarray:
    return decode_netpbm(Path(path).read_bytes())


def save_image(path, img) -> None:
    Path(path).write_bytes(encode_netpbm(img))


# -- synthetic data -------------------------------------------------------------------

@dataclass
class ImagePair:
    rainy: np.ndarray = field(repr=False)
    clean: np.ndarray = field(repr=False)
    id: str = ""
    source: Literal["synthetic", "external"] = "synthetic"

    def __post_init__(self):
        if self.rainy.shape != self.clean.shape:
            raise ValueError(f"pair {self.id}: shapes {self.rainy.shape} and {self.clean.shape} differ")
        for name, a in (("rainy", self.rainy), ("clean", self.clean)):
            if a.size and (a.min() < 0.0 or a.max() > 1.0):
                raise ValueError(f"pair {self.id}: {name} values outside [0, 1]")


@dataclass(frozen=True)
class RainSpec:
    streak_count: int = 14
    length_px: float = 12.0
    angle_deg: float = 12.0
    width_px: float = 1.0
    intensity: float = 0.55
    gaussian_blur_sigma: float = 0.5
    seed: int = 0
    angle_jitter_deg: float = 6.0

    def validate(self) -> None:
        if self.streak_count < 0:
            raise ValueError("streak_count must be >= 0")
        if self.streak_count and (self.length_px <= 0 or self.width_px <= 0):
            raise ValueError("streaks need positive length and width")
        if not 0.0 < self.intensity <= 1.0:
            raise ValueError("intensity must lie in (0, 1]")
        if self.gaussian_blur_sigma < 0 or self.angle_jitter_deg < 0:
            raise ValueError("blur sigma and angle jitter must be >= 0")


def draw_streak(layer: np.ndarray, p0, p1, width: float, intensity: float) -> None:
    """Max-composite an anti-aliased segment (pixel centres at integer coordinates, (x, y) order)."""
    h, w = layer.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    seg2 = dx * dx + dy * dy
    u = np.clip(((xx - x0) * dx + (yy - y0) * dy) / seg2, 0.0, 1.0) if seg2 > 0 else np.zeros_like(xx)
    dist = np.hypot(xx - (x0 + u * dx), yy - (y0 + u * dy))
    cover = np.clip(width / 2.0 + 0.5 - dist, 0.0, 1.0)
    np.maximum(layer, intensity * cover, out=layer)


def rain_layer(shape: tuple[int, int], spec: RainSpec) -> np.ndarray:
    spec.validate()
    h, w = shape
    rng = np.random.default_rng(spec.seed)
    layer = np.zeros((h, w))
    half = spec.length_px / 2.0
    for _ in range(spec.streak_count):
        cx = rng.uniform(-half, w + half)
        cy = rng.uniform(-half, h + half)
        angle = np.deg2rad(spec.angle_deg + rng.uniform(-spec.angle_jitter_deg, spec.angle_jitter_deg))
        ux, uy = np.sin(angle), np.cos(angle)
        draw_streak(layer, (cx - half * ux, cy - half * uy), (cx + half * ux, cy + half * uy), spec.width_px, spec.intensity)
    if spec.gaussian_blur_sigma > 0:
        layer = gaussian_filter(layer, spec.gaussian_blur_sigma, mode="constant")
    return layer


def gen_rain(clean, spec: RainSpec, pair_id: str = "") -> ImagePair:
    """Additive rain: ``rainy = clamp(clean + rain_layer, 0, 1)``."""
    clean = np.asarray(clean, dtype=np.float64)
    if clean.size and (clean.min() < 0.0 or clean.max() > 1.0):
        raise ValueError("clean image must lie in [0, 1]")
    layer = rain_layer(clean.shape[:2], spec)
    if clean.ndim == 3:
        layer = layer[:, :, None]
    rainy = np.clip(clean + layer, 0.0, 1.0)
    return ImagePair(rainy=rainy, clean=clean.copy(), id=pair_id, source="synthetic")


def synthetic_clean(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """A smooth colour scene: low-frequency waves, a few soft discs and one soft edge."""
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    img = np.empty((h, w, 3))
    base = rng.uniform(0.2, 0.5, size=3)
    for c in range(3):
        acc = np.full((h, w), base[c])
        for _ in range(3):
            fx, fy = rng.uniform(0.3, 2.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.03, 0.1) * np.cos(2 * np.pi * (fx * xx + fy * yy) + phase)
        img[:, :, c] = acc
    for _ in range(rng.integers(1, 4)):
        cx, cy = rng.uniform(0, 1, size=2)
        rad = rng.uniform(0.1, 0.3)
        disc = 1.0 / (1.0 + np.exp((np.hypot(xx - cx, yy - cy) - rad) * 40.0))
        img += disc[:, :, None] * rng.uniform(-0.15, 0.15, size=3)
    theta = rng.uniform(0, np.pi)
    edge = 1.0 / (1.0 + np.exp(-((xx - 0.5) * np.cos(theta) + (yy - 0.5) * np.sin(theta)) * 30.0))
    img += edge[:, :, None] * rng.uniform(-0.1, 0.1, size=3)
    return np.clip(img, 0.05, 0.8)


def make_synthetic_pairs(count: int, size: int, seed: int, rain: RainSpec = RainSpec()) -> list[ImagePair]:
    """``count`` reproducible rainy/clean pairs; each pair draws its own child seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    pairs = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        clean = synthetic_clean(size, size, rng)
        spec = RainSpec(**{**rain.__dict__, "seed": int(rng.integers(2**31))})
        pairs.append(gen_rain(clean, spec, pair_id=f"{i:03d}"))
    return pairs


# -- datasets -----------------------------------------------------------------------

def save_pairs(root, pairs: list[ImagePair]) -> None:
    root = Path(root)
    (root / "rainy").mkdir(parents=True, exist_ok=True)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    for p in pairs:
        save_image(root / "rainy" / f"{p.id}.ppm", p.rainy)
        save_image(root / "clean" / f"{p.id}.ppm", p.clean)


class PairDataset:
    """``root/rainy/NNN.ppm`` matched with ``root/clean/NNN.ppm``, in sorted filename order.

    Files present on only one side are listed in ``skipped`` rather than
    raising.
    """

    def __init__(self, root):
        self.root = Path(root)
        rainy = {p.name: p for p in sorted((self.root / "rainy").glob("*.p[pg]m"))}
        clean = {p.name: p for p in sorted((self.root / "clean").glob("*.p[pg]m"))}
        self.entries = [(Path(n).stem, rainy[n], clean[n]) for n in sorted(rainy.keys() & clean.keys())]
        self.skipped = [
            {"file": n, "reason": "no clean counterpart" if n in rainy else "no rainy counterpart"}
            for n in sorted(rainy.keys() ^ clean.keys())
        ]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ImagePair]:
        for pid, rp, cp in self.entries:
            yield ImagePair(load_image(rp), load_image(cp), id=pid, source="external")


def dataset(root) -> PairDataset:
    return PairDataset(root)


def to_chw(images) -> np.ndarray:
    """(H, W, 3) or (B, H, W, 3) -> (B, 3, H, W)."""
    a = np.asarray(images, dtype=np.float64)
    if a.ndim == 3:
        a = a[None]
    return np.ascontiguousarray(a.transpose(0, 3, 1, 2))


def to_hwc(batch) -> np.ndarray:
    """(B, 3, H, W) -> (B, H, W, 3)."""
    return np.ascontiguousarray(np.asarray(batch).transpose(0, 2, 3, 1))


def random_crops(pairs: list[ImagePair], batch_size: int, patch: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``batch_size`` aligned crops; returns (rainy, clean) as (B, 3, p, p)."""
    rainy = np.empty((batch_size, 3, patch, patch))
    clean = np.empty_like(rainy)
    for b in range(batch_size):
        p = pairs[int(rng.integers(len(pairs)))]
        h, w = p.clean.shape[:2]
        if patch > h or patch > w:
            raise ValueError(f"patch {patch} larger than image {h}x{w}")
        y = int(rng.integers(h - patch + 1))
        x = int(rng.integers(w - patch + 1))
        rainy[b] = p.rainy[y : y + patch, x : x + patch].transpose(2, 0, 1)
        clean[b] = p.clean[y : y + patch, x : x + patch].transpose(2, 0, 1)
    return rainy, clean

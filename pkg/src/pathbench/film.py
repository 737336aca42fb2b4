"""Linear radiance accumulation, tonemapping, and image serialization.

The film keeps a progressive running average in linear radiance.  Every
pixel always holds the same number of samples, so one shared counter is
enough.  Serialization is bit-exact: the float image goes out as PFM
(32-bit little-endian, bottom-up rows) and the display image as binary
PPM after Reinhard tonemapping and gamma 2.2.
"""

from __future__ import annotations

import numpy as np

GAMMA = 2.2


class Film:
    """Progressive average of per-pixel radiance samples."""

    def __init__(self, width: int, height: int):
        if width < 1 or height < 1:
            raise ValueError("film resolution must be at least 1x1")
        self.width = width
        self.height = height
        # Row-major, row 0 at the top of the image.
        self.accum = np.zeros((height * width, 3), dtype=np.float64)
        self.sample_count = 0

    def add_sample_frame(self, radiance: np.ndarray) -> None:
        """Fold one full frame of per-pixel samples into the running average.

        Uses the incremental recurrence a <- a + (x - a) / (n + 1), which
        keeps magnitudes bounded by the data.
        """
        if radiance.shape != self.accum.shape:
            raise ValueError(
                f"frame shape {radiance.shape} does not match film {self.accum.shape}"
            )
        n = self.sample_count
        self.accum += (radiance - self.accum) / (n + 1)
        self.sample_count = n + 1

    def linear_image(self) -> np.ndarray:
        """Linear radiance as float32 (H, W, 3), the serialization payload."""
        return self.accum.astype(np.float32).reshape(self.height, self.width, 3)


def tonemap(film: Film) -> np.ndarray:
    """Reinhard x/(1+x), gamma 1/2.2, round-half-up to 8-bit (H, W, 3)."""
    x = film.accum.reshape(film.height, film.width, 3)
    mapped = x / (1.0 + x)
    encoded = mapped ** (1.0 / GAMMA)
    return np.floor(encoded * 255.0 + 0.5).astype(np.uint8)


def write_pfm(path, image: np.ndarray) -> None:
    """Write a float32 (H, W, 3) image as PFM (little-endian, bottom-up)."""
    img = np.ascontiguousarray(image, dtype="<f4")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PFM writer expects an (H, W, 3) image")
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(b"PF\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        # PFM stores rows bottom-up.
        f.write(img[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a 3-channel PFM written by write_pfm; returns float32 (H, W, 3)."""
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic != b"PF":
            raise ValueError(f"not a color PFM file: magic {magic!r}")
        w = int(_read_token(f))
        h = int(_read_token(f))
        scale = float(_read_token(f))
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 3 * 4), dtype=dtype)
        if data.size != w * h * 3:
            raise ValueError("truncated PFM payload")
    img = data.reshape(h, w, 3)
    return np.ascontiguousarray(img[::-1]).astype(np.float32)


def write_ppm(path, image8: np.ndarray) -> None:
    """Write an 8-bit (H, W, 3) image as binary PPM (P6, maxval 255)."""
    img = np.ascontiguousarray(image8, dtype=np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def write_image(film: Film, path, format: str = "linear-float") -> None:
    """Serialize the film: 'linear-float' -> PFM, 'tonemapped-8bit' -> PPM."""
    if format == "linear-float":
        write_pfm(path, film.linear_image())
    elif format == "tonemapped-8bit":
        write_ppm(path, tonemap(film))
    else:
        raise ValueError(f"unknown image format {format!r}")


def _read_token(f) -> bytes:
    token = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("unexpected end of PFM header")
        if c in b" \t\r\n":
            if token:
                return token
            continue
        token += c

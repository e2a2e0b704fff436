"""Nodal field snapshots: PGM images, legacy VTK and raw float64 with a sidecar header."""
import io
import logging
from typing import Dict, Tuple

import numpy as np
from PIL import Image

from membrane.core.exceptions import ArtifactIOException, PreconditionException
from membrane.repositories.base import BaseArtifactRepository, PathLike

logger = logging.getLogger(__name__)

RAW_DTYPE = "<f8"
HEADER_SUFFIX = ".hdr"


def _grid(u: np.ndarray, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (n * n,):
        raise PreconditionException(f"field has shape {u.shape}, expected ({n * n},)")
    return u.reshape(n, n)


def pgm_pixels(u: np.ndarray, n: int) -> np.ndarray:
    """Gray levels of u in [-1, 1], top image row is j = n-1."""
    scaled = 255.0 * (_grid(u, n)[::-1] + 1.0) / 2.0
    # round half away from zero
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def vtk_text(u: np.ndarray, h: np.ndarray, n: int) -> str:
    """Legacy ASCII STRUCTURED_POINTS with u and h as point scalars."""
    lines = [
        "# vtk DataFile Version 3.0",
        "membrane fields",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {n} {n} 1",
        f"SPACING {1.0 / n!r} {1.0 / n!r} 1.0",
        "ORIGIN 0.0 0.0 0.0",
        f"POINT_DATA {n * n}",
    ]
    for name, field in (("u", u), ("h", h)):
        values = _grid(field, n).ravel()
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(" ".join(repr(float(x)) for x in values[k:k + n]) for k in range(0, n * n, n))
    return "\n".join(lines) + "\n"


def raw_header(n: int, field: str, step: int, time: float) -> str:
    return f"n={n} field={field} step={step} time={time!r}\n"


def parse_raw_header(text: str) -> Dict[str, str]:
    try:
        return dict(token.split("=", 1) for token in text.split())
    except ValueError:
        raise ArtifactIOException(f"malformed raw header '{text.strip()}'")


class FieldRepository(BaseArtifactRepository):
    """Writes and reads field snapshots below a run directory."""

    def write_pgm(self, u: np.ndarray, n: int, path: PathLike):
        image = Image.fromarray(pgm_pixels(u, n))
        buffer = io.BytesIO()
        image.save(buffer, format="PPM")
        return self.write_bytes(path, buffer.getvalue())

    def write_vtk(self, u: np.ndarray, h: np.ndarray, n: int, path: PathLike):
        return self.write_text(path, vtk_text(u, h, n))

    def write_raw(self, field: np.ndarray, n: int, path: PathLike, name: str, step: int, time: float):
        """Little-endian float64 values in vertex order, plus ``<path>.hdr``."""
        data = np.ascontiguousarray(_grid(field, n).ravel(), dtype=RAW_DTYPE)
        target = self.write_bytes(path, data.tobytes())
        self.write_text(f"{path}{HEADER_SUFFIX}", raw_header(n, name, step, time))
        return target

    def read_raw(self, path: PathLike) -> Tuple[Dict[str, str], np.ndarray]:
        header = parse_raw_header(self.read_text(f"{path}{HEADER_SUFFIX}"))
        field = np.frombuffer(self.read_bytes(path), dtype=RAW_DTYPE).astype(float)
        n = int(header.get("n", -1))
        if field.size != n * n:
            raise ArtifactIOException(f"{self.path(path)} holds {field.size} values, header says n={n}")
        return header, field

    def write_snapshot(self, state, n: int, formats, stem: str):
        """Every requested format for one state; returns the written paths."""
        written = []
        if "pgm" in formats:
            written.append(self.write_pgm(state.u, n, f"{stem}_u.pgm"))
        if "vtk" in formats:
            written.append(self.write_vtk(state.u, state.h, n, f"{stem}.vtk"))
        if "raw" in formats:
            for name in ("u", "h", "mu", "g"):
                written.append(
                    self.write_raw(getattr(state, name), n, f"{stem}_{name}.raw", name, state.step, state.time)
                )
        return written

from pathlib import Path
from typing import Union

from membrane.core.exceptions import ArtifactIOException

PathLike = Union[str, Path]


class BaseArtifactRepository:
    """Base repository for files stored below a root directory."""

    def __init__(self, root: PathLike = "."):
        self.root = Path(root)

    def path(self, *parts: PathLike) -> Path:
        """Resolve parts against the root; absolute parts win."""
        return self.root.joinpath(*parts)

    def ensure_dir(self, *parts: PathLike) -> Path:
        """Create a directory (and parents) below the root."""
        target = self.path(*parts)
        try:
            target.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactIOException(f"Error creating directory {target}: {str(e)}")
        return target

    def read_text(self, path: PathLike) -> str:
        target = self.path(path)
        try:
            return target.read_text(encoding="utf-8")
        except OSError as e:
            raise ArtifactIOException(f"Error reading {target}: {str(e)}")
        except UnicodeDecodeError as e:
            raise ArtifactIOException(f"{target} is not UTF-8 text: {str(e)}")

    def write_text(self, path: PathLike, text: str) -> Path:
        target = self.path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            raise ArtifactIOException(f"Error writing {target}: {str(e)}")
        return target

    def write_bytes(self, path: PathLike, data: bytes) -> Path:
        target = self.path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        except OSError as e:
            raise ArtifactIOException(f"Error writing {target}: {str(e)}")
        return target

    def read_bytes(self, path: PathLike) -> bytes:
        target = self.path(path)
        try:
            return target.read_bytes()
        except OSError as e:
            raise ArtifactIOException(f"Error reading {target}: {str(e)}")

    def exists(self, path: PathLike) -> bool:
        return self.path(path).exists()

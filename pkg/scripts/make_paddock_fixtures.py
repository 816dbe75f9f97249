"""Regenerate the shipped Dataset A/B fixture manifests under src/ssod/data/."""

from pathlib import Path

from ssod.fixtures import build_paddock_manifest
from ssod.formats import write_manifest

OUT = Path(__file__).resolve().parent.parent / "src" / "ssod" / "data"

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for ds in ("A", "B"):
        path = OUT / f"paddock_dataset_{ds.lower()}.json"
        write_manifest(build_paddock_manifest(ds), path, indent=None)
        print(path)

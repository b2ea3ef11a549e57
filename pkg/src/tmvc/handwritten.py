"""UCI Multiple Features ("Handwritten"): 2000 digits, 10 classes, 6 views.

The six feature files are taken from the ``mvlearn`` wheel, which bundles them,
so only a package index is needed (``pip download``), not the UCI site.
The result is written as a manifest directory readable by
:func:`tmvc.data.load_manifest`.
"""
from __future__ import annotations

import io
import os
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from .data import MultiViewDataset, load_manifest, write_manifest

VIEWS = ("fou", "fac", "kar", "pix", "zer", "mor")
WHEEL = "mvlearn==0.5.0"
_MEMBER = "mvlearn/datasets/UCImultifeature/mfeat-{}.csv"


def _parse(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    # header row of column indices; last column is the digit label
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", skiprows=1)
    return table[:, :-1], table[:, -1].astype(int)


def extract_from_wheel(wheel: Path, dest: Path) -> Path:
    views, labels = [], None
    with zipfile.ZipFile(wheel) as zf:
        for name in VIEWS:
            x, y = _parse(zf.read(_MEMBER.format(name)))
            if labels is not None and not np.array_equal(labels, y):
                raise ValueError(f"label column of view {name} disagrees with the others")
            labels = y
            views.append(x)
    ds = MultiViewDataset(tuple(views), labels, 10, VIEWS)
    return write_manifest(ds, dest)


def ensure_handwritten(dest="data/handwritten", wheel=None) -> Path:
    """Return the manifest path, converting on first use.

    ``wheel`` (or ``$TMVC_MVLEARN_WHEEL``) points at an already downloaded
    mvlearn wheel; otherwise one is fetched with pip.
    """
    dest = Path(dest)
    manifest = dest / "manifest.json"
    if manifest.is_file():
        return manifest
    wheel = wheel or os.environ.get("TMVC_MVLEARN_WHEEL")
    if wheel:
        return extract_from_wheel(Path(wheel), dest)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet", "-d", tmp, WHEEL],
            check=True,
        )
        wheel = next(Path(tmp).glob("mvlearn-*.whl"))
        return extract_from_wheel(wheel, dest)


def load_handwritten(dest="data/handwritten", wheel=None) -> MultiViewDataset:
    return load_manifest(ensure_handwritten(dest, wheel))

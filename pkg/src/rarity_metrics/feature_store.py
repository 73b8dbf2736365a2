"""Loading, validation, subsampling and persistence of embedding matrices.

On-disk conventions (shared with every other module and with external
producers of embeddings):

* features: NPY v1.0, ``'<f4'``, C-order, shape (N, D) — see :mod:`.npyio`.
* sample ids: optional sidecar text file ``<features>.ids`` (UTF-8, one id
  per line, same order as the rows).  Without a sidecar, ids default to
  ``"0" .. "N-1"``.
* dataset manifest: JSON array of ``{name, path, role, extractor}`` objects,
  with paths resolved relative to the manifest file.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import npyio
from .errors import FeatureShapeError, FeatureValidationError

IDS_SUFFIX = ".ids"


def default_ids(n):
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True)
class FeatureSet:
    """An immutable N x D float32 embedding matrix with per-row sample ids."""

    ids: tuple
    data: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        data = self.data
        if not isinstance(data, np.ndarray) or data.ndim != 2:
            raise FeatureShapeError("feature data must be a 2-D array")
        if data.dtype != np.float32:
            raise FeatureShapeError("feature data must be float32, got %s" % data.dtype)
        n, d = data.shape
        if n < 1 or d < 1:
            raise FeatureValidationError("feature matrix must have N >= 1 and D >= 1, got %dx%d" % (n, d))
        finite_rows = np.isfinite(data).all(axis=1)
        if not finite_rows.all():
            row = int(np.argmin(finite_rows))
            raise FeatureValidationError("non-finite value in row %d" % row)
        ids = tuple(str(i) for i in self.ids)
        object.__setattr__(self, "ids", ids)
        if len(ids) != n:
            raise FeatureValidationError("%d ids for %d rows" % (len(ids), n))
        if len(set(ids)) != n:
            raise FeatureValidationError("sample ids are not unique")
        try:
            data.setflags(write=False)
        except ValueError:
            pass  # already read-only through its base

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    @classmethod
    def from_array(cls, data, ids=None, source_tag=""):
        """Build a FeatureSet from any array-like, coercing to C-order float32."""
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if ids is None:
            ids = default_ids(arr.shape[0])
        return cls(ids=tuple(ids), data=arr, source_tag=source_tag)


def ids_sidecar_path(path):
    return str(path) + IDS_SUFFIX


def load_features(path):
    """Load a feature matrix plus its optional id sidecar.

    The file must be NPY v1.0, '<f4', C-order, 2-D; rows must be finite.
    """
    data = npyio.read_array(path, ndim=2)
    sidecar = ids_sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, encoding="utf-8") as f:
            ids = tuple(line.rstrip("\n") for line in f)
        if len(ids) != data.shape[0]:
            raise FeatureValidationError(
                "id sidecar has %d lines for %d rows: %s" % (len(ids), data.shape[0], sidecar)
            )
    else:
        ids = default_ids(data.shape[0])
    name = os.path.basename(str(path))
    if name.endswith(".npy"):
        name = name[:-4]
    return FeatureSet(ids=ids, data=data, source_tag=name)


def save_features(fs, path):
    """Write a FeatureSet; the id sidecar is emitted only for non-default ids.

    Loading the result reproduces the matrix and id list bit-exactly.
    """
    npyio.write_array(path, fs.data)
    sidecar = ids_sidecar_path(path)
    if fs.ids != default_ids(fs.n):
        with open(sidecar, "w", encoding="utf-8", newline="\n") as f:
            for sample_id in fs.ids:
                f.write(sample_id + "\n")
    elif os.path.exists(sidecar):
        os.remove(sidecar)


def subsample(fs, count, seed):
    """Draw `count` rows uniformly without replacement, keeping row/id pairing.

    Uses a Philox counter-based generator so the draw is reproducible across
    platforms for a fixed seed.
    """
    if not 1 <= count <= fs.n:
        raise ValueError("subsample count %d out of range 1..%d" % (count, fs.n))
    rng = np.random.Generator(np.random.Philox(seed))
    idx = rng.choice(fs.n, size=count, replace=False)
    ids = tuple(fs.ids[i] for i in idx)
    return FeatureSet(ids=ids, data=np.ascontiguousarray(fs.data[idx]), source_tag=fs.source_tag)


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: str
    role: str
    extractor: str = ""


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = field(default_factory=tuple)

    def by_role(self, role):
        return [e for e in self.entries if e.role == role]


def load_manifest(path):
    """Parse and validate a dataset manifest (names unique, paths existing)."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list) or not raw:
        raise FeatureValidationError("manifest must be a non-empty JSON array: %s" % path)
    base = os.path.dirname(os.path.abspath(str(path)))
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or not {"name", "path", "role"} <= set(item):
            raise FeatureValidationError("manifest entry %d needs name/path/role" % i)
        role = item["role"]
        if role not in ("real", "fake"):
            raise FeatureValidationError(
                "manifest entry %r: role must be 'real' or 'fake', got %r" % (item["name"], role)
            )
        p = item["path"]
        if not os.path.isabs(p):
            p = os.path.join(base, p)
        if not os.path.exists(p):
            raise FeatureValidationError("manifest entry %r: path does not exist: %s" % (item["name"], p))
        entries.append(ManifestEntry(name=item["name"], path=p, role=role, extractor=item.get("extractor", "")))
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise FeatureValidationError("manifest names are not unique")
    return DatasetManifest(entries=tuple(entries))

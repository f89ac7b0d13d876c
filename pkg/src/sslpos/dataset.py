"""Dataset container, binary serialization, splits and featurization.

A dataset holds n CIR tensors of shape (n_bs, n_port, n_delay), stored as
complex64, plus optional (x, y) position labels in float64 and a manifest
dict recording how the data was generated.

File format (little-endian), extension .sslb:

    magic    4 bytes  b"SSLB"
    version  u32      currently 1
    n        u64      sample count
    n_bs     u16
    n_port   u16
    n_delay  u16
    labeled  u8       0 or 1

followed per sample by the CIR as float32 (re, im) pairs in
[bs][port][tap] order, then, if labeled, the position as 2 float64. A JSON
sidecar at <path>.manifest.json carries the manifest. A directory of
shards is read by concatenating its *.sslb files in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import os
import struct

import numpy as np

MAGIC = b"SSLB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQHHHB")
FILE_SUFFIX = ".sslb"


class FormatError(ValueError):
    """Raised on malformed dataset files."""


@dataclass
class Dataset:
    """In-memory sample collection: CIR tensors plus optional labels."""

    cirs: np.ndarray                  # (n, n_bs, n_port, n_delay) complex64
    positions: np.ndarray | None      # (n, 2) float64, or None when unlabeled
    manifest: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cirs.ndim != 4:
            raise ValueError("cirs must have shape (n, n_bs, n_port, n_delay)")
        if self.cirs.dtype != np.complex64:
            self.cirs = self.cirs.astype(np.complex64)
        if self.positions is not None:
            self.positions = np.asarray(self.positions, dtype=np.float64)
            if self.positions.shape != (self.cirs.shape[0], 2):
                raise ValueError("positions must have shape (n, 2)")

    def __len__(self) -> int:
        return self.cirs.shape[0]

    @property
    def labeled(self) -> bool:
        return self.positions is not None

    @property
    def tensor_shape(self) -> tuple[int, int, int]:
        return tuple(self.cirs.shape[1:])

    def take(self, indices: np.ndarray, note: str | None = None) -> "Dataset":
        """New dataset holding the given rows, manifest carried over."""
        manifest = dict(self.manifest)
        if note:
            manifest.setdefault("history", [])
            manifest["history"] = list(manifest["history"]) + [note]
        return Dataset(
            cirs=self.cirs[indices].copy(),
            positions=self.positions[indices].copy() if self.labeled else None,
            manifest=manifest,
        )


def write_dataset(ds: Dataset, path: str) -> None:
    """Write the binary file plus its manifest sidecar."""
    n, n_bs, n_port, n_delay = (len(ds),) + ds.tensor_shape
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, n, n_bs, n_port, n_delay, 1 if ds.labeled else 0
    )
    with open(path, "wb") as f:
        f.write(header)
        for i in range(n):
            # complex64 memory layout is already interleaved float32 (re, im)
            f.write(np.ascontiguousarray(ds.cirs[i]).tobytes())
            if ds.labeled:
                f.write(np.ascontiguousarray(ds.positions[i]).tobytes())
    with open(path + ".manifest.json", "w") as f:
        json.dump(ds.manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_one(path: str) -> Dataset:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)}")
    magic, version, n, n_bs, n_port, n_delay, labeled = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    cir_bytes = n_bs * n_port * n_delay * 8
    pos_bytes = 16 if labeled else 0
    expected = _HEADER.size + n * (cir_bytes + pos_bytes)
    if len(raw) != expected:
        offset = min(len(raw), expected)
        raise FormatError(
            f"{path}: expected {expected} bytes for {n} samples, got "
            f"{len(raw)} (corrupt at byte offset {offset})"
        )
    cirs = np.empty((n, n_bs, n_port, n_delay), dtype=np.complex64)
    positions = np.empty((n, 2), dtype=np.float64) if labeled else None
    off = _HEADER.size
    for i in range(n):
        cirs[i] = np.frombuffer(raw, dtype=np.complex64, count=n_bs * n_port * n_delay,
                                offset=off).reshape(n_bs, n_port, n_delay)
        off += cir_bytes
        if labeled:
            positions[i] = np.frombuffer(raw, dtype=np.float64, count=2, offset=off)
            off += pos_bytes
    manifest_path = path + ".manifest.json"
    manifest = {}
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            manifest = json.load(f)
    return Dataset(cirs=cirs, positions=positions, manifest=manifest)


def read_dataset(path: str) -> Dataset:
    """Read one file, or concatenate a directory of shards."""
    if os.path.isdir(path):
        names = sorted(
            n for n in os.listdir(path)
            if n.endswith(FILE_SUFFIX) and os.path.isfile(os.path.join(path, n))
        )
        if not names:
            raise FormatError(f"{path}: no {FILE_SUFFIX} shards found")
        shards = [_read_one(os.path.join(path, n)) for n in names]
        first = shards[0]
        for s in shards[1:]:
            if s.tensor_shape != first.tensor_shape or s.labeled != first.labeled:
                raise FormatError(f"{path}: shards disagree on shape or labeling")
        return Dataset(
            cirs=np.concatenate([s.cirs for s in shards]),
            positions=(
                np.concatenate([s.positions for s in shards]) if first.labeled else None
            ),
            manifest={"shards": [s.manifest for s in shards]},
        )
    return _read_one(path)


def split(ds: Dataset, n_train: int, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint train/test split by a seeded permutation."""
    if n_train + n_test > len(ds):
        raise ValueError(
            f"cannot split {len(ds)} samples into {n_train} train + {n_test} test"
        )
    perm = np.random.default_rng(seed).permutation(len(ds))
    train = ds.take(perm[:n_train], note=f"split train {n_train} seed {seed}")
    test = ds.take(perm[n_train:n_train + n_test], note=f"split test {n_test} seed {seed}")
    return train, test

def subset_labeled(ds: Dataset, n: int, seed: int) -> Dataset:
    """First n entries of a seeded permutation; subsets nest for a fixed
    seed, so growing n only ever adds samples."""
    if n > len(ds):
        raise ValueError(f"cannot take {n} of {len(ds)} samples")
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.take(perm[:n], note=f"subset {n} seed {seed}")


def feature_dim(tensor_shape: tuple[int, int, int]) -> int:
    n_bs, n_port, n_delay = tensor_shape
    return 4 * n_bs * n_port * n_delay


def _unit_energy_flat(cirs: np.ndarray) -> np.ndarray:
    """Scale each tensor to unit total energy, flatten to interleaved
    (re, im) float64 in [bs][port][tap] order."""
    flat = cirs.reshape(cirs.shape[0], -1).astype(np.complex128)
    energy = np.einsum("ij,ij->i", flat.real, flat.real) + np.einsum(
        "ij,ij->i", flat.imag, flat.imag
    )
    if np.any(energy <= 0.0):
        bad = int(np.argmax(energy <= 0.0))
        raise ValueError(f"sample {bad} has zero energy and cannot be normalized")
    flat = flat / np.sqrt(energy)[:, None]
    out = np.empty((flat.shape[0], 2 * flat.shape[1]), dtype=np.float64)
    out[:, 0::2] = flat.real
    out[:, 1::2] = flat.imag
    return out


def featurize(cir: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Network input for one (measured, reference) CIR pair.

    Both tensors are scaled to unit total energy and flattened to
    interleaved re/im; the reference half is appended to the measured
    half. With the default dimensioning the result has 18432 entries.
    """
    if cir.shape != reference.shape:
        raise ValueError("cir and reference must share a shape")
    return featurize_batch(cir[None], reference[None])[0]


def featurize_batch(cirs: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Vectorized featurize over matching (n, ...) tensor stacks."""
    if cirs.shape != references.shape:
        raise ValueError("cirs and references must share a shape")
    return np.concatenate(
        [_unit_energy_flat(cirs), _unit_energy_flat(references)], axis=1
    )

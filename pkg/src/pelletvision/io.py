"""On-disk formats.

* Label maps: 16-bit single-channel PNG, pixel value = instance id.
* Float maps: one NPY v1.0 file per map (little-endian float32, C order) in a
  directory, plus a ``maps.meta`` sidecar recording ray count and class order.
* Reports: JSON with provenance; per-instance tables and image stats as CSV.
* Split results: two-column text manifest (image id, subset).

All writes are atomic (temp file + rename in the same directory).
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .analysis import CLASS_NAMES, PelletClass
from .dataset import ImageStats
from .errors import FormatError
from .postproc import InstanceMap, InstanceRecord, PredictionMaps

MAX_LABEL_ID = 65535
MAPS_META_NAME = "maps.meta"
DEFAULT_CLASS_ORDER = tuple(CLASS_NAMES[c] for c in PelletClass)


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_label_map(labels: np.ndarray, path: str | Path) -> None:
    """Write a label map as 16-bit grayscale PNG; round trip is bit-exact."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise FormatError(f"label map must be 2D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > MAX_LABEL_ID):
        raise FormatError(
            f"label ids must fit 16 bits (0..{MAX_LABEL_ID}); found "
            f"range [{labels.min()}, {labels.max()}]. Relabel instances to "
            f"contiguous ids before writing.")
    img = Image.fromarray(labels.astype(np.uint16))  # mode I;16
    buf = _stdio.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_label_map(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"label map not found: {path}")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"{path}: not a readable PNG: {exc}") from exc
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, found {img.format}")
    if img.mode not in ("I;16", "I;16B", "I"):
        raise FormatError(
            f"{path}: expected 16-bit single-channel PNG, found mode {img.mode!r}")
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected one channel, found shape {arr.shape}")
    if arr.min() < 0 or arr.max() > MAX_LABEL_ID:
        raise FormatError(f"{path}: pixel values outside 16-bit id range")
    return arr.astype(np.int32)


def write_rgb_image(image: np.ndarray, path: str | Path) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise FormatError(f"expected (H, W, 3) uint8 image, got "
                          f"{image.shape} {image.dtype}")
    buf = _stdio.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_rgb_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"image not found: {path}")
    img = Image.open(path)
    img.load()
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def _save_npy(path: Path, array: np.ndarray) -> None:
    buf = _stdio.BytesIO()
    np.save(buf, np.ascontiguousarray(array, dtype="<f4"))
    atomic_write_bytes(path, buf.getvalue())


def _load_npy(path: Path, expected_ndim: int) -> np.ndarray:
    if not path.is_file():
        raise FormatError(f"map file not found: {path}")
    with open(path, "rb") as handle:
        try:
            version = np.lib.format.read_magic(handle)
        except ValueError as exc:
            raise FormatError(f"{path}: not an NPY file: {exc}") from exc
        if version != (1, 0):
            raise FormatError(f"{path}: expected NPY v1.0, found v{version[0]}.{version[1]}")
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(handle)
        if fortran_order:
            raise FormatError(f"{path}: expected C-order data, found Fortran order")
        if dtype != np.dtype("<f4"):
            raise FormatError(
                f"{path}: expected little-endian float32 ('<f4'), found {dtype.str!r}")
        if len(shape) != expected_ndim:
            raise FormatError(
                f"{path}: expected a {expected_ndim}D array, found shape {shape}")
        data = np.fromfile(handle, dtype=dtype, count=int(np.prod(shape)))
        if data.size != int(np.prod(shape)):
            raise FormatError(f"{path}: truncated data for shape {shape}")
    return data.reshape(shape)


def write_maps(maps: PredictionMaps, dir_path: str | Path,
               class_names=DEFAULT_CLASS_ORDER) -> None:
    """Write prob/dist/type arrays plus the sidecar meta file."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    if len(class_names) != maps.n_classes:
        raise FormatError(f"{maps.n_classes} classes in maps but "
                          f"{len(class_names)} class names given")
    _save_npy(dir_path / "prob.npy", maps.prob)
    _save_npy(dir_path / "dist.npy", maps.dist)
    _save_npy(dir_path / "type.npy", maps.type_scores)
    meta = (f"n_rays={maps.n_rays}\n"
            f"n_classes={maps.n_classes}\n"
            f"classes={','.join(class_names)}\n")
    atomic_write_text(dir_path / MAPS_META_NAME, meta)


def read_maps(dir_path: str | Path,
              expected_n_rays: int | None = None) -> tuple[PredictionMaps, tuple[str, ...]]:
    """Read a maps directory; returns the maps and the class-name order."""
    dir_path = Path(dir_path)
    meta_path = dir_path / MAPS_META_NAME
    if not meta_path.is_file():
        raise FormatError(f"maps sidecar not found: {meta_path}")
    meta: dict[str, str] = {}
    for line in meta_path.read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    try:
        n_rays = int(meta["n_rays"])
        n_classes = int(meta["n_classes"])
        class_names = tuple(meta["classes"].split(","))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{meta_path}: bad sidecar: {exc}") from exc
    if len(class_names) != n_classes:
        raise FormatError(f"{meta_path}: {n_classes} classes declared but "
                          f"{len(class_names)} names listed")

    prob = _load_npy(dir_path / "prob.npy", 2)
    dist = _load_npy(dir_path / "dist.npy", 3)
    type_scores = _load_npy(dir_path / "type.npy", 3)
    if dist.shape[2] != n_rays:
        raise FormatError(f"{dir_path}: dist carries {dist.shape[2]} rays, "
                          f"sidecar declares {n_rays}")
    if type_scores.shape[2] != n_classes:
        raise FormatError(f"{dir_path}: type carries {type_scores.shape[2]} "
                          f"classes, sidecar declares {n_classes}")
    if expected_n_rays is not None and n_rays != expected_n_rays:
        raise FormatError(f"{dir_path}: maps have {n_rays} rays but the "
                          f"configuration expects {expected_n_rays}")
    return PredictionMaps(prob=prob, dist=dist, type_scores=type_scores), class_names


def write_instance_records(records: list[InstanceRecord], path: str | Path) -> None:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "score", "class_id", "class_name"])
    for idx, rec in enumerate(records, start=1):
        name = CLASS_NAMES.get(PelletClass(rec.class_id), str(rec.class_id))
        writer.writerow([idx, f"{rec.score:.9g}", rec.class_id, name])
    atomic_write_text(path, buf.getvalue())


def read_instance_records(path: str | Path) -> list[InstanceRecord]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"instance records not found: {path}")
    records = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        try:
            for row in reader:
                records.append(InstanceRecord(score=float(row["score"]),
                                              class_id=int(row["class_id"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad instance records: {exc}") from exc
    return records


def write_instance_map(inst_map: InstanceMap, labels_path: str | Path,
                       records_path: str | Path) -> None:
    write_label_map(inst_map.labels, labels_path)
    write_instance_records(inst_map.records, records_path)


def read_instance_map(labels_path: str | Path,
                      records_path: str | Path) -> InstanceMap:
    labels = read_label_map(labels_path)
    records = read_instance_records(records_path)
    n_ids = int(labels.max())
    if n_ids > len(records):
        raise FormatError(f"{labels_path}: labels reference id {n_ids} but "
                          f"only {len(records)} records exist")
    return InstanceMap(labels=labels, records=records)


def write_stats_csv(stats: list[ImageStats], path: str | Path) -> None:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    class_cols = [CLASS_NAMES[c] for c in PelletClass if c != PelletClass.BACKGROUND]
    writer.writerow(["image_id", *class_cols, "l_mean", "l_std"])
    for s in stats:
        writer.writerow([s.image_id,
                         *(f"{s.fractions[int(c)]:.9g}" for c in PelletClass
                           if c != PelletClass.BACKGROUND),
                         f"{s.lum_mean:.9g}", f"{s.lum_std:.9g}"])
    atomic_write_text(path, buf.getvalue())


def read_stats_csv(path: str | Path) -> list[ImageStats]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"stats file not found: {path}")
    stats = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        try:
            for row in reader:
                fractions = np.zeros(len(PelletClass))
                for c in PelletClass:
                    if c != PelletClass.BACKGROUND:
                        fractions[int(c)] = float(row[CLASS_NAMES[c]])
                stats.append(ImageStats(image_id=row["image_id"],
                                        fractions=fractions,
                                        lum_mean=float(row.get("l_mean", 0) or 0),
                                        lum_std=float(row.get("l_std", 0) or 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad stats csv: {exc}") from exc
    return stats


def write_split_manifest(train_ids: list[str], test_ids: list[str],
                         path: str | Path) -> None:
    lines = [f"{image_id} train" for image_id in train_ids]
    lines += [f"{image_id} test" for image_id in test_ids]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_split_manifest(path: str | Path) -> tuple[list[str], list[str]]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"split manifest not found: {path}")
    train, test = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("train", "test"):
            raise FormatError(f"{path}:{lineno}: expected '<id> train|test', got {line!r}")
        (train if parts[1] == "train" else test).append(parts[0])
    return train, test


def write_json_report(payload: dict, path: str | Path) -> None:
    atomic_write_text(path, dump_json(payload))


def dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"

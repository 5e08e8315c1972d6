"""High-level pipeline operations behind the service endpoints.

Each runner takes file paths plus a validated :class:`PipelineConfig`, does
the work through the core modules, writes its outputs atomically, and returns
a JSON-ready summary embedding provenance (tool version, config hash, input
paths).
"""

from __future__ import annotations

import csv
import io as _stdio
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io as pvio
from .analysis import (CLASS_NAMES, PelletClass, analyze_instances,
                       classify_instance, size_report)
from .color import LuminanceStats, luminance_stats, normalize_luminance
from .config import TOOL_VERSION, PipelineConfig
from .dataset import ImageStats, class_pixel_fractions, split_dataset
from .errors import FormatError, InvalidParameterError, ShapeMismatchError
from .geometry import PixelMask, ray_directions
from .metrics import match_instances, pixel_metrics
from .postproc import (InstanceMap, PredictionMaps, blend_tiles,
                       extract_candidates, make_tile_layout, nms,
                       render_instance_map)
from .synth import DEFAULT_CLASS_MIX, synth_scene
from .targets import expand_labels, object_probability, star_distances

N_CLASSES = len(PelletClass)


def provenance(config: PipelineConfig, inputs: list[str]) -> dict:
    return {"tool_version": TOOL_VERSION,
            "config_sha256": config.config_hash(),
            "inputs": sorted(str(p) for p in inputs)}


def _summary(config: PipelineConfig, inputs: list[str], **payload) -> dict:
    payload["provenance"] = provenance(config, inputs)
    payload["effective_config"] = config.to_flat_dict()
    return payload


def run_synth(out_dir: str, seed: int, config: PipelineConfig,
              height: int = 1000, width: int = 1000, n_objects: int = 50,
              class_mix=DEFAULT_CLASS_MIX,
              radius_min: float = 9.0, radius_max: float = 16.0,
              min_gap: float = 3.0) -> dict:
    """Generate a scene and write labels.png, classes.png, image.png, scene.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = synth_scene(seed, (height, width), n_objects, class_mix=class_mix,
                        radius_range=(radius_min, radius_max), min_gap=min_gap)
    pvio.write_label_map(scene.labels, out / "labels.png")
    pvio.write_label_map(scene.classes.astype(np.int32), out / "classes.png")
    pvio.write_rgb_image(scene.image, out / "image.png")
    summary = _summary(
        config, [],
        seed=seed, requested=scene.requested, placed=scene.placed,
        complete=scene.complete, height=height, width=width,
        centers=[list(c) for c in scene.centers],
        # Names relative to out_dir keep scene.json byte-stable across
        # output locations.
        paths={"labels": "labels.png", "classes": "classes.png",
               "image": "image.png"})
    pvio.write_json_report(summary, out / "scene.json")
    return summary


def run_gen_targets(labels_path: str, out_dir: str, config: PipelineConfig,
                    classes_path: str | None = None,
                    expand: bool = False) -> dict:
    """Turn a ground-truth label map into prediction-style target maps."""
    labels = pvio.read_label_map(labels_path)
    inputs = [labels_path]
    if expand and config.expansion_radius_px > 0:
        labels = expand_labels(labels, config.expansion_radius_px)
    if classes_path is not None:
        classes = pvio.read_label_map(classes_path)
        inputs.append(classes_path)
        if classes.shape != labels.shape:
            raise ShapeMismatchError(
                f"classes {classes.shape} vs labels {labels.shape}")
        if classes.max(initial=0) >= N_CLASSES:
            raise FormatError(
                f"{classes_path}: class ids must be < {N_CLASSES}, "
                f"found {classes.max()}")
        if bool(np.any((classes > 0) != (labels > 0))):
            raise FormatError(f"{classes_path}: class map foreground does not "
                              f"match the label map foreground")
    else:
        # Without a class map every instance is assumed to be a nice pellet.
        classes = np.where(labels > 0, int(PelletClass.NICE), 0)

    fan = ray_directions(config.n_rays)
    maps = PredictionMaps(
        prob=object_probability(labels).astype(np.float32),
        dist=star_distances(labels, fan),
        type_scores=(classes[..., None] == np.arange(N_CLASSES)).astype(np.float32))
    pvio.write_maps(maps, out_dir)
    return _summary(config, inputs, out_dir=str(out_dir),
                    height=int(labels.shape[0]), width=int(labels.shape[1]),
                    n_rays=config.n_rays, expanded=bool(expand))


def _read_tiles_manifest(path: str) -> list[tuple[tuple[int, int], str]]:
    manifest = Path(path)
    if not manifest.is_file():
        raise FormatError(f"tiles manifest not found: {manifest}")
    tiles = []
    for lineno, line in enumerate(manifest.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(
                f"{manifest}:{lineno}: expected '<row> <col> <maps-dir>', got {line!r}")
        try:
            offset = (int(parts[0]), int(parts[1]))
        except ValueError as exc:
            raise FormatError(f"{manifest}:{lineno}: bad offset: {exc}") from exc
        tiles.append((offset, parts[2]))
    if not tiles:
        raise FormatError(f"{manifest}: no tiles listed")
    return tiles


def run_postprocess(out_dir: str, config: PipelineConfig,
                    maps_dir: str | None = None,
                    tiles_manifest: str | None = None,
                    image_height: int | None = None,
                    image_width: int | None = None,
                    reclassify: bool = True) -> dict:
    """Maps -> candidates -> NMS -> instance map, written as PNG16 + CSV."""
    fan = ray_directions(config.n_rays)
    if (maps_dir is None) == (tiles_manifest is None):
        raise InvalidParameterError(
            "exactly one of maps_dir or tiles_manifest must be given")
    inputs: list[str]
    if tiles_manifest is not None:
        if None in (config.tile_h, config.tile_w, config.tile_stride):
            raise InvalidParameterError(
                "tile_h, tile_w and tile_stride must be configured for tiled input")
        if image_height is None or image_width is None:
            raise InvalidParameterError(
                "image_height/image_width are required with a tiles manifest")
        entries = _read_tiles_manifest(tiles_manifest)
        tiles = [(offset, pvio.read_maps(dir_, config.n_rays)[0])
                 for offset, dir_ in entries]
        layout = make_tile_layout(image_height, image_width,
                                  config.tile_h, config.tile_w, config.tile_stride)
        maps = blend_tiles(tiles, layout, (image_height, image_width),
                           floor=config.pyramid_floor)
        inputs = [tiles_manifest] + [d for _, d in entries]
    else:
        maps, _ = pvio.read_maps(maps_dir, config.n_rays)
        inputs = [maps_dir]

    candidates = extract_candidates(maps, fan, config.prob_threshold,
                                    stride=config.extraction_stride)
    kept = nms(candidates, fan, config.nms_iou_threshold)
    inst_map = render_instance_map(kept, fan, maps.shape)
    if reclassify:
        reclassify_instances(inst_map, maps.type_scores)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels_path = out / "instances.png"
    records_path = out / "instances.csv"
    pvio.write_instance_map(inst_map, labels_path, records_path)
    return _summary(config, inputs,
                    n_candidates=len(candidates), n_instances=len(kept),
                    paths={"labels": str(labels_path), "records": str(records_path)})


def reclassify_instances(inst_map: InstanceMap, type_scores: np.ndarray) -> None:
    """Replace record classes with the per-mask majority vote."""
    boxes = ndimage.find_objects(inst_map.labels, max_label=inst_map.n_instances)
    for inst_id in range(1, inst_map.n_instances + 1):
        box = boxes[inst_id - 1]
        if box is None:
            continue
        bits = inst_map.labels[box] == inst_id
        mask = PixelMask.from_bits(box[0].start, box[1].start, bits)
        inst_map.record_for(inst_id).class_id = int(
            classify_instance(mask, type_scores))


def run_measure(labels_path: str, records_path: str, out_dir: str,
                config: PipelineConfig) -> dict:
    """Size every measured-class instance; write report.json and report.csv."""
    if config.mm_per_px is None:
        raise InvalidParameterError(
            "mm_per_px is required for measurement; set it in the config "
            "file or pass --mm-per-px")
    inst_map = pvio.read_instance_map(labels_path, records_path)
    instances = analyze_instances(inst_map, config.mm_per_px)
    report = size_report(instances, config.histogram_bins_mm,
                         config.measured_class_set())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = _summary(config, [labels_path, records_path],
                       size_report=report.to_dict())
    pvio.write_json_report(payload, out / "report.json")

    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "class", "score", "diameter_px", "diameter_mm",
                     "rejected"])
    for inst in instances:
        writer.writerow([
            inst.inst_id, CLASS_NAMES[inst.pellet_class], f"{inst.score:.9g}",
            "" if inst.diameter_px is None else f"{inst.diameter_px:.9g}",
            "" if inst.diameter_mm is None else f"{inst.diameter_mm:.9g}",
            int(inst.diameter_mm is None)])
    pvio.atomic_write_text(out / "report.csv", buf.getvalue())
    payload["paths"] = {"json": str(out / "report.json"),
                        "csv": str(out / "report.csv")}
    return payload


def run_evaluate(pred_path: str, gt_path: str, config: PipelineConfig,
                 pred_classes_path: str | None = None,
                 gt_classes_path: str | None = None,
                 out_path: str | None = None) -> dict:
    """Instance matching at tau plus per-pixel metrics.

    With class maps the pixel metrics cover all pellet classes (the ugly-class
    F1 is surfaced at the top level as the production health indicator);
    otherwise they degrade to background/foreground.
    """
    pred = pvio.read_label_map(pred_path)
    gt = pvio.read_label_map(gt_path)
    inputs = [pred_path, gt_path]
    match = match_instances(pred, gt, config.match_tau)

    pred_fg = pred > 0
    gt_fg = gt > 0
    union = int(np.logical_or(pred_fg, gt_fg).sum())
    mask_iou = (int(np.logical_and(pred_fg, gt_fg).sum()) / union) if union else 0.0

    if (pred_classes_path is None) != (gt_classes_path is None):
        raise InvalidParameterError(
            "pass both class maps or neither (--pred-classes/--gt-classes)")
    if pred_classes_path is not None:
        pred_cls = pvio.read_label_map(pred_classes_path)
        gt_cls = pvio.read_label_map(gt_classes_path)
        inputs += [pred_classes_path, gt_classes_path]
        px = pixel_metrics(pred_cls, gt_cls, n_classes=N_CLASSES)
        class_names = {int(c): CLASS_NAMES[c] for c in PelletClass}
        ugly_f1 = float(px.f1[int(PelletClass.UGLY)])
    else:
        px = pixel_metrics(pred_fg.astype(np.int64), gt_fg.astype(np.int64),
                           n_classes=2)
        class_names = {0: "background", 1: "foreground"}
        ugly_f1 = None

    payload = _summary(config, inputs,
                       tau=config.match_tau,
                       match_report=match.to_dict(),
                       pixel_metrics=px.to_dict(class_names),
                       mask_iou=mask_iou)
    if ugly_f1 is not None:
        payload["ugly_f1"] = ugly_f1
    if out_path is not None:
        pvio.write_json_report(payload, out_path)
        payload["paths"] = {"json": str(out_path)}
    return payload


def stats_from_class_maps(classes_dir: str) -> list[ImageStats]:
    """One ImageStats per PNG16 class map in a directory (sorted by name)."""
    directory = Path(classes_dir)
    if not directory.is_dir():
        raise FormatError(f"class-map directory not found: {directory}")
    paths = sorted(directory.glob("*.png"))
    if not paths:
        raise FormatError(f"no .png class maps in {directory}")
    stats = []
    for path in paths:
        classes = pvio.read_label_map(path)
        if classes.max(initial=0) >= N_CLASSES:
            raise FormatError(f"{path}: class ids must be < {N_CLASSES}")
        stats.append(ImageStats(image_id=path.stem,
                                fractions=class_pixel_fractions(classes)))
    return stats


def run_split(out_manifest: str, config: PipelineConfig, seed: int,
              stats_csv: str | None = None, classes_dir: str | None = None,
              out_stats: str | None = None) -> dict:
    """Wasserstein-stratified train/test split."""
    if (stats_csv is None) == (classes_dir is None):
        raise InvalidParameterError(
            "exactly one of stats_csv or classes_dir must be given")
    if stats_csv is not None:
        stats = pvio.read_stats_csv(stats_csv)
        inputs = [stats_csv]
    else:
        stats = stats_from_class_maps(classes_dir)
        inputs = [classes_dir]
    assignment = split_dataset(stats, config.split_test_fraction,
                               config.split_restarts, seed)
    pvio.write_split_manifest(assignment.train_ids, assignment.test_ids,
                              out_manifest)
    paths = {"manifest": str(out_manifest)}
    if out_stats is not None:
        pvio.write_stats_csv(stats, out_stats)
        paths["stats"] = str(out_stats)
    return _summary(config, inputs, split=assignment.to_dict(),
                    seed=seed, paths=paths)


def run_normalize(inputs: list[str], out_dir: str, config: PipelineConfig,
                  ref_mean: float | None = None, ref_std: float | None = None,
                  ref_image: str | None = None, jobs: int = 1) -> dict:
    """Match every input image's luminance distribution to the reference."""
    if ref_image is not None:
        ref = luminance_stats(pvio.read_rgb_image(ref_image))
    elif ref_mean is not None and ref_std is not None:
        ref = LuminanceStats(ref_mean=ref_mean, ref_std=ref_std)
    else:
        raise InvalidParameterError(
            "give --ref-image or both --ref-mean and --ref-std")
    if jobs < 1:
        raise InvalidParameterError(f"jobs must be >= 1, got {jobs}")

    paths: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.png")))
        else:
            paths.append(p)
    if not paths:
        raise FormatError("no input images found")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> dict:
        image = pvio.read_rgb_image(path)
        fixed = normalize_luminance(image, ref)
        out_path = out / path.name
        pvio.write_rgb_image(fixed, out_path)
        achieved = luminance_stats(fixed)
        return {"input": str(path), "output": str(out_path),
                "l_mean": achieved.ref_mean, "l_std": achieved.ref_std}

    if jobs == 1:
        results = [work(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, paths))
    return _summary(config, [str(p) for p in paths],
                    ref={"l_mean": ref.ref_mean, "l_std": ref.ref_std},
                    images=results)

"""On-disk format contracts: PNG16 label maps, NPY maps, CSVs, config files."""

import numpy as np
import pytest
from PIL import Image

from pelletvision import io as pvio
from pelletvision.config import (PipelineConfig, load_config,
                                 parse_config_text)
from pelletvision.dataset import ImageStats
from pelletvision.errors import FormatError, InvalidParameterError
from pelletvision.postproc import InstanceMap, InstanceRecord, PredictionMaps


class TestLabelMapPng:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        labels = rng.integers(0, 3000, size=(33, 41)).astype(np.int32)
        path = tmp_path / "labels.png"
        pvio.write_label_map(labels, path)
        assert np.array_equal(pvio.read_label_map(path), labels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError, match="not found"):
            pvio.read_label_map(tmp_path / "nope.png")

    def test_8bit_png_rejected(self, tmp_path):
        path = tmp_path / "8bit.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(path)
        with pytest.raises(FormatError, match="16-bit"):
            pvio.read_label_map(path)

    def test_rgb_png_rejected(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(path)
        with pytest.raises(FormatError):
            pvio.read_label_map(path)

    def test_id_above_16bit_rejected_with_hint(self, tmp_path):
        labels = np.zeros((4, 4), dtype=np.int64)
        labels[0, 0] = 70000
        with pytest.raises(FormatError, match="Relabel"):
            pvio.write_label_map(labels, tmp_path / "big.png")

    def test_boundary_id_65535_accepted(self, tmp_path):
        labels = np.full((2, 2), 65535, dtype=np.int64)
        path = tmp_path / "max.png"
        pvio.write_label_map(labels, path)
        assert pvio.read_label_map(path).max() == 65535


def small_maps(rng, h=6, w=7, n_rays=8, n_classes=5):
    return PredictionMaps(
        prob=rng.uniform(0, 1, (h, w)).astype(np.float32),
        dist=rng.uniform(0, 9, (h, w, n_rays)).astype(np.float32),
        type_scores=rng.uniform(0, 1, (h, w, n_classes)).astype(np.float32))


class TestMapsNpy:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        maps = small_maps(rng)
        pvio.write_maps(maps, tmp_path / "maps")
        loaded, class_names = pvio.read_maps(tmp_path / "maps")
        assert np.array_equal(loaded.prob, maps.prob)
        assert np.array_equal(loaded.dist, maps.dist)
        assert np.array_equal(loaded.type_scores, maps.type_scores)
        assert class_names == ("background", "nice", "ugly", "big", "joint")

    def test_ray_count_mismatch_names_both(self, tmp_path, rng):
        maps = small_maps(rng, n_rays=8)
        pvio.write_maps(maps, tmp_path / "maps")
        with pytest.raises(FormatError, match="8.*32|32.*8"):
            pvio.read_maps(tmp_path / "maps", expected_n_rays=32)

    def test_fortran_order_rejected(self, tmp_path, rng):
        maps = small_maps(rng)
        pvio.write_maps(maps, tmp_path / "maps")
        fortran = np.asfortranarray(rng.uniform(0, 1, (6, 7)).astype("<f4"))
        np.save(tmp_path / "maps" / "prob.npy", fortran)
        with pytest.raises(FormatError, match="Fortran"):
            pvio.read_maps(tmp_path / "maps")

    def test_wrong_dtype_rejected(self, tmp_path, rng):
        maps = small_maps(rng)
        pvio.write_maps(maps, tmp_path / "maps")
        np.save(tmp_path / "maps" / "prob.npy",
                rng.uniform(0, 1, (6, 7)).astype(np.float64))
        with pytest.raises(FormatError, match="<f4"):
            pvio.read_maps(tmp_path / "maps")

    def test_missing_sidecar_rejected(self, tmp_path, rng):
        maps = small_maps(rng)
        pvio.write_maps(maps, tmp_path / "maps")
        (tmp_path / "maps" / "maps.meta").unlink()
        with pytest.raises(FormatError, match="sidecar"):
            pvio.read_maps(tmp_path / "maps")

    def test_npy_header_is_v1_little_endian_c_order(self, tmp_path, rng):
        pvio.write_maps(small_maps(rng), tmp_path / "maps")
        with open(tmp_path / "maps" / "dist.npy", "rb") as handle:
            assert np.lib.format.read_magic(handle) == (1, 0)
            shape, fortran, dtype = np.lib.format.read_array_header_1_0(handle)
        assert not fortran
        assert dtype == np.dtype("<f4")
        assert shape == (6, 7, 8)


class TestInstanceRecords:
    def test_round_trip(self, tmp_path):
        inst = InstanceMap(labels=np.array([[0, 1], [2, 2]], dtype=np.int32),
                           records=[InstanceRecord(0.9, 1),
                                    InstanceRecord(0.7, 4)])
        pvio.write_instance_map(inst, tmp_path / "i.png", tmp_path / "i.csv")
        loaded = pvio.read_instance_map(tmp_path / "i.png", tmp_path / "i.csv")
        assert np.array_equal(loaded.labels, inst.labels)
        assert loaded.records == inst.records

    def test_labels_without_records_rejected(self, tmp_path):
        inst = InstanceMap(labels=np.array([[0, 5]], dtype=np.int32),
                           records=[InstanceRecord(0.9, 1)])
        pvio.write_label_map(inst.labels, tmp_path / "i.png")
        pvio.write_instance_records(inst.records, tmp_path / "i.csv")
        with pytest.raises(FormatError, match="records"):
            pvio.read_instance_map(tmp_path / "i.png", tmp_path / "i.csv")


class TestStatsAndManifest:
    def test_stats_round_trip(self, tmp_path):
        stats = [ImageStats("a", np.array([0, 0.1, 0.2, 0.0, 0.05]), 51.0, 9.5),
                 ImageStats("b", np.array([0, 0.3, 0.0, 0.1, 0.0]), 48.0, 7.0)]
        pvio.write_stats_csv(stats, tmp_path / "stats.csv")
        loaded = pvio.read_stats_csv(tmp_path / "stats.csv")
        assert [s.image_id for s in loaded] == ["a", "b"]
        assert np.allclose(loaded[0].fractions, stats[0].fractions)
        assert loaded[1].lum_mean == 48.0

    def test_manifest_round_trip(self, tmp_path):
        pvio.write_split_manifest(["a", "c"], ["b"], tmp_path / "split.txt")
        train, test = pvio.read_split_manifest(tmp_path / "split.txt")
        assert train == ["a", "c"]
        assert test == ["b"]

    def test_bad_manifest_line(self, tmp_path):
        (tmp_path / "bad.txt").write_text("a train\nb nowhere\n")
        with pytest.raises(FormatError, match="train|test"):
            pvio.read_split_manifest(tmp_path / "bad.txt")


class TestConfigFile:
    def test_defaults(self):
        config = PipelineConfig().validate()
        assert config.n_rays == 32
        assert config.prob_threshold == 0.5
        assert config.nms_iou_threshold == 0.3
        assert config.match_tau == 0.5
        assert config.expansion_radius_px == 2.0
        assert (config.w_dist, config.w_type, config.w_stardist) == (1.0, 1.0, 0.5)
        assert config.measured_classes == ("nice",)

    def test_parse_and_override(self):
        config = parse_config_text(
            "n_rays=16\nprob_threshold=0.4\n"
            "histogram_bins_mm=5,10,15\nmeasured_classes=nice,big\n"
            "# comment\nmm_per_px=0.25\n")
        assert config.n_rays == 16
        assert config.histogram_bins_mm == (5.0, 10.0, 15.0)
        assert config.measured_classes == ("nice", "big")
        assert config.mm_per_px == 0.25

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidParameterError, match="unknown config key"):
            parse_config_text("frobnicate=1\n")

    def test_bad_value_rejected(self):
        with pytest.raises(FormatError):
            parse_config_text("n_rays=abc\n")

    def test_invalid_threshold_rejected(self):
        with pytest.raises(InvalidParameterError):
            parse_config_text("prob_threshold=1.4\n")

    def test_hash_stable_and_sensitive(self, tmp_path):
        a = PipelineConfig()
        b = PipelineConfig()
        assert a.config_hash() == b.config_hash()
        c = a.with_overrides(n_rays=16)
        assert c.config_hash() != a.config_hash()

    def test_load_config_missing(self, tmp_path):
        with pytest.raises(FormatError, match="not found"):
            load_config(tmp_path / "none.cfg")


class TestAtomicity:
    def test_write_replaces_not_appends(self, tmp_path):
        path = tmp_path / "x.txt"
        pvio.atomic_write_text(path, "one")
        pvio.atomic_write_text(path, "two")
        assert path.read_text() == "two"
        leftovers = [p for p in tmp_path.iterdir() if p.name != "x.txt"]
        assert leftovers == []

import collections
import hashlib
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as scipy_stats

from leanstack.datagen import (
    TableSpec,
    TextCorpusSpec,
    build_vocabulary,
    gen_tables,
    gen_text,
    read_manifest,
    write_manifest,
    zipf_probabilities,
)
from leanstack.errors import DataGenError


def dir_digest(manifest):
    h = hashlib.md5()
    for entry in sorted(manifest, key=lambda e: e["path"]):
        h.update(Path(entry["path"]).read_bytes())
    return h.hexdigest()


class TestSpecs:
    def test_text_spec_validation(self):
        with pytest.raises(DataGenError):
            TextCorpusSpec(total_bytes=10, target_file_bytes=100)
        with pytest.raises(DataGenError):
            TextCorpusSpec(total_bytes=1000, target_file_bytes=100, vocabulary=1)

    def test_table_spec_validation(self):
        with pytest.raises(DataGenError):
            TableSpec(total_bytes=10_000, item_fraction=1.5)
        with pytest.raises(DataGenError):
            TableSpec(total_bytes=10)


class TestVocabulary:
    def test_deterministic_prefix(self):
        assert build_vocabulary(30)[:28][-2:] == ["aa", "ab"]

    def test_probabilities_normalized(self):
        p = zipf_probabilities(100, 1.1)
        assert math.isclose(p.sum(), 1.0)
        assert all(a >= b for a, b in zip(p, p[1:]))


class TestGenText:
    def test_file_count_and_sizes(self, tmp_path):
        spec = TextCorpusSpec(total_bytes=1_000_000, target_file_bytes=50_000, seed=1)
        manifest = gen_text(spec, tmp_path)
        assert len(manifest) == 20
        for entry in manifest:
            assert abs(entry["bytes"] - 50_000) / 50_000 < 0.10
        total = sum(e["bytes"] for e in manifest)
        assert abs(total - 1_000_000) / 1_000_000 < 0.02

    def test_files_per_volume_law(self, tmp_path):
        # File count grows linearly with volume at fixed target size.
        counts = []
        for mult in (1, 2, 4):
            spec = TextCorpusSpec(
                total_bytes=200_000 * mult, target_file_bytes=50_000, seed=0
            )
            counts.append(len(gen_text(spec, tmp_path / str(mult))))
        assert counts == [4, 8, 16]

    def test_deterministic_per_seed(self, tmp_path):
        spec = TextCorpusSpec(total_bytes=120_000, target_file_bytes=60_000, seed=9)
        m1 = gen_text(spec, tmp_path / "a")
        m2 = gen_text(spec, tmp_path / "b")
        assert dir_digest(m1) == dir_digest(m2)
        m3 = gen_text(
            TextCorpusSpec(total_bytes=120_000, target_file_bytes=60_000, seed=10),
            tmp_path / "c",
        )
        assert dir_digest(m1) != dir_digest(m3)

    def test_zipf_shape(self, tmp_path):
        vocab_size = 50
        spec = TextCorpusSpec(
            total_bytes=400_000,
            target_file_bytes=400_000,
            vocabulary=vocab_size,
            zipf_exponent=1.1,
            seed=4,
        )
        manifest = gen_text(spec, tmp_path)
        counts = collections.Counter()
        for entry in manifest:
            counts.update(Path(entry["path"]).read_text().split())
        vocab = build_vocabulary(vocab_size)
        observed = np.array([counts[w] for w in vocab], dtype=float)
        expected = zipf_probabilities(vocab_size, 1.1) * observed.sum()
        # Generous chi-square sanity bound: reject only gross mismatch.
        stat, p = scipy_stats.chisquare(observed, expected)
        assert p > 1e-6


class TestGenTables:
    def test_item_order_ratio_and_file_count(self, tmp_path):
        spec = TableSpec(total_bytes=500_000, seed=2)
        manifest = gen_tables(spec, tmp_path)
        items = [e for e in manifest if Path(e["path"]).name.startswith("item_")]
        orders = [e for e in manifest if Path(e["path"]).name.startswith("order_")]
        assert len(items) == 4 and len(orders) == 4
        item_bytes = sum(e["bytes"] for e in items)
        total = sum(e["bytes"] for e in manifest)
        assert abs(item_bytes / total - 0.62) < 0.03

    def test_volume_grows_but_file_count_fixed(self, tmp_path):
        m1 = gen_tables(TableSpec(total_bytes=200_000, seed=0), tmp_path / "a")
        m2 = gen_tables(TableSpec(total_bytes=400_000, seed=0), tmp_path / "b")
        assert len(m1) == len(m2) == 8
        b1 = sum(e["bytes"] for e in m1)
        b2 = sum(e["bytes"] for e in m2)
        assert abs(b2 / b1 - 2.0) < 0.02

    def test_deterministic_per_seed(self, tmp_path):
        m1 = gen_tables(TableSpec(total_bytes=150_000, seed=7), tmp_path / "a")
        m2 = gen_tables(TableSpec(total_bytes=150_000, seed=7), tmp_path / "b")
        assert dir_digest(m1) == dir_digest(m2)

    def test_referential_integrity(self, tmp_path):
        manifest = gen_tables(TableSpec(total_bytes=120_000, seed=3), tmp_path)
        item_ids = set()
        order_refs = set()
        for entry in manifest:
            for line in Path(entry["path"]).read_text().splitlines():
                fields = line.split(" ")
                if fields[0].startswith("I"):
                    item_ids.add(fields[0])
                else:
                    order_refs.add(fields[1])
        assert order_refs <= item_ids

    def test_numeric_columns_parse(self, tmp_path):
        manifest = gen_tables(TableSpec(total_bytes=50_000, seed=1), tmp_path)
        from leanstack.records import numeric_value

        for entry in manifest:
            line = Path(entry["path"]).read_text().splitlines()[0]
            fields = line.split(" ")
            if fields[0].startswith("I"):
                numeric_value(fields[2])  # price
                numeric_value(fields[3])  # stock
            else:
                numeric_value(fields[3])  # quantity
                numeric_value(fields[4])  # total


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = gen_tables(TableSpec(total_bytes=50_000, seed=1), tmp_path)
        path = tmp_path / "manifest.txt"
        write_manifest(path, manifest)
        assert read_manifest(path) == manifest

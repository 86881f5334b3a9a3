import shutil
import struct
import subprocess

import numpy as np
import pytest

from relchain_exporter.cli import main
from relchain_exporter.encoders import HashEncoder, make_encoder
from relchain_exporter.export import (ExportError, ExportManifest,
                                      export_relations, export_word_vectors)
from relchain_exporter.formats import normalize


def read_relc(path):
    """Struct-level reader, independent of any consumer code."""
    raw = path.read_bytes()
    assert raw[:4] == b"RELC"
    version, dim = struct.unpack_from("<II", raw, 4)
    count, = struct.unpack_from("<Q", raw, 12)
    off = 20
    records = []
    for _ in range(count):
        la, = struct.unpack_from("<H", raw, off)
        a = raw[off + 2:off + 2 + la].decode("utf-8")
        off += 2 + la
        lb, = struct.unpack_from("<H", raw, off)
        b = raw[off + 2:off + 2 + lb].decode("utf-8")
        off += 2 + lb
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=off).copy()
        off += 4 * dim
        records.append((a, b, vec))
    assert off == len(raw), "trailing bytes"
    return version, dim, records


def read_wvec(path):
    raw = path.read_bytes()
    assert raw[:4] == b"WVEC"
    version, dim = struct.unpack_from("<II", raw, 4)
    count, = struct.unpack_from("<Q", raw, 12)
    off = 20
    records = []
    for _ in range(count):
        lt, = struct.unpack_from("<H", raw, off)
        token = raw[off + 2:off + 2 + lt].decode("utf-8")
        off += 2 + lt
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=off).copy()
        off += 4 * dim
        records.append((token, vec))
    assert off == len(raw), "trailing bytes"
    return version, dim, records


class TestNormalize:
    def test_contract(self):
        assert normalize("New York") == "new_york"
        assert normalize("  A  B ") == "a_b"
        with pytest.raises(ValueError):
            normalize("  ")


class TestHashEncoder:
    def test_deterministic_and_order_sensitive(self):
        enc = HashEncoder(dim=16)
        [v1] = enc.encode([("cat", "dog")])
        [v2] = enc.encode([("cat", "dog")])
        [v3] = enc.encode([("dog", "cat")])
        assert np.array_equal(v1, v2)
        assert not np.array_equal(v1, v3)
        assert v1.dtype == np.float32 and v1.shape == (16,)

    def test_dim_spans_hash_blocks(self):
        enc = HashEncoder(dim=70)  # needs several sha256 blocks
        [v] = enc.encode([("a", "b")])
        assert v.shape == (70,)
        assert np.all(np.abs(v) <= 1.0)

    def test_make_encoder_dispatch(self):
        enc = make_encoder("hash:32")
        assert isinstance(enc, HashEncoder) and enc.dim == 32


class TestExportRelations:
    def test_three_pair_manifest(self, tmp_path):
        out = tmp_path / "r.relc"
        manifest = ExportManifest(model="hash:24",
                                  pairs=[("a", "b"), ("c", "d"), ("e", "f")],
                                  out=out, batch_size=2, dim=24)
        stats = export_relations(manifest)
        assert stats.written == 3
        version, dim, records = read_relc(out)
        assert (version, dim) == (1, 24)
        assert [(a, b) for a, b, _ in records] == [("a", "b"), ("c", "d"), ("e", "f")]

    def test_ordered_pairs_are_distinct_records(self, tmp_path):
        out = tmp_path / "r.relc"
        manifest = ExportManifest(model="hash:8", pairs=[("a", "b"), ("b", "a")],
                                  out=out, dim=8)
        export_relations(manifest)
        _, _, records = read_relc(out)
        assert len(records) == 2
        assert not np.array_equal(records[0][2], records[1][2])

    def test_reexport_byte_identical(self, tmp_path):
        pairs = [(f"w{i}", f"v{i}") for i in range(20)]
        outs = []
        for name in ("one.relc", "two.relc"):
            out = tmp_path / name
            export_relations(ExportManifest(model="hash:16", pairs=list(pairs),
                                            out=out, batch_size=7, dim=16))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_duplicates_dropped_first_kept(self, tmp_path):
        out = tmp_path / "r.relc"
        stats = export_relations(ExportManifest(
            model="hash:8", pairs=[("a", "b"), ("A", "B"), ("c", "d")],
            out=out, dim=8))
        assert stats.written == 2
        assert stats.duplicates == 1

    def test_declined_pairs_skipped_and_counted(self, tmp_path):
        class Declines:
            dim = 8

            def encode(self, pairs):
                inner = HashEncoder(dim=8)
                return [None if a == "too_long" else inner.encode([(a, b)])[0]
                        for a, b in pairs]

        out = tmp_path / "r.relc"
        manifest = ExportManifest(model="unused",
                                  pairs=[("a", "b"), ("too_long", "x"), ("c", "d")],
                                  out=out, dim=8)
        stats = export_relations(manifest, encoder=Declines())
        assert stats.written == 2
        assert stats.skipped == [("too_long", "x")]
        _, _, records = read_relc(out)
        assert len(records) == 2  # patched header count matches records

    def test_dim_mismatch_aborts(self, tmp_path):
        manifest = ExportManifest(model="hash:8", pairs=[("a", "b")],
                                  out=tmp_path / "r.relc", dim=16)
        with pytest.raises(ExportError, match="dim"):
            export_relations(manifest)
        assert not (tmp_path / "r.relc").exists()  # no half-written artifact

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(ExportError):
            ExportManifest(model="hash:8", pairs=[], out=tmp_path / "r.relc")


class TestExportWordVectors:
    def test_ten_row_source(self, tmp_path):
        src = tmp_path / "src.txt"
        rng = np.random.default_rng(3)
        rows = [f"tok{i} " + " ".join(f"{x:.6f}" for x in rng.normal(size=5))
                for i in range(10)]
        src.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "w.wvec"
        stats = export_word_vectors(src, out)
        assert stats.written == 10
        version, dim, records = read_wvec(out)
        assert (version, dim) == (1, 5)
        assert len(records) == 10

    def test_multiword_token_normalized(self, tmp_path):
        src = tmp_path / "src.txt"
        src.write_text("New York 0.5 0.25\nparis 1.0 2.0\n", encoding="utf-8")
        out = tmp_path / "w.wvec"
        export_word_vectors(src, out)
        _, _, records = read_wvec(out)
        assert records[0][0] == "new_york"

    def test_values_survive_f32_round_trip(self, tmp_path):
        src = tmp_path / "src.txt"
        values = [0.123456789, -2.5, 31.0]
        src.write_text("word " + " ".join(repr(v) for v in values) + "\n",
                       encoding="utf-8")
        out = tmp_path / "w.wvec"
        export_word_vectors(src, out)
        _, _, records = read_wvec(out)
        assert np.array_equal(records[0][1], np.array(values, dtype=np.float32))

    def test_conceptnet_terms_filtered_by_language(self, tmp_path):
        src = tmp_path / "src.txt"
        src.write_text("/c/en/new_york 1 2\n/c/fr/paris 3 4\n/c/en/cat 5 6\n",
                       encoding="utf-8")
        out = tmp_path / "w.wvec"
        stats = export_word_vectors(src, out, language="en")
        assert stats.written == 2
        _, _, records = read_wvec(out)
        assert [t for t, _ in records] == ["new_york", "cat"]

    def test_dimension_inconsistency_aborts_with_row(self, tmp_path):
        src = tmp_path / "src.txt"
        src.write_text("a 1 2 3\nb 1 2\n", encoding="utf-8")
        with pytest.raises(ExportError, match=":2"):
            export_word_vectors(src, tmp_path / "w.wvec")
        assert not (tmp_path / "w.wvec").exists()

    def test_zero_rows_skipped(self, tmp_path):
        src = tmp_path / "src.txt"
        src.write_text("a 1 2\nzero 0 0\nb 3 4\n", encoding="utf-8")
        stats = export_word_vectors(src, tmp_path / "w.wvec")
        assert stats.written == 2
        assert len(stats.skipped) == 1


class TestCli:
    def test_export_relations_subcommand(self, tmp_path):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("# needed pairs\na\tb\nc\td\n", encoding="utf-8")
        out = tmp_path / "r.relc"
        assert main(["export-relations", "--model", "hash:12",
                     "--pairs", str(pairs), "--out", str(out),
                     "--batch", "1"]) == 0
        _, dim, records = read_relc(out)
        assert dim == 12 and len(records) == 2

    def test_export_vectors_subcommand(self, tmp_path):
        src = tmp_path / "src.txt"
        src.write_text("cat 1 2\ndog 3 4\n", encoding="utf-8")
        out = tmp_path / "w.wvec"
        assert main(["export-vectors", "--src", str(src), "--out", str(out)]) == 0
        assert read_wvec(out)[2][0][0] == "cat"

    def test_usage_errors(self):
        assert main([]) == 1
        assert main(["export-relations"]) == 1
        assert main(["unknown-command"]) == 1

    def test_data_error(self, tmp_path):
        assert main(["export-vectors", "--src", str(tmp_path / "missing.txt"),
                     "--out", str(tmp_path / "w.wvec")]) == 2

    def test_model_load_failure_is_data_error(self, tmp_path):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("a\tb\n", encoding="utf-8")
        assert main(["export-relations", "--model", "/nonexistent/model",
                     "--pairs", str(pairs),
                     "--out", str(tmp_path / "r.relc")]) == 2


@pytest.mark.skipif(shutil.which("relchain") is None,
                    reason="consumer CLI not installed")
class TestConsumerContract:
    def test_emitted_files_pass_export_check(self, tmp_path):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("horse\tpony\npony\thorse\n", encoding="utf-8")
        relc = tmp_path / "r.relc"
        assert main(["export-relations", "--model", "hash:32",
                     "--pairs", str(pairs), "--out", str(relc)]) == 0
        src = tmp_path / "src.txt"
        src.write_text("cat 1 2 3\ndog 4 5 6\nNew York 7 8 9\n", encoding="utf-8")
        wvec = tmp_path / "w.wvec"
        assert main(["export-vectors", "--src", str(src), "--out", str(wvec)]) == 0
        proc = subprocess.run(["relchain", "export-check", str(relc), str(wvec)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "OK" in proc.stdout

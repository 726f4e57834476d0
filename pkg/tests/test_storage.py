import numpy as np
import pytest

from landaulab.eigensolver import EigenSystem
from landaulab.errors import UsageError
from landaulab.lattice import LatticeSection
from landaulab.storage import (
    EigenCache,
    load_eigensystem,
    read_csv,
    read_json_report,
    read_manifest,
    read_section,
    save_eigensystem,
    write_csv,
    write_heatmap,
    write_json_report,
    write_manifest,
    write_records,
    write_section,
)
from landaulab.types import RRComparison, RunManifest

HASH = "ab" * 32
OTHER_HASH = "cd" * 32


@pytest.fixture
def eigensystem() -> EigenSystem:
    rng = np.random.default_rng(3)
    vectors = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    return EigenSystem(
        k=4,
        eigenvalues=np.array([1.1, 1.2, 3.3]),
        vectors=vectors,
        residuals=np.array([1e-12, 2e-12, 3e-12]),
        cutoff=4.0,
        weights=np.full(12, 1.0 / 12),
        grid=12,
        method="lanczos",
        iterations=17,
        seed=5,
    )


@pytest.fixture
def cache(tmp_path):
    eigencache = EigenCache(tmp_path / "cache" / "index.db")
    eigencache.connect_database()
    eigencache.create_cache_table()
    yield eigencache
    eigencache.disconnect_database()


class TestPayload:
    def test_round_trip(self, tmp_path, eigensystem):
        path = tmp_path / "payload.npz"
        save_eigensystem(eigensystem, HASH, path)
        loaded = load_eigensystem(path, HASH)
        np.testing.assert_array_equal(loaded.eigenvalues, eigensystem.eigenvalues)
        np.testing.assert_array_equal(loaded.vectors, eigensystem.vectors)
        np.testing.assert_array_equal(loaded.weights, eigensystem.weights)
        assert (loaded.k, loaded.grid, loaded.method, loaded.iterations, loaded.seed) == (4, 12, "lanczos", 17, 5)
        assert loaded.metadata["cached"]

    def test_without_vectors(self, tmp_path, eigensystem):
        path = tmp_path / "payload.npz"
        eigensystem.vectors = None
        eigensystem.seed = None
        save_eigensystem(eigensystem, HASH, path)
        loaded = load_eigensystem(path)
        assert loaded.vectors is None
        assert loaded.seed is None

    def test_hash_mismatch(self, tmp_path, eigensystem):
        path = tmp_path / "payload.npz"
        save_eigensystem(eigensystem, HASH, path)
        with pytest.raises(UsageError):
            load_eigensystem(path, OTHER_HASH)


class TestEigenCache:
    def test_table(self, cache):
        assert cache.check_for_cache_table()
        assert cache.payload_dir.is_dir()

    def test_double_connect(self, cache):
        with pytest.raises(RuntimeError):
            cache.connect_database()

    def test_hit_is_bit_exact(self, cache, eigensystem):
        payload = cache.store(HASH, eigensystem, 1e-9)
        assert payload.parent == cache.payload_dir
        cached = cache.lookup(HASH, 4)
        np.testing.assert_array_equal(cached.eigenvalues, eigensystem.eigenvalues)
        np.testing.assert_array_equal(cached.vectors, eigensystem.vectors)

    @pytest.mark.parametrize("config_hash, k", [(HASH, 6), (OTHER_HASH, 4)])
    def test_miss(self, cache, eigensystem, config_hash: str, k: int):
        cache.store(HASH, eigensystem, 1e-9)
        assert cache.lookup(config_hash, k) is None

    def test_missing_payload(self, cache, eigensystem):
        cache.store(HASH, eigensystem, 1e-9).unlink()
        assert cache.lookup(HASH, 4) is None

    def test_store_replaces(self, cache, eigensystem):
        cache.store(HASH, eigensystem, 1e-9)
        cache.store(HASH, eigensystem, 1e-10)
        rows = cache.query_database("SELECT tol FROM eigencache WHERE config_hash = ?;", (HASH,))
        assert rows == [(1e-10,)]

    def test_summary(self, tmp_path, cache, eigensystem):
        cache.store(HASH, eigensystem, 1e-9)
        destination = tmp_path / "summary.csv"
        cache.export_summary_csv(destination)
        header, rows = read_csv(destination)
        assert header == list(EigenCache.FIELDS_DICT.values())
        assert len(rows) == 1
        assert rows[0][header.index("count")] == "3"

    def test_delete_entries(self, cache, eigensystem):
        payload = cache.store(HASH, eigensystem, 1e-9)
        cache.delete_entries(HASH)
        assert not payload.exists()
        assert cache.lookup(HASH, 4) is None


class TestReports:
    def test_csv(self, tmp_path):
        path = write_csv(tmp_path / "nested" / "table.csv", ["a", "b"], [(1, 2.5), (3, "x")])
        assert read_csv(path) == (["a", "b"], [["1", "2.5"], ["3", "x"]])

    def test_records(self, tmp_path):
        path = write_records(tmp_path / "rr.csv", [RRComparison("component 0", 4, 4), RRComparison("gap 0", 1, 0)])
        header, rows = read_csv(path)
        assert header == ["label", "count", "predicted", "passed"]
        assert [row[-1] for row in rows] == ["True", "False"]

    def test_heatmap(self, tmp_path):
        _, rows = read_csv(write_heatmap(tmp_path / "map.csv", np.arange(6.0).reshape(2, 3)))
        assert len(rows) == 6
        assert rows[-1] == ["1", "2", "5.0"]

    def test_json_report(self, tmp_path):
        report = {"ratio": np.float64(0.5), "counts": np.array([1, 2]), "ok": RRComparison("gap 0", 0, 0)}
        data = read_json_report(write_json_report(tmp_path / "report.json", report))
        assert data == {"ratio": 0.5, "counts": [1, 2], "ok": {"label": "gap 0", "count": 0, "predicted": 0, "passed": True}}

    def test_manifest(self, tmp_path):
        manifest = RunManifest(HASH, {"config": 1, "cache": 1})
        manifest.add_artifact("model/sigma.csv")
        manifest.add_artifact("model/sigma.csv")
        manifest.record_stage("model", "ok", 0.25)
        loaded = read_manifest(write_manifest(tmp_path / "manifest.json", manifest))
        assert loaded.config_hash == HASH
        assert loaded.artifacts == ["model/sigma.csv"]
        assert loaded.stages["model"].status == "ok"
        assert loaded.stages["model"].wall_time == 0.25

    def test_section_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        values = rng.standard_normal((9, 2)) + 1j * rng.standard_normal((9, 2))
        path = write_section(tmp_path / "section.csv", LatticeSection(values=values, k=3))
        header, rows = read_csv(path)
        assert header == ["site", "re0", "im0", "re1", "im1"]
        assert [row[0] for row in rows] == [str(site) for site in range(9)]
        assert float(rows[4][3]) == values[4, 1].real
        loaded = read_section(path, 3)
        assert loaded.k == 3
        np.testing.assert_array_equal(loaded.values, values)

    def test_section_rejects_other_tables(self, tmp_path):
        path = write_csv(tmp_path / "table.csv", ["a", "b"], [(1, 2.5)])
        with pytest.raises(UsageError):
            read_section(path, 1)

import numpy as np
import pytest

from roadcomm.errors import PersistError
from roadcomm.index import build_search_index
from roadcomm.persist import MAGIC, load_index, save_index
from roadcomm.query import run_query
from roadcomm.synth import generate_graph


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    g, _ = generate_graph(250, extent=25.0, seed=41)
    index = build_search_index(g, radius=2.0)
    path = tmp_path_factory.mktemp("idx") / "index.bin"
    save_index(index, path)
    return index, path


class TestRoundTrip:
    def test_graph_identical(self, built):
        index, path = built
        loaded = load_index(path)
        assert np.array_equal(loaded.graph.coords, index.graph.coords)
        assert np.array_equal(loaded.graph.edge_uv, index.graph.edge_uv)
        assert np.array_equal(loaded.graph.poi_counts, index.graph.poi_counts)
        assert loaded.radius == index.radius
        assert loaded.scoring == index.scoring

    def test_patterns_identical(self, built):
        index, path = built
        loaded = load_index(path)
        assert len(loaded.patterns) == len(index.patterns)
        for a, b in zip(loaded.patterns, index.patterns):
            assert a.id == b.id and a.ptype == b.ptype
            assert a.cycle == b.cycle and a.edge_ids == b.edge_ids
            assert np.array_equal(a.vec, b.vec)
            assert a.mbr == b.mbr

    def test_tree_structure_identical(self, built):
        index, path = built
        loaded = load_index(path)
        assert loaded.tree.stats() == index.tree.stats()

    def test_store_identical(self, built):
        index, path = built
        loaded = load_index(path)
        assert loaded.store.max_count_per_type == index.store.max_count_per_type
        assert np.array_equal(loaded.store.per_pattern_max_count,
                              index.store.per_pattern_max_count)
        for a, b in zip(loaded.store.communities, index.store.communities):
            assert np.array_equal(a.pattern_ids, b.pattern_ids)

    def test_query_equivalence(self, built):
        index, path = built
        loaded = load_index(path)
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = int(rng.integers(0, index.graph.vertex_count))
            center = index.graph.point(v)
            r1, _ = run_query(index, center, 4, 6.0)
            r2, _ = run_query(loaded, center, 4, 6.0)
            assert r1.entries == r2.entries
            assert r1.stats.io_count == r2.stats.io_count


class TestCorruption:
    def test_bad_magic(self, built, tmp_path):
        _, path = built
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(data))
        with pytest.raises(PersistError, match="magic"):
            load_index(bad)

    def test_bad_version(self, built, tmp_path):
        _, path = built
        data = bytearray(path.read_bytes())
        data[4:8] = (99).to_bytes(4, "little")
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(data))
        with pytest.raises(PersistError, match="version"):
            load_index(bad)

    def test_truncated(self, built, tmp_path):
        _, path = built
        data = path.read_bytes()
        bad = tmp_path / "bad.bin"
        bad.write_bytes(data[: len(data) // 2])
        with pytest.raises(PersistError, match="truncated"):
            load_index(bad)

    def test_magic_constant(self):
        assert MAGIC == b"RCIX"

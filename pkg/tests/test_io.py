import numpy as np
import pytest

from conftest import make_dataset
from dvcm.combiner import combine
from dvcm.errors import DatasetFormatError
from dvcm.io import ingest_dataset, read_combined, read_draw_store, write_dataset
from dvcm.sampler import DrawStore
from dvcm.simgen import generate_simulation

HEADER = "u1,u2,obs_id,component,y,x1,x2\n"


def write(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    return path


class TestDataset:
    def test_round_trip_simgen(self, tmp_path):
        train, test, _ = generate_simulation(40, 5, seed=1)
        for data in (train, test):
            write_dataset(data, tmp_path / "x.csv")
            back = ingest_dataset(tmp_path / "x.csv")
            np.testing.assert_array_equal(back.coords, data.coords)
            np.testing.assert_array_equal(back.y, data.y)
            np.testing.assert_array_equal(back.X, data.X)
            np.testing.assert_array_equal(back.sizes, data.sizes)
            np.testing.assert_array_equal(back.ids, data.ids)
            assert back.q == data.q

    def test_round_trip_ragged(self, tmp_path):
        data = make_dataset(2, n=5, p=3, q=2, s=[1, 3, 2, 1, 2])
        write_dataset(data, tmp_path / "x.csv", comment="ragged")
        back = ingest_dataset(tmp_path / "x.csv")
        np.testing.assert_array_equal(back.sizes, data.sizes)
        np.testing.assert_array_equal(back.X, data.X)
        assert back.q == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="no observations"):
            ingest_dataset(write(tmp_path, ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="no observations"):
            ingest_dataset(write(tmp_path, HEADER))

    def test_coordinate_out_of_range(self, tmp_path):
        text = HEADER + "0.1,0.2,0,0,1.0,1.0,2.0\n1.5,0.2,1,0,1.0,1.0,2.0\n"
        with pytest.raises(DatasetFormatError) as info:
            ingest_dataset(write(tmp_path, text))
        assert info.value.line == 3
        assert "line 3" in str(info.value)

    @pytest.mark.parametrize(
        "row, fragment",
        [
            ("0.1,0.2,0,0,1.0,1.0\n", "fields"),
            ("0.1,0.2,0,0,abc,1.0,2.0\n", "malformed"),
            ("0.1,0.2,0,1,1.0,1.0,2.0\n", "start at 0"),
            ("0.1,0.2,0,0,inf,1.0,2.0\n", "finite"),
        ],
    )
    def test_malformed_rows(self, tmp_path, row, fragment):
        with pytest.raises(DatasetFormatError, match=fragment) as info:
            ingest_dataset(write(tmp_path, HEADER + row))
        assert info.value.line == 2

    def test_non_contiguous(self, tmp_path):
        text = HEADER + "0.1,0.2,0,0,1,1,2\n0.3,0.2,1,0,1,1,2\n0.1,0.2,0,1,1,1,2\n"
        with pytest.raises(DatasetFormatError, match="contiguous"):
            ingest_dataset(write(tmp_path, text))

    def test_coordinates_must_agree(self, tmp_path):
        text = HEADER + "0.1,0.2,0,0,1,1,2\n0.1,0.3,0,1,1,1,2\n"
        with pytest.raises(DatasetFormatError, match="differ"):
            ingest_dataset(write(tmp_path, text))

    def test_bad_header(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="covariate"):
            ingest_dataset(write(tmp_path, "u1,obs_id,component,y,z1\n"))

    def test_missing_response_for_test_sets(self, tmp_path):
        path = write(tmp_path, HEADER + "0.1,0.2,0,0,nan,1.0,2.0\n")
        with pytest.raises(DatasetFormatError):
            ingest_dataset(path)
        assert np.isnan(ingest_dataset(path, allow_missing_y=True).y[0])

    def test_q_larger_than_p(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            ingest_dataset(write(tmp_path, "# q=5\n" + HEADER + "0.1,0.2,0,0,1,1,2\n"))


def make_store(seed=0, T=7):
    rng = np.random.default_rng(seed)
    n_test, p = 3, 2
    return DrawStore(
        rng.standard_normal((T, n_test * p)),
        rng.standard_normal((T, 5)),
        rng.standard_normal(T),
        rng.random((n_test, 2)),
        [2, 1, 2],
        p,
        metadata={"subset_id": 1, "wall_seconds": 3.2},
    )


class TestDraws:
    def test_store_round_trip(self, tmp_path):
        store = make_store()
        store.save(tmp_path / "c.csv")
        back = read_draw_store(tmp_path / "c.csv")
        np.testing.assert_array_equal(back.matrix(), store.matrix())
        np.testing.assert_array_equal(back.test_sizes, store.test_sizes)
        assert back.metadata == {"subset_id": 1}
        assert (tmp_path / "c.csv").read_text().splitlines()[0].startswith("beta_0_0,")

    def test_store_bytes_independent_of_wall_time(self, tmp_path):
        a, b = make_store(), make_store()
        b.metadata["wall_seconds"] = 99.0
        a.save(tmp_path / "a.csv")
        b.save(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    @pytest.mark.parametrize("method", ["amc", "pie"])
    def test_combined_round_trip(self, tmp_path, method):
        a, b = make_store(0, 40), make_store(1, 40)
        b.test_points = a.test_points
        out = combine([a, b], method)
        out.save(tmp_path / "m.csv")
        back = read_combined(tmp_path / "m.csv")
        np.testing.assert_array_equal(back.draws, out.draws)
        np.testing.assert_array_equal(back.mean, out.mean)
        assert back.is_quantile == (method == "pie")
        np.testing.assert_array_equal(back.interval(0.9)[0], out.interval(0.9)[0])

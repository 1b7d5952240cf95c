import json

import numpy as np
import pytest

from armlet.data import (
    CATEGORICAL,
    NUMERICAL,
    Dataset,
    FieldSpec,
    Instance,
    PlantedTerm,
    Schema,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_schema,
    load_synthetic_spec,
    split,
)
from armlet.errors import DataError, SchemaError, SchemaParseError


def cat(fid, card, name=None, vocab=None):
    return FieldSpec(fid, CATEGORICAL, name or f"c{fid}", cardinality=card, vocab=vocab)


def num(fid, lo=0.0, hi=1.0, name=None):
    return FieldSpec(fid, NUMERICAL, name or f"n{fid}", value_range=(lo, hi))


@pytest.fixture
def mixed():
    return Schema([cat(0, 3), num(1, 0.0, 10.0), cat(2, 2, vocab=("no", "yes"))])


class TestSchema:
    def test_counts(self):
        s = Schema([cat(0, 2), cat(1, 3), cat(2, 5)])
        assert (s.m, s.M) == (3, 10)

    def test_single_numerical(self):
        s = Schema([num(0)])
        assert (s.m, s.M) == (1, 1)

    def test_frappe_sized(self):
        cards = [957, 4082, 7, 2, 3, 2, 80, 233, 5, 11]
        assert sum(cards) == 5382
        s = Schema([cat(j, c) for j, c in enumerate(cards)])
        assert (s.m, s.M) == (10, 5382)

    def test_row_layout(self, mixed):
        # categorical fields own card+1 rows, the first reserved for unknowns
        np.testing.assert_array_equal(mixed.offsets, [0, 4, 5])
        assert mixed.n_rows == 8
        np.testing.assert_array_equal(mixed.rows([[2, 0, -1], [-1, 0, 1]]), [[3, 4, 5], [0, 4, 7]])

    def test_duplicate_ids(self):
        with pytest.raises(SchemaError):
            Schema([cat(0, 2), cat(0, 3, name="other")])

    def test_invalid_fields(self):
        with pytest.raises(SchemaError):
            cat(0, 0)
        with pytest.raises(SchemaError):
            num(0, 1.0, 1.0)
        with pytest.raises(SchemaError):
            FieldSpec(0, "ordinal", "x")
        with pytest.raises(SchemaError):
            cat(0, 2, vocab=("a",))

    def test_json_roundtrip(self, mixed, tmp_path):
        p = tmp_path / "schema.json"
        p.write_text(json.dumps(mixed.to_json()))
        assert load_schema(p) == mixed

    def test_parse_error_has_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "fields": [\n    {"id": 0,,}\n  ]\n}')
        with pytest.raises(SchemaParseError) as err:
            load_schema(p)
        assert err.value.line == 3


class TestScale:
    def test_min_max(self):
        f = num(0, 0.0, 10.0)
        assert f.scale(5.0) == (0.5, False)
        assert f.scale(10.0) == (1.0, False)

    def test_floor_and_clamp(self):
        f = num(0, 0.0, 10.0)
        assert f.scale(0.0) == (1e-6, False)
        assert f.scale(-3.0) == (1e-6, True)
        assert f.scale(12.0) == (1.0, True)


class TestIndexedFormat:
    def test_load(self, mixed, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("1 0:2:1 1:0:5.0 2:1:1\n0 2:0:1 0:0:1 1:0:20\n\n")
        ds = load_dataset(p, mixed)
        assert ds.N == 2
        np.testing.assert_array_equal(ds.labels, [1, 0])
        np.testing.assert_array_equal(ds.index, [[2, 0, 1], [0, 0, 0]])
        np.testing.assert_allclose(ds.value[:, 1], [0.5, 1.0])
        assert ds.report.clamped == 1

    def test_out_of_range_category_names_row(self, mixed, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("1 0:0:1 1:0:1 2:0:1\n1 0:3:1 1:0:1 2:0:1\n")
        with pytest.raises(DataError) as err:
            load_dataset(p, mixed)
        assert err.value.row == 2

    @pytest.mark.parametrize("line", ["1 0:0:1 1:0:1", "1 0:0:1 1:0:1 9:0:1", "1 0:0:1 0:0:1 2:0:1",
                                      "2 0:0:1 1:0:1 2:0:1", "1 0:x:1 1:0:1 2:0:1"])
    def test_malformed(self, mixed, tmp_path, line):
        p = tmp_path / "d.txt"
        p.write_text(line + "\n")
        with pytest.raises(DataError):
            load_dataset(p, mixed)

    def test_empty_file_warns(self, mixed, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("")
        ds = load_dataset(p, mixed)
        assert ds.N == 0 and ds.report.warnings

    def test_save_roundtrip(self, mixed, tmp_path):
        ds = Dataset(mixed, [[1, 0, 0], [2, 0, 1]], [[1.0, 0.25, 1.0], [1.0, 1.0, 1.0]], [0, 1])
        p = tmp_path / "d.txt"
        ds.save_indexed(p)
        back = load_dataset(p, mixed)
        np.testing.assert_array_equal(back.index, ds.index)
        np.testing.assert_allclose(back.value, ds.value, rtol=1e-15)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestCsvFormat:
    def test_vocab_and_unknown(self, mixed, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("c0,n1,c2,label\n1,2.5,yes,1\n0,7.5,maybe,0\n")
        ds = load_dataset(p, mixed, format="csv")
        np.testing.assert_array_equal(ds.index, [[1, 0, 1], [0, 0, -1]])
        assert ds.report.unknown == 1
        # unknown lands on the field's reserved row
        assert ds.rows[1, 2] == mixed.offsets[2]

    def test_header_mismatch(self, mixed, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,c,label\n")
        with pytest.raises(DataError):
            load_dataset(p, mixed, format="csv")


class TestInstances:
    def test_roundtrip(self, mixed):
        insts = [Instance((2, 0.5, 1), 1), Instance((-1, 1.0, 0), 0)]
        ds = Dataset.from_instances(mixed, insts)
        assert ds.instances == insts

    def test_rejects_unscaled_value(self, mixed):
        with pytest.raises(DataError):
            Dataset.from_instances(mixed, [Instance((0, 5.0, 0), 1)])

    def test_read_only(self, mixed):
        ds = Dataset.from_instances(mixed, [Instance((0, 0.5, 0), 1)])
        with pytest.raises(ValueError):
            ds.index[0, 0] = 1


class TestSplit:
    def test_sizes_and_partition(self):
        ds = generate_synthetic(SyntheticSpec((4, 4), n=101), 0).dataset
        tr, va, te = split(ds, (0.8, 0.1, 0.1), seed=3)
        assert (tr.N, va.N, te.N) == (81, 10, 10)
        rows = np.concatenate([tr.index, va.index, te.index])
        assert sorted(map(tuple, rows)) == sorted(map(tuple, ds.index))

    def test_deterministic(self):
        ds = generate_synthetic(SyntheticSpec((4, 4), n=50), 0).dataset
        a, b = split(ds, seed=1), split(ds, seed=1)
        np.testing.assert_array_equal(a[1].index, b[1].index)

    def test_too_small(self):
        ds = generate_synthetic(SyntheticSpec((4,), n=2), 0).dataset
        with pytest.raises(DataError):
            split(ds)


class TestSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec((3, 4, 5), (PlantedTerm((0, 1), 2.0),), n=200)
        a, b = generate_synthetic(spec, 9), generate_synthetic(spec, 9)
        np.testing.assert_array_equal(a.dataset.index, b.dataset.index)
        np.testing.assert_array_equal(a.dataset.labels, b.dataset.labels)

    def test_probabilities_follow_planted_terms(self):
        spec = SyntheticSpec((3, 4, 5), (PlantedTerm((0, 2), 1.5),), bias=0.2, n=300)
        syn = generate_synthetic(spec, 4)
        idx = syn.dataset.index
        u = syn.latents
        logit = 0.2 + 1.5 * u[0][idx[:, 0]] * u[2][idx[:, 2]]
        np.testing.assert_allclose(syn.probs, 1 / (1 + np.exp(-logit)), rtol=1e-12)

    def test_unknown_term_field(self):
        with pytest.raises(SchemaError):
            generate_synthetic(SyntheticSpec((3, 3), (PlantedTerm((0, 5), 1.0),)), 0)

    def test_spec_json(self, tmp_path):
        spec = SyntheticSpec((3, 4), (PlantedTerm((0, 1), 2.0),), bias=-0.5, n=10)
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(spec.to_json()))
        assert load_synthetic_spec(p) == spec

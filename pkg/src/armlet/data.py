"""Schemas, dataset files, numerical rescaling, splits and synthetic data.

A :class:`Dataset` stores its instances column-wise: an ``index`` matrix of
per-field category indices (0 for numerical fields, -1 for an unknown
category) and a ``value`` matrix holding the scaled numerical value, or 1.0
for categorical fields. Embedding rows are laid out field by field; every
categorical field owns ``cardinality + 1`` rows, the first being the reserved
unknown slot, and every numerical field owns one row.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError, SchemaParseError

log = logging.getLogger(__name__)

CATEGORICAL = "categorical"
NUMERICAL = "numerical"
SCALE_FLOOR = 1e-6
UNKNOWN = -1


@dataclass(frozen=True)
class FieldSpec:
    field_id: int
    kind: str
    name: str
    cardinality: int | None = None
    value_range: tuple[float, float] | None = None
    vocab: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if self.cardinality is None or self.cardinality < 1:
                raise SchemaError(f"field {self.name!r}: cardinality must be >= 1")
            if self.vocab is not None and len(self.vocab) != self.cardinality:
                raise SchemaError(f"field {self.name!r}: vocab size differs from cardinality")
        elif self.kind == NUMERICAL:
            if self.value_range is None:
                raise SchemaError(f"field {self.name!r}: numerical field needs a range")
            lo, hi = self.value_range
            if not hi > lo:
                raise SchemaError(f"field {self.name!r}: range max must exceed min")
        else:
            raise SchemaError(f"field {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def n_rows(self) -> int:
        """Embedding rows owned by this field (unknown slot included)."""
        return self.cardinality + 1 if self.is_categorical else 1

    def scale(self, x: float) -> tuple[float, bool]:
        """Min-max scale a raw value into (0, 1]; returns (scaled, clamped)."""
        lo, hi = self.value_range
        s = (x - lo) / (hi - lo)
        clamped = s < 0.0 or s > 1.0
        s = min(max(s, 0.0), 1.0)
        return max(s, SCALE_FLOOR), clamped

    def to_json(self) -> dict:
        out = {"id": self.field_id, "name": self.name, "kind": self.kind}
        if self.is_categorical:
            out["cardinality"] = self.cardinality
            if self.vocab is not None:
                out["vocab"] = list(self.vocab)
        else:
            out["range"] = list(self.value_range)
        return out


class Schema:
    """Ordered attribute fields; ``m`` fields and ``M`` distinct features."""

    def __init__(self, fields: Sequence[FieldSpec]):
        if len(fields) < 1:
            raise SchemaError("schema needs at least one field")
        ids = [f.field_id for f in fields]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate field_id {dup}")
        names = [f.name for f in fields]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate field names")
        self.fields: tuple[FieldSpec, ...] = tuple(fields)
        self._pos = {f.field_id: j for j, f in enumerate(self.fields)}
        rows = np.array([f.n_rows for f in self.fields], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(rows)[:-1]]).astype(np.int64)
        self.n_rows = int(rows.sum())
        self.categorical = np.array([f.is_categorical for f in self.fields])

    @property
    def m(self) -> int:
        return len(self.fields)

    @property
    def M(self) -> int:
        return sum(f.cardinality if f.is_categorical else 1 for f in self.fields)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    def position(self, field_id: int) -> int:
        try:
            return self._pos[field_id]
        except KeyError:
            raise SchemaError(f"unknown field_id {field_id}") from None

    def rows(self, index: np.ndarray) -> np.ndarray:
        """Map per-field indices (N, m) to global embedding rows."""
        index = np.asarray(index, dtype=np.int64)
        return self.offsets + np.where(self.categorical, index + 1, 0)

    def to_json(self) -> dict:
        return {"fields": [f.to_json() for f in self.fields]}

    @classmethod
    def from_json(cls, doc: dict) -> "Schema":
        if not isinstance(doc, dict) or not isinstance(doc.get("fields"), list):
            raise SchemaError("schema document needs a top-level 'fields' list")
        fields = []
        for pos, raw in enumerate(doc["fields"]):
            try:
                kind = raw["kind"]
                name = str(raw.get("name", f"f{pos}"))
                fid = int(raw.get("id", pos))
                if kind == CATEGORICAL:
                    vocab = raw.get("vocab")
                    fields.append(FieldSpec(
                        fid, kind, name, cardinality=int(raw["cardinality"]),
                        vocab=tuple(str(v) for v in vocab) if vocab is not None else None,
                    ))
                else:
                    lo, hi = raw["range"]
                    fields.append(FieldSpec(fid, kind, name, value_range=(float(lo), float(hi))))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"field {pos}: malformed entry ({exc})") from None
        return cls(fields)

    def __eq__(self, other) -> bool:
        return isinstance(other, Schema) and self.to_json() == other.to_json()

    def __repr__(self) -> str:
        return f"Schema(m={self.m}, M={self.M})"


def load_schema(path) -> Schema:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(exc.msg, exc.lineno) from None
    return Schema.from_json(doc)


@dataclass(frozen=True)
class Instance:
    features: tuple
    label: int


@dataclass
class LoadReport:
    clamped: int = 0
    unknown: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)
        log.warning(msg)


class Dataset:
    """Immutable column-wise collection of instances conforming to a schema."""

    def __init__(self, schema: Schema, index, value, labels, report: LoadReport | None = None):
        index = np.asarray(index, dtype=np.int64).reshape(-1, schema.m)
        value = np.asarray(value, dtype=np.float64).reshape(-1, schema.m)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if not (len(index) == len(value) == len(labels)):
            raise DataError("index, value and label columns differ in length")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise DataError("labels must be 0 or 1")
        for a in (index, value, labels):
            a.setflags(write=False)
        self.schema = schema
        self.index = index
        self.value = value
        self.labels = labels
        self.report = report or LoadReport()
        self._rows: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return self.N

    @property
    def rows(self) -> np.ndarray:
        """Global embedding rows, shape (N, m)."""
        if self._rows is None:
            self._rows = self.schema.rows(self.index)
            self._rows.setflags(write=False)
        return self._rows

    def __getitem__(self, i: int) -> Instance:
        feats = tuple(
            int(self.index[i, j]) if f.is_categorical else float(self.value[i, j])
            for j, f in enumerate(self.schema.fields)
        )
        return Instance(feats, int(self.labels[i]))

    @property
    def instances(self) -> list[Instance]:
        return [self[i] for i in range(self.N)]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.schema, self.index[idx], self.value[idx], self.labels[idx])

    @classmethod
    def from_instances(cls, schema: Schema, instances: Iterable[Instance]) -> "Dataset":
        instances = list(instances)
        index = np.zeros((len(instances), schema.m), dtype=np.int64)
        value = np.ones((len(instances), schema.m))
        labels = np.zeros(len(instances), dtype=np.int64)
        for i, inst in enumerate(instances):
            if len(inst.features) != schema.m:
                raise DataError(f"expected {schema.m} features, got {len(inst.features)}", i)
            for j, (f, x) in enumerate(zip(schema.fields, inst.features)):
                if f.is_categorical:
                    _check_category(f, int(x), i)
                    index[i, j] = int(x)
                else:
                    if not 0.0 < float(x) <= 1.0:
                        raise DataError(f"field {f.name!r}: scaled value {x} outside (0, 1]", i)
                    value[i, j] = float(x)
            labels[i] = inst.label
        return cls(schema, index, value, labels)

    def save_indexed(self, path) -> None:
        """Write in the indexed text format, mapping numerical values back to raw units."""
        with open(path, "w") as fh:
            for i in range(self.N):
                toks = [str(int(self.labels[i]))]
                for j, f in enumerate(self.schema.fields):
                    if f.is_categorical:
                        toks.append(f"{f.field_id}:{int(self.index[i, j])}:1")
                    else:
                        lo, hi = f.value_range
                        toks.append(f"{f.field_id}:0:{float(lo + self.value[i, j] * (hi - lo))!r}")
                fh.write(" ".join(toks) + "\n")

    def __repr__(self) -> str:
        return f"Dataset(N={self.N}, {self.schema!r})"


def _check_category(f: FieldSpec, idx: int, row: int) -> None:
    if not (idx == UNKNOWN or 0 <= idx < f.cardinality):
        raise DataError(
            f"field {f.name!r}: category index {idx} outside [0, {f.cardinality})", row
        )


def _parse_label(tok: str, row: int) -> int:
    try:
        y = int(float(tok))
    except ValueError:
        raise DataError(f"bad label {tok!r}", row) from None
    if y not in (0, 1):
        raise DataError(f"label must be 0 or 1, got {tok!r}", row)
    return y


def load_dataset(path, schema: Schema, format: str = "indexed") -> Dataset:
    """Parse an indexed or CSV data file against ``schema``.

    Rows are numbered from 1 (for CSV, the header is row 1). Out-of-range
    numerical values are clamped and counted in ``dataset.report``.
    """
    if format == "indexed":
        ds = _load_indexed(Path(path), schema)
    elif format == "csv":
        ds = _load_csv(Path(path), schema)
    else:
        raise ValueError(f"unknown data format {format!r}")
    if ds.N == 0:
        ds.report.warn(f"{path}: no instances")
    if ds.report.clamped:
        ds.report.warn(f"{path}: clamped {ds.report.clamped} out-of-range numerical values")
    return ds


def _load_indexed(path: Path, schema: Schema) -> Dataset:
    report = LoadReport()
    m = schema.m
    index, value, labels = [], [], []
    with open(path) as fh:
        for row, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != m + 1:
                raise DataError(f"expected {m} feature tokens, got {len(toks) - 1}", row)
            idx = [0] * m
            val = [1.0] * m
            seen = set()
            for tok in toks[1:]:
                try:
                    fid_s, feat_s, val_s = tok.split(":")
                    fid, feat, x = int(fid_s), int(feat_s), float(val_s)
                except ValueError:
                    raise DataError(f"malformed token {tok!r}", row) from None
                try:
                    j = schema.position(fid)
                except SchemaError:
                    raise DataError(f"unknown field {fid}", row) from None
                if j in seen:
                    raise DataError(f"field {fid} repeated", row)
                seen.add(j)
                f = schema.fields[j]
                if f.is_categorical:
                    if not 0 <= feat < f.cardinality:
                        raise DataError(
                            f"field {f.name!r}: category index {feat} outside [0, {f.cardinality})", row
                        )
                    idx[j] = feat
                else:
                    val[j], clamped = f.scale(x)
                    report.clamped += clamped
            index.append(idx)
            value.append(val)
            labels.append(_parse_label(toks[0], row))
    return Dataset(schema, np.array(index, dtype=np.int64).reshape(-1, m),
                   np.array(value).reshape(-1, m), labels, report)


def _load_csv(path: Path, schema: Schema) -> Dataset:
    report = LoadReport()
    m = schema.m
    index, value, labels = [], [], []
    lookup = [
        {tok: k for k, tok in enumerate(f.vocab)} if f.is_categorical and f.vocab else None
        for f in schema.fields
    ]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return Dataset(schema, np.zeros((0, m)), np.zeros((0, m)), [], report)
        expected = schema.names + ["label"]
        if [h.strip() for h in header] != expected:
            raise DataError(f"header {header} does not match schema fields {expected}", 1)
        for row, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != m + 1:
                raise DataError(f"expected {m + 1} columns, got {len(rec)}", row)
            idx = [0] * m
            val = [1.0] * m
            for j, (f, tok) in enumerate(zip(schema.fields, rec)):
                tok = tok.strip()
                if f.is_categorical:
                    if lookup[j] is not None:
                        k = lookup[j].get(tok, UNKNOWN)
                        report.unknown += k == UNKNOWN
                    else:
                        try:
                            k = int(tok)
                        except ValueError:
                            raise DataError(f"field {f.name!r}: bad category {tok!r}", row) from None
                        if not 0 <= k < f.cardinality:
                            raise DataError(
                                f"field {f.name!r}: category index {k} outside [0, {f.cardinality})", row
                            )
                    idx[j] = k
                else:
                    try:
                        x = float(tok)
                    except ValueError:
                        raise DataError(f"field {f.name!r}: bad number {tok!r}", row) from None
                    val[j], clamped = f.scale(x)
                    report.clamped += clamped
            index.append(idx)
            value.append(val)
            labels.append(_parse_label(rec[-1], row))
    return Dataset(schema, np.array(index, dtype=np.int64).reshape(-1, m),
                   np.array(value).reshape(-1, m), labels, report)


def split(dataset: Dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Shuffle and partition into train/valid/test; remainder rows go to train."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = dataset.N
    if n < 3:
        raise DataError(f"cannot split {n} instances three ways")
    perm = np.random.default_rng(seed).permutation(n)
    n_valid = int(np.floor(ratios[1] * n))
    n_test = int(np.floor(ratios[2] * n))
    n_train = n - n_valid - n_test
    return (
        dataset.subset(perm[:n_train]),
        dataset.subset(perm[n_train:n_train + n_valid]),
        dataset.subset(perm[n_train + n_valid:]),
    )


# -- synthetic data ----------------------------------------------------------

@dataclass(frozen=True)
class PlantedTerm:
    fields: tuple[int, ...]
    coeff: float


@dataclass(frozen=True)
class SyntheticSpec:
    cardinalities: tuple[int, ...]
    terms: tuple[PlantedTerm, ...] = ()
    bias: float = 0.0
    n: int = 1000
    noise: float = 0.0

    @property
    def m(self) -> int:
        return len(self.cardinalities)

    def schema(self) -> Schema:
        return Schema([
            FieldSpec(j, CATEGORICAL, f"f{j}", cardinality=int(c))
            for j, c in enumerate(self.cardinalities)
        ])

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        cards = tuple(int(c) for c in doc["cardinalities"])
        if "m" in doc and int(doc["m"]) != len(cards):
            raise SchemaError(f"m={doc['m']} but {len(cards)} cardinalities given")
        terms = tuple(
            PlantedTerm(tuple(int(j) for j in t["fields"]), float(t["coeff"]))
            for t in doc.get("terms", [])
        )
        return cls(cards, terms, float(doc.get("bias", 0.0)), int(doc["n"]), float(doc.get("noise", 0.0)))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "cardinalities": list(self.cardinalities),
            "terms": [{"fields": list(t.fields), "coeff": t.coeff} for t in self.terms],
            "bias": self.bias,
            "n": self.n,
            "noise": self.noise,
        }


def load_synthetic_spec(path) -> SyntheticSpec:
    return SyntheticSpec.from_json(json.loads(Path(path).read_text()))


@dataclass
class SyntheticData:
    dataset: Dataset
    latents: list[np.ndarray]
    terms: tuple[PlantedTerm, ...]
    probs: np.ndarray


def generate_synthetic(spec: SyntheticSpec, seed: int) -> SyntheticData:
    """Categorical data whose click logit is a sum of planted latent products.

    Each category c of field j gets a latent scalar u[j][c] ~ N(0, 1). A label
    is Bernoulli(sigmoid(bias + sum_t coeff_t * prod_{j in t} u[j][x_j] + noise)).
    """
    for t in spec.terms:
        bad = [j for j in t.fields if not 0 <= j < spec.m]
        if bad or not t.fields:
            raise SchemaError(f"planted term {t.fields} references unknown fields {bad}")
    rng = np.random.default_rng(seed)
    latents = [rng.normal(0.0, 1.0, size=c) for c in spec.cardinalities]
    index = np.stack([rng.integers(0, c, size=spec.n) for c in spec.cardinalities], axis=1)
    logit = np.full(spec.n, spec.bias)
    for t in spec.terms:
        prod = np.ones(spec.n)
        for j in t.fields:
            prod *= latents[j][index[:, j]]
        logit += t.coeff * prod
    if spec.noise > 0:
        logit += rng.normal(0.0, spec.noise, size=spec.n)
    probs = 1.0 / (1.0 + np.exp(-logit))
    labels = (rng.random(spec.n) < probs).astype(np.int64)
    ds = Dataset(spec.schema(), index, np.ones(index.shape), labels)
    return SyntheticData(ds, latents, spec.terms, probs)

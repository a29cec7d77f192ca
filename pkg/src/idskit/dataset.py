"""KDD99-format flow datasets: parsing, encoding, splitting, rebalancing.

A dataset is an immutable table of flow records. Raw datasets (fresh from
``parse_kdd``) keep the original string tokens; ``fit_encode`` /
``apply_encode`` turn them into numeric matrices where categorical columns
hold ordinal codes and continuous columns are min-max scaled to [0, 1].
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


class ClassLabel(enum.IntEnum):
    """The five traffic classes, in canonical (confusion-matrix) order."""

    NORMAL = 0
    PROBE = 1
    DOS = 2
    U2R = 3
    R2L = 4

    @property
    def display(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return _NAME_TO_LABEL[name.lower()]
        except KeyError:
            raise ValueError(f"unknown class label {name!r}") from None


_DISPLAY_NAMES = {
    ClassLabel.NORMAL: "Normal",
    ClassLabel.PROBE: "Probe",
    ClassLabel.DOS: "DoS",
    ClassLabel.U2R: "U2R",
    ClassLabel.R2L: "R2L",
}
_NAME_TO_LABEL = {v.lower(): k for k, v in _DISPLAY_NAMES.items()}

# All 39 fine-grained attack names (22 train-era + 17 test-only), folded into
# the four attack categories, plus the benign token.
ATTACK_CATEGORIES: dict[str, ClassLabel] = {
    "normal": ClassLabel.NORMAL,
    # DoS
    "back": ClassLabel.DOS,
    "land": ClassLabel.DOS,
    "neptune": ClassLabel.DOS,
    "pod": ClassLabel.DOS,
    "smurf": ClassLabel.DOS,
    "teardrop": ClassLabel.DOS,
    "apache2": ClassLabel.DOS,
    "mailbomb": ClassLabel.DOS,
    "processtable": ClassLabel.DOS,
    "udpstorm": ClassLabel.DOS,
    # Probe
    "ipsweep": ClassLabel.PROBE,
    "nmap": ClassLabel.PROBE,
    "portsweep": ClassLabel.PROBE,
    "satan": ClassLabel.PROBE,
    "mscan": ClassLabel.PROBE,
    "saint": ClassLabel.PROBE,
    # U2R
    "buffer_overflow": ClassLabel.U2R,
    "loadmodule": ClassLabel.U2R,
    "perl": ClassLabel.U2R,
    "rootkit": ClassLabel.U2R,
    "httptunnel": ClassLabel.U2R,
    "ps": ClassLabel.U2R,
    "sqlattack": ClassLabel.U2R,
    "xterm": ClassLabel.U2R,
    # R2L
    "ftp_write": ClassLabel.R2L,
    "guess_passwd": ClassLabel.R2L,
    "imap": ClassLabel.R2L,
    "multihop": ClassLabel.R2L,
    "phf": ClassLabel.R2L,
    "spy": ClassLabel.R2L,
    "warezclient": ClassLabel.R2L,
    "warezmaster": ClassLabel.R2L,
    "named": ClassLabel.R2L,
    "sendmail": ClassLabel.R2L,
    "snmpgetattack": ClassLabel.R2L,
    "snmpguess": ClassLabel.R2L,
    "worm": ClassLabel.R2L,
    "xlock": ClassLabel.R2L,
    "xsnoop": ClassLabel.R2L,
}

# KDD99 connection-vector schema: 41 features in file order.
_KDD_COLUMNS = [
    ("duration", CONTINUOUS),
    ("protocol_type", CATEGORICAL),
    ("service", CATEGORICAL),
    ("flag", CATEGORICAL),
    ("src_bytes", CONTINUOUS),
    ("dst_bytes", CONTINUOUS),
    ("land", CONTINUOUS),
    ("wrong_fragment", CONTINUOUS),
    ("urgent", CONTINUOUS),
    ("hot", CONTINUOUS),
    ("num_failed_logins", CONTINUOUS),
    ("logged_in", CONTINUOUS),
    ("num_compromised", CONTINUOUS),
    ("root_shell", CONTINUOUS),
    ("su_attempted", CONTINUOUS),
    ("num_root", CONTINUOUS),
    ("num_file_creations", CONTINUOUS),
    ("num_shells", CONTINUOUS),
    ("num_access_files", CONTINUOUS),
    ("num_outbound_cmds", CONTINUOUS),
    ("is_host_login", CONTINUOUS),
    ("is_guest_login", CONTINUOUS),
    ("count", CONTINUOUS),
    ("srv_count", CONTINUOUS),
    ("serror_rate", CONTINUOUS),
    ("srv_serror_rate", CONTINUOUS),
    ("rerror_rate", CONTINUOUS),
    ("srv_rerror_rate", CONTINUOUS),
    ("same_srv_rate", CONTINUOUS),
    ("diff_srv_rate", CONTINUOUS),
    ("srv_diff_host_rate", CONTINUOUS),
    ("dst_host_count", CONTINUOUS),
    ("dst_host_srv_count", CONTINUOUS),
    ("dst_host_same_srv_rate", CONTINUOUS),
    ("dst_host_diff_srv_rate", CONTINUOUS),
    ("dst_host_same_src_port_rate", CONTINUOUS),
    ("dst_host_srv_diff_host_rate", CONTINUOUS),
    ("dst_host_serror_rate", CONTINUOUS),
    ("dst_host_srv_serror_rate", CONTINUOUS),
    ("dst_host_rerror_rate", CONTINUOUS),
    ("dst_host_srv_rerror_rate", CONTINUOUS),
]


class KddParseError(ValueError):
    """Malformed KDD input. ``line_number`` is 1-based (0 = whole input)."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}" if line_number else message)
        self.line_number = line_number


@dataclass(frozen=True)
class FeatureSchema:
    """Column names and kinds, in position order."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise ValueError("names and kinds must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        for k in self.kinds:
            if k not in (CATEGORICAL, CONTINUOUS):
                raise ValueError(f"unknown column kind {k!r}")

    @property
    def width(self) -> int:
        return len(self.names)

    @property
    def categorical_positions(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k == CATEGORICAL)

    @property
    def continuous_positions(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k == CONTINUOUS)

    def header(self) -> str:
        return ",".join(f"{n}:{k}" for n, k in zip(self.names, self.kinds))


def kdd99_schema() -> FeatureSchema:
    names, kinds = zip(*_KDD_COLUMNS)
    return FeatureSchema(names, kinds)


def generic_schema(width: int) -> FeatureSchema:
    """All-continuous schema for synthetic / flow-derived feature vectors."""
    return FeatureSchema(
        tuple(f"f{i}" for i in range(width)), tuple([CONTINUOUS] * width)
    )


@dataclass(frozen=True)
class EncodingState:
    """Frozen fit statistics: ordinal maps and min/max, from the fitting split.

    Unseen categorical values map to the reserved code ``len(values)``;
    continuous values are scaled by the recorded range and clamped to [0, 1].
    """

    categories: dict[int, tuple[str, ...]]
    ranges: dict[int, tuple[float, float]]

    def code_maps(self) -> dict[int, dict[str, int]]:
        return {
            pos: {v: i for i, v in enumerate(vals)}
            for pos, vals in self.categories.items()
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of flow records.

    ``columns`` holds one array per schema position: object arrays of string
    tokens for unencoded categorical columns, float64 otherwise. ``lines``
    retains the original text of parsed rows so serialization is bit-exact.
    """

    schema: FeatureSchema
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray | None = None
    subtypes: np.ndarray | None = None
    lines: tuple[str, ...] | None = None
    encoding: EncodingState | None = None

    def __post_init__(self):
        if len(self.columns) != self.schema.width:
            raise ValueError("column count does not match schema width")
        n = len(self)
        for c in self.columns:
            if len(c) != n:
                raise ValueError("ragged columns")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels length does not match row count")

    def __len__(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def is_encoded(self) -> bool:
        return self.encoding is not None

    @cached_property
    def matrix(self) -> np.ndarray:
        """Rows as one (N, M) float matrix. Requires numeric columns."""
        try:
            return np.column_stack([np.asarray(c, dtype=np.float64) for c in self.columns])
        except (TypeError, ValueError):
            raise ValueError("dataset has non-numeric columns; encode it first") from None

    def class_histogram(self) -> dict[ClassLabel, int]:
        if self.labels is None:
            raise ValueError("dataset is unlabeled")
        counts = np.bincount(self.labels, minlength=len(ClassLabel))
        return {c: int(counts[c]) for c in ClassLabel}


def from_matrix(
    X: np.ndarray,
    labels=None,
    schema: FeatureSchema | None = None,
    encoding: EncodingState | None = None,
) -> Dataset:
    """Wrap an (N, M) numeric array as a Dataset (generic schema by default)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D array")
    schema = schema or generic_schema(X.shape[1])
    lab = None if labels is None else np.asarray(labels, dtype=np.int8)
    return Dataset(
        schema=schema,
        columns=tuple(np.ascontiguousarray(X[:, j]) for j in range(X.shape[1])),
        labels=lab,
        encoding=encoding,
    )


# ---------------------------------------------------------------------------
# parsing / serialization


def parse_kdd(source: str | bytes, schema: FeatureSchema | None = None) -> Dataset:
    """Parse KDD99 CSV text: 41 feature fields + label token ending with '.'.

    Returns a raw (unencoded) dataset. The 39 fine-grained attack names fold
    into the five classes; an unrecognized name is a parse error.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    schema = schema or kdd99_schema()
    width = schema.width

    lines = source.splitlines()
    if not lines or not source.strip():
        raise KddParseError(0, "empty input")

    labels = np.empty(len(lines), dtype=np.int8)
    subtypes: list[str] = []
    intern: dict[str, str] = {}
    for i, line in enumerate(lines):
        if line.count(",") != width:
            raise KddParseError(
                i + 1, f"expected {width + 1} fields, got {line.count(',') + 1}"
            )
        token = line.rsplit(",", 1)[1]
        if not token.endswith("."):
            raise KddParseError(i + 1, f"label token {token!r} does not end with '.'")
        name = token[:-1]
        cat = ATTACK_CATEGORIES.get(name)
        if cat is None:
            raise KddParseError(i + 1, f"unknown attack name {name!r}")
        labels[i] = cat
        subtypes.append(intern.setdefault(name, name))

    columns = _read_feature_columns(source, lines, schema)
    return Dataset(
        schema=schema,
        columns=columns,
        labels=labels,
        subtypes=np.array(subtypes, dtype=object),
        lines=tuple(lines),
    )


def _read_feature_columns(
    text: str, lines: list[str], schema: FeatureSchema
) -> tuple[np.ndarray, ...]:
    dtype = {
        pos: (object if kind == CATEGORICAL else np.float64)
        for pos, kind in enumerate(schema.kinds)
    }
    try:
        df = pd.read_csv(
            io.StringIO(text),
            header=None,
            usecols=range(schema.width),
            dtype=dtype,
            na_filter=False,
            engine="c",
        )
    except ValueError:
        _locate_bad_continuous_field(lines, schema)
        raise  # unreachable unless pandas rejected something we accept
    columns = tuple(df[pos].to_numpy() for pos in range(schema.width))
    for pos in schema.continuous_positions:
        if not np.isfinite(columns[pos]).all():
            _locate_bad_continuous_field(lines, schema)
    return columns


def _locate_bad_continuous_field(lines: list[str], schema: FeatureSchema) -> None:
    continuous = set(schema.continuous_positions)
    for i, line in enumerate(lines):
        fields = line.split(",")
        for pos in continuous:
            try:
                v = float(fields[pos])
            except ValueError:
                raise KddParseError(
                    i + 1, f"non-numeric value {fields[pos]!r} in column "
                    f"{schema.names[pos]!r}"
                ) from None
            if not math.isfinite(v):
                raise KddParseError(
                    i + 1, f"non-finite value {fields[pos]!r} in column "
                    f"{schema.names[pos]!r}"
                )
    raise KddParseError(0, "malformed continuous field")


def serialize_kdd(data: Dataset) -> str:
    """Inverse of parse_kdd. Bit-exact for parsed datasets (original lines)."""
    if data.lines is not None:
        return "\n".join(data.lines) + "\n"
    if data.labels is None or data.is_encoded:
        raise ValueError("only raw labeled datasets serialize to KDD format")
    subtypes = (
        data.subtypes
        if data.subtypes is not None
        else [ClassLabel(l).display.lower() for l in data.labels]
    )
    out = []
    for i in range(len(data)):
        fields = [_format_value(col[i]) for col in data.columns]
        fields.append(f"{subtypes[i]}.")
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


def _format_value(v) -> str:
    if isinstance(v, str):
        return v
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


# ---------------------------------------------------------------------------
# encoding


def fit_encode(raw: Dataset) -> Dataset:
    """Encode a raw dataset with its own statistics and record them."""
    if raw.is_encoded:
        raise ValueError("dataset is already encoded")
    categories: dict[int, tuple[str, ...]] = {}
    ranges: dict[int, tuple[float, float]] = {}
    encoded: list[np.ndarray] = []
    for pos, kind in enumerate(raw.schema.kinds):
        col = raw.columns[pos]
        if kind == CATEGORICAL:
            codes, uniques = pd.factorize(col)  # first-seen order
            categories[pos] = tuple(str(u) for u in uniques)
            encoded.append(codes.astype(np.float64))
        else:
            col = np.asarray(col, dtype=np.float64)
            lo, hi = float(col.min()), float(col.max())
            ranges[pos] = (lo, hi)
            encoded.append(_scale(col, lo, hi))
    state = EncodingState(categories=categories, ranges=ranges)
    return Dataset(
        schema=raw.schema,
        columns=tuple(encoded),
        labels=raw.labels,
        subtypes=raw.subtypes,
        encoding=state,
    )


def apply_encode(raw: Dataset, encoding: EncodingState) -> Dataset:
    """Encode with previously fitted statistics (idempotent on encoded data).

    Unseen categorical values take the reserved code; continuous values are
    clamped into [0, 1].
    """
    if raw.is_encoded:
        return raw
    maps = encoding.code_maps()
    encoded: list[np.ndarray] = []
    for pos, kind in enumerate(raw.schema.kinds):
        col = raw.columns[pos]
        if kind == CATEGORICAL:
            if pos not in maps:
                raise ValueError(f"encoding state lacks categorical column {pos}")
            m = maps[pos]
            reserved = len(m)
            encoded.append(
                np.array([m.get(v, reserved) for v in col], dtype=np.float64)
            )
        else:
            if pos not in encoding.ranges:
                raise ValueError(f"encoding state lacks continuous column {pos}")
            lo, hi = encoding.ranges[pos]
            col = np.asarray(col, dtype=np.float64)
            encoded.append(np.clip(_scale(col, lo, hi), 0.0, 1.0))
    return Dataset(
        schema=raw.schema,
        columns=tuple(encoded),
        labels=raw.labels,
        subtypes=raw.subtypes,
        encoding=encoding,
    )


def _scale(col: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi == lo:
        return np.zeros_like(col)  # zero-range convention
    return (col - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# row selection


def take(data: Dataset, indices) -> Dataset:
    """New dataset holding the given rows, in the given order."""
    idx = np.asarray(indices, dtype=np.intp)
    return Dataset(
        schema=data.schema,
        columns=tuple(c[idx] for c in data.columns),
        labels=None if data.labels is None else data.labels[idx],
        subtypes=None if data.subtypes is None else data.subtypes[idx],
        lines=None if data.lines is None else tuple(data.lines[i] for i in idx),
        encoding=data.encoding,
    )


def split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle; first (1 - test_fraction) share goes to train."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(test_fraction * n + 0.5)
    n_train = n - n_test
    return take(data, perm[:n_train]), take(data, perm[n_train:])


def rebalance(
    data: Dataset, per_class_target: dict[ClassLabel, int], seed: int
) -> Dataset:
    """Force exact per-class counts: down-sample without replacement above the
    target, resample with replacement below it. Classes not listed keep all
    their rows.
    """
    if data.labels is None:
        raise ValueError("rebalance requires a labeled dataset")
    for cls, target in per_class_target.items():
        if target < 1:
            raise ValueError(f"target for {ClassLabel(cls).display} must be >= 1")
    rng = np.random.default_rng(seed)
    picked: list[np.ndarray] = []
    for cls in ClassLabel:
        rows = np.flatnonzero(data.labels == cls)
        if cls not in per_class_target:
            picked.append(rows)
            continue
        target = per_class_target[cls]
        if len(rows) == 0:
            raise ValueError(
                f"target requests class {cls.display} absent from the dataset"
            )
        replace = target > len(rows)
        picked.append(rng.choice(rows, size=target, replace=replace))
    return take(data, np.concatenate(picked))


def stratified_sample(data: Dataset, n: int, seed: int) -> Dataset:
    """Seeded proportional sample of n rows (largest-remainder allocation)."""
    if data.labels is None:
        raise ValueError("stratified_sample requires a labeled dataset")
    total = len(data)
    if not 1 <= n <= total:
        raise ValueError(f"sample size must be in [1, {total}]")
    rng = np.random.default_rng(seed)
    present = [c for c in ClassLabel if np.any(data.labels == c)]
    quotas = {c: n * int(np.sum(data.labels == c)) / total for c in present}
    alloc = {c: int(quotas[c]) for c in present}
    shortfall = n - sum(alloc.values())
    for c in sorted(present, key=lambda c: (quotas[c] - alloc[c]), reverse=True)[:shortfall]:
        alloc[c] += 1
    picked = []
    for c in present:
        rows = np.flatnonzero(data.labels == c)
        picked.append(rng.choice(rows, size=alloc[c], replace=False))
    return take(data, np.concatenate(picked))


# ---------------------------------------------------------------------------
# persistence (columnar text format)


def save_dataset(data: Dataset, path) -> None:
    """Columnar text: '#schema name:kind,...' header, numeric rows, label last."""
    if not data.is_encoded:
        # flow-derived vectors are numeric without an encoding state
        _ = data.matrix
    with open(path, "w") as fh:
        fh.write(f"#schema {data.schema.header()}\n")
        X = data.matrix
        labels = data.labels
        for i in range(len(data)):
            row = ",".join(repr(v) for v in X[i].tolist())
            if labels is not None:
                row += f",{ClassLabel(labels[i]).display}"
            fh.write(row + "\n")


def load_dataset(path, encoding: EncodingState | None = None) -> Dataset:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#schema "):
            raise ValueError(f"{path}: missing '#schema' header")
        pairs = [e.split(":") for e in header[len("#schema "):].strip().split(",")]
        schema = FeatureSchema(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        body = fh.read()
    if not body.strip():
        return Dataset(
            schema=schema,
            columns=tuple(np.empty(0) for _ in range(schema.width)),
            encoding=encoding,
        )
    df = pd.read_csv(
        io.StringIO(body), header=None, na_filter=False, float_precision="round_trip"
    )
    labeled = df.shape[1] == schema.width + 1
    if not labeled and df.shape[1] != schema.width:
        raise ValueError(f"{path}: row width does not match schema")
    labels = None
    if labeled:
        labels = np.array(
            [ClassLabel.from_name(v) for v in df[schema.width]], dtype=np.int8
        )
    columns = tuple(
        df[pos].to_numpy(dtype=np.float64) for pos in range(schema.width)
    )
    return Dataset(schema=schema, columns=columns, labels=labels, encoding=encoding)


def save_encoding(state: EncodingState, path) -> None:
    with open(path, "w") as fh:
        fh.write("#encoding v1\n")
        for pos in sorted(state.categories):
            vals = ",".join(state.categories[pos])
            fh.write(f"categorical {pos} {vals}\n")
        for pos in sorted(state.ranges):
            lo, hi = state.ranges[pos]
            fh.write(f"continuous {pos} {lo!r} {hi!r}\n")


def load_encoding(path) -> EncodingState:
    categories: dict[int, tuple[str, ...]] = {}
    ranges: dict[int, tuple[float, float]] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "#encoding v1":
            raise ValueError(f"{path}: unsupported encoding file")
        for line in fh:
            kind, pos, rest = line.rstrip("\n").split(" ", 2)
            if kind == "categorical":
                categories[int(pos)] = tuple(rest.split(","))
            elif kind == "continuous":
                lo, hi = rest.split(" ")
                ranges[int(pos)] = (float(lo), float(hi))
            else:
                raise ValueError(f"{path}: bad encoding line {line!r}")
    return EncodingState(categories=categories, ranges=ranges)

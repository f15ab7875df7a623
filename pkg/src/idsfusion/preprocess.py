"""Encoding, feature selection, stratified splitting, SMOTE and dataset fusion."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, PreconditionError
from .ingest import DatasetKind, RawTable, class_counts, extract_labels

logger = logging.getLogger(__name__)

# Ordered (UNSW, KDD) feature pairs; position i on one side aligns with position i on the other.
FEATURE_MAP: tuple[tuple[str, str], ...] = (
    ("Dintpkt", "duration"),
    ("Djit", "src_bytes"),
    ("Dload", "dst_bytes"),
    ("Dpkts", "land"),
    ("Sintpkt", "wrong_fragment"),
    ("Sjit", "urgent"),
    ("Sload", "hot"),
    ("Spkts", "num_failed_logins"),
    ("Stime", "logged_in"),
    ("ackdat", "num_compromised"),
    ("ct_dst_ltm", "root_shell"),
    ("ct_dst_sport_ltm", "su_attempted"),
    ("ct_dst_src_ltm", "num_root"),
    ("ct_src_dport_ltm", "num_file_creations"),
    ("ct_src_ltm", "num_shells"),
    ("ct_srv_dst", "num_access_files"),
    ("ct_srv_src", "num_outbound_cmds"),
    ("ct_state_ttl", "is_host_login"),
    ("dbytes", "is_guest_login"),
    ("dloss", "count"),
    ("dmeansz", "srv_count"),
    ("dsport", "serror_rate"),
    ("dstip", "srv_serror_rate"),
    ("dttl", "rerror_rate"),
    ("dur", "srv_rerror_rate"),
    ("dwin", "same_srv_rate"),
    ("is_ftp_login", "diff_srv_rate"),
    ("is_sm_ips_ports", "srv_diff_host_rate"),
    ("proto_icmp", "dst_host_count"),
    ("proto_tcp", "dst_host_srv_count"),
    ("proto_udp", "dst_host_same_srv_rate"),
    ("res_bdy_len", "dst_host_diff_srv_rate"),
    ("sbytes", "dst_host_same_src_port_rate"),
    ("service_ftp", "dst_host_srv_diff_host_rate"),
    ("service_ftp-data", "dst_host_serror_rate"),
    ("service_http", "dst_host_srv_serror_rate"),
    ("service_irc", "dst_host_rerror_rate"),
    ("service_pop3", "dst_host_srv_rerror_rate"),
    ("service_smtp", "protocol_type_icmp"),
    ("service_ssh", "protocol_type_tcp"),
    ("sloss", "protocol_type_udp"),
    ("smeansz", "service_IRC"),
    ("sport", "service_ftp"),
    ("srcip", "service_ftp_data"),
    ("sttl", "service_http"),
    ("swin", "service_pop_3"),
    ("synack", "service_smtp"),
    ("tcprrt", "service_ssh"),
)

# Names in the published list that differ from the raw column headers.
NAME_ALIASES = {"tcprrt": "tcprtt"}

UNSEEN = 0
_NON_ALNUM = re.compile(r"[^0-9A-Za-z]")


def normalize_name(text: str) -> str:
    return _NON_ALNUM.sub("_", text)


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    # per-column (unsw_name, kdd_name) once fused
    sources: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        n, d = self.values.shape
        if len(self.feature_names) != d:
            raise DataError(f"{len(self.feature_names)} feature names for {d} columns")
        if self.labels.shape != (n,):
            raise DataError(f"{self.labels.shape[0]} labels for {n} rows")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(
            np.ascontiguousarray(self.values[indices]),
            self.feature_names,
            self.labels[indices],
            self.sources,
        )


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def _is_blank(text: str) -> bool:
    return text == "" or text == "-"


def parse_number(text: str) -> float:
    """Numeric cell -> float; dash, empty and malformed cells become 0.0."""
    t = text.strip()
    if _is_blank(t):
        return 0.0
    try:
        return float(t)
    except ValueError:
        return 0.0


def parse_ip(text: str) -> float:
    """Dotted quad -> its 32-bit integer value; anything else -> the unseen index."""
    parts = text.strip().split(".")
    if len(parts) != 4:
        return float(UNSEEN)
    value = 0
    for part in parts:
        if not part.isdigit() or int(part) > 255:
            return float(UNSEEN)
        value = value * 256 + int(part)
    return float(value)


def parse_port(text: str) -> float:
    t = text.strip()
    if _is_blank(t):
        return 0.0
    try:
        if t.lower().startswith("0x"):
            return float(int(t, 16))
        return float(int(t))
    except ValueError:
        return float(UNSEEN)


@dataclass
class CategoryEncoder:
    """Per-column category vocabularies learnt from one table.

    One-hot columns map each normalised category name to an indicator column;
    ordinal columns map category text to 1..m, with 0 reserved for unseen text.
    """

    onehot: dict[str, tuple[str, ...]] = field(default_factory=dict)
    ordinal: dict[str, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def fit(cls, table: RawTable) -> "CategoryEncoder":
        schema = table.schema
        enc = cls()
        for name in schema.onehot_columns:
            known = [normalize_name(v) for v in schema.onehot_vocab.get(name, ())]
            seen = {normalize_name(v.strip()) for v in table.column(name)}
            extra = sorted(seen.difference(known))
            enc.onehot[name] = tuple(dict.fromkeys(known + extra))
        special = set(schema.onehot_columns) | set(schema.ip_columns) | set(schema.port_columns)
        for j in sorted(schema.categorical_columns):
            name = schema.column_names[j]
            if name in special or name in schema.ignored_columns or j == schema.label_column:
                continue
            values = sorted({v.strip() for v in table.column(name)} - {"", "-"})
            enc.ordinal[name] = {v: i + 1 for i, v in enumerate(values)}
        return enc


def encode(table: RawTable, encoder: CategoryEncoder | None = None) -> FeatureMatrix:
    """Turn a raw table into a finite numeric matrix plus labels."""
    schema = table.schema
    if encoder is None:
        encoder = CategoryEncoder.fit(table)
    labels = extract_labels(table) if table.rows else np.empty(0, dtype=np.int64)
    skip = {schema.label_column} | {schema.index(c) for c in schema.ignored_columns}
    columns: list[np.ndarray] = []
    names: list[str] = []
    n = len(table.rows)
    for j, name in enumerate(schema.column_names):
        if j in skip:
            continue
        cells = [row[j] for row in table.rows]
        if name in encoder.onehot:
            vocab = encoder.onehot[name]
            position = {v: i for i, v in enumerate(vocab)}
            block = np.zeros((n, len(vocab)))
            for i, cell in enumerate(cells):
                k = position.get(normalize_name(cell.strip()))
                if k is not None:
                    block[i, k] = 1.0
            columns.extend(block.T)
            names.extend(f"{normalize_name(name)}_{v}" for v in vocab)
            continue
        if name in schema.ip_columns:
            conv = parse_ip
        elif name in schema.port_columns:
            conv = parse_port
        elif name in encoder.ordinal:
            mapping = encoder.ordinal[name]

            def conv(cell, mapping=mapping):
                return float(mapping.get(cell.strip(), UNSEEN))
        else:
            conv = parse_number
        memo: dict[str, float] = {}
        col = np.empty(n)
        for i, cell in enumerate(cells):
            v = memo.get(cell)
            if v is None:
                v = memo[cell] = conv(cell)
            col[i] = v
        columns.append(col)
        names.append(name)
    values = np.column_stack(columns) if columns and n else np.zeros((n, len(names)))
    bad = ~np.isfinite(values)
    if bad.any():
        cols = sorted({names[c] for c in np.nonzero(bad)[1]})
        raise DataError(f"non-finite values after encoding in columns {cols}")
    return FeatureMatrix(np.ascontiguousarray(values), tuple(names), labels)


# ---------------------------------------------------------------------------
# Feature selection and fusion
# ---------------------------------------------------------------------------

def _resolve(name: str, available: dict[str, int]) -> int | None:
    for candidate in (name, normalize_name(name), NAME_ALIASES.get(name)):
        if candidate is not None and candidate in available:
            return available[candidate]
    return None


def select_features(matrix: FeatureMatrix, kind: DatasetKind | str,
                    feature_map=FEATURE_MAP) -> FeatureMatrix:
    """Keep the mapped columns for one side of the map, in map order."""
    side = 0 if DatasetKind(kind) is DatasetKind.UNSW else 1
    wanted = [pair[side] for pair in feature_map]
    available = {n: i for i, n in enumerate(matrix.feature_names)}
    cols, missing = [], []
    for name in wanted:
        j = _resolve(name, available)
        if j is None:
            missing.append(name)
        cols.append(j)
    if missing:
        raise DataError(f"missing mapped features: {', '.join(missing)}")
    return FeatureMatrix(
        np.ascontiguousarray(matrix.values[:, cols]), tuple(wanted), matrix.labels
    )


def fuse(unsw: FeatureMatrix, kdd: FeatureMatrix, feature_map=FEATURE_MAP) -> FeatureMatrix:
    """Stack UNSW rows over KDD rows under positional names f00..f47."""
    width = len(feature_map)
    if unsw.n_features != width or kdd.n_features != width:
        raise DataError(
            f"fusion needs {width} columns on both sides, got {unsw.n_features} and {kdd.n_features}"
        )
    return FeatureMatrix(
        np.ascontiguousarray(np.vstack([unsw.values, kdd.values])),
        tuple(f"f{i:02d}" for i in range(width)),
        np.concatenate([unsw.labels, kdd.labels]),
        tuple((u, k) for u, k in feature_map),
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for a (seed, key...) path."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    stratified: bool = True


def _allocate(counts: list[int], total: int, fraction: float) -> list[int]:
    # largest remainder: each class within one sample of its exact share
    exact = [fraction * c for c in counts]
    alloc = [min(c, math.floor(e)) for c, e in zip(counts, exact)]
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in order:
        if sum(alloc) >= total:
            break
        if alloc[i] < counts[i]:
            alloc[i] += 1
    return alloc


def split_indices(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not 0.0 < spec.train_fraction < 1.0:
        raise PreconditionError(f"train_fraction must lie in (0, 1), got {spec.train_fraction}")
    n_train = math.floor(spec.train_fraction * n + 0.5)
    if n_train == 0 or n_train == n:
        raise PreconditionError(
            f"train_fraction {spec.train_fraction} on {n} rows leaves an empty partition"
        )
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        classes = [np.flatnonzero(labels == c) for c in (0, 1)]
        if any(len(c) == 0 for c in classes):
            raise PreconditionError("stratified split needs both classes present")
        alloc = _allocate([len(c) for c in classes], n_train, spec.train_fraction)
        train = np.concatenate([rng.permutation(c)[:a] for c, a in zip(classes, alloc)])
    else:
        train = rng.permutation(n)[:n_train]
    train = np.sort(train)
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def split(matrix: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    train, test = split_indices(matrix.labels, spec)
    return matrix.take(train), matrix.take(test)


def subsample(table: RawTable, labels: np.ndarray, n: int, seed: int):
    """Stratified, seeded subsample of ``n`` raw rows (row order preserved)."""
    if n >= len(table):
        return table, labels
    keep, _ = split_indices(labels, SplitSpec(n / len(table), seed))
    return table.take(keep), labels[keep]


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    seed: int = 0


@dataclass(frozen=True)
class SmoteProvenance:
    """Row indices (into the input matrix) and gaps behind each synthetic row."""

    base: np.ndarray
    neighbor: np.ndarray
    gap: np.ndarray


def smote(train: FeatureMatrix, cfg: SmoteConfig = SmoteConfig(), return_provenance: bool = False):
    """Oversample the minority class until both classes have equal counts.

    Originals come first and unchanged; each synthetic row is
    ``x + gap * (neighbor - x)`` for a minority row ``x``, one of its
    ``k_neighbors`` nearest minority rows (Euclidean, raw values) and a gap in
    [0, 1).
    """
    benign, malicious = class_counts(train.labels)
    empty = SmoteProvenance(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    if benign == malicious:
        return (train, empty) if return_provenance else train
    minority = 1 if malicious < benign else 0
    rows = np.flatnonzero(train.labels == minority)
    m = len(rows)
    if m < 2:
        raise PreconditionError(f"SMOTE needs at least 2 minority samples, got {m}")
    k = cfg.k_neighbors
    if not 1 <= k <= m - 1:
        raise PreconditionError(f"k_neighbors={k} must lie in [1, {m - 1}] for {m} minority samples")

    Xmin = np.ascontiguousarray(train.values[rows])
    nn = kernels.knn(Xmin, k)
    n_new = abs(benign - malicious)
    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(0, m, n_new)
    pick = rng.integers(0, k, n_new)
    gap = rng.random(n_new)
    other = nn[base, pick]
    x = Xmin[base]
    synthetic = x + gap[:, None] * (Xmin[other] - x)

    out = FeatureMatrix(
        np.ascontiguousarray(np.vstack([train.values, synthetic])),
        train.feature_names,
        np.concatenate([train.labels, np.full(n_new, minority, dtype=train.labels.dtype)]),
        train.sources,
    )
    if return_provenance:
        return out, SmoteProvenance(rows[base], rows[other], gap)
    return out


# ---------------------------------------------------------------------------
# Two-dataset preparation
# ---------------------------------------------------------------------------

SMOTE_SCOPES = ("train", "whole")


@dataclass
class PreparedData:
    train: FeatureMatrix
    test: FeatureMatrix
    # dataset -> {"before": [benign, malicious], "after": [...]}
    class_counts: dict


def prepare(unsw: FeatureMatrix, kdd: FeatureMatrix, train_fraction: float,
            smote_cfg: SmoteConfig, scope: str = "train", seed: int = 0) -> PreparedData:
    """Split each selected dataset, balance with SMOTE, then fuse train and test sides.

    ``scope="train"`` balances only the training partitions; ``"whole"``
    balances each full dataset before splitting.
    """
    if scope not in SMOTE_SCOPES:
        raise PreconditionError(f"unknown SMOTE scope {scope!r}")
    trains, tests, counts = [], [], {}
    for key, (name, matrix) in enumerate((("UNSW", unsw), ("KDD", kdd))):
        cfg = SmoteConfig(smote_cfg.k_neighbors, derive_seed(smote_cfg.seed, key))
        spec = SplitSpec(train_fraction, derive_seed(seed, key))
        if scope == "whole":
            before = class_counts(matrix.labels)
            balanced = smote(matrix, cfg)
            train, test = split(balanced, spec)
            after = class_counts(balanced.labels)
        else:
            train, test = split(matrix, spec)
            before = class_counts(train.labels)
            train = smote(train, cfg)
            after = class_counts(train.labels)
        counts[name] = {"before": list(before), "after": list(after)}
        trains.append(train)
        tests.append(test)
    return PreparedData(fuse(*trains), fuse(*tests), counts)


# ---------------------------------------------------------------------------
# Matrix cache files
# ---------------------------------------------------------------------------

CACHE_MAGIC = "# idsfusion-matrix v1"


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def save_matrix(matrix: FeatureMatrix, path: str | Path, checksum: str = "") -> None:
    """Write a matrix as CSV behind a short ``#`` header (shape, source checksum, sources)."""
    lines = [
        CACHE_MAGIC,
        f"# n_samples={matrix.n_samples}",
        f"# n_features={matrix.n_features}",
        f"# source_sha256={checksum}",
        f"# sources={json.dumps(matrix.sources)}",
        ",".join(matrix.feature_names + ("label",)),
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        if matrix.n_samples:
            data = np.column_stack([matrix.values, matrix.labels.astype(np.float64)])
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def read_cache_checksum(path: str | Path) -> str | None:
    try:
        with open(path, encoding="utf-8") as fh:
            head = [next(fh) for _ in range(4)]
    except (OSError, StopIteration):
        return None
    if head[0].rstrip("\n") != CACHE_MAGIC:
        return None
    return head[3].strip().split("=", 1)[1]


def load_matrix(path: str | Path) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        header = [fh.readline().rstrip("\n") for _ in range(6)]
        if header[0] != CACHE_MAGIC:
            raise DataError(f"{path} is not a matrix cache file")
        n = int(header[1].split("=", 1)[1])
        d = int(header[2].split("=", 1)[1])
        sources = json.loads(header[4].split("=", 1)[1])
        names = tuple(header[5].split(",")[:-1])
        data = np.loadtxt(fh, delimiter=",", ndmin=2) if n else np.zeros((0, d + 1))
    if data.shape != (n, d + 1):
        raise DataError(f"{path}: expected {n}x{d + 1} values, found {data.shape}")
    return FeatureMatrix(
        np.ascontiguousarray(data[:, :d]),
        names,
        data[:, d].astype(np.int64),
        tuple(tuple(p) for p in sources) if sources is not None else None,
    )

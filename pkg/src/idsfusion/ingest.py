"""Raw CSV ingestion for the UNSW-NB15 and KDD Cup 1999 record formats."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


class DatasetKind(str, enum.Enum):
    UNSW = "UNSW"
    KDD = "KDD"


UNSW_COLUMNS = (
    "srcip", "sport", "dstip", "dsport", "proto", "state", "dur", "sbytes",
    "dbytes", "sttl", "dttl", "sloss", "dloss", "service", "Sload", "Dload",
    "Spkts", "Dpkts", "swin", "dwin", "stcpb", "dtcpb", "smeansz", "dmeansz",
    "trans_depth", "res_bdy_len", "Sjit", "Djit", "Stime", "Ltime", "Sintpkt",
    "Dintpkt", "tcprtt", "synack", "ackdat", "is_sm_ips_ports", "ct_state_ttl",
    "ct_flw_http_mthd", "is_ftp_login", "ct_ftp_cmd", "ct_srv_src",
    "ct_srv_dst", "ct_dst_ltm", "ct_src_ltm", "ct_src_dport_ltm",
    "ct_dst_sport_ltm", "ct_dst_src_ltm", "attack_cat", "Label",
)

KDD_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate", "label",
)

# Category vocabularies that always receive an indicator column, so the
# Table-1 one-hot features exist even when a subsample misses a rare value.
UNSW_VOCAB = {
    "proto": ("tcp", "udp", "icmp"),
    "service": ("-", "dns", "http", "ftp-data", "smtp", "ftp", "ssh", "pop3",
                "dhcp", "snmp", "ssl", "irc", "radius"),
}
KDD_VOCAB = {
    "protocol_type": ("tcp", "udp", "icmp"),
    "service": ("http", "smtp", "ftp", "ftp_data", "private", "ecr_i",
                "domain_u", "telnet", "pop_3", "IRC", "ssh", "other"),
    "flag": ("SF", "S0", "REJ", "RSTR", "RSTO", "SH", "S1", "S2", "S3",
             "OTH", "RSTOS0"),
}


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of one dataset kind.

    ``categorical_columns`` lists every non-numeric column. The subsets
    ``onehot_columns``, ``ip_columns`` and ``port_columns`` select special
    encodings; the rest of the categorical columns are ordinal-encoded.
    ``ignored_columns`` stay in the raw table but never reach a feature matrix.
    """

    kind: DatasetKind
    column_names: tuple[str, ...]
    label_column: int
    categorical_columns: frozenset[int]
    onehot_columns: tuple[str, ...] = ()
    ip_columns: tuple[str, ...] = ()
    port_columns: tuple[str, ...] = ()
    ignored_columns: tuple[str, ...] = ()
    onehot_vocab: dict = field(default_factory=dict, compare=False)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def index(self, name: str) -> int:
        return self.column_names.index(name)

    def is_positive(self, cell: str) -> int:
        """Map a label cell to 0 (benign) or 1 (malicious)."""
        text = cell.strip()
        if self.kind is DatasetKind.UNSW:
            if text not in ("0", "1"):
                raise DataError(f"UNSW label must be '0' or '1', got {cell!r}")
            return int(text)
        if not text:
            raise DataError("empty KDD label cell")
        return 0 if text.lower() == "normal." else 1


def _indices(names, columns):
    return frozenset(names.index(c) for c in columns)


UNSW_SCHEMA = DatasetSchema(
    kind=DatasetKind.UNSW,
    column_names=UNSW_COLUMNS,
    label_column=48,
    categorical_columns=_indices(
        UNSW_COLUMNS,
        ("srcip", "sport", "dstip", "dsport", "proto", "state", "service", "attack_cat"),
    ),
    onehot_columns=("proto", "service", "state"),
    ip_columns=("srcip", "dstip"),
    port_columns=("sport", "dsport"),
    ignored_columns=("attack_cat",),
    onehot_vocab=UNSW_VOCAB,
)

KDD_SCHEMA = DatasetSchema(
    kind=DatasetKind.KDD,
    column_names=KDD_COLUMNS,
    label_column=41,
    categorical_columns=_indices(KDD_COLUMNS, ("protocol_type", "service", "flag")),
    onehot_columns=("protocol_type", "service", "flag"),
    onehot_vocab=KDD_VOCAB,
)


def builtin_schema(kind: DatasetKind | str) -> DatasetSchema:
    kind = DatasetKind(kind)
    return UNSW_SCHEMA if kind is DatasetKind.UNSW else KDD_SCHEMA


def load_schema(path: str | Path) -> DatasetSchema:
    """Read a schema override file (JSON).

    Required keys: ``kind``, ``column_names``, ``label_column``,
    ``categorical_columns``. Optional keys default to the built-in schema of
    the same kind. Columns may be given by name or by index.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    base = builtin_schema(raw["kind"])
    names = tuple(raw["column_names"])

    def as_index(col):
        return col if isinstance(col, int) else names.index(col)

    label = as_index(raw["label_column"])
    if not 0 <= label < len(names):
        raise DataError(f"label_column {label} outside {len(names)} columns")
    return DatasetSchema(
        kind=base.kind,
        column_names=names,
        label_column=label,
        categorical_columns=frozenset(as_index(c) for c in raw["categorical_columns"]),
        onehot_columns=tuple(raw.get("onehot_columns", base.onehot_columns)),
        ip_columns=tuple(raw.get("ip_columns", base.ip_columns)),
        port_columns=tuple(raw.get("port_columns", base.port_columns)),
        ignored_columns=tuple(raw.get("ignored_columns", base.ignored_columns)),
        onehot_vocab={k: tuple(v) for k, v in raw.get("onehot_vocab", base.onehot_vocab).items()},
    )


@dataclass(frozen=True)
class RawTable:
    schema: DatasetSchema
    rows: list

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        j = self.schema.index(name)
        return [row[j] for row in self.rows]

    def take(self, indices) -> "RawTable":
        return RawTable(self.schema, [self.rows[i] for i in indices])


def load_csv(path: str | Path, schema: DatasetSchema, has_header: bool = False) -> RawTable:
    """Parse a dataset CSV file; every line must carry exactly the schema's column count."""
    width = schema.n_columns
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for record, row in enumerate(reader):
            lineno = reader.line_num
            if len(row) != width:
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {width}"
                )
            if has_header and record == 0:
                continue
            rows.append(row)
    return RawTable(schema, rows)


def write_csv(table: RawTable, path: str | Path, header: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(table.schema.column_names)
        writer.writerows(table.rows)


def extract_labels(table: RawTable) -> np.ndarray:
    """Binary label vector, 1 = malicious."""
    if not table.rows:
        raise DataError("cannot extract labels from an empty table")
    j = table.schema.label_column
    out = np.empty(len(table.rows), dtype=np.int64)
    for i, row in enumerate(table.rows):
        try:
            out[i] = table.schema.is_positive(row[j])
        except DataError as exc:
            raise DataError(f"row {i}: {exc}") from None
    return out


def class_counts(labels) -> tuple[int, int]:
    labels = np.asarray(labels)
    malicious = int(np.count_nonzero(labels == 1))
    return len(labels) - malicious, malicious

"""
The EigenCache class keeps eigen-data of finished solves in ``.npz`` payloads indexed by a
sqlite table, so reruns with an identical configuration hash reuse them bit for bit. The module
also holds the CSV and JSON writers of the command line stages.
"""

import csv
import json
import sqlite3
from datetime import datetime
from pathlib import Path
import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from landaulab.config import CACHE_FORMAT_VERSION
from landaulab.eigensolver import EigenSystem
from landaulab.errors import ErrorCodes
from landaulab.lattice import LatticeSection
from landaulab.types import KernelSlice, LandaulabBaseType, RunManifest

storage_logger = logging.getLogger("landaulab.storage")

NO_CONNECTION_WARNING: str = "No connection to database established"


def save_eigensystem(es: EigenSystem, config_hash: str, path: Path) -> None:
    """
    Write eigen-data with its header to a compressed ``.npz`` payload

    :param es: Eigen-data
    :type es: EigenSystem
    :param config_hash: Hash of the producing configuration
    :type config_hash: str
    :param path: Destination
    :type path: Path
    """
    arrays = {
        "config_hash": np.array(config_hash),
        "header": np.array([es.k, es.grid, es.half_dim, es.rank, es.iterations, CACHE_FORMAT_VERSION]),
        "seed": np.array(-1 if es.seed is None else es.seed),
        "cutoff": np.array(es.cutoff),
        "method": np.array(es.method),
        "eigenvalues": es.eigenvalues,
        "residuals": es.residuals,
        "weights": es.weights,
    }
    if es.vectors is not None:
        arrays["vectors"] = es.vectors
    np.savez_compressed(path, **arrays)


def load_eigensystem(path: Path, config_hash: Optional[str] = None) -> EigenSystem:
    """
    Read a payload written by :func:`save_eigensystem`

    :param path: Payload file
    :type path: Path
    :param config_hash: Expected hash, defaults to accepting any
    :type config_hash: Optional[str], optional
    :raises UsageError: On a hash or format version mismatch
    :return: Eigen-data
    :rtype: EigenSystem
    """
    with np.load(path, allow_pickle=False) as payload:
        stored_hash = str(payload["config_hash"])
        k, grid, half_dim, rank, iterations, version = (int(v) for v in payload["header"])
        if version != CACHE_FORMAT_VERSION:
            raise ErrorCodes()("USAGE", f"cache format {version}, expected {CACHE_FORMAT_VERSION}")
        if config_hash is not None and stored_hash != config_hash:
            raise ErrorCodes()("USAGE", f"payload {path} belongs to configuration {stored_hash[:12]}")
        seed = int(payload["seed"])
        return EigenSystem(
            k=k,
            eigenvalues=payload["eigenvalues"],
            vectors=payload["vectors"] if "vectors" in payload.files else None,
            residuals=payload["residuals"],
            cutoff=float(payload["cutoff"]),
            weights=payload["weights"],
            rank=rank,
            grid=grid,
            half_dim=half_dim,
            method=str(payload["method"]),
            iterations=iterations,
            seed=None if seed < 0 else seed,
            metadata={"config_hash": stored_hash, "cached": True},
        )


class EigenCache:
    """
    Class to index and reuse eigen-data by configuration hash and tensor power
    """

    TABLE_NAME: str = "eigencache"
    FIELDS_DICT: Dict[str, str] = {
        "config_hash": "config-hash",
        "k": "k",
        "grid": "grid",
        "cutoff": "cutoff",
        "tol": "tol",
        "seed": "seed",
        "method": "method",
        "count": "count",
        "payload": "payload",
        "format_version": "format-version",
        "created": "created",
    }

    def __init__(self, db: Path) -> None:
        """
        Constructor of "EigenCache" class

        :param db: Path to database, may not exist prior to invocation. Payloads are stored
            next to it in a ``payloads`` directory.
        :type db: Path
        """
        self.db: Path = db
        self.payload_dir: Path = db.parent / "payloads"
        self.connection: Optional[sqlite3.Connection] = None
        self.cursor: Optional[sqlite3.Cursor] = None
        self.logger = logging.getLogger("landaulab.storage.EigenCache")

    def connect_database(self) -> None:
        """
        Connect to database

        :raises RuntimeError: If connection was already established.
        """
        if self.__connection_established():
            raise RuntimeError("Connection to database already established")
        self.logger.debug(f"Opening cache database {self.db}")
        self.db.parent.mkdir(parents=True, exist_ok=True)
        self.payload_dir.mkdir(parents=True, exist_ok=True)
        self.connection = sqlite3.connect(self.db, check_same_thread=False)
        self.cursor = self.connection.cursor()

    def disconnect_database(self) -> None:
        """
        Close connection to database
        """
        if self.__connection_established():
            self.connection.close()
        self.connection = None
        self.cursor = None

    def create_cache_table(self) -> None:
        """
        Create cache table, if it does not exist already
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        self.cursor.execute(
            """
            CREATE TABLE IF NOT EXISTS eigencache (
            config_hash TEXT,
            k INTEGER,
            grid INTEGER,
            cutoff REAL,
            tol REAL,
            seed INTEGER,
            method TEXT,
            count INTEGER,
            payload TEXT,
            format_version INTEGER,
            created TEXT,
            PRIMARY KEY (config_hash, k)
            );
            """
        )
        self.connection.commit()

    def check_for_cache_table(self) -> bool:
        """
        Check if cache table is present in database

        :return: True if table is present, False otherwise
        :rtype: bool
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        res = self.cursor.execute("SELECT name FROM sqlite_master WHERE type = 'table'")
        return any(EigenCache.TABLE_NAME in table for table in res.fetchall())

    def store(self, config_hash: str, es: EigenSystem, tol: float) -> Path:
        """
        Write the payload of ``es`` and index it, replacing an older entry of the same key

        :param config_hash: Hash of the producing configuration
        :type config_hash: str
        :param es: Eigen-data
        :type es: EigenSystem
        :param tol: Solver tolerance used
        :type tol: float
        :return: Path of the payload
        :rtype: Path
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        payload = self.payload_dir / f"{config_hash[:16]}_k{es.k}.npz"
        save_eigensystem(es, config_hash, payload)
        self.cursor.execute(
            """
            INSERT OR REPLACE INTO eigencache VALUES(
            :config_hash, :k, :grid, :cutoff, :tol, :seed, :method, :count, :payload, :format_version, :created
            );
            """,
            {
                "config_hash": config_hash,
                "k": es.k,
                "grid": es.grid,
                "cutoff": float(es.cutoff),
                "tol": float(tol),
                "seed": es.seed,
                "method": es.method,
                "count": len(es),
                "payload": str(payload),
                "format_version": CACHE_FORMAT_VERSION,
                "created": datetime.now().isoformat(timespec="seconds"),
            },
        )
        self.connection.commit()
        self.logger.info(f"Stored {len(es)} eigenpairs for k={es.k} in {payload.name}")
        return payload

    def lookup(self, config_hash: str, k: int) -> Optional[EigenSystem]:
        """
        Eigen-data of a previous run with the same hash and tensor power

        :return: Cached eigen-data, None on a miss or if the payload vanished
        :rtype: Optional[EigenSystem]
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        res = self.cursor.execute(
            "SELECT payload FROM eigencache WHERE config_hash = ? AND k = ? AND format_version = ?;",
            (config_hash, int(k), CACHE_FORMAT_VERSION),
        )
        row = res.fetchone()
        if row is None:
            return None
        payload = Path(row[0])
        if not payload.exists():
            self.logger.warning(f"Cache entry for k={k} points to missing payload {payload}")
            return None
        self.logger.info(f"Cache hit for k={k}")
        return load_eigensystem(payload, config_hash)

    def query_database(
        self, query_string: str, placeholders: Optional[Union[Tuple, Dict]] = None
    ) -> Union[List[Tuple[Any]], List]:
        """
        Arbitrary query into cache database

        :param query_string: SQL query
        :type query_string: str
        :param placeholders: Placeholders used in query, defaults to None
        :type placeholders: Optional[Union[Tuple, Dict]], optional
        :return: All database row that were returned according to ``query_string``
        :rtype: Union[List[Tuple[Any]], List]
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        if placeholders is None:
            res = self.cursor.execute(query_string)
        else:
            res = self.cursor.execute(query_string, placeholders)
        return res.fetchall()

    def export_summary_csv(self, destination: Path) -> None:
        """
        Export the cache index as a flat csv file

        .. note:: Exported CSV file uses 'excel' dialect.

        :param destination: Output file path
        :type destination: Path
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        with open(destination, "wt", encoding="utf-8", newline="") as csvfile:
            summary_writer = csv.writer(csvfile, dialect="excel")
            summary_writer.writerow(EigenCache.FIELDS_DICT.values())
            for row in self.cursor.execute("SELECT * FROM eigencache ORDER BY config_hash, k"):
                summary_writer.writerow(row)

    def delete_entries(self, config_hash: str) -> None:
        """
        Remove every entry and payload of one configuration
        """
        assert self.__connection_established(), NO_CONNECTION_WARNING

        for (payload,) in self.query_database("SELECT payload FROM eigencache WHERE config_hash = ?;", (config_hash,)):
            Path(payload).unlink(missing_ok=True)
        self.cursor.execute("DELETE FROM eigencache WHERE config_hash = ?;", (config_hash,))
        self.connection.commit()

    def __connection_established(self) -> bool:
        """
        Check if there is an active connection to a database

        :return: True if a connection is found, False otherwise
        :rtype: bool
        """
        return self.connection is not None


def write_csv(destination: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    Write rows to a CSV file in the 'excel' dialect

    :param destination: Output file path
    :type destination: Path
    :param header: Column names
    :type header: Sequence[str]
    :param rows: Table rows
    :type rows: Iterable[Sequence[Any]]
    :return: ``destination``
    :rtype: Path
    """
    destination.parent.mkdir(parents=True, exist_ok=True)
    with open(destination, "wt", encoding="utf-8", newline="") as csvfile:
        writer = csv.writer(csvfile, dialect="excel")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    storage_logger.debug(f"Wrote {destination}")
    return destination


def read_csv(source: Path) -> Tuple[List[str], List[List[str]]]:
    with open(source, "rt", encoding="utf-8", newline="") as csvfile:
        reader = csv.reader(csvfile, dialect="excel")
        header = next(reader)
        return header, [row for row in reader]


def write_sigma_table(
    destination: Path, envelope: Iterable[Tuple[float, float]], errors: Optional[Sequence[float]] = None
) -> Path:
    components = list(envelope)
    errors = list(errors) if errors is not None else [float("nan")] * len(components)
    return write_csv(
        destination,
        ["component", "lower", "upper", "refinement_error"],
        [(index, lo, hi, error) for index, ((lo, hi), error) in enumerate(zip(components, errors))],
    )


def write_level_table(destination: Path, site: int, levels: Sequence[Tuple[float, Tuple[int, ...], int]]) -> Path:
    return write_csv(
        destination,
        ["site", "eigenvalue", "alpha", "aux"],
        [(site, value, " ".join(str(a) for a in alpha), aux) for value, alpha, aux in levels],
    )


def write_weyl_table(destination: Path, rows: Sequence[Tuple[float, float]]) -> Path:
    return write_csv(destination, ["lambda", "v"], rows)


def write_records(destination: Path, records: Sequence[LandaulabBaseType]) -> Path:
    """CSV table of flat records, one column per attribute of the first record"""
    if not records:
        return write_csv(destination, [], [])
    header = list(records[0].to_dict().keys())
    return write_csv(destination, header, [[record.to_dict()[key] for key in header] for record in records])


def write_kernel_slice(destination: Path, kernel_slice: KernelSlice, model: Optional[Sequence[float]] = None) -> Path:
    model = list(model) if model is not None else [float("nan")] * len(kernel_slice.values)
    return write_csv(
        destination,
        ["k", "site", "step", "offset", "norm_sq", "lattice", "model"],
        [
            (kernel_slice.k, kernel_slice.site, step, " ".join(f"{c:.10g}" for c in offset), norm, value, prediction)
            for step, (offset, norm, value, prediction) in enumerate(
                zip(kernel_slice.offsets, kernel_slice.norms, kernel_slice.values, model)
            )
        ],
    )


def write_heatmap(destination: Path, values: np.ndarray) -> Path:
    """Two-dimensional array as an (i, j, value) table"""
    values = np.asarray(values)
    return write_csv(
        destination,
        ["i", "j", "value"],
        ((i, j, float(values[i, j])) for i in range(values.shape[0]) for j in range(values.shape[1])),
    )


def write_section(destination: Path, section: LatticeSection) -> Path:
    """One row per site: the flat site index, then real and imaginary part of every component"""
    header = ["site"]
    for component in range(section.values.shape[1]):
        header += [f"re{component}", f"im{component}"]
    rows = []
    for site, values in enumerate(section.values):
        row = [site]
        for value in values:
            row += [float(np.real(value)), float(np.imag(value))]
        rows.append(row)
    return write_csv(destination, header, rows)


def read_section(source: Path, k: int) -> LatticeSection:
    """
    Inverse of :func:`write_section`

    :raises UsageError: If the header is not a section header
    """
    header, rows = read_csv(source)
    if header[0] != "site" or len(header) % 2 != 1:
        raise ErrorCodes()("USAGE", f"{source} is not a section dump, header {header}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    order = np.argsort(data[:, 0])
    return LatticeSection(values=data[order, 1::2] + 1j * data[order, 2::2], k=k)


def write_json_report(destination: Path, report: Union[LandaulabBaseType, Dict[str, Any]]) -> Path:
    destination.parent.mkdir(parents=True, exist_ok=True)
    text = report.json() if isinstance(report, LandaulabBaseType) else json.dumps(report, default=_report_default)
    with open(destination, "wt", encoding="utf-8") as report_file:
        report_file.write(text)
    return destination


def _report_default(value: Any) -> Any:
    if isinstance(value, LandaulabBaseType):
        return value.to_dict()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return vars(value)


def read_json_report(source: Path) -> Dict[str, Any]:
    with open(source, "rt", encoding="utf-8") as report_file:
        return json.load(report_file)


def write_manifest(destination: Path, manifest: RunManifest) -> Path:
    return write_json_report(destination, manifest)


def read_manifest(source: Path) -> RunManifest:
    return RunManifest.from_dict(read_json_report(source))

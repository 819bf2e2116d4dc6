import csv
import os
from logging import getLogger
from typing import Any, Iterable, Sequence, TextIO

import simplejson

CSV_FORMAT_NAME = "kinlab-csv"
CSV_FORMAT_VERSION = 1
JSON_FORMAT_VERSION = 1

__logger = getLogger(__name__)


def csv_magic_line(config_hash: str, seed: int) -> str:
    return f"# {CSV_FORMAT_NAME} v{CSV_FORMAT_VERSION} config_hash={config_hash} seed={seed}"


def write_csv_stream(
    stream: TextIO,
    fields: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
    seed: int,
) -> None:
    """Write a versioned CSV: the magic line, the fixed header, then the rows

    Raises:
        ValueError: A row does not match the header
    """
    stream.write(csv_magic_line(config_hash, seed) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        if len(row) != len(fields):
            raise ValueError(f"Row does not match the header. fields={len(fields)} row={len(row)}")
        writer.writerow(row)


def write_csv(
    path: str,
    fields: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
    seed: int,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as csv_file:
        write_csv_stream(csv_file, fields, rows, config_hash, seed)
    __logger.info(f"CSV written. path={path}")


def read_csv(path: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Read a versioned CSV

    Raises:
        ValueError: Missing or unsupported magic line

    Returns:
        tuple[dict[str, str], list[str], list[list[str]]]: Provenance, header and rows
    """
    with open(path, "r", encoding="utf-8", newline="") as csv_file:
        magic_line = csv_file.readline().rstrip("\n")
        parts = magic_line.split(" ")
        if len(parts) < 3 or parts[0] != "#" or parts[1] != CSV_FORMAT_NAME:
            raise ValueError(f"Not a kinlab CSV file. path={path}")
        if parts[2] != f"v{CSV_FORMAT_VERSION}":
            raise ValueError(f"Unsupported CSV version. version={parts[2]}")
        provenance = dict(part.split("=", 1) for part in parts[3:] if "=" in part)
        reader = csv.reader(csv_file)
        header = next(reader)
        rows = list(reader)
    return provenance, header, rows


def summary_document(
    kind: str, config_hash: str, seeds: list[int], payload: dict[str, Any]
) -> dict[str, Any]:
    return {
        "format": f"kinlab-{kind}",
        "version": JSON_FORMAT_VERSION,
        "config_hash": config_hash,
        "seeds": seeds,
        **payload,
    }


def write_json(path: str, document: dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as json_file:
        simplejson.dump(document, json_file, indent=2, ignore_nan=True)
    __logger.info(f"JSON written. path={path}")

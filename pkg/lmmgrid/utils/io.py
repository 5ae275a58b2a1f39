import contextlib
import csv
import json
import os
import sys


def read_json(input_path):
    """
    Loads a JSON document from a path ("-" reads stdin).
    """
    if input_path == "-":
        return json.load(sys.stdin)
    with open(input_path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(data, output_path):
    with _open_output(output_path) as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextlib.contextmanager
def _open_output(output_path):
    if output_path == "-":
        yield sys.stdout
        return
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def provenance_line(provenance):
    """
    Renders a mapping as the `#`-prefixed first line of every table.
    """
    return "# " + " ".join(f"{key}={value}" for key, value in provenance.items())


def format_cell(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_table(output_path, header, rows, provenance):
    """
    Writes a UTF-8, comma-separated table with a provenance comment line and
    a header row. "-" writes to stdout.
    """
    with _open_output(output_path) as fh:
        fh.write(provenance_line(provenance) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])


def read_table(input_path):
    """
    Reads a table written by write_table back as (provenance, header, rows).
    Cells stay strings.
    """
    with open(input_path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        provenance = dict(
            item.split("=", 1) for item in first.lstrip("# ").split(" ") if "=" in item
        )
        reader = csv.reader(fh)
        header = next(reader)
        return provenance, header, list(reader)

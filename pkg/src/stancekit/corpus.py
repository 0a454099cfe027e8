"""Corpus file reading: JSONL (canonical) and CSV with column mapping."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from stancekit.stances import LabelParseError, Stance, parse_stance
from stancekit.textpipe import LabeledInstance

_TRUTHY = {"1", "true", "yes", "y", "t"}


class CorpusParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class FieldMap:
    text: str = "text"
    rumour_id: str = "rumour_id"
    event_id: str = "event_id"
    label: str = "label"
    tweet_id: str = "tweet_id"
    order: str = "order_index"
    retweet: str = "is_retweet"


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in _TRUTHY


def _build_instance(record: dict, fields: FieldMap, lineno: int,
                    order_counters: dict, seen_orders: set,
                    require_label: bool) -> LabeledInstance:
    text = record.get(fields.text)
    if text is None:
        raise CorpusParseError(lineno, f"missing field {fields.text!r}")
    rumour = record.get(fields.rumour_id)
    if rumour in (None, ""):
        raise CorpusParseError(lineno, f"missing field {fields.rumour_id!r}")
    rumour = str(rumour)
    raw_label = record.get(fields.label)
    label = None
    if raw_label not in (None, ""):
        try:
            label = parse_stance(raw_label)
        except LabelParseError as exc:
            raise CorpusParseError(lineno, str(exc)) from None
    elif require_label:
        raise CorpusParseError(lineno, f"missing field {fields.label!r}")
    raw_order = record.get(fields.order)
    if raw_order in (None, ""):
        order = order_counters.get(rumour, 0)
    else:
        try:
            order = int(raw_order)
        except (TypeError, ValueError):
            raise CorpusParseError(lineno, f"non-integer order value {raw_order!r}") from None
        if order < 0:
            raise CorpusParseError(lineno, "order values must be >= 0")
    order_counters[rumour] = max(order_counters.get(rumour, 0), order) + 1
    if (rumour, order) in seen_orders:
        raise CorpusParseError(lineno, f"duplicate order index {order} within rumour {rumour!r}")
    seen_orders.add((rumour, order))
    tweet_id = str(record.get(fields.tweet_id) or f"line{lineno}")
    raw_retweet = record.get(fields.retweet)
    is_retweet = _as_bool(raw_retweet) if raw_retweet is not None else str(text).startswith("RT @")
    return LabeledInstance(
        tweet_id=tweet_id,
        text=str(text),
        rumour_id=rumour,
        event_id=str(record.get(fields.event_id) or rumour),
        order_index=order,
        label=label,
        is_retweet=is_retweet,
    )


def _read_records(path, file_format: str, fields: FieldMap):
    """Yield (lineno, record, error) triples; errors never kill the stream."""
    if file_format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield lineno, None, CorpusParseError(lineno, f"invalid JSON: {exc.msg}")
                    continue
                if not isinstance(record, dict):
                    yield lineno, None, CorpusParseError(lineno, "each JSONL line must be an object")
                    continue
                yield lineno, record, None
    elif file_format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            for lineno, record in enumerate(reader, start=2):
                yield lineno, record, None
    else:
        raise ValueError(f"unknown corpus format {file_format!r}; expected jsonl or csv")


def read_corpus(path, file_format: str = "jsonl", fields: FieldMap = FieldMap(),
                lenient: bool = False, require_label: bool = True):
    """Parse a corpus file into LabeledInstances.

    Returns (instances, errors); errors is non-empty only under
    ``lenient=True``, otherwise the first problem raises.
    """
    instances = []
    errors = []
    order_counters: dict = {}
    seen_orders: set = set()
    for lineno, record, error in _read_records(path, file_format, fields):
        if error is None:
            try:
                instances.append(
                    _build_instance(
                        record, fields, lineno, order_counters, seen_orders, require_label
                    )
                )
                continue
            except CorpusParseError as exc:
                error = exc
        if not lenient:
            raise error
        errors.append(str(error))
    return instances, errors


def summarize_corpus(instances):
    """Per-rumour stance counts in first-appearance order, plus totals."""
    summary: dict = {}
    for inst in instances:
        row = summary.setdefault(
            inst.rumour_id, {s: 0 for s in Stance} | {"total": 0}
        )
        if inst.label is not None:
            row[inst.label] += 1
        row["total"] += 1
    return summary


def write_jsonl(instances, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(
                json.dumps(
                    {
                        "tweet_id": inst.tweet_id,
                        "text": inst.text,
                        "rumour_id": inst.rumour_id,
                        "event_id": inst.event_id,
                        "order_index": inst.order_index,
                        "label": inst.label.value if inst.label else None,
                        "is_retweet": inst.is_retweet,
                    }
                )
                + "\n"
            )

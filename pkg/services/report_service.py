#!/usr/bin/python
# -*- coding:utf-8 -*-
"""Machine-readable run reports written to stdout or a file."""
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import jsonschema
import numpy as np

from services.errors import ValidationError

SCHEMA_VERSION = 1
SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'schemas')


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        # JSON has no inf/nan
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Enum):
        return value.value
    return value


@dataclass
class RunReport:
    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    timing: Optional[Dict[str, float]] = None
    exit_code: int = 0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return _to_jsonable({
            'schema_version': self.schema_version,
            'command': self.command,
            'parameters': self.parameters,
            'outputs': self.outputs,
            'seed': self.seed,
            'timing': self.timing,
            'exit_code': self.exit_code,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class ReportService:
    """Builds, times and writes RunReports"""

    def __init__(self, record_timing: bool = False):
        """
        Initialize the report service

        Args:
            record_timing (bool): Attach wall-clock timing; off keeps fixed-seed reports byte-identical
        """
        self.logger = logging.getLogger(__name__)
        self.record_timing = record_timing
        self._started = None

    def start(self) -> None:
        self._started = time.perf_counter()

    def finish(self, report: RunReport) -> RunReport:
        """Attach timing when enabled and check the report against its schema"""
        if self.record_timing and self._started is not None:
            report.timing = {'elapsed_s': round(time.perf_counter() - self._started, 6)}
        try:
            validate_report(report)
        except ValidationError as e:
            self.logger.warning(str(e))
        return report

    def write(self, report: RunReport, out: Optional[str] = None) -> None:
        """
        Write a report as JSON

        Args:
            report (RunReport): Report to serialize
            out (str, optional): File path; stdout when omitted

        Raises:
            OSError: If the file cannot be written
        """
        text = report.to_json()
        if out:
            with open(out, 'w') as f:
                f.write(text)
            self.logger.info(f"Wrote {report.command} report to {out}")
        else:
            sys.stdout.write(text)
            sys.stdout.flush()


def load_json(path: str) -> dict:
    """
    Read a JSON document

    Raises:
        OSError: If the file cannot be read
        ValueError: If it is not valid JSON
    """
    with open(path) as f:
        return json.load(f)


def load_schema(command: str) -> dict:
    """
    JSON schema for a command's reports, named after the command's first word

    Raises:
        ValidationError: If no schema is published for the command
    """
    path = os.path.join(SCHEMA_DIR, f"{command.split()[0]}.json")
    if not os.path.exists(path):
        raise ValidationError(f"no report schema for {command!r}")
    return load_json(path)


def validate_report(report: RunReport) -> None:
    """
    Check a report against schemas/<command>.json

    Raises:
        ValidationError: If the report does not match
    """
    try:
        jsonschema.validate(instance=report.to_dict(), schema=load_schema(report.command))
    except jsonschema.ValidationError as e:
        path = '/'.join(str(p) for p in e.absolute_path)
        raise ValidationError(f"{report.command} report does not match its schema at '{path}': {e.message}")

#!/usr/bin/python
# -*- coding:utf-8 -*-
"""Exception hierarchy shared by the services and mapped to CLI exit codes."""


class LhError(Exception):
    """Base class for every error raised by the services"""


class ValidationError(LhError, ValueError):
    """Input rejected by a domain rule (exit code 1)"""


class GuardError(LhError):
    """A configured size guard was exceeded (exit code 2)"""

    def __init__(self, what, value, limit):
        self.what = what
        self.value = value
        self.limit = limit
        super().__init__(f"{what} = {value} exceeds the configured limit {limit}")


class StageError(LhError):
    """A pipeline stage failed; `stage` names where"""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


def check_guard(what, value, limit):
    """
    Raise GuardError when value exceeds limit

    Args:
        what (str): Name of the guarded quantity
        value (int): Observed size
        limit (int): Configured maximum
    """
    if value > limit:
        raise GuardError(what, value, limit)

"""Shared fixtures: the two shipped desk experiments are solved once per
session and reused by the solver-contract and desk-suite acceptance tests."""

import time

import pytest

from rieszlab.config import load_config, resolve_config_path
from rieszlab.harness import run_sweep


def _run_reference(name):
    cfg = load_config(resolve_config_path(name), env={})
    start = time.perf_counter()
    analysis = run_sweep(cfg)
    elapsed = time.perf_counter() - start
    return analysis, elapsed


@pytest.fixture(scope="session")
def desk_1d_reversed():
    return _run_reference("desk_1d_reversed")


@pytest.fixture(scope="session")
def desk_2d_hls():
    return _run_reference("desk_2d_hls")

import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

HERE = Path(__file__).parent


@pytest.fixture(scope="session")
def frozen():
    raw = json.loads((HERE / "frozen" / "frozen.json").read_text())

    def conv(v):
        if isinstance(v, list):
            return np.asarray(v, dtype=np.float64)
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return {k: conv(v) for k, v in raw.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cifar_record(label: int, fill) -> bytes:
    """One 3073-byte record: label byte then R, G, B planes of 32x32."""
    pixels = np.broadcast_to(np.asarray(fill, dtype=np.uint8), (3072,))
    return bytes([label]) + pixels.tobytes()


@pytest.fixture
def cifar_dir(tmp_path):
    """Tiny fake distribution: five train files of 2 records each plus a test file."""
    root = tmp_path / "cifar-10-batches-bin"
    root.mkdir()
    for i in range(1, 6):
        (root / f"data_batch_{i}.bin").write_bytes(cifar_record(i, 255) + cifar_record(0, 0))
    (root / "test_batch.bin").write_bytes(cifar_record(9, np.arange(3072) % 256))
    return tmp_path


# -- acceptance reporting ---------------------------------------------------------

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``acceptance(criterion, passed, detail)`` records one verdict line."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion: str, passed, detail: str = "") -> bool:
        verdict = {True: "PASS", False: "FAIL"}.get(passed, str(passed))
        line = f"{verdict:4s}  {criterion}" + (f"  [{detail}]" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

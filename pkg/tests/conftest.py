import math

import numpy as np
import pytest

from fakepath import FakePathDesign, Scene, SystemConfig, generate_pilots, scene_to_params
from fakepath.channel import separation_thresholds


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def scene():
    return Scene()


@pytest.fixture(scope="session")
def true_paths(cfg, scene):
    return scene_to_params(scene, cfg, 7)


@pytest.fixture(scope="session")
def pilots(cfg):
    return generate_pilots(cfg, 11)


@pytest.fixture(scope="session")
def design(cfg):
    ut, ua = separation_thresholds(cfg)
    return FakePathDesign.single(ut / 20, ua / 20)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def random_scene(rng, K=None, span=12.0):
    """A scene whose points are well separated and whose delays fit a 16-carrier 15 MHz symbol."""
    K = int(rng.integers(0, 4)) if K is None else K
    while True:
        p = rng.uniform(-span, span, 2)
        pts = [rng.uniform(-span, span, 2) for _ in range(K + 1)]
        all_pts = [p] + pts
        d = min(np.linalg.norm(a - b) for i, a in enumerate(all_pts) for b in all_pts[i + 1:])
        if d < 1.0:
            continue
        z = pts[0]
        scat = pts[1:]
        # keep every path angle away from endfire so spatial frequencies stay in range
        angs = [math.atan2(*(z - p)[::-1])] + [math.atan2(*(v - p)[::-1]) for v in scat]
        if any(abs(math.cos(a)) < 0.2 for a in angs):
            continue
        return Scene(tuple(p), tuple(z), tuple(tuple(v) for v in scat))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record(key: str, ok: bool, text: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {key}: {text}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0].strip("[]"))):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

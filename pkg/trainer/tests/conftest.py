import subprocess
import sys

import pytest


def run_facepipe(*args):
    """Invoke the dataset pipeline CLI; the trainer only talks to its files."""
    res = subprocess.run(
        [sys.executable, "-m", "facepipe.cli", *args], capture_output=True, text=True
    )
    assert res.returncode == 0, f"facepipe {' '.join(args)} failed:\n{res.stderr}\n{res.stdout}"
    return res.stdout


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A ~380-record dataset built through the pipeline CLI."""
    clips = tmp_path_factory.mktemp("clips")
    root = tmp_path_factory.mktemp("data")
    run_facepipe("gen-clips", "--n", "6", "--seed", "21", "--out", str(clips))
    run_facepipe(
        "build", "--clips", str(clips), "--out", str(root),
        "--timestep", "0.1", "--resolution", "128", "--seed", "21",
    )
    return root


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_trainer_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria (trainer)")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])

import subprocess
from pathlib import Path

import pytest

CONFIG_TEMPLATE = """\
[sim]
n = 10
m = 2
seed = {seed}
[protocol]
rho = {rho}
"""


def make_export(tmp_dir: Path, rho: float, seed: int) -> Path:
    """Produce a seed-export fixture through the collection CLI."""
    cfg = tmp_dir / f"exp_rho{rho}_s{seed}.toml"
    cfg.write_text(CONFIG_TEMPLATE.format(rho=rho, seed=seed))
    out = tmp_dir / f"seeds_rho{rho}_s{seed}.bin"
    subprocess.run(
        ["seedrelay", "export-seeds", "--config", str(cfg), "--out", str(out)],
        check=True,
        capture_output=True,
    )
    return out


@pytest.fixture(scope="session")
def export_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("exports")


@pytest.fixture(scope="session")
def rho0_export(export_dir) -> Path:
    return make_export(export_dir, rho=0.0, seed=30)

import shutil
import struct
import subprocess

import numpy as np
import pytest

FPP_FORGE = shutil.which("fpp-forge")

INI_TEMPLATE = """
[render]
width = {size}
height = {size}
pattern_size = 1024
frequency = 8.0

[schedule]
n_yaw = {n_yaw}
yaw_step = 36
n_roll = {n_roll}
roll_step = 5

[models]
dir = {models}
"""


def write_stl(path, tri: np.ndarray) -> None:
    """Standalone binary STL writer (triangle soup, (n, 3, 3) corners)."""
    tri = np.asarray(tri, dtype="<f4")
    rec = np.zeros(len(tri), dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("a", "<u2")])
    rec["v"] = tri
    path.write_bytes(b"\0" * 80 + struct.pack("<I", len(tri)) + rec.tobytes())


def box_soup(size=1.0) -> np.ndarray:
    s = size / 2.0
    c = np.array([[x, y, z] for x in (-s, s) for y in (-s, s) for z in (-s, s)])
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = []
    for a, b, d, e in quads:
        tris.append([c[a], c[b], c[d]])
        tris.append([c[a], c[d], c[e]])
    return np.asarray(tris)


def bumpy_sphere_soup(seed: int, n_lat=20, n_lon=40) -> np.ndarray:
    rng = np.random.default_rng(seed)
    amp = rng.uniform(0.0, 0.15)
    freq = rng.integers(2, 5)
    phase = rng.uniform(0, 2 * np.pi)
    lat = np.linspace(0, np.pi, n_lat + 1)
    lon = np.linspace(0, 2 * np.pi, n_lon + 1)
    t, p = np.meshgrid(lat, lon, indexing="ij")
    r = 1.0 + amp * np.sin(freq * p + phase) * np.sin(t)
    xyz = np.stack(
        [r * np.sin(t) * np.cos(p), r * np.sin(t) * np.sin(p), r * np.cos(t)], axis=-1
    )
    tris = []
    for i in range(n_lat):
        for j in range(n_lon):
            a, b = xyz[i, j], xyz[i, j + 1]
            c, d = xyz[i + 1, j], xyz[i + 1, j + 1]
            tris.append([a, b, c])
            tris.append([b, d, c])
    return np.asarray(tris)


def build_dataset_via_cli(root, n_models: int, n_yaw: int, n_roll: int, size: int, seed: int):
    assert FPP_FORGE, "fpp-forge CLI not on PATH; install the rendering package"
    models = root / "models"
    models.mkdir(parents=True)
    write_stl(models / "model00.stl", box_soup())
    for i in range(1, n_models):
        write_stl(models / f"model{i:02d}.stl", bumpy_sphere_soup(seed=100 + i))
    ini = root / "config.ini"
    ini.write_text(
        INI_TEMPLATE.format(size=size, n_yaw=n_yaw, n_roll=n_roll, models=models)
    )
    out = root / "dataset"
    proc = subprocess.run(
        [
            FPP_FORGE, "dataset", "build",
            "--config", str(ini), "--out", str(out), "--seed", str(seed),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """2 models x 2x2 poses at 64 px: 8 pairs, for fast data/model tests."""
    root = tmp_path_factory.mktemp("mini")
    return build_dataset_via_cli(root, n_models=2, n_yaw=2, n_roll=2, size=64, seed=5)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """5 models x 10x10 poses at 64 px: the 500-pair ablation dataset."""
    root = tmp_path_factory.mktemp("toy")
    return build_dataset_via_cli(root, n_models=5, n_yaw=10, n_roll=10, size=64, seed=9)

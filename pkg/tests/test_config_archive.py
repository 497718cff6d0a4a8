import json

import numpy as np
import pytest

from hyprom.archive import ArchiveError, archive_digest, load_archive, save_archive
from hyprom.config import ConfigError, RunConfig, preset_names
from hyprom.greedy import OfflineSettings, run_offline

SMALL = {
    "name": "small",
    "model": {"kind": "burgers1d"},
    "grid": {"x_min": 0.0, "x_max": "pi", "n_cells": 80, "boundary": "periodic"},
    "schedule": {"dt": 0.001, "n_steps": 30},
    "parameter_domain": [[0.4, 0.5], [1.0, 1.0], [1.0, 1.0]],
    "training": {"sampling": "uniform_grid", "counts": [5, 1, 1]},
    "offline": {"greedy_tol": 1e-3, "eim_tol": 1e-5},
    "uq": {"M": 4, "seed": 3},
}


def test_presets_load():
    assert set(preset_names()) >= {"burgers_case1", "burgers_case2", "euler_smooth", "euler_sod"}
    for name in preset_names():
        cfg = RunConfig.load(name)
        assert cfg.build_grid().boundary == cfg.build_model().boundary
    c1 = RunConfig.load("burgers_case1")
    assert c1.build_grid().x_max == pytest.approx(np.pi)
    assert c1.schedule.n_steps == 159 and c1.grid.n_cells == 1000


@pytest.mark.parametrize("patch,msg", [
    ({"model": {"kind": "kdv"}}, "model.kind"),
    ({"grid": {"x_min": 1, "x_max": 0, "n_cells": 10, "boundary": "periodic"}}, "grid"),
    ({"schedule": {"dt": -1, "n_steps": 5}}, "schedule.dt"),
    ({"parameter_domain": [[0.5, 0.4], [1, 1], [1, 1]]}, "parameter_domain"),
    ({"parameter_domain": [[0.4, 0.5]]}, "dimensions"),
    ({"offline": {"mode": "other"}}, "offline.mode"),
    ({"bogus": 1}, "unknown keys"),
    ({"uq": {"M": 4, "seed": -1}}, "uq.seed"),
])
def test_config_errors_name_the_field(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        RunConfig.from_dict({**SMALL, **patch})


def test_missing_file_or_preset():
    with pytest.raises(ConfigError):
        RunConfig.load("no_such_preset")


def test_offline_hash_scope():
    a = RunConfig.from_dict(SMALL)
    b = RunConfig.from_dict({**SMALL, "uq": {"M": 50, "seed": 9}})
    c = RunConfig.from_dict({**SMALL, "schedule": {"dt": 0.001, "n_steps": 31}})
    assert a.offline_hash() == b.offline_hash() != c.offline_hash()


def test_roundtrip_dict():
    a = RunConfig.from_dict(SMALL)
    assert RunConfig.from_dict(json.loads(json.dumps(a.to_dict()))).offline_hash() == a.offline_hash()


@pytest.fixture(scope="module")
def small_state():
    from hyprom.cli import _problem
    cfg = RunConfig.from_dict(SMALL)
    st = run_offline(_problem(cfg, 1), OfflineSettings(greedy_tol=1e-3, eim_tol=1e-5), cfg.build_domain())
    return cfg, st


def test_archive_roundtrip(tmp_path, small_state):
    cfg, st = small_state
    d = save_archive(tmp_path / "a", st, cfg.offline_hash(), cfg.to_dict())
    st2, manifest = load_archive(d, cfg.offline_hash())
    assert manifest["N"] == list(st.n_rb) and manifest["N_EIM"] == list(st.n_eim)
    assert np.array_equal(st2.bases[0].vectors, st.bases[0].vectors)
    assert np.array_equal(st2.spaces[0].magic, st.spaces[0].magic)
    assert archive_digest(d) == archive_digest(d)
    with pytest.raises(ArchiveError, match="refusing"):
        save_archive(d, st, cfg.offline_hash(), cfg.to_dict())
    with pytest.raises(ArchiveError, match="hash"):
        load_archive(d, "0" * 64)


def test_archive_detects_tampering(tmp_path, small_state):
    cfg, st = small_state
    d = save_archive(tmp_path / "a", st, cfg.offline_hash(), cfg.to_dict())
    f = d / "rb_0.bin"
    arr = np.fromfile(f, dtype="<f8")
    arr[0] += 0.5
    arr.tofile(f)
    with pytest.raises(ArchiveError):
        load_archive(d)

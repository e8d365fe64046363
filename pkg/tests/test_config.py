# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

from datetime import date

import pytest

from cacp.backtest import DEFAULT_TUNING_GRIDS, BacktestConfig, check_tuning_grids
from cacp.io import DatasetSchema
from cacp.io.config import load_config


def test_defaults() -> None:
    config = BacktestConfig()
    assert config.delta_rec == 1
    assert config.validation_window == 7
    assert config.alphas == (0.1, 0.2, 0.3, 0.4)
    assert config.lag_offsets == (24, 48)
    assert config.tuning_grids == DEFAULT_TUNING_GRIDS
    assert config.workers is None
    assert config.options.clip


def test_values_are_validated_on_assignment() -> None:
    config = BacktestConfig()
    with pytest.raises(ValueError):
        config.validation_window = 0
    with pytest.raises(ValueError):
        config.alpha_grid = [0.1, 1.0]
    with pytest.raises(ValueError):
        config.methods = ["cqr", "hopcpt"]
    with pytest.raises(ValueError):
        config.lag_offsets = [12]
    with pytest.raises(ValueError):
        config.seed = None
    config.delta_rec = None
    assert config.delta_rec is None


def test_unknown_key() -> None:
    with pytest.raises(KeyError, match="unknown config key"):
        BacktestConfig(recalibration=3)


def test_overrides_are_parsed_as_yaml() -> None:
    config = BacktestConfig().apply_overrides(
        ["seed=3", "alpha_grid=[0.1, 0.2]", "initial_calibration_end=2023-05-01", "clip=false"]
    )
    assert config.seed == 3
    assert config.alpha_grid == (0.1, 0.2)
    assert config.initial_calibration_end == date(2023, 5, 1)
    assert config.clip is False
    with pytest.raises(ValueError, match="key=value"):
        config.apply_overrides(["seed"])


def test_nested_override() -> None:
    config = BacktestConfig().apply_overrides(["tuning_grids.cacp_knn.K=[5, 10]"])
    assert config.tuning_grids["cacp_knn"]["K"] == [5, 10]
    assert config.tuning_grids["nexcp"] == DEFAULT_TUNING_GRIDS["nexcp"]
    with pytest.raises(KeyError, match="no nested keys"):
        config.apply_overrides(["seed.value=1"])


def test_tuning_grid_checks() -> None:
    merged = check_tuning_grids({"cacp_kmeans": {"K": 4}})
    assert merged["cacp_kmeans"]["K"] == [4]
    assert merged["cacp_kernel"]["kernel"] == ["rbf", "laplacian"]
    with pytest.raises(ValueError, match="no method"):
        check_tuning_grids({"raw": {}})
    with pytest.raises(ValueError, match="kernel must be one of"):
        check_tuning_grids({"cacp_kernel": {"kernel": ["cosine"]}})
    with pytest.raises(ValueError, match="positive integers"):
        check_tuning_grids({"cacp_knn": {"K": [0]}})
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        check_tuning_grids({"nexcp": {"rho_decay": [1.5]}})
    with pytest.raises(ValueError, match="empty tuning grid"):
        check_tuning_grids({"adaptive_cp": {"gamma_lr": []}})
    with pytest.raises(ValueError, match="unknown"):
        check_tuning_grids({"cacp_knn": {"neighbours": [3]}})


def test_method_order_drops_repeats() -> None:
    config = BacktestConfig(methods=["cqr", "raw", "cqr"])
    assert config.method_order() == ("cqr", "raw")


def test_as_dict_round_trip() -> None:
    config = BacktestConfig(seed=5, initial_calibration_end="2023-05-01", delta_rec=None)
    again = BacktestConfig.from_mapping(config.as_dict())
    assert again == config
    assert config.as_dict()["initial_calibration_end"] == "2023-05-01"


def test_load_config(tmp_path) -> None:
    path = tmp_path / "run.yaml"
    path.write_text(
        "backtest:\n"
        "  seed: 4\n"
        "  methods: [raw, cqr]\n"
        "synth:\n"
        "  n_days: 30\n",
        encoding="utf-8",
    )
    sections = load_config(path)
    assert sections["schema"] == {}
    assert BacktestConfig.from_mapping(sections["backtest"]).methods == ("raw", "cqr")
    assert DatasetSchema.from_mapping(sections["schema"]).timestamp_column == "timestamp"


def test_load_config_rejects_unknown_section(tmp_path) -> None:
    path = tmp_path / "run.yaml"
    path.write_text("plots:\n  dpi: 300\n", encoding="utf-8")
    with pytest.raises(KeyError, match="unknown config section"):
        load_config(path)
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="mapping"):
        load_config(path)

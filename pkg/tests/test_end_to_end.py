import pandas as pd
import pytest

from usseg.crud.volume_store import read_volume
from usseg.main import main
from usseg.models.report import EvalReport
from usseg.models.volume import VolumeKind
from usseg.schemas.evaluation import EvalConfig

PIPELINE_CONFIG = """
seed = 7

[synth]
n_frames = 48
n_time = 200
n_beams = 16
thickness_mm = 2.0

[[synth.defects]]
id = 1
shape = "square"
width_mm = 4.0
center_frame = 14
center_beam = 8
depth_mm = 1.0
reflectivity = 0.8

[[synth.defects]]
id = 2
shape = "circle"
width_mm = 4.0
center_frame = 34
center_beam = 8
depth_mm = 1.2
reflectivity = 0.8

[net]
window = 8
heads = [3, 5]
channels = [4]
fc = [16]

[sampler]
window = 8
stride = 4
time_downsample = 2

[train]
batch_size = 512
learning_rate = 1e-3
max_epochs = 5
patience = 2
val_stride = 8
test_stride = 8

[infer]
confidence = 0.9999
time_downsample = 2

[pipeline]
train_thicknesses_mm = [1.8, 2.0]
val_thickness_mm = 1.9
test_thickness_mm = 2.0
"""


@pytest.mark.slow
def test_pipeline_matches_individual_steps(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(PIPELINE_CONFIG)
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(config), "--out", str(out)]) == 0

    for name in ["clean_train_0.usv", "clean_train_1.usv", "clean_val.usv", "clean_test.usv", "sample.usv",
                 "sample_truth.csv", "model.ussm", "model_history.csv", "sample_mask.usv", "report.json",
                 "report_detection.csv", "report_sizing.csv", "calibration.usv", "calibration_truth.csv",
                 "sweep_detection.csv", "sweep_sizing.csv", "sweep_calibration.csv"]:
        assert (out / name).exists(), name

    by_hand = tmp_path / "by_hand.usv"
    assert main(["synth", "--config", str(config), "--out", str(by_hand), "--seed", "107",
                 "--clean", "--thickness", "1.8"]) == 0
    assert by_hand.read_bytes() == (out / "clean_train_0.usv").read_bytes()

    mask = tmp_path / "mask.usv"
    assert main(["infer", "--config", str(config), "--model", str(out / "model.ussm"),
                 "--in", str(out / "sample.usv"), "--out", str(mask)]) == 0
    assert mask.read_bytes() == (out / "sample_mask.usv").read_bytes()
    assert read_volume(mask).kind == VolumeKind.MASK

    report = EvalReport.model_validate_json((out / "report.json").read_text())
    final = report.stage("final")
    assert (final.tp, final.fn) == (2, 0)
    assert len(report.defects) == 2
    assert all(d.detected and d.measured_width_mm > 0 for d in report.defects)

    sweep = pd.read_csv(out / "sweep_detection.csv")
    assert set(sweep["sample"]) == {"sample", "calibration"}
    assert sorted(sweep["confidence"].unique()) == pytest.approx(sorted(EvalConfig().confidences))

"""
Detection, sizing and calibration on a seeded synthetic corpus.

One `pipeline` run is shared by the module. It covers clean plates, a
twelve-defect sample on a plate stepped across the array, a tiny trained net,
inference, a confidence sweep, and size calibration on a second sample.
"""
import numpy as np
import pandas as pd
import pytest

from usseg.commands.infer import load_for_inference
from usseg.crud import tables
from usseg.main import main
from usseg.schemas.inference import InferConfig
from usseg.schemas.run import load_run_config
from usseg.services import inference_service

DEFAULT_CONFIDENCE = 0.9999999

# Defect grid: one row per frame position, one column per thickness step
WIDTHS_MM = [3.0, 6.0, 9.0]
ROW_FRAMES = [18, 46, 74, 102]
ROW_DEPTHS_MM = [0.9, 1.5, 1.2, 1.8]
COLUMN_BEAMS = [9, 28, 46]

BASE_CONFIG = """
seed = 21

[synth]
n_frames = 120
n_time = 400
n_beams = 56
thickness_mm = 3.6

[[synth.beam_steps]]
beam_start = 0
beam_stop = 19
thickness_mm = 2.4

[[synth.beam_steps]]
beam_start = 19
beam_stop = 37
thickness_mm = 3.0
"""

TRAINING_CONFIG = """
[net]
window = 8
heads = [3, 5]
channels = [4]
fc = [16]

[sampler]
window = 8
stride = 4
time_downsample = 4

[train]
batch_size = 1024
learning_rate = 3e-3
max_epochs = 8
patience = 2
val_stride = 8
test_stride = 8

[infer]
time_downsample = 4

[pipeline]
train_thicknesses_mm = [2.4, 3.0, 3.6]
val_thickness_mm = 3.0
test_thickness_mm = 3.6
"""


def _defect_tables() -> str:
    blocks = []
    for r, (frame, depth) in enumerate(zip(ROW_FRAMES, ROW_DEPTHS_MM)):
        for c, beam in enumerate(COLUMN_BEAMS):
            i = len(COLUMN_BEAMS) * r + c
            shape = "circle" if i % 2 == 0 else "square"
            blocks.append(
                f"[[synth.defects]]\nid = {i + 1}\nshape = \"{shape}\"\nwidth_mm = {WIDTHS_MM[(r + c) % 3]}\n"
                f"center_frame = {frame}\ncenter_beam = {beam}\ndepth_mm = {depth}\nreflectivity = 0.8\n"
            )
    return "\n".join(blocks)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    config = root / "run.toml"
    config.write_text(BASE_CONFIG + "\n" + _defect_tables() + TRAINING_CONFIG)
    out = root / "run"
    assert main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
    return config, out


def _sample_rows(out, name):
    frame = pd.read_csv(out / name)
    return frame[frame["sample"] == "sample"].sort_values("confidence")


@pytest.mark.slow
def test_sample_holds_mixed_defects_on_stepped_plate(corpus):
    config, out = corpus
    defects = tables.read_truth(str(out / "sample_truth.csv"))
    assert len(defects) == 12
    assert {d.shape.value for d in defects} == {"circle", "square"}
    assert {d.width_mm for d in defects} == set(WIDTHS_MM)
    assert len(set(load_run_config(str(config)).synth.thickness_map().ravel())) == 3


@pytest.mark.slow
def test_trained_model_false_call_rate_on_clean_plate(corpus):
    config, out = corpus
    infer_cfg = load_run_config(str(config)).infer
    cfg = InferConfig.model_validate({**infer_cfg.model_dump(), "confidence": 0.99})
    model, vol = load_for_inference(str(out / "model.ussm"), str(out / "clean_test.usv"), cfg)
    mask = inference_service.forward_sweep(model, vol, cfg)
    assert mask.data.size >= 100_000
    assert mask.data.mean() <= 0.02


@pytest.mark.slow
def test_default_confidence_detects_every_defect_without_false_calls(corpus):
    _, out = corpus
    report = tables.read_report(str(out / "report.json"))
    assert report.confidence == pytest.approx(DEFAULT_CONFIDENCE)
    final = report.stage("final")
    assert (final.tp, final.fp, final.fn) == (12, 0, 0)
    assert final.accuracy == pytest.approx(100.0)


@pytest.mark.slow
def test_sizing_error_does_not_grow_with_confidence(corpus):
    _, out = corpus
    sizing = _sample_rows(out, "sweep_sizing.csv")
    mae = sizing[sizing["width_mm"] == "mean"]["mae_mm"].to_numpy()
    assert len(mae) == 6
    # 0.1 mm covers one-pixel ties between neighbouring levels
    assert np.all(np.diff(mae) <= 0.1)
    assert mae[-1] < mae[0]


@pytest.mark.slow
def test_combined_sweep_has_no_more_false_positives_than_either_sweep(corpus):
    _, out = corpus
    detection = _sample_rows(out, "sweep_detection.csv")
    # at 0.99 a single sweep flags most columns and its C-scan is one blob
    tight = detection[detection["confidence"] >= 0.999 - 1e-9]
    assert tight["confidence"].nunique() == 5
    for _, rows in tight.groupby("confidence"):
        fp = rows.set_index("stage")["fp"]
        assert fp["combined"] <= min(fp["forward"], fp["backward"])


@pytest.mark.slow
def test_area_opening_keeps_every_true_detection(corpus):
    _, out = corpus
    detection = _sample_rows(out, "sweep_detection.csv")
    for _, rows in detection.groupby("confidence"):
        tp = rows.set_index("stage")["tp"]
        assert tp["final"] == tp["combined"]


@pytest.mark.slow
def test_defects_are_oversized(corpus):
    _, out = corpus
    detected = [d for d in tables.read_report(str(out / "report.json")).defects if d.detected]
    assert len(detected) == 12
    oversized = [d.measured_width_mm >= d.true_width_mm for d in detected]
    assert np.mean(oversized) >= 0.9


@pytest.mark.slow
def test_calibration_on_second_sample_cuts_sizing_error(corpus):
    _, out = corpus
    calibration = pd.read_csv(out / "sweep_calibration.csv")
    row = calibration[np.isclose(calibration["confidence"], DEFAULT_CONFIDENCE)].iloc[0]
    assert row["offset_mm"] > 0
    assert row["n"] == 12
    assert row["corrected_mae_mm"] <= 0.7 * row["uncorrected_mae_mm"]


@pytest.mark.slow
def test_coarse_stride_trains_worse_than_fine_stride(corpus, tmp_path):
    config, out = corpus
    study = tmp_path / "stride.csv"
    train = [str(out / f"clean_train_{i}.usv") for i in range(3)]
    assert main(["stride-study", "--config", str(config), "--train", *train, "--val", str(out / "clean_val.usv"),
                 "--test", str(out / "clean_test.usv"), "--strides", "8,256", "--repeats", "2",
                 "--epochs", "3", "--out", str(study)]) == 0
    ll = pd.read_csv(study).set_index("stride")["mean_test_ll"]
    assert ll[256] <= ll[8]

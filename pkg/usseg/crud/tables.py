import json
import logging
from pathlib import Path
from typing import List

import pandas as pd

from usseg.models.defect import TRUTH_COLUMNS, DefectRecord
from usseg.models.report import EvalReport

logger = logging.getLogger(__name__)


def write_frame(df: pd.DataFrame, path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)
    logger.info("Wrote %s (%d rows)", path, len(df))
    return path


def write_truth(defects: List[DefectRecord], path: str) -> Path:
    rows = [d.model_dump(mode="json") for d in defects]
    return write_frame(pd.DataFrame(rows, columns=TRUTH_COLUMNS), path)


def read_truth(path: str) -> List[DefectRecord]:
    df = pd.read_csv(path)
    return [DefectRecord.model_validate(row) for row in df.to_dict(orient="records")]


def write_report(report: EvalReport, path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2))
    logger.info("Wrote report %s", path)
    return path


def read_report(path: str) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text())


def report_schema() -> str:
    return json.dumps(EvalReport.model_json_schema(), indent=2)

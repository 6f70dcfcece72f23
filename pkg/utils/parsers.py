"""Reading and writing the toolkit's CSV and JSON files."""
import csv
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from models.errors import ParseError, UsageError
from models.schemas import (
    BoundingBox,
    Detection,
    DetectionFileRow,
    EmbeddingFileRow,
    EmbeddingPair,
    LossReport,
    MetricReport,
    ProbeRow,
    Scene,
    SweepRow,
    ToyEncoderParams,
    TrackingRecord,
    TrackingResult,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)

DETECTION_COLUMNS = ("frame", "camera", "id", "left", "top", "width", "height", "confidence")
RESULT_COLUMNS = ("frame", "camera", "globalId", "left", "top", "width", "height")
REPORT_COLUMNS = ("IDP", "IDR", "IDF1", "MOTA", "HOTA", "AIDP", "AIDR", "AIDF1", "MHAA", "A", "F")
LOSS_COLUMNS = ("epoch", "lSep", "lDistill", "lRecon", "total")

EmbeddingKey = Tuple[int, int, int]


def format_percent(value: Optional[float]) -> str:
    """Render a rate as a percentage with one decimal, halves rounded up; None is 'n/a'."""
    if value is None:
        return "n/a"
    scaled = Decimal(repr(round(value * 100.0, 9)))
    return str(scaled.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _repr_or_na(value: Optional[float]) -> str:
    return "n/a" if value is None else repr(value)


def _rows(path: Path, header: str) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, fields) skipping blank lines and an optional header."""
    with open(path, newline="") as f:
        for line_no, fields in enumerate(csv.reader(f), start=1):
            if not fields or all(not x.strip() for x in fields):
                continue
            if line_no == 1 and fields[0].strip() == header:
                continue
            yield line_no, [x.strip() for x in fields]


def _convert(path: Path, line_no: int, fields: List[str], columns: Sequence[str], types) -> dict:
    if len(fields) != len(columns):
        raise ParseError(str(path), line_no, None, f"expected {len(columns)} columns, got {len(fields)}")
    values = {}
    for name, text, cast in zip(columns, fields, types):
        try:
            values[name] = cast(text)
        except ValueError:
            raise ParseError(str(path), line_no, name, f"cannot read '{text}' as {cast.__name__}") from None
    return values


def _validated(model, path: Path, line_no: int, **values):
    try:
        return model(**values)
    except ValidationError as e:
        error = e.errors()[0]
        column = str(error["loc"][0]) if error["loc"] else None
        raise ParseError(str(path), line_no, column, error["msg"]) from None


def _read_detection_rows(path: Path, require_id: bool) -> List[DetectionFileRow]:
    rows = []
    types = (int, int, int, float, float, float, float, float)
    for line_no, fields in _rows(path, "frame"):
        values = _convert(path, line_no, fields, DETECTION_COLUMNS, types)
        row = _validated(DetectionFileRow, path, line_no, **values)
        if require_id and row.id == -1:
            raise ParseError(str(path), line_no, "id", "ground truth rows need an identity")
        rows.append(row)
    return rows


def _scene_from_rows(rows: List[DetectionFileRow], num_cameras: Optional[int]) -> Scene:
    if not rows:
        return Scene(num_cameras=num_cameras or 0)
    cameras = num_cameras if num_cameras is not None else max(r.camera for r in rows) + 1
    start = min(r.frame for r in rows)
    end = max(r.frame for r in rows)
    frames: List[List[List[Detection]]] = [[[] for _ in range(cameras)] for _ in range(end - start + 1)]
    for r in rows:
        if r.camera >= cameras:
            raise UsageError(f"camera {r.camera} outside the declared {cameras} cameras")
        frames[r.frame - start][r.camera].append(Detection(
            frame=r.frame,
            camera=r.camera,
            box=BoundingBox(left=r.left, top=r.top, width=r.width, height=r.height),
            confidence=r.confidence,
            identity=None if r.id == -1 else r.id,
        ))
    return Scene(num_cameras=cameras, start_frame=start, frames=frames)


def parse_detections(path, num_cameras: Optional[int] = None) -> Scene:
    """
    Read a detections file into a scene.

    Args:
        path: CSV with columns frame,camera,id,left,top,width,height,confidence
        num_cameras: Camera count when some cameras have no rows

    Returns:
        Scene with detections grouped by (frame, camera) in file order
    """
    path = Path(path)
    rows = _read_detection_rows(path, require_id=False)
    logger.info(f"Read {len(rows)} detections from {path}")
    return _scene_from_rows(rows, num_cameras)


def parse_ground_truth(path) -> TrackingResult:
    path = Path(path)
    rows = _read_detection_rows(path, require_id=True)
    return TrackingResult(records=[
        TrackingRecord(
            frame=r.frame,
            camera=r.camera,
            global_id=r.id,
            box=BoundingBox(left=r.left, top=r.top, width=r.width, height=r.height),
        )
        for r in rows
    ])


def parse_results(path) -> TrackingResult:
    path = Path(path)
    records = []
    types = (int, int, int, float, float, float, float)
    for line_no, fields in _rows(path, "frame"):
        values = _convert(path, line_no, fields, RESULT_COLUMNS, types)
        box = _validated(
            BoundingBox, path, line_no,
            left=values["left"], top=values["top"], width=values["width"], height=values["height"],
        )
        records.append(_validated(
            TrackingRecord, path, line_no,
            frame=values["frame"], camera=values["camera"], global_id=values["globalId"], box=box,
        ))
    return _validated(TrackingResult, path, 0, records=records)


def _writer(f):
    return csv.writer(f, lineterminator="\n")


def write_detections(scene: Scene, path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(DETECTION_COLUMNS)
        for frame, camera, _, det in scene.iter_detections():
            out.writerow([
                frame, camera, det.identity if det.identity is not None else -1,
                repr(det.box.left), repr(det.box.top), repr(det.box.width), repr(det.box.height),
                repr(det.confidence),
            ])


def write_ground_truth(truth: TrackingResult, path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(DETECTION_COLUMNS)
        for r in truth.records:
            out.writerow([
                r.frame, r.camera, r.global_id,
                repr(r.box.left), repr(r.box.top), repr(r.box.width), repr(r.box.height), "1.0",
            ])


def write_results(result: TrackingResult, path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(RESULT_COLUMNS)
        for r in result.records:
            out.writerow([
                r.frame, r.camera, r.global_id,
                repr(r.box.left), repr(r.box.top), repr(r.box.width), repr(r.box.height),
            ])
    logger.info(f"Wrote {len(result.records)} tracking records to {path}")


def write_embeddings(scene: Scene, path) -> None:
    """Embeddings as 'dim=E' then frame,camera,detectionIndex,v1..vE with 6 significant digits."""
    rows = [
        (frame, camera, index, det.embedding.as_vector())
        for frame, camera, index, det in scene.iter_detections()
        if det.embedding is not None
    ]
    dims = {vector.size for *_, vector in rows}
    if len(dims) > 1:
        raise UsageError(f"embeddings of several widths {sorted(dims)} cannot share one file")
    with open(path, "w", newline="") as f:
        f.write(f"dim={dims.pop() if dims else 0}\n")
        out = _writer(f)
        for frame, camera, index, vector in rows:
            out.writerow([frame, camera, index] + [f"{v:.6g}" for v in vector])


def parse_embeddings(path) -> Dict[EmbeddingKey, np.ndarray]:
    path = Path(path)
    with open(path) as f:
        header = f.readline().strip()
    if not header.startswith("dim="):
        raise ParseError(str(path), 1, None, "missing 'dim=E' header")
    try:
        dim = int(header[4:])
    except ValueError:
        raise ParseError(str(path), 1, None, f"bad dimension '{header[4:]}'") from None

    embeddings: Dict[EmbeddingKey, np.ndarray] = {}
    columns = ("frame", "camera", "detectionIndex") + tuple(f"v{k + 1}" for k in range(dim))
    types = (int, int, int) + (float,) * dim
    for line_no, fields in _rows(path, "dim="):
        if line_no == 1:
            continue
        values = _convert(path, line_no, fields, columns, types)
        row = _validated(
            EmbeddingFileRow, path, line_no,
            frame=values["frame"], camera=values["camera"], detection_index=values["detectionIndex"],
            values=[values[c] for c in columns[3:]],
        )
        embeddings[(row.frame, row.camera, row.detection_index)] = row.values
    return embeddings


def attach_embeddings(scene: Scene, embeddings: Dict[EmbeddingKey, np.ndarray]) -> Scene:
    """Give every detection its embedding row; each half is one side of the pair."""
    frames = []
    for offset, per_camera in enumerate(scene.frames):
        frame = scene.start_frame + offset
        new_frame = []
        for camera, detections in enumerate(per_camera):
            updated = []
            for index, det in enumerate(detections):
                vector = embeddings.get((frame, camera, index))
                if vector is None:
                    raise UsageError(f"no embedding for frame {frame}, camera {camera}, detection {index}")
                if vector.size % 2:
                    raise UsageError(f"embedding width {vector.size} is odd")
                updated.append(det.model_copy(update={"embedding": EmbeddingPair.from_vector(vector)}))
            new_frame.append(updated)
        frames.append(new_frame)
    return Scene(num_cameras=scene.num_cameras, start_frame=scene.start_frame, frames=frames)


def _report_values(report: MetricReport) -> List[Optional[float]]:
    return [
        report.idp, report.idr, report.idf1, report.mota, report.hota,
        report.aidp, report.aidr, report.aidf1, report.mhaa, report.overall_a, report.overall_f,
    ]


def write_report_csv(reports: Sequence[MetricReport], path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(("name",) + REPORT_COLUMNS)
        for report in reports:
            out.writerow([report.name] + [format_percent(v) for v in _report_values(report)])


def write_report_json(reports: Sequence[MetricReport], path) -> None:
    payload = [report.model_dump(mode="json") for report in reports]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_loss_curve(curve: Sequence[LossReport], path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(LOSS_COLUMNS)
        for epoch, report in enumerate(curve, start=1):
            out.writerow([epoch, repr(report.l_sep), repr(report.l_distill), repr(report.l_recon), repr(report.total)])


def write_params(params: ToyEncoderParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_json_dict(), sort_keys=True) + "\n")


def read_params(path) -> ToyEncoderParams:
    try:
        data = json.loads(Path(path).read_text())
        return ToyEncoderParams.from_json_dict(data)
    except (json.JSONDecodeError, KeyError, ValidationError) as e:
        raise ParseError(str(path), 1, None, f"invalid parameter file: {e}") from None


def write_probe_table(rows: Sequence[ProbeRow], path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(("embedding", "cameraAccuracy", "intraIDF1", "crossAIDF1"))
        for row in rows:
            out.writerow([
                row.embedding, format_percent(row.camera_accuracy),
                format_percent(row.intra_idf1), format_percent(row.cross_aidf1),
            ])


def write_sweep(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as f:
        out = _writer(f)
        out.writerow(("features", "rho", "finalTotal") + REPORT_COLUMNS)
        for row in rows:
            out.writerow(
                [row.features, _repr_or_na(row.rho), _repr_or_na(row.final_total)]
                + [format_percent(v) for v in _report_values(row.report)]
            )

"""Pluggable inference seam for the three model roles.

Roles and their pipeline contracts:
  person  detector-input image -> person detections in input coordinates
  face    frame at the backend's input size -> face detections
  mask    classifier-input face crop -> mask probability in [0, 1]

Every role is served either by a synthetic backend replaying a scenario
file (deterministic, the test vehicle) or by a serialized-graph backend.

Graph files are ONNX with a JSON sidecar manifest next to them
({"input": name, "outputs": [names], "input_size": [w, h], "role": ...},
default sidecar path: the graph path with a .json extension).  Person-role
graphs emit rows (x_center, y_center, w, h, objectness, class scores...)
in input pixels; the decoder keeps rows whose best class is the person
class and scores them objectness * person_score.  Face-role graphs emit
rows (x, y, w, h, confidence).  Mask-role graphs emit one probability.
NMS is never applied here; it belongs to the geometry module.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import onnxlite
from .geometry import FACE, PERSON, BoundingBox, Detection
from .onnxlite import UnsupportedOperator


class ScenarioError(ValueError):
    """Scenario file failed to parse or violated a value constraint."""


class BackendContractError(RuntimeError):
    """A backend returned output violating its role invariants."""


class GraphError(RuntimeError):
    """Base class for graph-backend loading failures."""


class GraphFileMissing(GraphError):
    pass


class GraphShapeMismatch(GraphError):
    pass


ROLES = ("person", "face", "mask")


# ---------------------------------------------------------------------------
# synthetic backend

@dataclass(frozen=True)
class ScriptedFrame:
    persons: Tuple[Detection, ...] = ()
    faces: Tuple[Detection, ...] = ()
    mask_probs: Tuple[float, ...] = ()


_EMPTY_FRAME = ScriptedFrame()


@dataclass(frozen=True)
class SyntheticScript:
    """Per-frame scripted detections in source-frame pixel coordinates."""

    frames: Mapping[int, ScriptedFrame] = field(default_factory=dict)

    def frame(self, index: int) -> ScriptedFrame:
        return self.frames.get(index, _EMPTY_FRAME)

    @property
    def max_index(self) -> int:
        return max(self.frames, default=-1)


def _require(cond: bool, context: str, message: str) -> None:
    if not cond:
        raise ScenarioError(f"{context}: {message}")


def _parse_box(value, context: str) -> BoundingBox:
    _require(isinstance(value, (list, tuple)) and len(value) == 4, context,
             f"box must be [x, y, w, h], got {value!r}")
    try:
        x, y, w, h = (float(v) for v in value)
        return BoundingBox(x, y, w, h)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{context}: {e}") from None


def _parse_ratio(value, context: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), context,
             f"expected a number, got {value!r}")
    _require(0.0 <= value <= 1.0, context, f"expected a value in [0, 1], got {value}")
    return float(value)


def load_scenario(path) -> SyntheticScript:
    """Read and validate a scenario document."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    _require(isinstance(doc, dict) and isinstance(doc.get("frames"), dict),
             str(path), "expected a top-level object with a 'frames' mapping")
    frames: Dict[int, ScriptedFrame] = {}
    for key, entry in doc["frames"].items():
        ctx = f"frames.{key}"
        try:
            index = int(key)
        except ValueError:
            raise ScenarioError(f"{ctx}: frame key must be an integer") from None
        _require(index >= 0, ctx, "frame index must be non-negative")
        _require(isinstance(entry, dict), ctx, f"expected an object, got {entry!r}")
        persons: List[Detection] = []
        for i, item in enumerate(entry.get("persons", [])):
            ictx = f"{ctx}.persons[{i}]"
            _require(isinstance(item, dict), ictx, "expected an object")
            box = _parse_box(item.get("box"), f"{ictx}.box")
            conf = _parse_ratio(item.get("conf"), f"{ictx}.conf")
            persons.append(Detection(box, conf, PERSON))
        faces: List[Detection] = []
        probs: List[float] = []
        for i, item in enumerate(entry.get("faces", [])):
            ictx = f"{ctx}.faces[{i}]"
            _require(isinstance(item, dict), ictx, "expected an object")
            box = _parse_box(item.get("box"), f"{ictx}.box")
            conf = _parse_ratio(item.get("conf"), f"{ictx}.conf")
            probs.append(_parse_ratio(item.get("mask_prob"), f"{ictx}.mask_prob"))
            faces.append(Detection(box, conf, FACE))
        frames[index] = ScriptedFrame(tuple(persons), tuple(faces), tuple(probs))
    return SyntheticScript(frames)


def synthetic_detect(script: SyntheticScript, frame_index: int, role: str,
                     scale: Tuple[float, float] = (1.0, 1.0)):
    """Replay the scripted values for one frame and role.

    Detections are rescaled from source-frame coordinates into the caller's
    space by the (sx, sy) mapping; the mask role returns the probability
    list untouched.
    """
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    frame = script.frame(frame_index)
    if role == "mask":
        return list(frame.mask_probs)
    dets = frame.persons if role == "person" else frame.faces
    sx, sy = scale
    if (sx, sy) == (1.0, 1.0):
        return list(dets)
    return [Detection(d.box.scaled(sx, sy), d.confidence, d.category) for d in dets]


class SyntheticPersonDetector:
    input_size: Optional[Tuple[int, int]] = None  # replays at whatever size the caller maps to

    def __init__(self, script: SyntheticScript):
        self.script = script

    def detect(self, image: np.ndarray, frame_index: int = 0,
               scale: Tuple[float, float] = (1.0, 1.0)) -> List[Detection]:
        return synthetic_detect(self.script, frame_index, "person", scale)


class SyntheticFaceDetector:
    input_size: Optional[Tuple[int, int]] = None

    def __init__(self, script: SyntheticScript):
        self.script = script

    def detect(self, image: np.ndarray, frame_index: int = 0,
               scale: Tuple[float, float] = (1.0, 1.0)) -> List[Detection]:
        return synthetic_detect(self.script, frame_index, "face", scale)


class SyntheticMaskClassifier:
    def __init__(self, script: SyntheticScript):
        self.script = script

    def classify(self, crop: np.ndarray, frame_index: int = 0, face_index: int = 0) -> float:
        probs = synthetic_detect(self.script, frame_index, "mask")
        return probs[face_index] if face_index < len(probs) else 0.0


# ---------------------------------------------------------------------------
# graph backend

def _to_input_tensor(image: np.ndarray) -> np.ndarray:
    """uint8 (h, w, c) image -> float32 NCHW tensor scaled to [0, 1]."""
    if image.ndim != 3:
        raise ValueError(f"expected an (h, w, c) image, got shape {image.shape}")
    if image.shape[2] == 1:
        image = np.repeat(image, 3, axis=2)
    elif image.shape[2] == 4:
        image = image[:, :, :3]
    x = image.astype(np.float32) / np.float32(255.0)
    return np.transpose(x, (2, 0, 1))[None, :, :, :]


def _load_manifest(graph_path: Path, manifest_path) -> dict:
    mpath = Path(manifest_path) if manifest_path else graph_path.with_suffix(".json")
    if not mpath.is_file():
        raise GraphFileMissing(f"sidecar manifest not found: {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise GraphError(f"{mpath}: invalid JSON: {e.msg}") from e
    for key in ("input", "outputs", "input_size", "role"):
        if key not in manifest:
            raise GraphError(f"{mpath}: manifest missing key {key!r}")
    return manifest


class _LockedSession:
    """Session guard: sessions are single-owner, so invocation is serialized."""

    def __init__(self, session: onnxlite.GraphSession):
        self._session = session
        self._lock = threading.Lock()

    @property
    def input_name(self):
        return self._session.input_name

    @property
    def input_shape(self):
        return self._session.input_shape

    def run(self, feed: np.ndarray) -> List[np.ndarray]:
        with self._lock:
            return self._session.run(feed)


class GraphPersonDetector:
    def __init__(self, session: _LockedSession, input_size: Tuple[int, int],
                 person_class_index: int = 0):
        self._session = session
        self.input_size = input_size
        self.person_class_index = person_class_index

    def detect(self, image: np.ndarray, frame_index: int = 0,
               scale: Tuple[float, float] = (1.0, 1.0)) -> List[Detection]:
        rows = np.asarray(self._session.run(_to_input_tensor(image))[0], dtype=np.float64)
        rows = rows.reshape(-1, rows.shape[-1]) if rows.size else rows.reshape(0, 6)
        if rows.shape[0] and rows.shape[1] < 6:
            raise BackendContractError(
                f"person graph rows need >= 6 columns, got {rows.shape[1]}")
        out: List[Detection] = []
        for row in rows:
            cx, cy, w, h, obj = row[:5]
            scores = row[5:]
            if int(np.argmax(scores)) != self.person_class_index:
                continue
            conf = float(np.clip(obj, 0.0, 1.0) * np.clip(scores[self.person_class_index], 0.0, 1.0))
            out.append(Detection(BoundingBox(cx - w / 2.0, cy - h / 2.0, max(w, 0.0), max(h, 0.0)),
                                 conf, PERSON))
        return out


class GraphFaceDetector:
    def __init__(self, session: _LockedSession, input_size: Tuple[int, int]):
        self._session = session
        self.input_size = input_size

    def detect(self, image: np.ndarray, frame_index: int = 0,
               scale: Tuple[float, float] = (1.0, 1.0)) -> List[Detection]:
        rows = np.asarray(self._session.run(_to_input_tensor(image))[0], dtype=np.float64)
        rows = rows.reshape(-1, rows.shape[-1]) if rows.size else rows.reshape(0, 5)
        if rows.shape[0] and rows.shape[1] < 5:
            raise BackendContractError(f"face graph rows need >= 5 columns, got {rows.shape[1]}")
        return [
            Detection(BoundingBox(r[0], r[1], max(r[2], 0.0), max(r[3], 0.0)),
                      float(np.clip(r[4], 0.0, 1.0)), FACE)
            for r in rows
        ]


class GraphMaskClassifier:
    def __init__(self, session: _LockedSession, input_size: Tuple[int, int]):
        self._session = session
        self.input_size = input_size

    def classify(self, crop: np.ndarray, frame_index: int = 0, face_index: int = 0) -> float:
        out = np.asarray(self._session.run(_to_input_tensor(crop))[0], dtype=np.float64)
        if out.size != 1:
            raise BackendContractError(f"mask graph must emit one value, got shape {out.shape}")
        return float(np.clip(out.reshape(()), 0.0, 1.0))


def load_graph(path, role: str, input_size: Optional[int] = None, manifest_path=None):
    """Load a serialized graph plus its sidecar manifest for one role.

    input_size, when given, is the square edge the pipeline will feed; it
    must match both the manifest declaration and the graph's static input.
    Raises GraphFileMissing / GraphShapeMismatch / UnsupportedOperator.
    """
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    path = Path(path)
    if not path.is_file():
        raise GraphFileMissing(f"graph file not found: {path}")
    manifest = _load_manifest(path, manifest_path)
    if manifest["role"] != role:
        raise GraphShapeMismatch(
            f"{path}: manifest declares role {manifest['role']!r}, wanted {role!r}")
    m_w, m_h = (int(v) for v in manifest["input_size"])
    if input_size is not None and (m_w, m_h) != (input_size, input_size):
        raise GraphShapeMismatch(
            f"{path}: manifest input size {m_w}x{m_h} does not match required "
            f"{input_size}x{input_size}")
    try:
        session = onnxlite.load_session(path.read_bytes())
    except onnxlite.GraphParseError as e:
        raise GraphError(f"{path}: {e}") from e
    if session.input_name != manifest["input"]:
        raise GraphShapeMismatch(
            f"{path}: graph input {session.input_name!r} does not match manifest "
            f"{manifest['input']!r}")
    declared = session.input_shape
    if declared is not None and len(declared) == 4:
        d_h, d_w = declared[2], declared[3]
        if (d_w is not None and d_w != m_w) or (d_h is not None and d_h != m_h):
            raise GraphShapeMismatch(
                f"{path}: graph declares {d_w}x{d_h} input, manifest says {m_w}x{m_h}")
    locked = _LockedSession(session)
    if role == "person":
        return GraphPersonDetector(locked, (m_w, m_h),
                                   int(manifest.get("person_class_index", 0)))
    if role == "face":
        return GraphFaceDetector(locked, (m_w, m_h))
    return GraphMaskClassifier(locked, (m_w, m_h))


# ---------------------------------------------------------------------------
# validation wrapper and bundles

class ValidatedDetector:
    """Enforces role invariants on every detector invocation."""

    def __init__(self, inner, category: str):
        self._inner = inner
        self._category = category

    @property
    def input_size(self):
        return self._inner.input_size

    def detect(self, image, frame_index=0, scale=(1.0, 1.0)) -> List[Detection]:
        dets = self._inner.detect(image, frame_index, scale)
        for d in dets:
            if not isinstance(d, Detection):
                raise BackendContractError(f"backend returned {type(d).__name__}, not Detection")
            if d.category != self._category:
                raise BackendContractError(
                    f"backend returned category {d.category!r}, expected {self._category!r}")
            if not 0.0 <= d.confidence <= 1.0:
                raise BackendContractError(f"confidence {d.confidence} outside [0, 1]")
        return dets


class ValidatedClassifier:
    def __init__(self, inner):
        self._inner = inner

    def classify(self, crop, frame_index=0, face_index=0) -> float:
        p = self._inner.classify(crop, frame_index, face_index)
        if not isinstance(p, (int, float)) or not 0.0 <= float(p) <= 1.0:
            raise BackendContractError(f"mask probability {p!r} outside [0, 1]")
        return float(p)


@dataclass
class Backends:
    person: ValidatedDetector
    face: ValidatedDetector
    mask: ValidatedClassifier


def synthetic_backends(script: SyntheticScript) -> Backends:
    return Backends(
        person=ValidatedDetector(SyntheticPersonDetector(script), PERSON),
        face=ValidatedDetector(SyntheticFaceDetector(script), FACE),
        mask=ValidatedClassifier(SyntheticMaskClassifier(script)),
    )


def graph_backends(models_dir, detector_input: int = 416,
                   classifier_input: int = 128) -> Backends:
    """Load person.onnx / face.onnx / mask.onnx (+ sidecars) from a directory."""
    models_dir = Path(models_dir)
    person = load_graph(models_dir / "person.onnx", "person", input_size=detector_input)
    face = load_graph(models_dir / "face.onnx", "face")
    mask = load_graph(models_dir / "mask.onnx", "mask", input_size=classifier_input)
    return Backends(
        person=ValidatedDetector(person, PERSON),
        face=ValidatedDetector(face, FACE),
        mask=ValidatedClassifier(mask),
    )

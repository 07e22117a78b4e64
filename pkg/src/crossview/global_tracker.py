"""Cross-camera identity handover.

Projects the overhead view's track boxes into the oblique view, scores
ceiling x angled track pairs by intersection area, matches them greedily
(pop the matrix maximum, zero the matched column, keep the pair unless the
ceiling track already matched) and maintains a registry binding local track
IDs from both cameras to persistent global identities.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Homography, PointAtInfinity
from .polygons import BoundingBox, project_box
from .local_tracker import OutOfOrderFrame  # noqa: F401  (re-export: shared stream contract)

CEILING = "ceiling"
ANGLED = "angled"


@dataclass(frozen=True)
class LocalTrackSnapshot:
    camera: str
    frame: int
    local_id: int
    box: BoundingBox


@dataclass(frozen=True)
class StreamAlignment:
    """Constant per-run frame offset: angled frame = ceiling frame + offset."""

    frame_offset: int = 0


@dataclass(frozen=True)
class GlobalIdentity:
    """One persistent identity and its current local-track bindings."""

    global_id: int
    bindings: dict  # camera -> local_id (latest binding per camera)
    last_seen: dict  # camera -> frame


@dataclass
class GlobalConfig:
    min_area_px2: float = 0.0  # 0 keeps every positive overlap, the literal greedy rule
    solo_grace: int = 15
    expiry: int = 150
    symmetric: bool = False


def _id_box(item):
    if isinstance(item, LocalTrackSnapshot):
        return item.local_id, item.box
    return item[0], item[1]


def greedy_match(matrix, min_area_px2: float = 0.0, symmetric: bool = False, pops=None):
    """Greedy maximum-overlap matching over a ceiling x angled score matrix.

    Entries below min_area_px2 are zeroed. While a non-zero entry exists:
    take the largest (ties: smallest row, then column), zero its column, and
    record the pair unless the row is already matched. The matched row is
    additionally zeroed when symmetric=True. Returns {row: col}; pops, when
    given, collects every (row, col, value, recorded) step.
    """
    work = np.array(matrix, dtype=np.float64)
    if work.ndim != 2:
        raise ValueError("matrix must be 2-D")
    matches: dict[int, int] = {}
    if work.size == 0:
        return matches
    if min_area_px2 > 0.0:
        work[work < min_area_px2] = 0.0
    n_cols = work.shape[1]
    while True:
        flat = int(np.argmax(work))
        i, j = divmod(flat, n_cols)
        value = work[i, j]
        if value <= 0.0:
            break
        work[:, j] = 0.0
        recorded = i not in matches
        if recorded:
            matches[i] = j
            if symmetric:
                work[i, :] = 0.0
        if pops is not None:
            pops.append((i, j, value, recorded))
    return matches


def align_frame(ceiling, angled, h: Homography, min_area_px2: float = 0.0,
                symmetric: bool = False, trace=None):
    """Match ceiling tracks to angled tracks for one (offset-aligned) frame.

    ceiling/angled: per-frame track lists, items are LocalTrackSnapshot or
    (local_id, box) pairs. Returns {ceiling_local_id: angled_local_id},
    injective in both directions. Entries of the intersection matrix below
    min_area_px2 are zeroed before the greedy loop. With symmetric=True the
    matched row is zeroed along with the column (comparison variant; the
    default reproduces the asymmetric column-only rule). trace, when given,
    is a dict that receives the filtered matrix and the pop sequence as
    (ceiling_id, angled_id, area, recorded) records.
    """
    ceiling = sorted((_id_box(s) for s in ceiling), key=lambda p: p[0])
    angled = sorted((_id_box(s) for s in angled), key=lambda p: p[0])
    matches: dict[int, int] = {}
    if trace is not None:
        trace["ceiling_ids"] = [lid for lid, _ in ceiling]
        trace["angled_ids"] = [lid for lid, _ in angled]
        trace["matrix"] = np.zeros((len(ceiling), len(angled)))
        trace["pops"] = []
    if not ceiling or not angled:
        return matches

    quads = np.zeros((len(ceiling), 4, 2))
    projectable = np.ones(len(ceiling), dtype=bool)
    for i, (_, box) in enumerate(ceiling):
        try:
            quads[i] = project_box(h, box).as_array()
        except PointAtInfinity:
            projectable[i] = False  # box straddles the horizon: overlaps nothing
    boxes = np.array([b.as_array() for _, b in angled])

    work = _kernels.intersection_matrix(quads, boxes)
    work[~projectable, :] = 0.0
    if min_area_px2 > 0.0:
        work[work < min_area_px2] = 0.0
    if trace is not None:
        trace["matrix"] = work.copy()

    pops = [] if trace is not None else None
    index_matches = greedy_match(work, symmetric=symmetric, pops=pops)
    for i, j in index_matches.items():
        matches[ceiling[i][0]] = angled[j][0]
    if trace is not None:
        trace["pops"] = [
            (ceiling[i][0], angled[j][0], value, recorded) for i, j, value, recorded in pops
        ]
    return matches


class GlobalRegistry:
    """Persistent (camera, local_id) -> global_id bindings.

    Matched pairs mint or extend identities; conflicting bindings merge into
    the older (smaller) global id; unmatched locals get a solo identity after
    solo_grace frames; bindings unseen for more than expiry frames are
    released. Global ids are never reused.
    """

    def __init__(self, solo_grace: int = 15, expiry: int = 150):
        self.solo_grace = solo_grace
        self.expiry = expiry
        self.bindings: dict[tuple, int] = {}
        self.members: dict[int, set] = {}
        self.last_seen: dict[tuple, int] = {}
        self.solo_since: dict[tuple, int] = {}
        self._next_gid = 1

    def _mint(self) -> int:
        gid = self._next_gid
        self._next_gid += 1
        return gid

    def _bind(self, key, gid):
        self.bindings[key] = gid
        self.members.setdefault(gid, set()).add(key)

    def update(self, frame: int, matches: dict, ceiling_active, angled_active,
               cameras=(CEILING, ANGLED)) -> dict:
        """Apply one frame of match decisions; returns {(camera, local_id): gid}
        for the active locals that hold a binding after the update."""
        ceil_cam, ang_cam = cameras
        active = [(ceil_cam, lid) for lid in ceiling_active]
        active += [(ang_cam, lid) for lid in angled_active]
        for key in active:
            self.last_seen[key] = frame

        for c_lid, a_lid in sorted(matches.items()):
            ck = (ceil_cam, c_lid)
            ak = (ang_cam, a_lid)
            gc = self.bindings.get(ck)
            ga = self.bindings.get(ak)
            if gc is None and ga is None:
                gid = self._mint()
                self._bind(ck, gid)
                self._bind(ak, gid)
            elif gc is None:
                self._bind(ck, ga)
            elif ga is None:
                self._bind(ak, gc)
            elif gc != ga:
                keep, drop = min(gc, ga), max(gc, ga)
                for key in sorted(self.members.pop(drop)):
                    self._bind(key, keep)
            self.solo_since.pop(ck, None)
            self.solo_since.pop(ak, None)

        for key in active:
            if key in self.bindings:
                self.solo_since.pop(key, None)
                continue
            first = self.solo_since.setdefault(key, frame)
            if frame - first >= self.solo_grace:
                self._bind(key, self._mint())
                del self.solo_since[key]

        stale = [key for key, seen in self.last_seen.items() if frame - seen > self.expiry]
        for key in stale:
            del self.last_seen[key]
            self.solo_since.pop(key, None)
            gid = self.bindings.pop(key, None)
            if gid is not None:
                group = self.members[gid]
                group.discard(key)
                if not group:
                    del self.members[gid]

        return {key: self.bindings[key] for key in active if key in self.bindings}

    @property
    def minted_ids(self) -> int:
        return self._next_gid - 1

    def identities(self) -> list:
        """Live identities as GlobalIdentity snapshots (latest binding per camera)."""
        out = []
        for gid in sorted(self.members):
            bindings = {}
            seen = {}
            for camera, lid in sorted(self.members[gid]):
                frame = self.last_seen.get((camera, lid), -1)
                if camera not in seen or frame >= seen[camera]:
                    bindings[camera] = lid
                    seen[camera] = frame
            out.append(GlobalIdentity(gid, bindings, seen))
        return out


@dataclass
class GlobalTrackResult:
    records: list = field(default_factory=list)  # (camera, frame, global_id, BoundingBox)
    match_sets: dict = field(default_factory=dict)  # ceiling frame -> {c_lid: a_lid}
    global_ids: int = 0


def run_global(ceiling_rows, angled_rows, h: Homography, alignment: StreamAlignment,
               config: GlobalConfig = None, cameras=(CEILING, ANGLED),
               audit=None) -> GlobalTrackResult:
    """Align two local track streams frame by frame and assign global IDs.

    ceiling_rows/angled_rows: (frame, local_id, BoundingBox) tuples. Angled
    frames are looked up at ceiling frame + alignment.frame_offset; emitted
    records keep each stream's own frame labels. audit, when given, is a
    writable text stream that receives the per-frame pop sequence.
    """
    config = config or GlobalConfig()
    offset = alignment.frame_offset
    by_frame_c: dict[int, list] = {}
    for frame, lid, box in ceiling_rows:
        by_frame_c.setdefault(frame, []).append((lid, box))
    by_frame_a: dict[int, list] = {}
    for frame, lid, box in angled_rows:
        by_frame_a.setdefault(frame, []).append((lid, box))

    frames = sorted(set(by_frame_c) | {f - offset for f in by_frame_a})
    registry = GlobalRegistry(config.solo_grace, config.expiry)
    result = GlobalTrackResult()

    for frame in frames:
        c_items = sorted(by_frame_c.get(frame, ()), key=lambda p: p[0])
        a_items = sorted(by_frame_a.get(frame + offset, ()), key=lambda p: p[0])
        trace = {} if audit is not None else None
        matches = align_frame(
            c_items, a_items, h,
            min_area_px2=config.min_area_px2,
            symmetric=config.symmetric,
            trace=trace,
        )
        result.match_sets[frame] = matches
        assignments = registry.update(
            frame, matches,
            [lid for lid, _ in c_items],
            [lid for lid, _ in a_items],
            cameras=cameras,
        )
        for lid, box in c_items:
            gid = assignments.get((cameras[0], lid))
            if gid is not None:
                result.records.append((cameras[0], frame, gid, box))
        for lid, box in a_items:
            gid = assignments.get((cameras[1], lid))
            if gid is not None:
                result.records.append((cameras[1], frame + offset, gid, box))
        if audit is not None:
            audit.write(f"frame {frame} ceiling={trace['ceiling_ids']} angled={trace['angled_ids']}\n")
            for row in trace["matrix"]:
                audit.write("  " + " ".join(f"{v:.6f}" for v in row) + "\n")
            for c_id, a_id, value, recorded in trace["pops"]:
                status = "recorded" if recorded else "skipped"
                audit.write(f"  pop ceiling={c_id} angled={a_id} area={value:.6f} {status}\n")

    result.global_ids = registry.minted_ids
    return result

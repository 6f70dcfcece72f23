"""Cross-camera identity merging and the global tracklet bank."""
from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from models.schemas import CrossViewConfig, GlobalBank, Tracklet
from services.assignment_service import similarity_to_cost, solve_assignment
from utils.logger import setup_logger
from utils.similarity import cosine_matrix, normalize_rows

logger = setup_logger(__name__)

Key = Tuple[int, int]
Link = Tuple[float, Key, Key]


class _DisjointSet:
    def __init__(self, keys: Iterable[Key]):
        self.parent = {k: k for k in keys}

    def find(self, key: Key) -> Key:
        while self.parent[key] != key:
            self.parent[key] = self.parent[self.parent[key]]
            key = self.parent[key]
        return key

    def union(self, a: Key, b: Key) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _components(keys: Sequence[Key], links: List[Link]) -> List[List[Key]]:
    groups = _DisjointSet(keys)
    for _, a, b in links:
        groups.union(a, b)
    clusters: Dict[Key, List[Key]] = {}
    for key in keys:
        clusters.setdefault(groups.find(key), []).append(key)
    return sorted(clusters.values())


def _has_camera_clash(cluster: List[Key]) -> bool:
    cameras = [camera for camera, _ in cluster]
    return len(cameras) != len(set(cameras))


def cross_view_links(tracklets: Sequence[Tracklet], cfg: CrossViewConfig) -> List[Link]:
    """Gated bipartite matches of view-agnostic features for every camera pair."""
    by_camera: Dict[int, List[Tracklet]] = {}
    for t in sorted(tracklets, key=lambda t: t.key):
        by_camera.setdefault(t.camera, []).append(t)

    links: List[Link] = []
    for cam_a, cam_b in combinations(sorted(by_camera), 2):
        left, right = by_camera[cam_a], by_camera[cam_b]
        similarity = cosine_matrix(
            np.stack([t.last_agnostic for t in left]), np.stack([t.last_agnostic for t in right])
        )
        matching = solve_assignment(similarity_to_cost(similarity, cfg.merge_threshold))
        for r, c in matching.pairs:
            links.append((float(similarity[r, c]), left[r].key, right[c].key))
    return links


def cluster_tracklets(tracklets: Sequence[Tracklet], cfg: CrossViewConfig) -> List[List[Key]]:
    """
    Merge tracklets across cameras into identity clusters.

    A cluster holding two tracklets from one camera loses its weakest link
    until no such clash remains.
    """
    keys = sorted(t.key for t in tracklets)
    links = sorted(cross_view_links(tracklets, cfg), key=lambda link: (link[1], link[2]))
    while True:
        clusters = _components(keys, links)
        clashing = [c for c in clusters if _has_camera_clash(c)]
        if not clashing:
            return clusters
        members = set(clashing[0])
        inside = [link for link in links if link[1] in members]
        weakest = min(inside, key=lambda link: (link[0], link[1], link[2]))
        logger.debug(f"Cutting cross-view link {weakest[1]}-{weakest[2]} (similarity {weakest[0]:.3f})")
        links.remove(weakest)


def associate_views(
    active: Sequence[Sequence[Tracklet]],
    bank: GlobalBank,
    cfg: CrossViewConfig,
    frame: int,
) -> Tuple[Dict[Key, int], GlobalBank]:
    """
    Give every active tracklet of one frame a global identity.

    Args:
        active: Confirmed tracklets, one list per camera
        bank: Global bank, updated in place
        cfg: Merge and bank thresholds
        frame: Current frame index

    Returns:
        Mapping (camera, local id) -> global id, and the bank
    """
    tracklets = sorted((t for per_camera in active for t in per_camera), key=lambda t: t.key)
    if not tracklets:
        return {}, bank
    by_key = {t.key: t for t in tracklets}
    clusters = cluster_tracklets(tracklets, cfg)

    bank_ids = bank.ids()
    affinity = np.full((len(clusters), len(bank_ids)), -1.0)
    if bank_ids:
        bank_matrix = np.stack([bank.entries[g].embedding for g in bank_ids])
        for row, cluster in enumerate(clusters):
            members = [by_key[k] for k in cluster]
            similarity = cosine_matrix(np.stack([m.last_agnostic for m in members]), bank_matrix)
            affinity[row] = similarity.max(axis=0)
            for m in members:
                if m.global_id in bank.entries:
                    affinity[row, bank_ids.index(m.global_id)] = 1.0
    matching = solve_assignment(similarity_to_cost(affinity, cfg.bank_threshold))
    reused = {row: bank_ids[col] for row, col in matching.pairs}

    assignment: Dict[Key, int] = {}
    for row, cluster in enumerate(clusters):
        global_id = reused.get(row)
        if global_id is None:
            global_id = bank.mint()
            logger.debug(f"Frame {frame}: minted global id {global_id} for {cluster}")
        features = normalize_rows(np.stack([by_key[k].last_agnostic for k in cluster]))
        bank.write(global_id, normalize_rows(features.mean(axis=0))[0], frame)
        for key in cluster:
            assignment[key] = global_id

    logger.debug(f"Frame {frame}: {len(tracklets)} tracklets in {len(clusters)} clusters")
    return assignment, bank


def resolve_conflicts(tracklets: Iterable[Tracklet], assignment: Dict[Key, int]) -> Dict[Key, int]:
    """Overwrite each tracklet's global id with its cluster's id; the cross-view match wins."""
    resolved: Dict[Key, int] = {}
    for t in tracklets:
        new_id = assignment[t.key]
        if t.global_id is not None and t.global_id != new_id:
            logger.debug(f"Camera {t.camera} tracklet {t.local_id}: global id {t.global_id} -> {new_id}")
        t.global_id = new_id
        resolved[t.key] = new_id
    return resolved

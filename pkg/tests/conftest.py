"""Shared fixtures and builders for the test suite."""
import numpy as np
import pytest

from models.schemas import BoundingBox, Detection, EmbeddingPair, SynthConfig, TrackingRecord


def one_hot(index: int, dim: int = 8) -> np.ndarray:
    vector = np.zeros(dim)
    vector[index] = 1.0
    return vector


def make_detection(frame, camera, cx, cy, identity=None, f_a=None, f_s=None, w=20.0, h=40.0):
    """Detection centred at (cx, cy) with an optional embedding."""
    embedding = None
    if f_a is not None:
        embedding = EmbeddingPair(f_a=f_a, f_s=f_s if f_s is not None else f_a)
    return Detection(
        frame=frame,
        camera=camera,
        box=BoundingBox(left=cx - w / 2, top=cy - h / 2, width=w, height=h),
        identity=identity,
        embedding=embedding,
    )


def record(frame, camera, global_id, left, top=0.0, width=10.0, height=10.0, local_id=None):
    return TrackingRecord(
        frame=frame,
        camera=camera,
        global_id=global_id,
        box=BoundingBox(left=left, top=top, width=width, height=height),
        local_id=local_id,
    )


@pytest.fixture
def perfect_config() -> SynthConfig:
    """Small noiseless scenario with orthogonal identities."""
    return SynthConfig(
        num_identities=4,
        num_cameras=2,
        num_frames=40,
        view_noise=0.0,
        view_distortion=0.0,
        orthogonal_latents=True,
        seed=3,
    )

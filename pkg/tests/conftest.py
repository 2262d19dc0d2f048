import numpy as np
import pytest

from mthu.datamodel import (AbundanceSequence, DatasetBundle, EndmemberSet,
                            HyperCubeSequence)


def softmax(x, axis):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def tiny_bundle(seed=0, t=2, l=6, h=4, w=4, p=2, per_pixel=False, noise=0.0):
    """Small hand-built bundle: exact per-phase mixture, optional noise."""
    rng = np.random.default_rng(seed)
    endmembers = rng.uniform(0.1, 1.0, size=(t, l, p))
    maps = softmax(rng.normal(size=(t, p, h, w)), axis=1)
    clean = np.einsum("tlp,tpn->tln", endmembers, maps.reshape(t, p, h * w))
    clean = clean.reshape(t, l, h, w)
    observed = clean + noise * rng.normal(size=clean.shape) if noise else clean
    per_px = None
    if per_pixel:
        per_px = np.broadcast_to(endmembers[:, None], (t, h * w, l, p)).copy()
    return DatasetBundle(
        observed=HyperCubeSequence(observed),
        gt_endmembers=EndmemberSet(endmembers, per_px),
        gt_abundances=AbundanceSequence(maps),
        noise_snr_db=None,
        seed=seed,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import numpy as np
import pytest

from featstream import Category, FeatureMeta, FeatureTensor


@pytest.fixture
def conv_tensor():
    rng = np.random.default_rng(42)
    values = rng.standard_normal(4 * 4 * 8).astype("<f4")
    values[rng.permutation(values.size)[: values.size // 2]] = 0.0
    meta = FeatureMeta(network="vgg16", layer="conv5", category=Category.CONV, source_id="img0")
    return FeatureTensor(dims=(4, 4, 8), values=values, meta=meta)


@pytest.fixture
def fc_tensor():
    rng = np.random.default_rng(43)
    meta = FeatureMeta(network="vgg16", layer="fc1", category=Category.FC, source_id="img0")
    return FeatureTensor(dims=(64,), values=rng.standard_normal(64).astype("<f4"), meta=meta)


def make_tensor(dims, seed=0, zero_fraction=0.5, network="net", layer="layer", source=""):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    values = rng.standard_normal(n).astype("<f4")
    k = int(zero_fraction * n)
    if k:
        values[rng.permutation(n)[:k]] = 0.0
    category = Category.FC if len(dims) == 1 else Category.CONV
    meta = FeatureMeta(network=network, layer=layer, category=category, source_id=source)
    return FeatureTensor(dims=tuple(dims), values=values, meta=meta)

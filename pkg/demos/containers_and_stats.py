"""Build a feature tensor, write it to a container file, read it back."""

import tempfile
from pathlib import Path

from featstream import (
    Category,
    FeatureMeta,
    compute_stats,
    generate_synthetic,
    load_container,
    save_container,
)


def main():
    meta = FeatureMeta(network="vgg16", layer="conv5", category=Category.CONV,
                       source_id="demo0")
    t = generate_synthetic((14, 14, 512), nonzero_rate=0.068, seed=7, meta=meta)

    stats = compute_stats(t)
    print(f"tensor {t.meta.network}/{t.meta.layer} dims {t.dims}")
    print(f"  elements:     {t.num_elements}")
    print(f"  raw bytes:    {t.volume_bytes}")
    print(f"  non-zero:     {stats.non_zero_rate:.4f}")
    print(f"  value range:  [{stats.min_val:.4f}, {stats.max_val:.4f}]")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "conv5.ftc"
        save_container(t, path)
        size = path.stat().st_size
        print(f"container file: {size} bytes ({size - t.volume_bytes} header+meta)")

        back = load_container(path)
        print(f"reload bit-exact: {back == t}")


if __name__ == "__main__":
    main()

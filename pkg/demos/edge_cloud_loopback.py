"""Serve features from a directory and fetch them back over a socket.

Stands up the edge server on a loopback port, then plays the cloud side:
one lossless fetch and one 8 bit quantized fetch of the same feature,
with the wire cost of each.
"""

import tempfile
from pathlib import Path

import numpy as np

from featstream import Category, FeatureMeta, generate_synthetic, save_container
from featstream.codecs import STORE, zeromask
from featstream.transport import FeatureClient, serve_edge


def main():
    with tempfile.TemporaryDirectory() as tmp:
        store = Path(tmp)
        meta = FeatureMeta(network="vgg16", layer="conv5", category=Category.CONV,
                           source_id="img0")
        original = generate_synthetic((14, 14, 512), 0.068, seed=7, meta=meta)
        save_container(original, store / "conv5_img0.ftc")

        with serve_edge(store) as server:
            host, port = server.address
            print(f"edge server on {host}:{port}, {len(server.store)} feature(s)\n")

            with FeatureClient(host, port) as client:
                t, stats = client.request("vgg16", "conv5", "img0",
                                          codec=zeromask(STORE))
                print(f"lossless fetch: {stats.wire_bytes} wire bytes for "
                      f"{t.volume_bytes} raw ({stats.wire_bytes / t.volume_bytes:.4f})")
                print(f"  bit-exact: {t == original}")

                t, stats = client.request("vgg16", "conv5", "img0",
                                          codec=zeromask(STORE), quant_bits=8)
                err = float(np.max(np.abs(t.values - original.values)))
                print(f"8 bit fetch:    {stats.wire_bytes} wire bytes for "
                      f"{t.volume_bytes} raw ({stats.wire_bytes / t.volume_bytes:.4f})")
                print(f"  max abs error: {err:.6f}")


if __name__ == "__main__":
    main()

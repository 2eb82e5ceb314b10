"""Compress one sparse feature tensor with every codec and compare rates."""

import time

from featstream import decode_tensor, encode_tensor, generate_synthetic, parse_header
from featstream.codecs import ALL_CODECS


def main():
    t = generate_synthetic((14, 14, 512), nonzero_rate=0.068, seed=7)
    print(f"tensor dims {t.dims}, {t.volume_bytes} raw bytes, 6.8% non-zero\n")
    print(f"{'codec':<14} {'frame bytes':>12} {'rate':>8} {'time (s)':>10}  exact")
    for codec in ALL_CODECS:
        start = time.perf_counter()
        frame = encode_tensor(t, codec)
        elapsed = time.perf_counter() - start
        header = parse_header(frame)
        back = decode_tensor(frame)
        print(f"{str(codec):<14} {len(frame):>12} {header.stream_rate:>8.4f} "
              f"{elapsed:>10.4f}  {back == t}")


if __name__ == "__main__":
    main()

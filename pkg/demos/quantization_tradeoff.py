"""Trade reconstruction error against rate by lowering the bit depth.

Encodes the same tensor at bit depths from 12 down to 2, always through
gzip, and reports the measured worst-case error next to the guaranteed
bound.
"""

from featstream import (
    compute_stats,
    decode_tensor,
    encode_tensor,
    error_bound,
    error_metrics,
    generate_synthetic,
    parse_header,
)
from featstream.codecs import DEFLATE_GZ
from featstream.quant import auto_range


def main():
    t = generate_synthetic((14, 14, 512), nonzero_rate=0.3, seed=11)
    stats = compute_stats(t)
    lossless = parse_header(encode_tensor(t, DEFLATE_GZ)).stream_rate
    print(f"value range [{stats.min_val:.3f}, {stats.max_val:.3f}], "
          f"lossless gzip rate {lossless:.4f}\n")
    print(f"{'bits':>4} {'rate':>8} {'max err':>10} {'bound':>10} {'snr (dB)':>9}")
    for bits in (12, 10, 8, 6, 4, 2):
        params = auto_range(stats, bits=bits)
        frame = encode_tensor(t, DEFLATE_GZ, quant=params)
        header = parse_header(frame)
        back = decode_tensor(frame)
        metrics = error_metrics(t, back)
        print(f"{bits:>4} {header.stream_rate:>8.4f} {metrics.max_abs_error:>10.6f} "
              f"{error_bound(params):>10.6f} {metrics.signal_to_noise_db:>9.2f}")


if __name__ == "__main__":
    main()

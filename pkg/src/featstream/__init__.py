"""Tools for storing, compressing, benchmarking, and fetching neural-network
feature tensors.

The pieces, bottom to top: ``tensor`` models one activation volume and
generates synthetic sparse ones; ``container`` stores raw tensors (FTC1);
``codecs`` and ``quant`` turn payloads into fewer bytes; ``bitstream``
wraps a compressed payload in a self-describing frame (FDF1); ``bench``
measures codecs over feature sets and renders reports; ``transport``
serves stored features to remote clients on demand; ``registry`` knows
the catalogued network layer shapes; ``cli`` fronts everything.
"""

from .bench import (
    AggregateRow,
    CompressionRecord,
    aggregate,
    bench_tensor,
    compression_rate,
    emit_report,
    run_benchmark,
)
from .bitstream import FrameHeader, Mode, decode_tensor, encode_tensor, parse_frame, parse_header
from .codecs import (
    ALL_CODECS,
    BZ2,
    DEFLATE_GZ,
    DEFLATE_Z,
    LOSSLESS_BACKENDS,
    LZMA1,
    STORE,
    CodecId,
    CodecParams,
    compress_payload,
    decompress_payload,
    parse_codec,
    zero_mask_decode,
    zero_mask_encode,
    zeromask,
)
from .container import (
    load_container,
    peek_container,
    read_container,
    save_container,
    write_container,
)
from .errors import (
    CorruptionError,
    FeatstreamError,
    FormatError,
    ProtocolError,
    TransportError,
    ValidationError,
)
from .quant import (
    ErrorMetrics,
    QuantParams,
    auto_range,
    dequantize,
    error_bound,
    error_metrics,
    quantize,
)
from .registry import LayerProfile, REFERENCE_NONZERO_RATE, all_profiles, lookup_profile
from .tensor import (
    Category,
    FeatureMeta,
    FeatureTensor,
    ReluGaussian,
    TensorStats,
    Uniform,
    compute_stats,
    generate_synthetic,
)
from .transport import (
    EdgeServer,
    FeatureClient,
    FeatureRequest,
    FeatureStore,
    Status,
    TransferStats,
    request_feature,
    serve_edge,
)

__version__ = "0.1.0"

from powpos_lab.hashing.algos import (
    DIGEST_SIZE,
    MAX_TARGET,
    HashAlgo,
    digest,
    digest_value,
    meets_target,
    prefix_digester,
    shake_stream,
)

__all__ = [
    "DIGEST_SIZE",
    "MAX_TARGET",
    "HashAlgo",
    "digest",
    "digest_value",
    "meets_target",
    "prefix_digester",
    "shake_stream",
]

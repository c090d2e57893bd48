"""QKD post-processing toolkit built around stream privacy amplification.

Subpackages:

* :mod:`streamkey.bitvec` exact GF(2) vectors and matrices
* :mod:`streamkey.hashing` Toeplitz universal hashing
* :mod:`streamkey.rates` key rates, cardinality bounds, failure budgets
* :mod:`streamkey.reconciliation` syndrome-based error correction
* :mod:`streamkey.privacy_amp` stream and block privacy amplification
* :mod:`streamkey.session` end-to-end session simulation
* :mod:`streamkey.relay` trusted-relay chains with delayed amplification
* :mod:`streamkey.experiments` Monte-Carlo bound verification
* :mod:`streamkey.bench` throughput measurement
"""

from .bitvec import BitString, Gf2Matrix, mat_vec, nullspace, rank
from .hashing import (
    SeedSource,
    ToeplitzMatrix,
    generate_toeplitz,
    hash_apply,
    hash_apply_fast,
)
from .privacy_amp import (
    PadStore,
    SecurityLedger,
    StreamPad,
    block_pa,
    make_pad,
    stream_extract,
)
from .rates import ErrorRates, binary_entropy, shor_preskill_rate
from .reconciliation import TypicalErrorSet, decode, encode_syndrome, reconcile, verify
from .session import ChannelModel, SessionParams, TapeSet, run_session

__version__ = "0.1.0"

"""Privacy-preserving compressive-sensing recovery of multi-attribute
sensor matrices: KVP encryption, alternating-least-squares completion with
a shared cross-attribute component, joint sparse decomposition diagnostics,
and a reproducible sweep harness.
"""

from .matrices import (
    NormalizationRecord,
    SensedMatrix,
    SpectrumReport,
    apply_mask,
    denormalize,
    frobenius,
    l1_norm,
    normalize,
    nse,
    read_mask_csv,
    read_matrix_csv,
    svd_spectrum,
    write_mask_csv,
    write_matrix_csv,
)
from .kvp import (
    EncryptedMatrix,
    KvpKeyRing,
    PrivateKey,
    PublicVectorSet,
    decrypt,
    encrypt,
    gen_private_key,
    gen_public_vectors,
    load_key_ring,
    save_key_ring,
)
from .recovery import (
    FactorPair,
    JointEstimate,
    SolveReport,
    SolverConfig,
    cross_inverse,
    cs_complete,
    default_rank,
    maa_complete,
    maa_complete_k,
    ppcs_maa_recover,
    ppcs_maa_recover_k,
    ppcs_recover,
    single_inverse,
)
from .jsd import (
    JsdConvergenceError,
    JsdSplit,
    WaveletBasis,
    correlation_report,
    haar_basis,
    jsd_decompose,
    jsd_matrix,
)
from .pipeline import (
    GroundTruthBundle,
    PacketRecord,
    RecordSchema,
    SynthSpec,
    build_ground_truth,
    clean_outliers,
    drop_entries,
    load_bundle,
    parse_records,
    save_bundle,
    synthesize,
)
from .experiment import (
    ExperimentConfig,
    ResultRow,
    SummaryRow,
    aggregate,
    emit,
    read_raw_csv,
    run_sweep,
)

__version__ = "0.1.0"

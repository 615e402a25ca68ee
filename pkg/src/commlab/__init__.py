"""commlab: a desk-scale lab for communication protocols as rectangle covers.

Covers of finite grids by combinatorial boxes, transcript selectors, an exact
Shannon-entropy engine over explicit joint distributions, margin checkers for
the covering/transcript/information-cost inequalities, AM branch analysis,
and classical lower bounds (exact monochromatic cover number, fooling sets,
matrix rank).
"""

from .core import (
    Box,
    Cover,
    DomainShape,
    Protocol,
    ProtocolTree,
    TranscriptSelector,
    TreeLeaf,
    TreeSplit,
    box,
    compile_tree,
    select_transcript,
    selector_labels,
    thickness,
    thickness_table,
    validate_cover,
)
from .errors import (
    CommlabError,
    DegenerateInstanceError,
    GenerationFailureError,
    InvalidInputError,
    InvalidSelectorError,
    InvalidTreeError,
    SchemaError,
    SolverTimeoutError,
    UncoveredCellError,
)
from .functions import (
    AMProtocol,
    ColoredFunction,
    ErrorProtocol,
    Relation,
    approx_xor_relation,
    constant_function,
    eq_function,
    error_protocol_from_cover,
    error_rate,
    gen_cover,
    gen_function,
    gen_relation,
    good_set,
    matvec_function,
    monochromatic_color,
    parity_tightness_protocol,
    random_bounded_cover,
    random_function,
    random_tree,
    trivial_merlin_am,
    trivial_merlin_cover,
    windmill_cover,
    xor_function,
)
from .info import (
    InfoProfile,
    JointDistribution,
    VariableSpec,
    binary_entropy,
    build_profile,
    info_quantity,
    internal_information_cost,
    pairwise_sum,
    triple_information,
)
from .bounds import (
    BoundSummary,
    MonochromaticCatalog,
    bound_summary,
    comm_matrix_rank,
    cover_number,
    enumerate_maximal_monochromatic,
    fooling_set,
)
from .verify import (
    AMReport,
    MarginReport,
    SuiteConfig,
    am_analyze,
    batch_experiment,
    check_deterministic_monotonicity,
    check_ic,
    check_main_inequality,
    check_multiparty,
    check_transcript_bound,
)
from .serialize import (
    AMBundle,
    InstanceBundle,
    load_am,
    load_instance,
    save_am,
    save_instance,
)

__version__ = "0.1.0"

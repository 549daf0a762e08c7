"""condop: a numerical laboratory for operators f -> w E(uf) on finite L^p spaces.

Finite weighted point sets model the measure space, block partitions model
the sub-algebra, and dyadic refinement families model non-atomic parts.  The
package realizes the weighted conditional operators, turns each closed-range
and Fredholm criterion into an executable classifier, and audits every
verdict against independent brute-force numerics.
"""

from .condexp import FunctionOnSpace, block_indicator, cond_exp, constant, function_on, indicator
from .errors import (
    CaseError,
    CondopError,
    DomainError,
    NotConditionalType,
    PreconditionError,
    ResourceError,
    ValidationError,
)
from .measure_core import (
    MeasureSpace,
    PartitionAlgebra,
    RefinementFamily,
    atoms,
    dyadic_family,
    is_A_measurable,
    make_partition,
    make_space,
    singleton_partition,
    trivial_partition,
)
from .oracle import OracleConfig, OracleResult, maximize_ratio, min_modulus, numeric_rank
from .weighted_ops import (
    CondOperator,
    ExponentPair,
    OperatorMatrix,
    apply,
    em_u,
    lp_norm,
    matrix_of,
    opnorm_pq,
    reduce_to_EMv,
    reduced_operator,
    v_weight,
)

__version__ = "0.1.0"

__all__ = [
    "CaseError",
    "CondOperator",
    "CondopError",
    "DomainError",
    "ExponentPair",
    "FunctionOnSpace",
    "MeasureSpace",
    "NotConditionalType",
    "OperatorMatrix",
    "OracleConfig",
    "OracleResult",
    "PartitionAlgebra",
    "PreconditionError",
    "RefinementFamily",
    "ResourceError",
    "ValidationError",
    "apply",
    "atoms",
    "block_indicator",
    "cond_exp",
    "constant",
    "dyadic_family",
    "em_u",
    "function_on",
    "indicator",
    "is_A_measurable",
    "lp_norm",
    "make_partition",
    "make_space",
    "matrix_of",
    "maximize_ratio",
    "min_modulus",
    "numeric_rank",
    "opnorm_pq",
    "reduce_to_EMv",
    "reduced_operator",
    "singleton_partition",
    "trivial_partition",
    "v_weight",
]

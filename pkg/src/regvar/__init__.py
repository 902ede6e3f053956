"""Numerical regularity analysis for semialgebraic set-valued maps.

The package measures how surjective a map is near a point (its rate of
surjection and the reciprocal rate of metric regularity), scans for values
where that rate collapses, and probes the structure asymptotic criticality
takes at infinity.  Maps enter either as explicit polynomial maps or through
polynomial formulas describing their graphs; a small catalog of worked
examples and a CLI for CSV reports ride along.
"""

from .asymptotic import (
    DEFAULT_SHELLS,
    AsymptoticScanResult,
    CompactificationSpec,
    CompactifiedBoundReport,
    CompactifiedMap,
    asymptotic_scan,
    check_compactified_bound,
    check_prop7_bound,
    compactify_map,
    default_compactification,
    from_unit_ball,
    linear_eta,
    scaled_map,
    to_unit_ball,
)
from .catalog import catalog, formula_catalog, get, polymap_catalog
from .critical import (
    ComponentReport,
    CriticalScanResult,
    DimensionFit,
    PorosityReport,
    box_counting_dimension,
    component_constancy,
    porosity_scan,
    scan_critical_values,
)
from .errors import (
    CostGuardError,
    DimensionMismatchError,
    DomainError,
    InputError,
    IsolatedPointError,
    SparseGraphError,
    UndersampledError,
)
from .oracle import RasterGrid, dense_min_singular, dense_modulus, dense_slope, rasterize
from .regularity import (
    DEFAULT_LAMBDA_FACTORS,
    DEFAULT_SCHEDULE,
    CalculusCheck,
    ModulusBracket,
    ModulusQuery,
    RateRow,
    RegularityEstimate,
    SlopeEstimate,
    check_chain_rule,
    check_sum_rule,
    composed_map,
    default_resolution,
    frobenius_norm,
    function_slope,
    jacobian_rate,
    linear_surjection_rate,
    map_slope,
    modulus_of_surjection,
    regularity_rate,
    shifted_map,
    surjection_rate,
)
from .semialg import (
    And,
    Atom,
    GraphPoint,
    MapSpec,
    Not,
    Or,
    PolyMap,
    Polynomial,
    Relation,
    atom_eq,
    atom_le,
    atom_lt,
    closure_membership,
    conj,
    differentiate_polynomial,
    disj,
    eval_polynomial,
    formula_from_dict,
    formula_to_dict,
    jacobian,
    load_mapspec,
    mapspec_to_dict,
    membership,
    membership_many,
    nnf,
    polynomial_from_dict,
    polynomial_to_dict,
    residual,
    sample_graph,
)

__version__ = "0.1.0"

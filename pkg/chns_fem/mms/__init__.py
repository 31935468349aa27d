"""
Manufactured solutions and convergence studies.
"""
from chns_fem.mms.solutions import (
    EquilibriumSolution,
    ManufacturedSolution,
    TrigonometricSolution,
    builtin_solution,
    registered_solutions,
)
from chns_fem.mms.study import (
    ConsistencyResidual,
    ConvergenceStudy,
    ConvergenceTable,
    ErrorNorms,
    RunHistory,
    StudyKind,
    collect_history,
    consistency_residuals,
    error_norms,
    reference_error_norms,
    run_convergence_study,
)


__all__ = [
    'ConsistencyResidual',
    'ConvergenceStudy',
    'ConvergenceTable',
    'EquilibriumSolution',
    'ErrorNorms',
    'ManufacturedSolution',
    'RunHistory',
    'StudyKind',
    'TrigonometricSolution',
    'builtin_solution',
    'collect_history',
    'consistency_residuals',
    'error_norms',
    'reference_error_norms',
    'registered_solutions',
    'run_convergence_study',
]

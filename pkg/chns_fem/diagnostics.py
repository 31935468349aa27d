"""
File: diagnostics.py
Description:
    Energies, the discrete energy law, the stability ledger and the norms used to monitor a run.

    All inner products come from the assembled matrices of a `ProjectionContext`; the only quadrature-evaluated
    quantity is the double-well integral ‖φ² − 1‖², which is a degree-4 polynomial on every triangle and is
    integrated exactly by the default rule.
"""
# Standard library imports
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence

# Third-party imports
import numpy as np

# Inspyre-Softworks imports
from inspy_logger import Loggable

# Package imports
from chns_fem.errors import MissingDataError, NotMeanZeroError, SpaceMismatchError
from chns_fem.fem import FieldVector
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import Mesh
from chns_fem.projections import ProjectionContext, discrete_laplacian, minus_one_norm
from chns_fem.scheme import PhysParams, SchemeState


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('diagnostics')


@lru_cache(maxsize=8)
def _context_for(mesh: Mesh) -> ProjectionContext:
    return ProjectionContext(mesh)


def _resolve(ctx: Optional[ProjectionContext], phi: FieldVector) -> ProjectionContext:
    if ctx is None:
        ctx = _context_for(phi.space.mesh)

    ctx.require_phase(phi, 'phi')

    return ctx


def _quad(ctx: ProjectionContext, v: np.ndarray) -> float:
    return float(v @ (ctx.mass @ v))


def _grad_quad(ctx: ProjectionContext, v: np.ndarray) -> float:
    return float(v @ (ctx.stiffness @ v))


def _velocity_quad(ctx: ProjectionContext, u: np.ndarray) -> float:
    return float(u @ (ctx.velocity_mass @ u))


def _velocity_grad_quad(ctx: ProjectionContext, u: np.ndarray) -> float:
    return float(u @ (ctx.velocity_stiffness @ u))


def double_well_integral(phi: FieldVector) -> float:
    """
    ‖φ² − 1‖² = ∫ (φ² − 1)² by quadrature.
    """
    space  = phi.space
    values = space.values_at_quadrature(phi.coeffs)

    return float(np.einsum('tq,tq->', space.tables.weights, (values ** 2 - 1.0) ** 2))


def energy_E(phi: FieldVector, u: FieldVector, params: PhysParams,
             ctx: Optional[ProjectionContext] = None) -> float:
    """
    The free energy ∫ (1/4ε)(φ² − 1)² + (ε/2)|∇φ|² + (1/2γ)|u|².

    Parameters:
        phi (FieldVector):
            Phase field in S_h.

        u (FieldVector):
            Velocity in X_h on the same mesh.

        params (PhysParams):
            Supplies ε and γ.

        ctx (Optional[ProjectionContext]):
            Source of the matrices; a cached context for the mesh is used when omitted.

    Examples:
        φ ≡ 0 and u = 0 on the unit square give 1/(4ε).
    """
    ctx = _resolve(ctx, phi)
    ctx.require_velocity(u, 'u')

    eps = params.epsilon

    return (double_well_integral(phi) / (4.0 * eps)
            + 0.5 * eps * _grad_quad(ctx, phi.coeffs)
            + _velocity_quad(ctx, u.coeffs) / (2.0 * params.gamma))


def energy_F(phi_new: FieldVector, phi_old: FieldVector, u: FieldVector, params: PhysParams,
             ctx: Optional[ProjectionContext] = None) -> float:
    """
    Modified energy F = E(φ_new, u) + (1/4ε)‖φ_new − φ_old‖² + (ε/8)‖∇(φ_new − φ_old)‖².
    """
    ctx = _resolve(ctx, phi_new)
    ctx.require_phase(phi_old, 'phi_old')

    eps  = params.epsilon
    diff = phi_new.coeffs - phi_old.coeffs

    return (energy_E(phi_new, u, params, ctx)
            + _quad(ctx, diff) / (4.0 * eps)
            + eps * _grad_quad(ctx, diff) / 8.0)


class FieldNorms(NamedTuple):
    """
    linf_nodal is exact for P1 and a lower bound for P2 fields.
    """
    l2:                    float
    h1_semi:               float
    linf_nodal:            float
    minus_one:             Optional[float] = None
    discrete_laplacian_l2: Optional[float] = None


def norms(v: FieldVector, ctx: ProjectionContext, minus_one: bool = False, laplacian: bool = False
          ) -> FieldNorms:
    """
    L², H¹-seminorm and nodal maximum of a finite element function, plus optionally ‖v‖_{−1,h} and ‖Δ_h v‖.

    Raises:
        NotMeanZeroError:
            If `minus_one` is requested for a field without zero mean.

        SpaceMismatchError:
            If `minus_one` or `laplacian` is requested for a velocity field.
    """
    coeffs = v.coeffs

    if v.space.is_vector:
        ctx.require_velocity(v, 'v')
        if minus_one or laplacian:
            raise SpaceMismatchError('minus-one and discrete Laplacian norms are defined on S_h only')

        l2, h1 = _velocity_quad(ctx, coeffs), _velocity_grad_quad(ctx, coeffs)
    else:
        ctx.require_phase(v, 'v')
        l2, h1 = _quad(ctx, coeffs), _grad_quad(ctx, coeffs)

    m1 = minus_one_norm(v, ctx) if minus_one else None

    lap = None
    if laplacian:
        lap = float(np.sqrt(max(_quad(ctx, discrete_laplacian(v, ctx).coeffs), 0.0)))

    return FieldNorms(
        l2=float(np.sqrt(max(l2, 0.0))),
        h1_semi=float(np.sqrt(max(h1, 0.0))),
        linf_nodal=float(np.abs(coeffs).max(initial=0.0)),
        minus_one=m1,
        discrete_laplacian_l2=lap,
    )


def laplacian_induction_gap(phi_new: FieldVector, phi_older: FieldVector, ctx: ProjectionContext) -> float:
    """
    ‖Δ_hφ̌‖² − ((3/8)‖Δ_hφ_new‖² − (1/8)‖Δ_hφ_older‖²) with φ̌ = (3/4)φ_new + (1/4)φ_older.

    Equals (3/16)‖Δ_h(φ_new + φ_older)‖², hence never negative.
    """
    lap_new   = discrete_laplacian(phi_new, ctx).coeffs
    lap_older = discrete_laplacian(phi_older, ctx).coeffs
    lap_check = 0.75 * lap_new + 0.25 * lap_older

    return _quad(ctx, lap_check) - (0.375 * _quad(ctx, lap_new) - 0.125 * _quad(ctx, lap_older))


@dataclass(frozen=True)
class EnergyReport:
    """
    One row of the energy time series, describing level m.

    Attributes:
        E, F (float):
            E(φ^m, u^m) and F(φ^m, φ^{m−1}, u^m).

        grad_mu_sq, grad_ubar_sq (float):
            ‖∇μ^{m−½}‖² and ‖∇ū^{m−½}‖² of the step that produced level m (zero on the first row).

        jump_l2, jump_h1 (float):
            ‖φ^m − 2φ^{m−1} + φ^{m−2}‖² and the same with gradients.

        energy_law_residual (float):
            |F^m + accumulated dissipation and jumps − F^1|.

        mass (float):
            (φ^m, 1).

        linf_phi (float):
            max |φ^m| at the vertices.

        l2_mu_half (float):
            ‖μ^{m−½}‖.

        laplacian_check_norm (float):
            ‖Δ_hφ̌^{m−½}‖.
    """
    m:                    int
    t:                    float
    E:                    float
    F:                    float
    grad_mu_sq:           float = 0.0
    grad_ubar_sq:         float = 0.0
    jump_l2:              float = 0.0
    jump_h1:              float = 0.0
    energy_law_residual:  float = 0.0
    mass:                 float = 0.0
    linf_phi:             float = 0.0
    l2_mu_half:           float = 0.0
    laplacian_check_norm: float = 0.0


def step_dissipation(report: EnergyReport, params: PhysParams, tau: float) -> float:
    """
    τ(ε‖∇μ‖² + (η/γ)‖∇ū‖²) + (1/4ε)‖jump‖² + (ε/8)‖∇jump‖² of one step.
    """
    eps = params.epsilon
    return (tau * (eps * report.grad_mu_sq + params.eta / params.gamma * report.grad_ubar_sq)
            + report.jump_l2 / (4.0 * eps)
            + eps * report.jump_h1 / 8.0)


def energy_law_residual(history: Sequence[EnergyReport], params: PhysParams, tau: float) -> float:
    """
    |F^{ℓ+1} + Σ_{m=1..ℓ} (dissipation + jumps) − F^1| for a history whose first row describes level 1.

    Raises:
        MissingDataError:
            If the history is empty.
    """
    if not history:
        raise MissingDataError('energy law residual needs at least the level-1 row')

    total = sum(step_dissipation(row, params, tau) for row in history[1:])

    return abs(history[-1].F + total - history[0].F)


@dataclass
class StabilitySummary:
    """
    Running maxima and sums appearing in the a-priori estimates of an unforced run.
    """
    max_grad_phi_sq:        float = 0.0
    max_double_well:        float = 0.0
    max_u_sq:               float = 0.0
    dissipation_mu:         float = 0.0
    dissipation_u:          float = 0.0
    jump_sum:               float = 0.0
    mu_l2_sum:              float = 0.0
    dphi_minus_one_sum:     float = 0.0
    max_linf_phi:           float = 0.0
    max_laplacian_gap:      float = 0.0
    dissipation_monotone:   bool = True
    energy_monotone:        bool = True
    dissipation_history:    List[float] = field(default_factory=list)


class EnergyLedger(Loggable):
    """
    Tracks the discrete energy law over a run.

    Feed it the level-1 state with `start()` and then every accepted step with `record()`. The ledger keeps the
    `EnergyReport` rows, the accumulated right-hand side of the energy law and a `StabilitySummary`.

    Parameters:
        ctx (ProjectionContext):
            Matrices of the run.

        params (PhysParams):
            ε, η, γ.

        tau (float):
            Time step.

        monotone_tol (float):
            Relative slack when checking F^{ℓ+1} ≤ F^1.
    """
    def __init__(self, ctx: ProjectionContext, params: PhysParams, tau: float, monotone_tol: float = 1e-10):
        super().__init__(MOD_LOGGER)

        self.__ctx          = ctx
        self.__params       = params
        self.__tau          = float(tau)
        self.__monotone_tol = monotone_tol
        self.__history      = []
        self.__accumulated  = 0.0
        self.__summary      = StabilitySummary()
        self.__induction    = []

    @property
    def history(self) -> List[EnergyReport]:
        return list(self.__history)

    @property
    def summary(self) -> StabilitySummary:
        return self.__summary

    @property
    def initial_energy(self) -> float:
        if not self.__history:
            raise MissingDataError('the ledger has not been started')

        return self.__history[0].F

    @property
    def induction_gaps(self) -> List[float]:
        """
        ε‖Δ_hφ̌‖² − ‖μ‖² per step; the bound ε‖Δ_hφ̌‖² ≤ ‖μ‖² + C is monitored, not enforced.
        """
        return list(self.__induction)

    @property
    def max_residual(self) -> float:
        return max((row.energy_law_residual for row in self.__history), default=0.0)

    def _track_level(self, phi: FieldVector, u: FieldVector):
        ctx, summary = self.__ctx, self.__summary
        summary.max_grad_phi_sq = max(summary.max_grad_phi_sq, _grad_quad(ctx, phi.coeffs))
        summary.max_double_well = max(summary.max_double_well, double_well_integral(phi))
        summary.max_u_sq        = max(summary.max_u_sq, _velocity_quad(ctx, u.coeffs))
        summary.max_linf_phi    = max(summary.max_linf_phi, float(np.abs(phi.coeffs).max(initial=0.0)))

    def start(self, state: SchemeState) -> EnergyReport:
        """
        Record level 1 (the row every later residual refers to).
        """
        if state.m != 1:
            raise MissingDataError(f'the ledger starts from the level-1 state, got m = {state.m}')

        ctx, prm = self.__ctx, self.__params
        phi, u   = state.phi_curr, state.u_curr

        report = EnergyReport(
            m=1,
            t=self.__tau,
            E=energy_E(phi, u, prm, ctx),
            F=energy_F(phi, state.phi_prev, u, prm, ctx),
            mass=ctx.mass_of(phi),
            linf_phi=float(np.abs(phi.coeffs).max(initial=0.0)),
            l2_mu_half=(float(np.sqrt(_quad(ctx, state.mu_half_prev.coeffs)))
                        if state.mu_half_prev is not None else 0.0),
        )

        self.__history     = [report]
        self.__accumulated = 0.0
        self.__summary     = StabilitySummary()
        self.__induction   = []
        self._track_level(phi, u)

        self.method_logger.debug(f'Energy ledger started: F1 = {report.F:.6e}')

        return report

    def record(self, before: SchemeState, after: SchemeState, mu_half: FieldVector) -> EnergyReport:
        """
        Record the step `before` (level m) → `after` (level m+1) with chemical potential μ^{m+½}.

        Returns:
            EnergyReport:
                The row for level m+1.
        """
        if not self.__history:
            raise MissingDataError('call start() before record()')

        if after.m != before.m + 1:
            raise MissingDataError(f'steps must be consecutive, got {before.m} -> {after.m}')

        ctx, prm, tau = self.__ctx, self.__params, self.__tau
        eps = prm.epsilon

        phi_new, phi_curr, phi_prev = after.phi_curr, before.phi_curr, before.phi_prev
        u_new = after.u_curr

        jump  = phi_new.coeffs - 2.0 * phi_curr.coeffs + phi_prev.coeffs
        u_bar = 0.5 * (u_new.coeffs + before.u_curr.coeffs)

        check     = 0.75 * phi_new + 0.25 * phi_prev
        lap_check = discrete_laplacian(check, ctx)
        lap_sq    = _quad(ctx, lap_check.coeffs)
        mu_sq     = _quad(ctx, mu_half.coeffs)

        F = energy_F(phi_new, phi_curr, u_new, prm, ctx)

        row = EnergyReport(
            m=after.m,
            t=after.m * tau,
            E=energy_E(phi_new, u_new, prm, ctx),
            F=F,
            grad_mu_sq=_grad_quad(ctx, mu_half.coeffs),
            grad_ubar_sq=_velocity_grad_quad(ctx, u_bar),
            jump_l2=_quad(ctx, jump),
            jump_h1=_grad_quad(ctx, jump),
            mass=ctx.mass_of(phi_new),
            linf_phi=float(np.abs(phi_new.coeffs).max(initial=0.0)),
            l2_mu_half=float(np.sqrt(max(mu_sq, 0.0))),
            laplacian_check_norm=float(np.sqrt(max(lap_sq, 0.0))),
        )

        self.__accumulated += step_dissipation(row, prm, tau)
        residual = abs(F + self.__accumulated - self.__history[0].F)
        row = replace(row, energy_law_residual=residual)
        self.__history.append(row)

        summary = self.__summary
        previous = summary.dissipation_mu + summary.dissipation_u
        summary.dissipation_mu += tau * eps * row.grad_mu_sq
        summary.dissipation_u  += tau * prm.eta / prm.gamma * row.grad_ubar_sq
        summary.jump_sum       += row.jump_l2 / (4.0 * eps) + eps * row.jump_h1 / 8.0
        summary.mu_l2_sum      += tau * mu_sq

        current = summary.dissipation_mu + summary.dissipation_u
        summary.dissipation_history.append(current)
        summary.dissipation_monotone = summary.dissipation_monotone and current >= previous

        try:
            dphi = (phi_new - phi_curr) / tau
            summary.dphi_minus_one_sum += tau * minus_one_norm(dphi, ctx) ** 2
        except NotMeanZeroError:
            summary.dphi_minus_one_sum = float('nan')

        initial_F = self.__history[0].F
        if F > initial_F + self.__monotone_tol * max(1.0, abs(initial_F)):
            summary.energy_monotone = False
            self.method_logger.warning(f'Step {after.m}: F = {F:.6e} exceeds F1 = {initial_F:.6e}')

        summary.max_laplacian_gap = max(summary.max_laplacian_gap, laplacian_induction_gap(phi_new, phi_prev, ctx))
        self.__induction.append(eps * lap_sq - mu_sq)
        self._track_level(phi_new, u_new)

        return row

    def continuous_energy_budget(self) -> float:
        """
        E^{ℓ+1} + τΣ(ε‖∇μ‖² + (η/γ)‖∇ū‖²) − E^1 for the last recorded level.

        The discrete analogue of the PDE energy law without the numerical jump terms; it is monitored only.
        """
        if not self.__history:
            raise MissingDataError('the ledger has not been started')

        summary = self.__summary
        return self.__history[-1].E + summary.dissipation_mu + summary.dissipation_u - self.__history[0].E


__all__ = [
    'EnergyLedger',
    'EnergyReport',
    'FieldNorms',
    'StabilitySummary',
    'double_well_integral',
    'energy_E',
    'energy_F',
    'energy_law_residual',
    'laplacian_induction_gap',
    'norms',
    'step_dissipation',
]

"""
File: gronwall.py
Description:
    Numeric checkers for two discrete Gronwall inequalities.

    Standard form. If τΣ_{m<M} c_m ≤ C₁ and

        a_ℓ + τ Σ_{m≤ℓ} b_m ≤ C₂ + τ Σ_{m<ℓ} a_m c_m

    then a_ℓ + τΣ_{m≤ℓ} b_m ≤ C₂ exp(τΣ_{m<ℓ} c_m) ≤ C₂ exp(C₁). The hypothesis is checked from ℓ = 0 on (at
    ℓ = 0 it reads a₀ + τb₀ ≤ C₂), since a₀ is otherwise unconstrained.

    Weighted form. For 0 < α < 1, if τΣc ≤ C₁ and

        a_ℓ + τ Σ_{m≤ℓ} b_m ≤ C₂ + τ Σ_{m<ℓ} c_m Σ_{j≤m} α^{m−j} a_j,   ℓ ≥ 1,

    then a_ℓ + τΣ_{m≤ℓ} b_m ≤ (C₂ + a₀C₁) exp(A_α C₁) with A_α = 1/(1 − α).
"""
# Standard library imports
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Union

# Third-party imports
import numpy as np

# Package imports
from chns_fem.errors import GronwallInputError
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('gronwall')

RTOL = 1e-12


def amplification_factor(alpha: Union[float, Fraction]) -> Union[float, Fraction]:
    """
    A_α = 1/(1 − α); exact when `alpha` is a `Fraction`.

    Examples:
        >>> amplification_factor(Fraction(1, 3))
        Fraction(3, 2)
    """
    if not 0 < alpha < 1:
        raise GronwallInputError(f'alpha must lie in (0, 1), got {alpha!r}')

    if isinstance(alpha, Fraction):
        return 1 / (1 - alpha)

    return 1.0 / (1.0 - float(alpha))


def _sequence(name: str, values, length: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] != length:
        raise GronwallInputError(f'{name} must have {length} entries, got {arr.shape[0]}')

    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise GronwallInputError(f'{name} must be finite and non-negative')

    return arr


@dataclass(frozen=True)
class GronwallInput:
    """
    Sequences a (M+1 entries), b (M+1 entries), c (M entries), the step τ and the constants.

    Raises:
        GronwallInputError:
            On negative or non-finite entries, wrong lengths, τ ≤ 0, or α outside (0, 1).
    """
    a:     np.ndarray
    b:     np.ndarray
    c:     np.ndarray
    tau:   float
    C1:    float
    C2:    float
    alpha: Optional[float] = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        if a.shape[0] < 2:
            raise GronwallInputError('a needs at least two entries (M >= 1)')

        steps = a.shape[0] - 1
        object.__setattr__(self, 'a', _sequence('a', a, steps + 1))
        object.__setattr__(self, 'b', _sequence('b', self.b, steps + 1))
        object.__setattr__(self, 'c', _sequence('c', self.c, steps))

        if not np.isfinite(self.tau) or self.tau <= 0:
            raise GronwallInputError(f'tau must be positive, got {self.tau!r}')

        for name in ('C1', 'C2'):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise GronwallInputError(f'{name} must be non-negative, got {value!r}')
            object.__setattr__(self, name, float(value))

        if self.alpha is not None:
            amplification_factor(self.alpha)
            object.__setattr__(self, 'alpha', float(self.alpha))

        object.__setattr__(self, 'tau', float(self.tau))

    @property
    def steps(self) -> int:
        return self.c.shape[0]

    @property
    def budget_holds(self) -> bool:
        """
        τΣc ≤ C₁.
        """
        return self.tau * float(np.sum(self.c)) <= self.C1 * (1.0 + RTOL) + RTOL

    def lhs(self) -> np.ndarray:
        """
        a_ℓ + τΣ_{m≤ℓ} b_m for every ℓ.
        """
        return self.a + self.tau * np.cumsum(self.b)


@dataclass(frozen=True)
class GronwallReport:
    """
    Per-ℓ outcome of a check.

    Attributes:
        hypothesis_holds (np.ndarray):
            The hypothesis inequality at ℓ.

        applicable (np.ndarray):
            The budget holds and the hypothesis holds for every ℓ' ≤ ℓ, so the conclusion must hold at ℓ.

        conclusion_holds (np.ndarray):
            The conclusion inequality at ℓ.

        lhs, bound (np.ndarray):
            Both sides of the conclusion.
    """
    hypothesis_holds: np.ndarray
    applicable:       np.ndarray
    conclusion_holds: np.ndarray
    lhs:              np.ndarray
    bound:            np.ndarray

    @property
    def violations(self) -> int:
        """
        Levels where the conclusion fails although the lemma applies.
        """
        return int(np.count_nonzero(self.applicable & ~self.conclusion_holds))

    @property
    def valid(self) -> bool:
        return self.violations == 0


def _leq(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return lhs <= rhs * (1.0 + RTOL) + RTOL * np.maximum(1.0, np.abs(rhs))


def _applicable(hypothesis: np.ndarray, budget: bool, start: int) -> np.ndarray:
    running = np.logical_and.accumulate(hypothesis)
    running[:start] = False
    return running & budget


def check_gronwall_standard(data: GronwallInput) -> GronwallReport:
    """
    Evaluate the standard discrete Gronwall inequality level by level.

    Parameters:
        data (GronwallInput):
            The sequences and constants (`alpha` is ignored).

    Returns:
        GronwallReport:
            With bound_ℓ = C₂ exp(τΣ_{m<ℓ} c_m).
    """
    a, c, tau = data.a, data.c, data.tau

    weighted = np.concatenate([[0.0], np.cumsum(a[:-1] * c)])
    c_sums   = np.concatenate([[0.0], np.cumsum(c)])

    lhs        = data.lhs()
    hypothesis = _leq(lhs, data.C2 + tau * weighted)
    bound      = data.C2 * np.exp(tau * c_sums)
    conclusion = _leq(lhs, bound)

    report = GronwallReport(
        hypothesis_holds=hypothesis,
        applicable=_applicable(hypothesis, data.budget_holds, 0),
        conclusion_holds=conclusion,
        lhs=lhs,
        bound=bound,
    )

    if not report.valid:
        MOD_LOGGER.get_child('check_gronwall_standard').warning(f'{report.violations} violated levels')

    return report


def _history_sums(a: np.ndarray, alpha: float) -> np.ndarray:
    """
    s_m = Σ_{j≤m} α^{m−j} a_j, via s_m = α s_{m−1} + a_m.
    """
    out = np.empty_like(a)
    acc = 0.0
    for m, value in enumerate(a):
        acc = alpha * acc + value
        out[m] = acc

    return out


def check_gronwall_weighted(data: GronwallInput) -> GronwallReport:
    """
    Evaluate the weighted discrete Gronwall inequality level by level (ℓ ≥ 1; level 0 is never applicable).

    Raises:
        GronwallInputError:
            If `data.alpha` is missing.
    """
    if data.alpha is None:
        raise GronwallInputError('the weighted check needs alpha')

    a, c, tau, alpha = data.a, data.c, data.tau, data.alpha

    history  = _history_sums(a, alpha)
    weighted = np.concatenate([[0.0], np.cumsum(c * history[:-1])])

    lhs        = data.lhs()
    hypothesis = _leq(lhs, data.C2 + tau * weighted)
    hypothesis[0] = True

    value      = weighted_bound(data.C1, data.C2, float(a[0]), alpha)
    bound      = np.full_like(lhs, value)
    conclusion = _leq(lhs, bound)

    report = GronwallReport(
        hypothesis_holds=hypothesis,
        applicable=_applicable(hypothesis, data.budget_holds, 1),
        conclusion_holds=conclusion,
        lhs=lhs,
        bound=bound,
    )

    if not report.valid:
        MOD_LOGGER.get_child('check_gronwall_weighted').warning(f'{report.violations} violated levels')

    return report


def standard_bound(C1: float, C2: float) -> float:
    return C2 * float(np.exp(C1))


def weighted_bound(C1: float, C2: float, a0: float, alpha: float) -> float:
    """
    (C₂ + a₀C₁) exp(A_α C₁).
    """
    return (C2 + a0 * C1) * float(np.exp(float(amplification_factor(alpha)) * C1))


def standard_extremal(c: Sequence[float], tau: float, C2: float) -> np.ndarray:
    """
    The sequence saturating the standard hypothesis with b ≡ 0: a₀ = C₂, a_ℓ = C₂ + τΣ_{m<ℓ} a_m c_m.
    """
    c = np.asarray(c, dtype=float)
    a = np.empty(c.shape[0] + 1)
    a[0] = C2
    acc = 0.0
    for m in range(c.shape[0]):
        acc += a[m] * c[m]
        a[m + 1] = C2 + tau * acc

    return a


def weighted_extremal(c: Sequence[float], tau: float, C2: float, alpha: float, a0: float) -> np.ndarray:
    """
    The sequence saturating the weighted hypothesis with b ≡ 0 and a chosen a₀.
    """
    c = np.asarray(c, dtype=float)
    a = np.empty(c.shape[0] + 1)
    a[0] = a0
    history, acc = 0.0, 0.0
    for m in range(c.shape[0]):
        history = alpha * history + a[m]
        acc += c[m] * history
        a[m + 1] = C2 + tau * acc

    return a


@dataclass(frozen=True)
class SelftestSummary:
    instances:            int
    standard_violations:  int
    weighted_violations:  int
    standard_applicable:  int
    weighted_applicable:  int
    alpha_third_factor:   Fraction
    continuity_gap:       float
    monotone_in_c:        bool

    @property
    def passed(self) -> bool:
        return (self.standard_violations == 0
                and self.weighted_violations == 0
                and self.alpha_third_factor == Fraction(3, 2)
                and self.continuity_gap <= 1e-4
                and self.monotone_in_c)

    def as_rows(self) -> List[List[str]]:
        return [
            ['check', 'value'],
            ['instances', str(self.instances)],
            ['standard_applicable_levels', str(self.standard_applicable)],
            ['standard_violations', str(self.standard_violations)],
            ['weighted_applicable_levels', str(self.weighted_applicable)],
            ['weighted_violations', str(self.weighted_violations)],
            ['alpha_one_third_factor', str(self.alpha_third_factor)],
            ['continuity_gap', f'{self.continuity_gap:.16e}'],
            ['monotone_in_c', str(self.monotone_in_c)],
            ['passed', str(self.passed)],
        ]


def _random_instance(rng: np.random.Generator):
    steps = int(rng.integers(1, 41))
    tau   = float(rng.uniform(0.01, 1.0)) / steps
    c     = rng.uniform(0.0, 5.0, size=steps)
    C2    = float(rng.uniform(0.1, 2.0))
    return steps, tau, c, C2


def run_selftest(instances: int = 1000, seed: int = 0) -> SelftestSummary:
    """
    Property suites for both inequalities on extremal (saturating) random instances.

    Parameters:
        instances (int):
            Random instances per inequality.

        seed (int):
            Seed of the generator.
    """
    log = MOD_LOGGER.get_child('run_selftest')
    rng = np.random.default_rng(seed)

    std_viol = wtd_viol = std_app = wtd_app = 0
    monotone = True

    for _ in range(instances):
        steps, tau, c, C2 = _random_instance(rng)
        C1 = tau * float(np.sum(c))
        b  = np.zeros(steps + 1)

        a = standard_extremal(c, tau, C2)
        report = check_gronwall_standard(GronwallInput(a, b, c, tau, C1, C2))
        std_viol += report.violations
        std_app  += int(np.count_nonzero(report.applicable))

        bumped = c.copy()
        bumped[int(rng.integers(0, steps))] += float(rng.uniform(0.0, 1.0))
        bumped_report = check_gronwall_standard(GronwallInput(a, b, bumped, tau, tau * float(np.sum(bumped)), C2))
        monotone = monotone and bool(np.all(bumped_report.bound >= report.bound))

        alpha = float(rng.uniform(0.01, 0.99))
        a0    = float(rng.uniform(0.0, 2.0))
        aw    = weighted_extremal(c, tau, C2, alpha, a0)
        report = check_gronwall_weighted(GronwallInput(aw, b, c, tau, C1, C2, alpha))
        wtd_viol += report.violations
        wtd_app  += int(np.count_nonzero(report.applicable))

    C1, C2, a0 = 0.7, 1.3, 0.4
    continuity = abs(weighted_bound(C1, C2, a0, 1e-6) / ((C2 + a0 * C1) * np.exp(C1)) - 1.0)

    summary = SelftestSummary(
        instances=instances,
        standard_violations=std_viol,
        weighted_violations=wtd_viol,
        standard_applicable=std_app,
        weighted_applicable=wtd_app,
        alpha_third_factor=amplification_factor(Fraction(1, 3)),
        continuity_gap=float(continuity),
        monotone_in_c=monotone,
    )

    log.info(f'Gronwall selftest over {instances} instances: passed = {summary.passed}')

    return summary


__all__ = [
    'GronwallInput',
    'GronwallReport',
    'SelftestSummary',
    'amplification_factor',
    'check_gronwall_standard',
    'check_gronwall_weighted',
    'run_selftest',
    'standard_bound',
    'standard_extremal',
    'weighted_bound',
    'weighted_extremal',
]

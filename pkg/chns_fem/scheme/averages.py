"""
Time-averaging operators and the coefficient sets that define a step.
"""
from dataclasses import dataclass
from typing import NamedTuple

from chns_fem.errors import SpaceMismatchError
from chns_fem.fem import FieldVector, Splitting, chi


class Averages(NamedTuple):
    """
    delta_tau = (φ^{m+1} − φ^m)/τ
    bar       = ½φ^{m+1} + ½φ^m
    tilde     = (3/2)φ^m − ½φ^{m−1}
    check     = (3/4)φ^{m+1} + (1/4)φ^{m−1}
    """
    delta_tau: FieldVector
    bar:       FieldVector
    tilde:     FieldVector
    check:     FieldVector


def averages(new: FieldVector, curr: FieldVector, prev: FieldVector, tau: float) -> Averages:
    """
    The four averaging operators applied coefficientwise.

    Raises:
        SpaceMismatchError:
            If the three levels do not share a space.

    Examples:
        new = 2, curr = 1, prev = 0, τ = 1 gives delta_tau = 1 and bar = tilde = check = 1.5.
    """
    for other in (curr, prev):
        if other.space.kind is not new.space.kind or not other.space.same_mesh(new.space):
            raise SpaceMismatchError(f'{new!r} vs {other!r}')

    return Averages(
        delta_tau=(new - curr) / tau,
        bar=0.5 * new + 0.5 * curr,
        tilde=1.5 * curr - 0.5 * prev,
        check=0.75 * new + 0.25 * prev,
    )


@dataclass(frozen=True)
class StepCoefficients:
    """
    Weights defining one member of the stepper family.

    Attributes:
        name (str):
            Label used in logs.

        bar_new, bar_old (float):
            ū = bar_new·u^{m+1} + bar_old·u^m (likewise for p).

        tilde_curr, tilde_prev (float):
            Explicit extrapolation ũ = tilde_curr·u^m + tilde_prev·u^{m−1} (likewise φ̃).

        check_new, check_prev (float):
            φ̌ = check_new·φ^{m+1} + check_prev·φ^{m−1}.

        splitting (Splitting):
            Implicit convex nonlinearity.

        forcing_offset (float):
            Forcing evaluated at t_{m + forcing_offset}.

        predictor (float):
            Newton guess = (1 + predictor)·X^m − predictor·X^{m−1}.
    """
    name:           str
    bar_new:        float
    bar_old:        float
    tilde_curr:     float
    tilde_prev:     float
    check_new:      float
    check_prev:     float
    splitting:      Splitting
    forcing_offset: float
    predictor:      float

    def extrapolate(self, curr: FieldVector, prev: FieldVector) -> FieldVector:
        return self.tilde_curr * curr + self.tilde_prev * prev

    def predict(self, curr: FieldVector, prev: FieldVector) -> FieldVector:
        return (1.0 + self.predictor) * curr - self.predictor * prev


CRANK_NICOLSON_AB2 = StepCoefficients(
    name='crank-nicolson/adams-bashforth',
    bar_new=0.5, bar_old=0.5,
    tilde_curr=1.5, tilde_prev=-0.5,
    check_new=0.75, check_prev=0.25,
    splitting=Splitting.CHI,
    forcing_offset=0.5,
    predictor=1.0,
)

BACKWARD_EULER = StepCoefficients(
    name='backward-euler',
    bar_new=1.0, bar_old=0.0,
    tilde_curr=1.0, tilde_prev=0.0,
    check_new=1.0, check_prev=0.0,
    splitting=Splitting.CUBE,
    forcing_offset=1.0,
    predictor=0.0,
)


__all__ = [
    'Averages',
    'BACKWARD_EULER',
    'CRANK_NICOLSON_AB2',
    'StepCoefficients',
    'averages',
    'chi',
]

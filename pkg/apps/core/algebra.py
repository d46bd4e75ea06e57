"""
Álgebra do SEM - estabilidade, momentos implicados e efeitos totais.

(I - A)^{-1} nunca é aplicada a vetores por inversão explícita: usamos
``np.linalg.solve``. O raio espectral vem da autodecomposição completa
(n_v é pequeno).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from apps.core.exceptions import NumericalError
from apps.core.structures import LinearSem, Partition
from apps.core.utils import frozen, get_setting, note_warning, select, symmetrize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilityReport:
    """Raios espectrais de A_vv, A_tt e A_{xs,xs}; os blocos são None sem partição."""
    rho_full: float
    rho_tt: Optional[float]
    rho_xsxs: Optional[float]
    stable: bool
    warnings: Tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            'rho_full': self.rho_full,
            'rho_tt': self.rho_tt,
            'rho_xsxs': self.rho_xsxs,
            'stable': self.stable,
        }


@dataclass(frozen=True)
class Moments:
    """Momentos de equilíbrio (mu_v, Sigma_vv) na ordem do modelo."""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mean', frozen(self.mean))
        object.__setattr__(self, 'cov', frozen(self.cov))


@dataclass(frozen=True)
class TotalEffects:
    """tau_sx = (I - A_ss)^{-1} A_sx na ordem canônica (F antes de U)."""
    tau_sx: np.ndarray
    n_f: int
    y_pos: int
    warnings: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'tau_sx', frozen(self.tau_sx))

    @property
    def tau_fx(self) -> np.ndarray:
        return self.tau_sx[:self.n_f]

    @property
    def tau_ux(self) -> np.ndarray:
        return self.tau_sx[self.n_f:]

    @property
    def tau_yx(self) -> np.ndarray:
        """Linha de tau_sx em Y (1 x n_x)."""
        return self.tau_sx[self.y_pos:self.y_pos + 1]


def spectral_radius(matrix: np.ndarray) -> float:
    """
    Maior |autovalor| (0 para matriz vazia).

    Raises:
        NumericalError: EigenFailure se a decomposição não convergir
    """
    if matrix.size == 0:
        return 0.0
    try:
        eigenvalues = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError('EigenFailure', f'Autovalores não convergiram: {exc}')
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalError('EigenFailure', 'Autovalores não finitos')
    return float(np.max(np.abs(eigenvalues)))


def condition_guard(matrix: np.ndarray, label: str, notes: Optional[List[str]] = None) -> float:
    """Número de condição com aviso acima do limite configurado."""
    if matrix.size == 0:
        return 1.0
    with np.errstate(divide='ignore', invalid='ignore'):
        condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > get_setting('COND_WARNING'):
        note_warning(notes, f'{label} mal condicionada (cond={condition:.3g})')
    return condition


def _radius_warning(rho: float, label: str, notes: List[str]) -> None:
    if rho > get_setting('RHO_WARNING') and rho < 1.0:
        note_warning(notes, f'Raio espectral de {label} próximo de 1 ({rho:.6g}): (I-A)^-1 numericamente explosiva')


def is_convergent(rho: float) -> bool:
    return rho < 1.0 - get_setting('TOL_STABILITY')


def check_stability(sem: LinearSem, part: Optional[Partition] = None) -> StabilityReport:
    """
    Diagnóstico de estabilidade: A_tt e A_{xs,xs} precisam ser convergentes.

    Sem partição, apenas o raio de A_vv decide.
    """
    notes: List[str] = []
    rho_full = spectral_radius(sem.coeffs)
    if part is None:
        _radius_warning(rho_full, 'A_vv', notes)
        return StabilityReport(rho_full, None, None, is_convergent(rho_full), tuple(notes))

    xs_idx = part.s_idx + part.x_idx
    rho_tt = spectral_radius(select(sem.coeffs, part.t_idx, part.t_idx))
    rho_xsxs = spectral_radius(select(sem.coeffs, xs_idx, xs_idx))
    _radius_warning(rho_tt, 'A_tt', notes)
    _radius_warning(rho_xsxs, 'A_{xs,xs}', notes)
    stable = is_convergent(max(rho_tt, rho_xsxs))
    logger.debug(f'Estabilidade: rho_full={rho_full:.6g} rho_tt={rho_tt:.6g} rho_xsxs={rho_xsxs:.6g}')
    return StabilityReport(rho_full, rho_tt, rho_xsxs, stable, tuple(notes))


def _require_stable(sem: LinearSem, code: str = 'Unstable') -> None:
    rho = spectral_radius(sem.coeffs)
    if not is_convergent(rho):
        raise NumericalError(code, f'Modelo instável: raio espectral {rho:.10g} >= 1', 'A_vv')


def implied_moments(sem: LinearSem) -> Moments:
    """
    Momentos de equilíbrio: mu_v = (I-A)^{-1} mu_pa, Sigma_vv = (I-A)^{-1} Psi (I-A)'^{-1}.

    Raises:
        NumericalError: Unstable, SingularSystem
    """
    _require_stable(sem)
    i_minus_a = np.eye(sem.n_v) - sem.coeffs
    notes: List[str] = []
    condition = condition_guard(i_minus_a, 'I - A', notes)
    if not np.isfinite(condition):
        raise NumericalError('SingularSystem', 'I - A numericamente singular', 'I - A')
    try:
        mean = np.linalg.solve(i_minus_a, sem.intercepts)
        left = np.linalg.solve(i_minus_a, sem.dist_cov)
        cov = np.linalg.solve(i_minus_a, left.T).T
    except np.linalg.LinAlgError:
        raise NumericalError('SingularSystem', 'I - A numericamente singular', 'I - A')
    return Moments(mean=mean, cov=symmetrize(cov))


def total_effects(sem: LinearSem, part: Partition) -> TotalEffects:
    """
    Efeitos totais tau_sx = (I - A_ss)^{-1} A_sx.

    Para modelos acíclicos cada entrada é a soma, sobre os caminhos dirigidos
    de X_j a S_i que não passam por X \\ {X_j}, dos produtos dos coeficientes.

    Raises:
        NumericalError: Unstable se A_ss não for convergente
    """
    a_ss = select(sem.coeffs, part.s_idx, part.s_idx)
    a_sx = select(sem.coeffs, part.s_idx, part.x_idx)
    rho_ss = spectral_radius(a_ss)
    if not is_convergent(rho_ss):
        raise NumericalError('Unstable', f'A_ss não convergente: raio {rho_ss:.10g}', 'A_ss')
    notes: List[str] = []
    i_minus_a = np.eye(part.n_s) - a_ss
    condition_guard(i_minus_a, 'I - A_ss', notes)
    try:
        tau_sx = np.linalg.solve(i_minus_a, a_sx)
    except np.linalg.LinAlgError:
        raise NumericalError('SingularSystem', 'I - A_ss numericamente singular', 'I - A_ss')
    return TotalEffects(tau_sx=tau_sx, n_f=part.n_f, y_pos=part.y_pos, warnings=tuple(notes))


def neumann_partial_sum(matrix: np.ndarray, order: int) -> np.ndarray:
    """Soma parcial sum_{k=0..order} A^k da série de Neumann."""
    total = np.eye(matrix.shape[0])
    power = np.eye(matrix.shape[0])
    for _ in range(order):
        power = power @ matrix
        total = total + power
    return total

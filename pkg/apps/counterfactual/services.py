"""
Serviço Contrafactual - abdução, ação e predição em forma fechada.

O caminho de referência é a expressão explícita em blocos:

    E(S | do, H)   = K^{-1} { tau x + L mu_{v.r_h} }
    var(S | do, H) = K^{-1} [ tau Psi* tau' + L Sigma_{vv.r_h} L' ] K'^{-1}

com K = I - tau C_xs e L = (I, -tau, tau C_xt) na ordem canônica (S, X, T).
O sistema modificado (ModifiedSem) é resolvido numericamente como segundo
caminho; os dois precisam coincidir.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.core.algebra import (
    Moments,
    StabilityReport,
    TotalEffects,
    check_stability,
    condition_guard,
    implied_moments,
    is_convergent,
    spectral_radius,
    total_effects,
)
from apps.core.exceptions import NumericalError
from apps.core.structures import ControlPlan, Evidence, LinearSem, Partition
from apps.core.utils import frozen, get_setting, note_warning, select, symmetrize
from apps.evidence.services import ConditionalMoments, Provenance, SamplingConfig, condition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DisturbanceMoments:
    """Momentos de eps_v dado H ∈ R_h, na ordem do modelo."""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mean', frozen(self.mean))
        object.__setattr__(self, 'cov', frozen(self.cov))

    def reconstruct(self, sem: LinearSem) -> Moments:
        """Volta aos momentos de V: (I-A)^{-1}(mu_pa + mean) e (I-A)^{-1} cov (I-A)'^{-1}."""
        i_minus_a = np.eye(sem.n_v) - sem.coeffs
        mean = np.linalg.solve(i_minus_a, sem.intercepts + self.mean)
        left = np.linalg.solve(i_minus_a, self.cov)
        return Moments(mean=mean, cov=symmetrize(np.linalg.solve(i_minus_a, left.T).T))


@dataclass(frozen=True)
class ModifiedSem:
    """
    Sistema do mundo contrafactual.

    As linhas de X trazem só os ganhos (a nas colunas de F, b nas de W); o
    intercepto de X é x. Os distúrbios de S e T mantêm os momentos abduzidos
    e eps*_x tem covariância Psi*, sem covariância com os demais.
    """
    names: Tuple[str, ...]
    x_idx: Tuple[int, ...]
    coeffs: np.ndarray
    intercepts: np.ndarray
    dist_mean: np.ndarray
    dist_cov: np.ndarray

    def __post_init__(self):
        for name in ('coeffs', 'intercepts', 'dist_mean', 'dist_cov'):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def n_v(self) -> int:
        return len(self.names)

    @property
    def radius(self) -> float:
        return spectral_radius(self.coeffs)

    def as_linear_sem(self) -> LinearSem:
        """Exporta como LinearSem, com a média dos distúrbios somada aos interceptos."""
        return LinearSem(
            names=self.names,
            coeffs=self.coeffs,
            intercepts=self.intercepts + self.dist_mean,
            dist_cov=self.dist_cov,
        )


@dataclass(frozen=True)
class CounterfactualMoments:
    """
    E(S | do, H ∈ R_h) e var(S | do, H ∈ R_h) na ordem do usuário.

    ``metadata`` leva proveniência dos momentos condicionais, eco do plano,
    raios espectrais e avisos numéricos.
    """
    names: Tuple[str, ...]
    mean_s: np.ndarray
    cov_s: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'names', tuple(self.names))
        object.__setattr__(self, 'mean_s', frozen(self.mean_s))
        object.__setattr__(self, 'cov_s', frozen(self.cov_s))

    def position(self, name: str) -> int:
        return self.names.index(name)

    def mean_of(self, name: str) -> float:
        return float(self.mean_s[self.position(name)])

    def var_of(self, name: str) -> float:
        k = self.position(name)
        return float(self.cov_s[k, k])

    @property
    def warnings(self) -> List[str]:
        return list(self.metadata.get('warnings', []))


# =============================================================================
# ABDUÇÃO E AÇÃO
# =============================================================================

def abduct(sem: LinearSem, cm: ConditionalMoments) -> DisturbanceMoments:
    """
    Atualiza a distribuição dos distúrbios: mean = (I-A) mu_{v.r_h} - mu_pa e
    cov = (I-A) Sigma_{vv.r_h} (I-A)'.
    """
    i_minus_a = np.eye(sem.n_v) - sem.coeffs
    mean = i_minus_a @ np.asarray(cm.mean) - sem.intercepts
    cov = i_minus_a @ np.asarray(cm.cov) @ i_minus_a.T
    return DisturbanceMoments(mean=mean, cov=symmetrize(cov))


def act(sem: LinearSem, part: Partition, plan: ControlPlan, dm: DisturbanceMoments) -> ModifiedSem:
    """
    Substitui as equações de X pelo plano X = x + a F + b W + eps*.

    Raises:
        ModelValidationError: DimensionMismatch
    """
    plan.check_dimensions(part)
    x_idx = list(part.x_idx)

    coeffs = np.array(sem.coeffs)
    coeffs[x_idx, :] = 0.0
    if part.n_f:
        coeffs[np.ix_(x_idx, list(part.f_idx))] = plan.gain_f
    if part.n_w:
        coeffs[np.ix_(x_idx, list(part.w_idx))] = plan.gain_w

    intercepts = np.array(sem.intercepts)
    intercepts[x_idx] = plan.x_const

    dist_mean = np.array(dm.mean)
    dist_mean[x_idx] = 0.0

    dist_cov = np.array(dm.cov)
    dist_cov[x_idx, :] = 0.0
    dist_cov[:, x_idx] = 0.0
    dist_cov[np.ix_(x_idx, x_idx)] = plan.noise_cov

    return ModifiedSem(
        names=sem.names,
        x_idx=part.x_idx,
        coeffs=coeffs,
        intercepts=intercepts,
        dist_mean=dist_mean,
        dist_cov=dist_cov,
    )


def modified_sem_moments(modified: ModifiedSem) -> Moments:
    """
    Equilíbrio do sistema modificado, em todas as variáveis (ordem do modelo).

    Raises:
        NumericalError: SingularFeedback se I - A_mod for singular
    """
    notes: List[str] = []
    i_minus_a = np.eye(modified.n_v) - modified.coeffs
    condition = condition_guard(i_minus_a, 'I - A (sistema modificado)', notes)
    if not np.isfinite(condition):
        raise NumericalError('SingularFeedback', 'Sistema modificado singular', 'I - A_mod')
    try:
        mean = np.linalg.solve(i_minus_a, modified.intercepts + modified.dist_mean)
        left = np.linalg.solve(i_minus_a, modified.dist_cov)
        cov = np.linalg.solve(i_minus_a, left.T).T
    except np.linalg.LinAlgError:
        raise NumericalError('SingularFeedback', 'Sistema modificado singular', 'I - A_mod')
    return Moments(mean=mean, cov=symmetrize(cov))


# =============================================================================
# PREDIÇÃO
# =============================================================================

def plan_radius(te: TotalEffects, gain_f: np.ndarray) -> float:
    """Raio espectral de a tau_fx (0 quando F é vazio)."""
    if gain_f.size == 0:
        return 0.0
    return spectral_radius(gain_f @ te.tau_fx)


def feedback_matrix(te: TotalEffects, c_xs: np.ndarray) -> np.ndarray:
    """K = I - tau_sx C_xs."""
    return np.eye(te.tau_sx.shape[0]) - te.tau_sx @ c_xs


def _solve_feedback(k_matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(k_matrix, rhs)
    except np.linalg.LinAlgError:
        raise NumericalError('SingularFeedback', 'I - tau_sx C_xs singular', 'I - tau C_xs')


def _metadata(
    plan: ControlPlan,
    stability: Optional[StabilityReport],
    radius: Optional[float],
    provenance: Optional[Provenance],
    notes: Sequence[str],
) -> Dict[str, Any]:
    metadata: Dict[str, Any] = {'plan': plan.echo()}
    if provenance is not None:
        metadata['provenance'] = provenance.as_dict()
    if stability is not None:
        metadata['stability'] = stability.as_dict()
    if radius is not None:
        metadata['plan_radius'] = radius
    metadata['warnings'] = list(notes)
    return metadata


def predict(sem: LinearSem, part: Partition, plan: ControlPlan, cm: ConditionalMoments) -> CounterfactualMoments:
    """
    Momentos contrafactuais de S sob o plano, dados os momentos condicionais.

    Args:
        sem: Modelo
        part: Partição (F, U, X, W, Z)
        plan: Plano de controle
        cm: Momentos condicionais mu_{v.r_h}, Sigma_{vv.r_h}

    Returns:
        CounterfactualMoments na ordem do usuário

    Raises:
        NumericalError: NotStable, PlanUnstable, SingularFeedback, Unstable
        ModelValidationError: DimensionMismatch
    """
    notes: List[str] = list(cm.warnings)
    c_xs, c_xt = plan.padded(part)
    stability = check_stability(sem, part)
    if not stability.stable:
        rho = max(stability.rho_tt, stability.rho_xsxs)
        raise NumericalError('NotStable', f'Modelo instável: raio espectral {rho:.10g} >= 1', 'A_vv')
    notes.extend(stability.warnings)
    te = total_effects(sem, part)
    notes.extend(te.warnings)

    radius = plan_radius(te, plan.gain_f)
    if not is_convergent(radius):
        raise NumericalError('PlanUnstable', f'Raio espectral de a tau_fx = {radius:.10g} >= 1', 'plan.a')
    if radius > get_setting('RHO_WARNING'):
        note_warning(notes, f'Raio de a tau_fx próximo de 1 ({radius:.6g})')

    tau = np.asarray(te.tau_sx)
    k_matrix = feedback_matrix(te, c_xs)
    condition = condition_guard(k_matrix, 'I - tau C_xs', notes)
    if not np.isfinite(condition):
        raise NumericalError('SingularFeedback', 'I - tau_sx C_xs singular', 'I - tau C_xs')

    lift = np.hstack([np.eye(part.n_s), -tau, tau @ c_xt])
    mean_c = part.to_canonical_vector(cm.mean)
    cov_c = part.to_canonical_matrix(cm.cov)

    mean = _solve_feedback(k_matrix, tau @ plan.x_const + lift @ mean_c)
    inner = tau @ plan.noise_cov @ tau.T + lift @ cov_c @ lift.T
    left = _solve_feedback(k_matrix, inner)
    cov = symmetrize(_solve_feedback(k_matrix, left.T).T)

    names, mean_user, cov_user = part.s_to_user(mean, cov)
    return CounterfactualMoments(
        names=names,
        mean_s=mean_user,
        cov_s=cov_user,
        metadata=_metadata(plan, stability, radius, cm.provenance, notes),
    )


def predict_via_modified(
    sem: LinearSem,
    part: Partition,
    plan: ControlPlan,
    cm: ConditionalMoments,
) -> CounterfactualMoments:
    """Mesmo resultado de ``predict`` pelo equilíbrio numérico do sistema modificado."""
    modified = act(sem, part, plan, abduct(sem, cm))
    moments = modified_sem_moments(modified)
    s_idx = list(part.s_idx)
    names, mean, cov = part.s_to_user(np.asarray(moments.mean)[s_idx], select(np.asarray(moments.cov), s_idx, s_idx))
    return CounterfactualMoments(
        names=names,
        mean_s=mean,
        cov_s=cov,
        metadata=_metadata(plan, None, modified.radius, cm.provenance, list(cm.warnings)),
    )


def consistency_gap(first: CounterfactualMoments, second: CounterfactualMoments) -> float:
    """Maior diferença absoluta entre médias e covariâncias de dois resultados."""
    return float(max(
        np.max(np.abs(first.mean_s - second.mean_s), initial=0.0),
        np.max(np.abs(first.cov_s - second.cov_s), initial=0.0),
    ))


def counterfactual_query(
    sem: LinearSem,
    part: Partition,
    plan: ControlPlan,
    evidence: Evidence,
    cfg: Optional[SamplingConfig] = None,
) -> CounterfactualMoments:
    """Os três passos compostos: condiciona a evidência e prediz sob o plano."""
    cm = condition(sem, evidence, cfg)
    logger.info(f'Momentos condicionais: {cm.provenance.kind}')
    return predict(sem, part, plan, cm)


def interventional_moments(sem: LinearSem, part: Partition, x_const: Sequence[float]) -> CounterfactualMoments:
    """
    Momentos de do(X = x) sem evidência:
    mu_s + tau (x - mu_x) e Sigma_ss - tau Sigma_xs - Sigma_sx tau' + tau Sigma_xx tau'.
    """
    moments = implied_moments(sem)
    te = total_effects(sem, part)
    tau = np.asarray(te.tau_sx)
    s_idx, x_idx = list(part.s_idx), list(part.x_idx)
    x_const = np.asarray(x_const, dtype=float)

    cov = np.asarray(moments.cov)
    mean = np.asarray(moments.mean)[s_idx] + tau @ (x_const - np.asarray(moments.mean)[x_idx])
    sigma_sx = select(cov, s_idx, x_idx)
    cov_s = select(cov, s_idx, s_idx) - tau @ sigma_sx.T - sigma_sx @ tau.T + tau @ select(cov, x_idx, x_idx) @ tau.T

    names, mean_user, cov_user = part.s_to_user(mean, symmetrize(cov_s))
    plan = ControlPlan.build(part, x_const)
    return CounterfactualMoments(
        names=names,
        mean_s=mean_user,
        cov_s=cov_user,
        metadata=_metadata(plan, None, 0.0, Provenance(kind='Unconditional'), list(te.warnings)),
    )

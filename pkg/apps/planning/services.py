"""
Serviço de Planejamento - plano ótimo de variância mínima para Y.

Para um ganho a dado, o ganho b* em W resolve

    M (b - B_xw) = -(k B_fw + B_yw),   k = tau_yx (I - a tau_fx)^{-1} a,
                                         M = k tau_fx + tau_yx,

e anula cov(Y, W | do, H). Com mais de uma equação livre usamos a solução de
norma mínima. Todas as matrizes de S estão na ordem canônica (F, U).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.core.algebra import TotalEffects, is_convergent, total_effects
from apps.core.exceptions import NumericalError
from apps.core.sampling import chunk_rng, run_chunks
from apps.core.structures import ControlPlan, LinearSem, Partition
from apps.core.utils import frozen, get_setting, inverse_or_pinv, note_warning, select, symmetrize
from apps.counterfactual.services import feedback_matrix, plan_radius, predict
from apps.evidence.services import ConditionalMoments

logger = logging.getLogger(__name__)

# Abaixo disso M é tratado como nulo.
ZERO_ROW = 1e-12


@dataclass(frozen=True)
class RegressionCoefs:
    """Coeficientes de regressão condicionais B_sx, B_sw e B_xw (dado H ∈ R_h)."""
    b_sx: np.ndarray
    b_sw: np.ndarray
    b_xw: np.ndarray
    n_f: int
    y_pos: int
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        for name in ('b_sx', 'b_sw', 'b_xw'):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def b_yw(self) -> np.ndarray:
        return self.b_sw[self.y_pos:self.y_pos + 1]

    @property
    def b_fw(self) -> np.ndarray:
        return self.b_sw[:self.n_f]


@dataclass(frozen=True)
class OptimalPlanResult:
    """
    Plano ótimo para um ganho a e seus momentos em Y.

    sigma_star, d1 e d2 estão na ordem canônica de S; ``s_names`` traz os
    rótulos correspondentes.
    """
    b_star: np.ndarray
    plan: ControlPlan
    mean_y: float
    var_y: float
    sigma_star: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    m_row: np.ndarray
    k_row: np.ndarray
    s_names: Tuple[str, ...]
    y_name: str
    residual: float
    plan_radius: float
    min_norm: bool = False
    degenerate: bool = False
    warnings: Tuple[str, ...] = ()

    def metadata(self) -> Dict[str, Any]:
        return {
            'plan': self.plan.echo(),
            'plan_radius': self.plan_radius,
            'eq_residual': self.residual,
            'min_norm_solution': self.min_norm,
            'degenerate_m': self.degenerate,
            'warnings': list(self.warnings),
        }


@dataclass(frozen=True)
class MinimalityReport:
    var_star: float
    best_candidate_var: float
    n_candidates: int
    violations: int
    passed: bool
    seed: int


# =============================================================================
# BLOCOS AUXILIARES
# =============================================================================

def regression_coefs(cm: ConditionalMoments, part: Partition) -> RegressionCoefs:
    """
    B_sx = Sigma_sx Sigma_xx^{-1}, B_sw = Sigma_sw Sigma_ww^{-1}, B_xw = Sigma_xw Sigma_ww^{-1}.

    Covariâncias condicionais singulares caem na pseudoinversa com aviso
    SingularConditionalCov (evidência pontual em W zera sua variância).
    """
    notes: List[str] = []
    cov = np.asarray(cm.cov)
    s_idx, x_idx, w_idx = list(part.s_idx), list(part.x_idx), list(part.w_idx)

    inv_xx, pinv_xx = inverse_or_pinv(select(cov, x_idx, x_idx), 'Sigma_xx.r_h', notes)
    inv_ww, pinv_ww = inverse_or_pinv(select(cov, w_idx, w_idx), 'Sigma_ww.r_h', notes)
    if pinv_xx or pinv_ww:
        notes.append('SingularConditionalCov: pseudoinversa usada nos coeficientes de regressão')

    return RegressionCoefs(
        b_sx=select(cov, s_idx, x_idx) @ inv_xx,
        b_sw=select(cov, s_idx, w_idx) @ inv_ww,
        b_xw=select(cov, x_idx, w_idx) @ inv_ww,
        n_f=part.n_f,
        y_pos=part.y_pos,
        warnings=tuple(notes),
    )


def _gain_inverse(te: TotalEffects, gain_f: np.ndarray) -> np.ndarray:
    """(I - a tau_fx)^{-1} a, com F vazio dando a matriz n_x x 0."""
    n_x = te.tau_sx.shape[1]
    if gain_f.size == 0:
        return np.zeros((n_x, 0))
    return np.linalg.solve(np.eye(n_x) - gain_f @ te.tau_fx, gain_f)


def effective_rows(te: TotalEffects, gain_f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linhas k = tau_yx (I - a tau_fx)^{-1} a (1 x n_f) e M = k tau_fx + tau_yx (1 x n_x).
    """
    k_row = te.tau_yx @ _gain_inverse(te, gain_f)
    m_row = k_row @ te.tau_fx + te.tau_yx
    return k_row, m_row


def d_blocks(te: TotalEffects, gain_f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    D1 = I + tau_fx (I - a tau_fx)^{-1} a e D2 = tau_ux (I - a tau_fx)^{-1} a,
    com (I - tau_sx C_xs)^{-1} = [[D1, 0], [D2, I]].
    """
    inner = _gain_inverse(te, gain_f)
    n_f = te.n_f
    return np.eye(n_f) + te.tau_fx @ inner, te.tau_ux @ inner


def gain_radius_profile(te: TotalEffects, gain_f: np.ndarray, scales: Sequence[float]) -> List[Tuple[float, float]]:
    """Raio de s a tau_fx para cada escala s, para ajudar na escolha de um a admissível."""
    return [(float(scale), plan_radius(te, scale * np.asarray(gain_f))) for scale in scales]


def _require_admissible(te: TotalEffects, gain_f: np.ndarray) -> float:
    radius = plan_radius(te, gain_f)
    if not is_convergent(radius):
        raise NumericalError('InadmissibleGain', f'Raio de a tau_fx = {radius:.10g} >= 1', 'plan.a')
    return radius


# =============================================================================
# GANHO ÓTIMO
# =============================================================================

def solve_optimal_b(
    te: TotalEffects,
    rc: RegressionCoefs,
    gain_f: np.ndarray,
    notes: Optional[List[str]] = None,
) -> np.ndarray:
    """
    Resolve M (b - B_xw) = -(k B_fw + B_yw) pela solução de norma mínima.

    Args:
        te: Efeitos totais
        rc: Coeficientes de regressão condicionais
        gain_f: Ganho a (n_x x n_f)
        notes: Lista de avisos do resultado (opcional)

    Returns:
        b* (n_x x n_w)

    Raises:
        NumericalError: InadmissibleGain
    """
    _require_admissible(te, gain_f)
    k_row, m_row = effective_rows(te, gain_f)
    rhs = -(k_row @ rc.b_fw + rc.b_yw)

    norm = float(m_row @ m_row.T)
    if norm < ZERO_ROW:
        note_warning(notes, 'DegenerateM: Y não é afetada por X, b não influencia var(Y); usando b = B_xw')
        return np.array(rc.b_xw)
    if m_row.shape[1] > 1:
        note_warning(notes, 'Equação do ganho subdeterminada: solução de norma mínima')
    return rc.b_xw + m_row.T @ rhs / norm


def gain_residual(te: TotalEffects, rc: RegressionCoefs, gain_f: np.ndarray, gain_w: np.ndarray) -> float:
    """Maior resíduo absoluto da equação do ganho ótimo."""
    k_row, m_row = effective_rows(te, gain_f)
    residual = m_row @ (gain_w - rc.b_xw) + k_row @ rc.b_fw + rc.b_yw
    return float(np.max(np.abs(residual), initial=0.0))


def compute_sigma_star(
    te: TotalEffects,
    rc: RegressionCoefs,
    cm: ConditionalMoments,
    part: Partition,
    noise_cov: np.ndarray,
) -> np.ndarray:
    """
    Sigma*_ss = Sigma_ss + tau Psi* tau' - B_sx Sigma_xx B_sx' + (tau - B_sx) Sigma_xx (tau - B_sx)'
                - (B_sw - tau B_xw) Sigma_ww (B_sw - tau B_xw)'.
    """
    cov = np.asarray(cm.cov)
    s_idx, x_idx, w_idx = list(part.s_idx), list(part.x_idx), list(part.w_idx)
    tau = np.asarray(te.tau_sx)
    sigma_xx = select(cov, x_idx, x_idx)
    sigma_ww = select(cov, w_idx, w_idx)

    spread = tau - rc.b_sx
    w_term = rc.b_sw - tau @ rc.b_xw
    sigma_star = (
        select(cov, s_idx, s_idx)
        + tau @ noise_cov @ tau.T
        - rc.b_sx @ sigma_xx @ rc.b_sx.T
        + spread @ sigma_xx @ spread.T
        - w_term @ sigma_ww @ w_term.T
    )
    return symmetrize(sigma_star)


def _y_row(part: Partition, k_row: np.ndarray) -> np.ndarray:
    """Linha de Y em (I - tau C_xs)^{-1}: e_y + (k, 0)."""
    row = np.zeros(part.n_s)
    row[part.y_pos] = 1.0
    row[:part.n_f] += k_row.reshape(-1)
    return row


def _w_loading(te: TotalEffects, rc: RegressionCoefs, gain_w: np.ndarray) -> np.ndarray:
    """G = tau b + B_sw - tau B_xw (n_s x n_w)."""
    tau = np.asarray(te.tau_sx)
    return tau @ gain_w + rc.b_sw - tau @ rc.b_xw


def optimal_plan_moments(
    sem: LinearSem,
    part: Partition,
    cm: ConditionalMoments,
    gain_f: Any,
    x_const: Any,
    noise_cov: Any = None,
    te: Optional[TotalEffects] = None,
    rc: Optional[RegressionCoefs] = None,
) -> OptimalPlanResult:
    """
    Plano ótimo para o ganho a e os momentos de Y sob ele.

    E(Y) = mu_y + k mu_f + M (x - mu_x + b* mu_w) e
    var(Y) = sigma*_yy + 2 k Sigma*_fy + k Sigma*_ff k'. O resultado é
    conferido contra ``predict`` no mesmo plano.

    Raises:
        NumericalError: InadmissibleGain, InternalInconsistency
    """
    notes: List[str] = list(cm.warnings)
    base = ControlPlan.build(part, x_const, gain_f=gain_f, noise_cov=noise_cov)
    te = te or total_effects(sem, part)
    rc = rc or regression_coefs(cm, part)
    notes.extend(rc.warnings)
    radius = _require_admissible(te, base.gain_f)

    b_star = solve_optimal_b(te, rc, base.gain_f, notes)
    plan = base.with_gain_w(b_star)
    k_row, m_row = effective_rows(te, plan.gain_f)
    sigma_star = compute_sigma_star(te, rc, cm, part, plan.noise_cov)
    d1, d2 = d_blocks(te, plan.gain_f)

    mean = np.asarray(cm.mean)
    mu_f = mean[list(part.f_idx)]
    mu_x = mean[list(part.x_idx)]
    mu_w = mean[list(part.w_idx)]
    mean_y = float(
        mean[part.y_idx]
        + k_row.reshape(-1) @ mu_f
        + m_row.reshape(-1) @ (plan.x_const - mu_x + plan.gain_w @ mu_w)
    )

    row = _y_row(part, k_row)
    loading = row @ _w_loading(te, rc, plan.gain_w)
    sigma_ww = select(np.asarray(cm.cov), list(part.w_idx), list(part.w_idx))
    var_y = float(row @ sigma_star @ row + loading @ sigma_ww @ loading)
    if var_y < -1e-8:
        raise NumericalError('InternalInconsistency', f'var(Y) negativa: {var_y:.6g}', part.y_name)

    degenerate = float(m_row @ m_row.T) < ZERO_ROW
    result = OptimalPlanResult(
        b_star=b_star,
        plan=plan,
        mean_y=mean_y,
        var_y=max(var_y, 0.0),
        sigma_star=sigma_star,
        d1=d1,
        d2=d2,
        m_row=m_row,
        k_row=k_row,
        s_names=tuple(part.labels(part.s_idx)),
        y_name=part.y_name,
        residual=0.0 if degenerate else gain_residual(te, rc, plan.gain_f, b_star),
        plan_radius=radius,
        min_norm=part.n_x > 1,
        degenerate=degenerate,
        warnings=tuple(notes),
    )
    _cross_check(sem, part, cm, result)
    return result


def _cross_check(sem: LinearSem, part: Partition, cm: ConditionalMoments, result: OptimalPlanResult) -> None:
    reference = predict(sem, part, result.plan, cm)
    tol = get_setting('CONSISTENCY_TOL')
    for label, ours, theirs in (
        ('mean_y', result.mean_y, reference.mean_of(part.y_name)),
        ('var_y', result.var_y, reference.var_of(part.y_name)),
    ):
        if abs(ours - theirs) > tol * max(1.0, abs(theirs)):
            raise NumericalError(
                'InternalInconsistency',
                f'{label} do plano ótimo ({ours:.17g}) difere da predição geral ({theirs:.17g})',
                label,
            )


def solve_target_x(result: OptimalPlanResult, y0: float, base_x: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    x que leva E(Y | do) ao alvo y0 sob o plano ótimo.

    A média é afim em x (mean_y = c0 + M x); o ajuste parte de ``base_x``
    (zeros por padrão) e tem norma mínima quando há mais de um tratamento.

    Raises:
        NumericalError: UnreachableTarget quando M = 0 e y0 difere da média forçada
    """
    m_row = result.m_row.reshape(-1)
    base = np.zeros(m_row.shape[0]) if base_x is None else np.asarray(base_x, dtype=float)
    offset = result.mean_y - float(m_row @ result.plan.x_const)
    gap = float(y0) - (offset + float(m_row @ base))

    norm = float(m_row @ m_row)
    if norm < ZERO_ROW:
        if abs(gap) <= get_setting('CONSISTENCY_TOL') * max(1.0, abs(float(y0))):
            return base
        raise NumericalError(
            'UnreachableTarget',
            f'Y não responde a X: média fixa em {offset:.6g}, alvo {float(y0):.6g}',
            result.y_name,
        )
    return base + m_row * gap / norm


def check_w_decorrelation(
    sem: LinearSem,
    part: Partition,
    plan: ControlPlan,
    cm: ConditionalMoments,
    te: Optional[TotalEffects] = None,
    rc: Optional[RegressionCoefs] = None,
) -> np.ndarray:
    """
    cov(Y, W | do, H ∈ R_h): linha de Y em (I - tau C_xs)^{-1}(tau b + B_sw - tau B_xw) Sigma_ww.

    Sob b* todas as entradas se anulam. ``te`` e ``rc`` já calculados podem
    ser reaproveitados.
    """
    if part.n_w == 0:
        return np.zeros(0)
    te = te or total_effects(sem, part)
    rc = rc or regression_coefs(cm, part)
    k_row, _ = effective_rows(te, plan.gain_f)
    row = _y_row(part, k_row)
    sigma_ww = select(np.asarray(cm.cov), list(part.w_idx), list(part.w_idx))
    return row @ _w_loading(te, rc, plan.gain_w) @ sigma_ww


def variance_for_gain(sem: LinearSem, part: Partition, cm: ConditionalMoments, plan: ControlPlan) -> float:
    """var(Y | do, H) sob um plano qualquer, pela predição geral."""
    return predict(sem, part, plan, cm).var_of(part.y_name)


def minimality_check(
    sem: LinearSem,
    part: Partition,
    cm: ConditionalMoments,
    result: OptimalPlanResult,
    n_candidates: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> MinimalityReport:
    """
    Compara var(Y; b*) com var(Y; b) para ganhos b sorteados ao redor de b*.

    Cada candidato usa seu próprio gerador, então o resultado não depende de
    ``workers``.
    """
    scale = max(1.0, float(np.max(np.abs(result.b_star), initial=0.0)))
    var_star = variance_for_gain(sem, part, cm, result.plan)

    def evaluate(index: int, _size: int) -> float:
        rng = chunk_rng(seed, index)
        candidate = result.b_star + scale * rng.standard_normal(result.b_star.shape)
        return variance_for_gain(sem, part, cm, result.plan.with_gain_w(candidate))

    variances = run_chunks(evaluate, [1] * n_candidates, workers)
    violations = sum(1 for value in variances if var_star > value + 1e-10)
    if violations:
        logger.warning(f'⚠️ {violations} candidatos com var(Y) menor que a do plano ótimo')
    return MinimalityReport(
        var_star=var_star,
        best_candidate_var=float(min(variances)) if variances else var_star,
        n_candidates=n_candidates,
        violations=violations,
        passed=violations == 0,
        seed=seed,
    )

"""
Serviço Oráculo - simulação de mundos gêmeos.

Cada amostra sorteia eps_v, resolve o mundo real V = (I-A)^{-1}(mu_pa + eps),
aceita se V_H ∈ R_h e resolve o mundo contrafactual com os mesmos distúrbios
nas equações fora de X e um eps*_x novo. Os blocos são sorteados com
geradores derivados de (seed, bloco, fluxo) e reduzidos na ordem do índice.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from apps.core.algebra import implied_moments, is_convergent, spectral_radius, total_effects
from apps.core.exceptions import ModelValidationError, NumericalError, OracleMismatch
from apps.core.sampling import (
    check_family,
    chunk_rng,
    chunk_sizes,
    in_box,
    run_chunks,
    solve_batch,
    standard_draws,
)
from apps.core.structures import ControlPlan, Evidence, LinearSem, Partition
from apps.core.utils import frozen, get_setting, select, symmetric_factor, symmetrize
from apps.counterfactual.services import CounterfactualMoments, DisturbanceMoments, act, plan_radius, predict
from apps.evidence.services import (
    ConditionalMoments,
    Provenance,
    SamplingConfig,
    condition,
    condition_none,
    moments_from_samples,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 1000
MODES = ('self_consistent', 'independent')

REAL_STREAM = 0
PLAN_STREAM = 1


@dataclass(frozen=True)
class TwinConfig:
    """Parâmetros da simulação; ``None`` usa SEMPLAN_SETTINGS."""
    n_samples: Optional[int] = None
    seed: Optional[int] = None
    family: Optional[str] = None
    chunk_size: Optional[int] = None
    workers: Optional[int] = None

    def resolved(self) -> 'TwinConfig':
        n_samples = int(self.n_samples if self.n_samples is not None else get_setting('N_SAMPLES'))
        if n_samples < MIN_SAMPLES:
            raise ModelValidationError('MalformedInput', f'n_samples precisa ser >= {MIN_SAMPLES}', n_samples)
        return TwinConfig(
            n_samples=n_samples,
            seed=int(self.seed if self.seed is not None else get_setting('SEED')),
            family=check_family(self.family or get_setting('FAMILY')),
            chunk_size=int(self.chunk_size or get_setting('CHUNK_SIZE')),
            workers=int(self.workers or get_setting('WORKERS')),
        )

    def sampling(self, seed_offset: int = 0) -> SamplingConfig:
        return SamplingConfig(
            n_samples=self.n_samples,
            seed=None if self.seed is None else self.seed + seed_offset,
            family=self.family,
            chunk_size=self.chunk_size,
            workers=self.workers,
        )


@dataclass(frozen=True)
class EmpiricalMoments:
    """
    Momentos amostrais do mundo contrafactual.

    ``mean_v``/``cov_v`` cobrem todas as variáveis (ordem do modelo);
    ``mean_s``/``cov_s`` e os erros-padrão de S estão na ordem do usuário.
    ``real_moments`` são os momentos das amostras reais aceitas.
    """
    names: Tuple[str, ...]
    all_names: Tuple[str, ...]
    mean_v: np.ndarray
    cov_v: np.ndarray
    se_mean_v: np.ndarray
    se_cov_v: np.ndarray
    s_positions: Tuple[int, ...]
    n_samples: int
    n_accepted: int
    seed: int
    family: str
    real_moments: Optional[ConditionalMoments] = None

    def __post_init__(self):
        for name in ('mean_v', 'cov_v', 'se_mean_v', 'se_cov_v'):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_samples

    @property
    def mean_s(self) -> np.ndarray:
        return self.mean_v[list(self.s_positions)]

    @property
    def cov_s(self) -> np.ndarray:
        return select(self.cov_v, self.s_positions, self.s_positions)

    @property
    def se_mean_s(self) -> np.ndarray:
        return self.se_mean_v[list(self.s_positions)]

    @property
    def se_cov_s(self) -> np.ndarray:
        return select(self.se_cov_v, self.s_positions, self.s_positions)

    def cov_between(self, first: str, second: str) -> Tuple[float, float]:
        """cov(first, second) no mundo contrafactual e seu erro-padrão."""
        i, j = self.all_names.index(first), self.all_names.index(second)
        return float(self.cov_v[i, j]), float(self.se_cov_v[i, j])


@dataclass(frozen=True)
class ZEntry:
    label: str
    closed: float
    empirical: float
    se: float
    z: float


@dataclass(frozen=True)
class ComparisonReport:
    """Resultado entrada a entrada; ``entries`` vem ordenado por |z| decrescente."""
    passed: bool
    k_sigma: float
    max_abs_z: float
    entries: Tuple[ZEntry, ...] = field(default=())

    def worst(self, count: int = 5) -> Tuple[ZEntry, ...]:
        return self.entries[:count]

    def raise_on_failure(self) -> None:
        if not self.passed:
            worst = self.entries[0]
            raise OracleMismatch(
                'OracleMismatch',
                f'|z| = {abs(worst.z):.3g} > {self.k_sigma:g} (fechada {worst.closed:.6g}, empírica {worst.empirical:.6g})',
                worst.label,
            )


# =============================================================================
# SIMULAÇÃO
# =============================================================================

def _modified_system(sem: LinearSem, part: Partition, plan: ControlPlan) -> Tuple[np.ndarray, np.ndarray]:
    """(I - A_mod) e interceptos do mundo contrafactual."""
    radius = plan_radius(total_effects(sem, part), plan.gain_f)
    if not is_convergent(radius):
        raise NumericalError('NotStable', f'Plano instável: raio de a tau_fx {radius:.10g}', 'plan.a')
    zero = DisturbanceMoments(mean=np.zeros(sem.n_v), cov=np.zeros((sem.n_v, sem.n_v)))
    modified = act(sem, part, plan, zero)
    return np.eye(sem.n_v) - modified.coeffs, np.asarray(modified.intercepts)


def _check_evidence(evidence: Evidence) -> None:
    if evidence.kind == 'moments':
        raise ModelValidationError('MalformedInput', 'O oráculo precisa de uma região, não de momentos', 'evidence')
    if evidence.kind == 'box' and np.any(evidence.degenerate):
        raise ModelValidationError(
            'MalformedInput',
            'Evidência pontual tem probabilidade nula na simulação: use uma caixa estreita',
            'evidence',
        )


def _standard_errors(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Média, covariância e erros-padrão (quarto momento para a covariância)."""
    n = values.shape[0]
    mean = values.mean(axis=0)
    centered = values - mean
    cov = symmetrize(centered.T @ centered / (n - 1))
    squares = centered * centered
    fourth = squares.T @ squares / n
    se_cov = np.sqrt(np.clip(fourth - cov * cov, 0.0, None) / n)
    se_mean = np.sqrt(np.clip(np.diag(cov), 0.0, None) / n)
    return mean, cov, se_mean, se_cov


def simulate_twin(
    sem: LinearSem,
    part: Partition,
    plan: ControlPlan,
    evidence: Evidence,
    cfg: Optional[TwinConfig] = None,
) -> EmpiricalMoments:
    """
    Simula os mundos real e contrafactual com distúrbios compartilhados.

    Args:
        sem: Modelo estável
        part: Partição
        plan: Plano de controle
        evidence: Região R_h (nenhuma ou caixa não degenerada)
        cfg: Amostras, semente, família, blocos e workers

    Returns:
        EmpiricalMoments determinísticos para (seed, n_samples, chunk_size)

    Raises:
        NumericalError: NotStable, AcceptanceTooLow
    """
    cfg = (cfg or TwinConfig()).resolved()
    plan.check_dimensions(part)
    _check_evidence(evidence)
    rho = spectral_radius(sem.coeffs)
    if not is_convergent(rho):
        raise NumericalError('NotStable', f'Modelo instável: raio espectral {rho:.10g}', 'A_vv')

    i_minus_a = np.eye(sem.n_v) - sem.coeffs
    i_minus_mod, mod_intercepts = _modified_system(sem, part, plan)
    dist_factor = symmetric_factor(np.asarray(sem.dist_cov))
    plan_factor = symmetric_factor(np.asarray(plan.noise_cov))
    x_idx = list(part.x_idx)
    box_idx, lower, upper = (list(evidence.indices), evidence.lower, evidence.upper) if evidence.kind == 'box' else ([], None, None)

    def work(chunk_index: int, size: int) -> Tuple[np.ndarray, np.ndarray]:
        rng = chunk_rng(cfg.seed, chunk_index, REAL_STREAM)
        disturbances = standard_draws(rng, cfg.family, (size, sem.n_v)) @ dist_factor.T
        real = solve_batch(i_minus_a, sem.intercepts + disturbances)
        if box_idx:
            keep = in_box(real[:, box_idx], lower, upper)
            real, disturbances = real[keep], disturbances[keep]

        plan_rng = chunk_rng(cfg.seed, chunk_index, PLAN_STREAM)
        shared = np.array(disturbances)
        shared[:, x_idx] = standard_draws(plan_rng, cfg.family, (shared.shape[0], part.n_x)) @ plan_factor.T
        twin = solve_batch(i_minus_mod, mod_intercepts + shared)
        return real, twin

    chunks = run_chunks(work, chunk_sizes(cfg.n_samples, cfg.chunk_size), cfg.workers)
    real = np.concatenate([chunk[0] for chunk in chunks], axis=0)
    twin = np.concatenate([chunk[1] for chunk in chunks], axis=0)

    n_accepted = twin.shape[0]
    rate = n_accepted / cfg.n_samples
    if rate < get_setting('MIN_ACCEPTANCE') or n_accepted < 2:
        raise NumericalError('AcceptanceTooLow', f'Taxa de aceitação {rate:.3g} muito baixa', 'evidence')
    logger.info(f'Mundos gêmeos: {n_accepted}/{cfg.n_samples} amostras aceitas')

    mean, cov, se_mean, se_cov = _standard_errors(twin)
    real_moments = moments_from_samples(
        real,
        Provenance(
            kind='MonteCarloBox' if box_idx else 'Unconditional',
            n_samples=cfg.n_samples,
            seed=cfg.seed,
            acceptance_rate=rate,
            n_accepted=n_accepted,
            family=cfg.family,
        ),
    )
    order = part.s_user_order()
    names = tuple(sem.names[part.s_idx[k]] for k in order)
    return EmpiricalMoments(
        names=names,
        all_names=sem.names,
        mean_v=mean,
        cov_v=cov,
        se_mean_v=se_mean,
        se_cov_v=se_cov,
        s_positions=tuple(part.s_idx[k] for k in order),
        n_samples=cfg.n_samples,
        n_accepted=n_accepted,
        seed=cfg.seed,
        family=cfg.family,
        real_moments=real_moments,
    )


# =============================================================================
# COMPARAÇÃO
# =============================================================================

def _z_score(closed: float, empirical: float, se: float) -> float:
    gap = closed - empirical
    if se > 0:
        return gap / se
    return 0.0 if abs(gap) <= 1e-12 * max(1.0, abs(empirical)) else float('inf')


def compare(closed: CounterfactualMoments, emp: EmpiricalMoments, k_sigma: Optional[float] = None) -> ComparisonReport:
    """
    z-scores (fechada - empírica) / SE para médias e covariâncias de S.

    Raises:
        ModelValidationError: DimensionMismatch se as variáveis não coincidirem
    """
    k_sigma = float(k_sigma if k_sigma is not None else get_setting('K_SIGMA'))
    if tuple(closed.names) != tuple(emp.names):
        raise ModelValidationError('DimensionMismatch', 'Resultados com variáveis diferentes', ','.join(closed.names))

    entries: List[ZEntry] = []
    mean_s, se_mean = emp.mean_s, emp.se_mean_s
    cov_s, se_cov = emp.cov_s, emp.se_cov_s
    for i, name in enumerate(closed.names):
        entries.append(ZEntry(
            f'mean[{name}]', float(closed.mean_s[i]), float(mean_s[i]), float(se_mean[i]),
            _z_score(float(closed.mean_s[i]), float(mean_s[i]), float(se_mean[i])),
        ))
    for i, j in zip(*np.triu_indices(len(closed.names))):
        label = f'cov[{closed.names[i]},{closed.names[j]}]'
        entries.append(ZEntry(
            label, float(closed.cov_s[i, j]), float(cov_s[i, j]), float(se_cov[i, j]),
            _z_score(float(closed.cov_s[i, j]), float(cov_s[i, j]), float(se_cov[i, j])),
        ))

    entries.sort(key=lambda entry: -abs(entry.z))
    max_abs_z = abs(entries[0].z) if entries else 0.0
    return ComparisonReport(
        passed=max_abs_z <= k_sigma,
        k_sigma=k_sigma,
        max_abs_z=max_abs_z,
        entries=tuple(entries),
    )


def oracle_check(
    sem: LinearSem,
    part: Partition,
    plan: ControlPlan,
    evidence: Evidence,
    cfg: Optional[TwinConfig] = None,
    mode: str = 'self_consistent',
    k_sigma: Optional[float] = None,
) -> Tuple[ComparisonReport, CounterfactualMoments, EmpiricalMoments]:
    """
    Forma fechada contra a simulação.

    No modo ``self_consistent`` a evidência em caixa entra na forma fechada
    pelos momentos das amostras reais aceitas na própria simulação; no modo
    ``independent`` ela é condicionada por um Monte Carlo com outra semente.
    """
    if mode not in MODES:
        raise ModelValidationError('MalformedInput', f'Modo desconhecido (use {", ".join(MODES)})', mode)
    cfg = (cfg or TwinConfig()).resolved()
    emp = simulate_twin(sem, part, plan, evidence, cfg)

    if evidence.is_empty:
        cm = condition_none(implied_moments(sem))
    elif mode == 'self_consistent':
        cm = emp.real_moments
    else:
        cm = condition(sem, evidence, cfg.sampling(seed_offset=1))
    closed = predict(sem, part, plan, cm)
    report = compare(closed, emp, k_sigma)
    logger.info(f'Oráculo ({mode}): max |z| = {report.max_abs_z:.3g}')
    return report, closed, emp

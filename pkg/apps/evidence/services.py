"""
Serviço de Evidência - momentos condicionais (mu_{v.r_h}, Sigma_{vv.r_h}) dado H ∈ R_h.

Três caminhos:
- sem evidência: momentos implicados do modelo;
- evidência pontual: condicionamento gaussiano em forma fechada;
- caixa (disjuntiva): Monte Carlo por rejeição com blocos determinísticos.
Momentos fornecidos pelo usuário entram como estão (UserSupplied).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.core.algebra import Moments, implied_moments, spectral_radius, is_convergent
from apps.core.exceptions import ModelValidationError, NumericalError
from apps.core.sampling import (
    check_family,
    chunk_rng,
    chunk_sizes,
    in_box,
    run_chunks,
    solve_batch,
    standard_draws,
)
from apps.core.structures import Evidence, LinearSem
from apps.core.utils import frozen, get_setting, inverse_or_pinv, select, symmetric_factor, symmetrize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Provenance:
    """Origem dos momentos condicionais."""
    kind: str  # Unconditional | GaussianPoint | MonteCarloBox | UserSupplied
    n_samples: Optional[int] = None
    seed: Optional[int] = None
    acceptance_rate: Optional[float] = None
    n_accepted: Optional[int] = None
    family: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind}
        for key in ('n_samples', 'seed', 'acceptance_rate', 'n_accepted', 'family'):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        return data


@dataclass(frozen=True)
class ConditionalMoments:
    """mu_{v.r_h} e Sigma_{vv.r_h} na ordem do modelo."""
    mean: np.ndarray
    cov: np.ndarray
    provenance: Provenance
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'mean', frozen(self.mean))
        object.__setattr__(self, 'cov', frozen(self.cov))


@dataclass(frozen=True)
class SamplingConfig:
    """Parâmetros do Monte Carlo; ``None`` significa usar SEMPLAN_SETTINGS."""
    n_samples: Optional[int] = None
    seed: Optional[int] = None
    family: Optional[str] = None
    chunk_size: Optional[int] = None
    workers: Optional[int] = None

    def resolved(self) -> 'SamplingConfig':
        return SamplingConfig(
            n_samples=int(self.n_samples if self.n_samples is not None else get_setting('N_SAMPLES')),
            seed=int(self.seed if self.seed is not None else get_setting('SEED')),
            family=check_family(self.family or get_setting('FAMILY')),
            chunk_size=int(self.chunk_size or get_setting('CHUNK_SIZE')),
            workers=int(self.workers or get_setting('WORKERS')),
        )


def condition_none(moments: Moments) -> ConditionalMoments:
    """Sem conhecimento prévio (R_h vazio): os momentos implicados passam direto."""
    return ConditionalMoments(
        mean=moments.mean,
        cov=moments.cov,
        provenance=Provenance(kind='Unconditional'),
    )


def _gaussian_condition(
    mean: np.ndarray,
    cov: np.ndarray,
    h_idx: Sequence[int],
    h_values: np.ndarray,
    notes: List[str],
) -> Tuple[np.ndarray, np.ndarray]:
    """mu + S_vh S_hh^{-1}(h - mu_h) e S - S_vh S_hh^{-1} S_hv, com coordenadas fixadas exatas."""
    h_idx = list(h_idx)
    all_idx = list(range(len(mean)))
    sigma_hh = select(cov, h_idx, h_idx)
    sigma_vh = select(cov, all_idx, h_idx)
    inverse, used_pinv = inverse_or_pinv(sigma_hh, 'Sigma_hh (evidência)', notes)
    if used_pinv:
        notes.append('SingularEvidenceCov: variáveis de evidência deterministicamente relacionadas')
    gain = sigma_vh @ inverse
    cond_mean = mean + gain @ (h_values - mean[h_idx])
    cond_cov = symmetrize(cov - gain @ sigma_vh.T)
    cond_mean[h_idx] = h_values
    cond_cov[h_idx, :] = 0.0
    cond_cov[:, h_idx] = 0.0
    return cond_mean, cond_cov


def condition_point(moments: Moments, evidence: Evidence) -> ConditionalMoments:
    """
    Condicionamento em H = h pela fórmula gaussiana dos momentos condicionais.

    Vale como aproximação de segunda ordem para famílias não gaussianas; a
    proveniência fica marcada como GaussianPoint.

    Args:
        moments: Momentos implicados do modelo
        evidence: Evidência pontual (caixa degenerada) ou vazia
    """
    if evidence.is_empty:
        return condition_none(moments)
    if not evidence.is_point:
        raise ModelValidationError('MalformedInput', 'condition_point exige evidência pontual', 'evidence')
    notes: List[str] = []
    h_idx, h_values = evidence.point_part()
    mean, cov = _gaussian_condition(np.array(moments.mean), np.array(moments.cov), h_idx, h_values, notes)
    for message in notes:
        logger.warning(message)
    return ConditionalMoments(mean=mean, cov=cov, provenance=Provenance(kind='GaussianPoint'), warnings=tuple(notes))


def condition_user(evidence: Evidence) -> ConditionalMoments:
    """Momentos condicionais fornecidos pelo usuário."""
    return ConditionalMoments(
        mean=evidence.user_mean,
        cov=evidence.user_cov,
        provenance=Provenance(kind='UserSupplied'),
    )


def _box_sampler(sem: LinearSem, evidence: Evidence, cfg: SamplingConfig, notes: List[str]):
    """
    Devolve a função de bloco para a amostragem por rejeição.

    Com coordenadas pontuais misturadas à caixa, a família precisa ser
    gaussiana: amostramos V da normal condicional nas coordenadas pontuais e
    rejeitamos só nos intervalos.
    """
    box_idx, lower, upper = evidence.interval_part()
    box_idx = list(box_idx)
    point_idx, point_values = evidence.point_part()

    if point_idx:
        if cfg.family != 'gaussian':
            raise ModelValidationError(
                'MalformedInput',
                'Evidência pontual misturada à caixa só é suportada na família gaussiana',
                'evidence',
            )
        moments = implied_moments(sem)
        cond_mean, cond_cov = _gaussian_condition(
            np.array(moments.mean), np.array(moments.cov), point_idx, point_values, notes,
        )
        factor = symmetric_factor(cond_cov)

        def work(chunk_index: int, size: int) -> np.ndarray:
            rng = chunk_rng(cfg.seed, chunk_index)
            values = cond_mean + standard_draws(rng, 'gaussian', (size, sem.n_v)) @ factor.T
            values[:, list(point_idx)] = point_values
            return values[in_box(values[:, box_idx], lower, upper)]

        return work

    factor = symmetric_factor(np.array(sem.dist_cov))
    i_minus_a = np.eye(sem.n_v) - sem.coeffs

    def work(chunk_index: int, size: int) -> np.ndarray:
        rng = chunk_rng(cfg.seed, chunk_index)
        disturbances = standard_draws(rng, cfg.family, (size, sem.n_v)) @ factor.T
        values = solve_batch(i_minus_a, sem.intercepts + disturbances)
        return values[in_box(values[:, box_idx], lower, upper)]

    return work


def condition_box_mc(sem: LinearSem, evidence: Evidence, cfg: Optional[SamplingConfig] = None) -> ConditionalMoments:
    """
    Momentos condicionais de V dado V_H ∈ R_h por Monte Carlo com rejeição.

    Sorteia distúrbios na família declarada (casada com dist_cov), resolve o
    equilíbrio V = (I-A)^{-1}(mu_pa + eps) e mantém as amostras dentro da caixa.

    Args:
        sem: Modelo estável
        evidence: Evidência em caixa
        cfg: Tamanho da amostra, semente, família, blocos e workers

    Returns:
        ConditionalMoments com proveniência MonteCarloBox

    Raises:
        NumericalError: NotStable, AcceptanceTooLow
    """
    cfg = (cfg or SamplingConfig()).resolved()
    rho = spectral_radius(sem.coeffs)
    if not is_convergent(rho):
        raise NumericalError('NotStable', f'Modelo instável: raio espectral {rho:.10g}', 'A_vv')
    if evidence.kind != 'box':
        raise ModelValidationError('MalformedInput', 'condition_box_mc exige evidência em caixa', 'evidence')

    notes: List[str] = []
    work = _box_sampler(sem, evidence, cfg, notes)
    chunks = run_chunks(work, chunk_sizes(cfg.n_samples, cfg.chunk_size), cfg.workers)
    accepted = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, sem.n_v))

    n_accepted = accepted.shape[0]
    rate = n_accepted / cfg.n_samples if cfg.n_samples else 0.0
    if rate < get_setting('MIN_ACCEPTANCE') or n_accepted < 2:
        raise NumericalError(
            'AcceptanceTooLow',
            f'Taxa de aceitação {rate:.3g} muito baixa: caixa pequena demais, use evidência pontual',
            'evidence',
        )
    logger.info(f'Monte Carlo da caixa: {n_accepted}/{cfg.n_samples} aceitas (taxa {rate:.4g})')

    return ConditionalMoments(
        mean=accepted.mean(axis=0),
        cov=symmetrize(np.cov(accepted, rowvar=False).reshape(sem.n_v, sem.n_v)),
        provenance=Provenance(
            kind='MonteCarloBox',
            n_samples=cfg.n_samples,
            seed=cfg.seed,
            acceptance_rate=rate,
            n_accepted=n_accepted,
            family=cfg.family,
        ),
        warnings=tuple(notes),
    )


def condition(sem: LinearSem, evidence: Evidence, cfg: Optional[SamplingConfig] = None) -> ConditionalMoments:
    """Despacha a evidência para o caminho adequado."""
    if evidence.kind == 'moments':
        return condition_user(evidence)
    if evidence.is_empty:
        return condition_none(implied_moments(sem))
    if evidence.is_point:
        return condition_point(implied_moments(sem), evidence)
    return condition_box_mc(sem, evidence, cfg)


def moments_from_samples(values: np.ndarray, provenance: Provenance) -> ConditionalMoments:
    """Momentos amostrais de um conjunto de realizações (linhas) de V."""
    n_v = values.shape[1]
    return ConditionalMoments(
        mean=values.mean(axis=0),
        cov=symmetrize(np.cov(values, rowvar=False).reshape(n_v, n_v)),
        provenance=provenance,
    )

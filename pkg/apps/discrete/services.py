"""
Serviço Discreto - plano disjuntivo (X ∈ R_x) em modelos tabulares.

Cada unidade observa pa(X) e escolhe x em R_x segundo a política natural
renormalizada pr(x | pa(x), x ∈ R_x). O efeito é

    pr(y \\ X ∈ R_x) = Σ_{x ∈ R_x, pa} pr(y | x, pa) pr(x | pa, x ∈ R_x) pr(pa).

Escopo: um único tratamento com pa(X) explícito e tabela da resposta.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from apps.core.exceptions import ModelValidationError
from apps.core.utils import frozen, get_setting

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class TabularModel:
    """
    Tabelas do modelo discreto.

    ``pr_pa`` tem forma (n_pa,), ``pr_x`` (n_pa, n_x) e ``pr_y`` (n_pa, n_x, n_y),
    com as configurações de pa(X) no produto cartesiano dos domínios dos pais.
    """
    treatment: str
    response: str
    x_domain: Tuple[str, ...]
    y_domain: Tuple[str, ...]
    parents: Tuple[str, ...]
    pa_configs: Tuple[Tuple[str, ...], ...]
    pr_pa: np.ndarray
    pr_x: np.ndarray
    pr_y: np.ndarray

    def __post_init__(self):
        for name in ('pr_pa', 'pr_x', 'pr_y'):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def n_pa(self) -> int:
        return len(self.pa_configs)

    def x_positions(self, region: Sequence[Any]) -> List[int]:
        """Posições de R_x no domínio de X (aceita valores ou suas strings)."""
        positions = []
        for value in region:
            key = str(value)
            if key not in self.x_domain:
                raise ModelValidationError('MalformedInput', 'Valor fora do domínio do tratamento', key)
            positions.append(self.x_domain.index(key))
        if not positions:
            raise ModelValidationError('MalformedInput', 'Região R_x vazia', self.treatment)
        return sorted(set(positions))

    def y_position(self, value: Any) -> int:
        key = str(value)
        if key not in self.y_domain:
            raise ModelValidationError('MalformedInput', 'Valor fora do domínio da resposta', key)
        return self.y_domain.index(key)

    def pa_label(self, k: int) -> str:
        return ','.join(self.pa_configs[k])


# =============================================================================
# CARGA E VALIDAÇÃO
# =============================================================================

def _domain(block: Any, label: str) -> Tuple[str, Tuple[str, ...]]:
    try:
        name = str(block['name'])
        domain = tuple(str(value) for value in block['domain'])
    except (KeyError, TypeError):
        raise ModelValidationError('MalformedInput', 'Bloco precisa de name e domain', label)
    if not domain or len(set(domain)) != len(domain):
        raise ModelValidationError('InvalidTable', 'Domínio vazio ou com valores repetidos', name)
    return name, domain


def _distribution(values: Any, size: int, label: str) -> np.ndarray:
    try:
        row = np.array(values, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ModelValidationError('InvalidTable', 'Linha da tabela com valores não numéricos', label)
    if row.shape != (size,):
        raise ModelValidationError('InvalidTable', f'Linha precisa ter {size} probabilidades', label)
    if np.any(row < 0) or not np.all(np.isfinite(row)):
        raise ModelValidationError('InvalidTable', 'Probabilidades negativas ou não finitas', label)
    if abs(row.sum() - 1.0) > NORMALIZATION_TOL:
        raise ModelValidationError('InvalidTable', f'Distribuição soma {row.sum():.15g}, esperado 1', label)
    return row


def load_tabular(block: Mapping[str, Any]) -> TabularModel:
    """
    Constrói o TabularModel a partir do bloco ``tabular`` do arquivo de entrada.

    Formato:
        treatment / response: {"name": ..., "domain": [...]}
        parents: [{"name": ..., "domain": [...]}, ...]
        pr_pa: {"a,b": p, ...}            (omitido quando não há pais)
        pr_x_given_pa: {"a,b": [p por x], ...}
        pr_y_given_x_pa: {"x|a,b": [p por y], ...}

    Raises:
        ModelValidationError: InvalidTable, MalformedInput
    """
    if not isinstance(block, Mapping):
        raise ModelValidationError('MalformedInput', 'Bloco tabular precisa ser um objeto', 'tabular')
    treatment, x_domain = _domain(block.get('treatment'), 'tabular.treatment')
    response, y_domain = _domain(block.get('response'), 'tabular.response')
    parents_raw = block.get('parents') or []
    parents = [_domain(item, 'tabular.parents') for item in parents_raw]
    names = [treatment, response] + [name for name, _ in parents]
    if len(set(names)) != len(names):
        raise ModelValidationError('DuplicateName', 'Nome repetido entre tratamento, resposta e pais', 'tabular')

    pa_configs = tuple(itertools.product(*[domain for _, domain in parents]))
    keys = [','.join(config) for config in pa_configs]

    if parents:
        pr_pa_raw = block.get('pr_pa') or {}
        missing = [key for key in keys if key not in pr_pa_raw]
        if missing:
            raise ModelValidationError('InvalidTable', 'pr_pa sem a configuração', missing[0])
        pr_pa = _distribution([pr_pa_raw[key] for key in keys], len(keys), 'tabular.pr_pa')
    else:
        pr_pa = np.ones(1)

    pr_x_raw = block.get('pr_x_given_pa') or {}
    pr_y_raw = block.get('pr_y_given_x_pa') or {}
    pr_x = np.zeros((len(keys), len(x_domain)))
    pr_y = np.zeros((len(keys), len(x_domain), len(y_domain)))
    for p, key in enumerate(keys):
        if key not in pr_x_raw:
            raise ModelValidationError('InvalidTable', 'pr_x_given_pa sem a configuração', key)
        pr_x[p] = _distribution(pr_x_raw[key], len(x_domain), f'tabular.pr_x_given_pa.{key}')
        for q, x_value in enumerate(x_domain):
            y_key = f'{x_value}|{key}'
            if y_key not in pr_y_raw:
                raise ModelValidationError('InvalidTable', 'pr_y_given_x_pa sem a configuração', y_key)
            pr_y[p, q] = _distribution(pr_y_raw[y_key], len(y_domain), f'tabular.pr_y_given_x_pa.{y_key}')

    logger.debug(f'Modelo tabular: {treatment} -> {response}, {len(keys)} configurações de pais')
    return TabularModel(
        treatment=treatment,
        response=response,
        x_domain=x_domain,
        y_domain=y_domain,
        parents=tuple(name for name, _ in parents),
        pa_configs=pa_configs,
        pr_pa=pr_pa,
        pr_x=pr_x,
        pr_y=pr_y,
    )


# =============================================================================
# PLANO DISJUNTIVO
# =============================================================================

def stochastic_policy(model: TabularModel, region: Sequence[Any]) -> np.ndarray:
    """
    pr(x | pa(x), x ∈ R_x) = pr(x | pa(x)) / Σ_{x ∈ R_x} pr(x | pa(x)), zero fora de R_x.

    Returns:
        Tabela (n_pa, n_x); cada linha soma 1 sobre R_x

    Raises:
        ModelValidationError: ZeroMassRegion
    """
    positions = model.x_positions(region)
    mask = np.zeros(len(model.x_domain), dtype=bool)
    mask[positions] = True

    restricted = np.where(mask, model.pr_x, 0.0)
    mass = restricted.sum(axis=1)
    zero_mass = get_setting('ZERO_MASS')
    for p, value in enumerate(mass):
        if value <= zero_mass:
            raise ModelValidationError(
                'ZeroMassRegion',
                'R_x tem probabilidade nula para esta configuração dos pais',
                model.pa_label(p) or model.treatment,
            )
    return restricted / mass[:, None]


def disjunctive_distribution(model: TabularModel, region: Sequence[Any]) -> np.ndarray:
    """pr(y \\ X ∈ R_x) para todo y do domínio da resposta."""
    policy = stochastic_policy(model, region)
    return np.einsum('pxy,px,p->y', model.pr_y, policy, model.pr_pa)


def disjunctive_effect(model: TabularModel, region: Sequence[Any], y_value: Any) -> float:
    """pr(Y = y \\ X ∈ R_x), uma probabilidade em [0, 1]."""
    return float(disjunctive_distribution(model, region)[model.y_position(y_value)])


def enumerate_worlds(model: TabularModel, region: Sequence[Any], y_value: Any) -> float:
    """
    Mesma quantidade por enumeração exaustiva dos mundos (pa, x, y).

    Cada mundo com x ∈ R_x contribui pr(x, y, pa) / Σ_{x' ∈ R_x} pr(x' | pa).
    """
    positions = set(model.x_positions(region))
    target = model.y_position(y_value)
    zero_mass = get_setting('ZERO_MASS')
    total = 0.0
    for p, q, r in itertools.product(range(model.n_pa), range(len(model.x_domain)), range(len(model.y_domain))):
        if q not in positions or r != target:
            continue
        region_mass = sum(model.pr_x[p, k] for k in positions)
        if region_mass <= zero_mass:
            raise ModelValidationError('ZeroMassRegion', 'R_x tem probabilidade nula', model.pa_label(p) or model.treatment)
        joint = model.pr_pa[p] * model.pr_x[p, q] * model.pr_y[p, q, r]
        total += joint / region_mass
    return total


def atomic_effect(model: TabularModel, x_value: Any) -> np.ndarray:
    """Ajuste pela porta dos fundos: Σ_pa pr(y | x0, pa) pr(pa)."""
    q = model.x_positions([x_value])[0]
    return model.pr_pa @ model.pr_y[:, q, :]


def observational_distribution(model: TabularModel) -> np.ndarray:
    """pr(y) = Σ pr(y | x, pa) pr(x | pa) pr(pa)."""
    return np.einsum('pxy,px,p->y', model.pr_y, model.pr_x, model.pr_pa)


def conditional_given_region(model: TabularModel, region: Sequence[Any]) -> Tuple[np.ndarray, np.ndarray]:
    """
    pr(y | x ∈ R_x, pa) por configuração dos pais e pr(y | x ∈ R_x).

    Returns:
        Tupla (tabela (n_pa, n_y), vetor (n_y,))
    """
    positions = model.x_positions(region)
    joint = model.pr_pa[:, None, None] * model.pr_x[:, :, None] * model.pr_y
    in_region = joint[:, positions, :].sum(axis=1)
    by_parent = in_region.sum(axis=1)
    zero_mass = get_setting('ZERO_MASS')
    if np.any(by_parent <= zero_mass):
        p = int(np.argmin(by_parent))
        raise ModelValidationError('ZeroMassRegion', 'pr(x ∈ R_x, pa) nula', model.pa_label(p) or model.treatment)
    return in_region / by_parent[:, None], in_region.sum(axis=0) / by_parent.sum()


def disjunctive_report(model: TabularModel, region: Sequence[Any]) -> Dict[str, Any]:
    """Resumo para a linha de comando: distribuição disjuntiva, política e conferência por enumeração."""
    distribution = disjunctive_distribution(model, region)
    policy = stochastic_policy(model, region)
    enumerated = [enumerate_worlds(model, region, y) for y in model.y_domain]
    return {
        'treatment': model.treatment,
        'response': model.response,
        'region': [model.x_domain[k] for k in model.x_positions(region)],
        'distribution': {y: float(p) for y, p in zip(model.y_domain, distribution)},
        'policy': {
            model.pa_label(p): {x: float(policy[p, q]) for q, x in enumerate(model.x_domain)}
            for p in range(model.n_pa)
        },
        'enumeration_gap': float(np.max(np.abs(distribution - np.array(enumerated)))),
    }

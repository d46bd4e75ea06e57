"""
Estruturas do modelo - SEM linear, partição das variáveis, plano de controle e evidência.

Convenções:
- ``coeffs[i, j]`` é o coeficiente de caminho de V_j sobre V_i (aresta j -> i).
- Todos os tipos são imutáveis (arrays somente-leitura).
- A ordem canônica (F, U, X, W, Z) é interna; resultados públicos voltam na
  ordem original do usuário.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from apps.core.exceptions import ModelValidationError
from apps.core.utils import (
    as_float,
    as_list,
    as_mapping,
    as_matrix,
    as_vector,
    asymmetric_entries,
    frozen,
    get_setting,
    is_psd,
    min_eigenvalue,
    parse_bound,
    select,
)

logger = logging.getLogger(__name__)


# =============================================================================
# LINEAR SEM
# =============================================================================

@dataclass(frozen=True)
class LinearSem:
    """
    SEM linear V = mu_pa + A V + eps, com eps de média zero e covariância dist_cov.
    """
    names: Tuple[str, ...]
    coeffs: np.ndarray
    intercepts: np.ndarray
    dist_cov: np.ndarray

    def __post_init__(self):
        n_v = len(self.names)
        object.__setattr__(self, 'names', tuple(self.names))
        object.__setattr__(self, 'coeffs', frozen(self.coeffs))
        object.__setattr__(self, 'intercepts', frozen(self.intercepts))
        object.__setattr__(self, 'dist_cov', frozen(self.dist_cov))
        if self.coeffs.shape != (n_v, n_v) or self.dist_cov.shape != (n_v, n_v):
            raise ModelValidationError('DimensionMismatch', 'Matrizes incompatíveis com o número de variáveis')
        if self.intercepts.shape != (n_v,):
            raise ModelValidationError('DimensionMismatch', 'Interceptos incompatíveis com o número de variáveis')

    @property
    def n_v(self) -> int:
        return len(self.names)

    @property
    def dist_mean(self) -> np.ndarray:
        return np.zeros(self.n_v)

    @property
    def edges(self) -> List[Tuple[str, str, float]]:
        """Arestas (origem, destino, coeficiente) em ordem linha-maior."""
        rows, cols = np.nonzero(self.coeffs)
        return [(self.names[j], self.names[i], float(self.coeffs[i, j])) for i, j in zip(rows, cols)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ModelValidationError('UnknownVariable', 'Variável não declarada no modelo', name)

    def indices(self, names: Iterable[str]) -> List[int]:
        return [self.index(name) for name in names]

    def graph(self) -> nx.DiGraph:
        """Diagrama de caminhos: arestas com coeficiente não nulo."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n_v))
        rows, cols = np.nonzero(self.coeffs)
        graph.add_weighted_edges_from((int(j), int(i), float(self.coeffs[i, j])) for i, j in zip(rows, cols))
        return graph


def _read_disturbances(block: Mapping[str, Any], names: Sequence[str]) -> np.ndarray:
    n_v = len(names)
    if 'cov' in block:
        return as_matrix(block['cov'], (n_v, n_v), 'disturbances.cov')

    cov = np.zeros((n_v, n_v))
    position = {name: k for k, name in enumerate(names)}
    for name, value in as_mapping(block.get('var'), 'disturbances.var').items():
        if name not in position:
            raise ModelValidationError('UnknownVariable', 'Variância para variável desconhecida', name)
        cov[position[name], position[name]] = as_float(value, f'disturbances.var.{name}')
    for pair in as_list(block.get('cov_pairs'), 'disturbances.cov_pairs'):
        try:
            a, b, value = pair['a'], pair['b'], pair['value']
        except (KeyError, TypeError):
            raise ModelValidationError('MalformedInput', 'cov_pairs exige chaves a, b, value', pair)
        for name in (a, b):
            if not isinstance(name, str) or name not in position:
                raise ModelValidationError('UnknownVariable', 'Covariância para variável desconhecida', name)
        value = as_float(value, f'disturbances.cov_pairs.{a},{b}')
        cov[position[a], position[b]] = value
        cov[position[b], position[a]] = value
    return cov


def validate_model(spec: Mapping[str, Any]) -> LinearSem:
    """
    Valida a descrição bruta do modelo e constrói o LinearSem.

    Args:
        spec: Dicionário com ``variables``, ``edges``, ``intercepts`` (opcional)
              e ``disturbances`` (``cov`` completa ou ``var`` + ``cov_pairs``)

    Returns:
        LinearSem que satisfaz todos os invariantes

    Raises:
        ModelValidationError: DuplicateName, SelfLoop, ZeroCoefficientEdge,
            UnknownVariable, AsymmetricDistCov, NonPsdDistCov, MalformedInput
    """
    if not isinstance(spec, Mapping):
        raise ModelValidationError('MalformedInput', 'Especificação do modelo precisa ser um objeto')
    names = spec.get('variables')
    if not isinstance(names, (list, tuple)) or not names or not all(isinstance(n, str) for n in names):
        raise ModelValidationError('MalformedInput', 'variables precisa ser uma lista não vazia de nomes')

    seen = set()
    for name in names:
        if name in seen:
            raise ModelValidationError('DuplicateName', 'Nome de variável repetido', name)
        seen.add(name)

    n_v = len(names)
    position = {name: k for k, name in enumerate(names)}
    coeffs = np.zeros((n_v, n_v))
    for edge in as_list(spec.get('edges'), 'edges'):
        try:
            source, target, coeff = edge['from'], edge['to'], edge['coeff']
        except (KeyError, TypeError):
            raise ModelValidationError('MalformedInput', 'Aresta exige chaves from, to, coeff', edge)
        for name in (source, target):
            if not isinstance(name, str) or name not in position:
                raise ModelValidationError('UnknownVariable', 'Aresta referencia variável desconhecida', name)
        label = f'{source}->{target}'
        if source == target:
            raise ModelValidationError('SelfLoop', 'Laços próprios não são permitidos', label)
        coeff = as_float(coeff, label)
        # Aresta explícita com 0.0 é ambígua: ausência de aresta já significa zero.
        if coeff == 0.0:
            raise ModelValidationError('ZeroCoefficientEdge', 'Aresta com coeficiente 0.0 é ambígua', label)
        i, j = position[target], position[source]
        if coeffs[i, j] != 0.0:
            raise ModelValidationError('MalformedInput', 'Aresta declarada mais de uma vez', label)
        coeffs[i, j] = coeff

    intercepts = np.zeros(n_v)
    for name, value in as_mapping(spec.get('intercepts'), 'intercepts').items():
        if name not in position:
            raise ModelValidationError('UnknownVariable', 'Intercepto para variável desconhecida', name)
        intercepts[position[name]] = as_float(value, f'intercepts.{name}')

    disturbances = spec.get('disturbances')
    if not isinstance(disturbances, Mapping):
        raise ModelValidationError('MalformedInput', 'disturbances é obrigatório')
    dist_cov = _read_disturbances(disturbances, names)

    asymmetric = asymmetric_entries(dist_cov, get_setting('SYM_TOL'))
    if asymmetric:
        offending = ', '.join(f'({names[i]},{names[j]})' for i, j in asymmetric)
        raise ModelValidationError('AsymmetricDistCov', 'Covariância dos distúrbios não simétrica', offending)
    negative = [names[k] for k in range(n_v) if dist_cov[k, k] < 0]
    if negative:
        raise ModelValidationError('NonPsdDistCov', 'Variância negativa', ', '.join(negative))
    if not is_psd(dist_cov):
        raise ModelValidationError(
            'NonPsdDistCov',
            f'Covariância dos distúrbios não é PSD (menor autovalor {min_eigenvalue(dist_cov):.6g})',
            'disturbances',
        )

    return LinearSem(names=tuple(names), coeffs=coeffs, intercepts=intercepts, dist_cov=(dist_cov + dist_cov.T) / 2)


def serialize_model(sem: LinearSem) -> Dict[str, Any]:
    """Inverso de ``validate_model``: arestas em ordem linha-maior e ``cov`` completa."""
    return {
        'variables': list(sem.names),
        'edges': [{'from': source, 'to': target, 'coeff': coeff} for source, target, coeff in sem.edges],
        'intercepts': {name: float(value) for name, value in zip(sem.names, sem.intercepts)},
        'disturbances': {'cov': sem.dist_cov.tolist()},
    }


# =============================================================================
# GRAPH
# =============================================================================

def descendants(sem: LinearSem, seed: Iterable[int]) -> FrozenSet[int]:
    """
    Vértices alcançáveis a partir de ``seed`` por caminhos dirigidos de coeficientes não nulos.

    Um membro da semente só aparece no resultado se for alcançável de novo
    (ciclo); a partição é quem exclui X de S.
    """
    graph = sem.graph()
    reached = set()
    for node in set(seed):
        for child in graph.successors(node):
            if child not in reached:
                reached.add(child)
                reached |= nx.descendants(graph, child)
    return frozenset(reached)


# =============================================================================
# PARTITION
# =============================================================================

@dataclass(frozen=True)
class Partition:
    """
    Partição V = S ∪ X ∪ T com S = F ∪ U (descendentes de X) e T = W ∪ Z.

    A ordem canônica é (F, U, X, W, Z); ``order[k]`` é o índice no modelo da
    k-ésima variável canônica.
    """
    names: Tuple[str, ...]
    f_idx: Tuple[int, ...]
    u_idx: Tuple[int, ...]
    x_idx: Tuple[int, ...]
    w_idx: Tuple[int, ...]
    z_idx: Tuple[int, ...]
    y_idx: int

    @property
    def s_idx(self) -> Tuple[int, ...]:
        return self.f_idx + self.u_idx

    @property
    def t_idx(self) -> Tuple[int, ...]:
        return self.w_idx + self.z_idx

    @property
    def order(self) -> Tuple[int, ...]:
        return self.s_idx + self.x_idx + self.t_idx

    @property
    def n_f(self) -> int:
        return len(self.f_idx)

    @property
    def n_u(self) -> int:
        return len(self.u_idx)

    @property
    def n_s(self) -> int:
        return len(self.s_idx)

    @property
    def n_x(self) -> int:
        return len(self.x_idx)

    @property
    def n_w(self) -> int:
        return len(self.w_idx)

    @property
    def n_t(self) -> int:
        return len(self.t_idx)

    @property
    def y_pos(self) -> int:
        """Posição de Y dentro de S (ordem canônica)."""
        return self.s_idx.index(self.y_idx)

    @property
    def y_in_f(self) -> bool:
        return self.y_idx in self.f_idx

    @property
    def y_name(self) -> str:
        return self.names[self.y_idx]

    def labels(self, idx: Sequence[int]) -> List[str]:
        return [self.names[k] for k in idx]

    def permutation(self) -> np.ndarray:
        """Matriz de permutação P com P @ v_modelo = v_canonico."""
        n_v = len(self.names)
        perm = np.zeros((n_v, n_v))
        perm[np.arange(n_v), list(self.order)] = 1.0
        return perm

    def to_canonical_vector(self, vector: np.ndarray) -> np.ndarray:
        return np.asarray(vector)[list(self.order)]

    def to_canonical_matrix(self, matrix: np.ndarray) -> np.ndarray:
        return select(np.asarray(matrix), self.order, self.order)

    def s_user_order(self) -> List[int]:
        """Posições canônicas de S reordenadas pela ordem do modelo."""
        s_idx = self.s_idx
        return sorted(range(len(s_idx)), key=lambda k: s_idx[k])

    def s_to_user(self, vector: np.ndarray, matrix: Optional[np.ndarray] = None):
        """Reordena resultados de S (canônicos) para a ordem do usuário."""
        order = self.s_user_order()
        names = tuple(self.names[self.s_idx[k]] for k in order)
        vector = np.asarray(vector)[order]
        if matrix is None:
            return names, vector
        return names, vector, select(np.asarray(matrix), order, order)


def make_partition(
    sem: LinearSem,
    x_names: Sequence[str],
    f_names: Sequence[str],
    w_names: Sequence[str],
    y_name: str,
) -> Partition:
    """
    Particiona as variáveis a partir dos tratamentos e das entradas do controlador.

    U := descendentes(X) \\ F e Z := não descendentes(X) \\ (X ∪ W).

    Raises:
        ModelValidationError: FNotDescendant, WIsDescendant, YNotInS,
            UnknownVariable, MalformedInput
    """
    if not x_names:
        raise ModelValidationError('MalformedInput', 'Informe ao menos um tratamento', 'treatments')
    for label, group in (('treatments', x_names), ('plan_f', f_names), ('plan_w', w_names)):
        if len(set(group)) != len(group):
            raise ModelValidationError('DuplicateName', 'Nome repetido no bloco', label)

    x_idx = tuple(sem.indices(x_names))
    f_idx = tuple(sem.indices(f_names))
    w_idx = tuple(sem.indices(w_names))
    y_idx = sem.index(y_name)

    s_set = set(descendants(sem, x_idx)) - set(x_idx)
    for name, k in zip(f_names, f_idx):
        if k not in s_set:
            raise ModelValidationError('FNotDescendant', 'Entrada de F não é descendente de X', name)
    for name, k in zip(w_names, w_idx):
        if k in s_set or k in x_idx:
            raise ModelValidationError('WIsDescendant', 'Entrada de W é descendente de X', name)
    if y_idx not in s_set:
        raise ModelValidationError('YNotInS', 'Resposta não é afetada por X', y_name)

    u_idx = tuple(k for k in range(sem.n_v) if k in s_set and k not in f_idx)
    z_idx = tuple(k for k in range(sem.n_v) if k not in s_set and k not in x_idx and k not in w_idx)

    part = Partition(
        names=sem.names, f_idx=f_idx, u_idx=u_idx, x_idx=x_idx, w_idx=w_idx, z_idx=z_idx, y_idx=y_idx,
    )
    logger.debug(
        f'Partição: F={part.labels(f_idx)} U={part.labels(u_idx)} X={part.labels(x_idx)} '
        f'W={part.labels(w_idx)} Z={part.labels(z_idx)}'
    )
    return part


# =============================================================================
# CONTROL PLAN
# =============================================================================

@dataclass(frozen=True)
class ControlPlan:
    """
    Plano X = x + a F + b W + eps*, com eps* independente dos demais distúrbios.
    """
    x_const: np.ndarray
    gain_f: np.ndarray
    gain_w: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        for name in ('x_const', 'gain_f', 'gain_w', 'noise_cov'):
            object.__setattr__(self, name, frozen(getattr(self, name)))
        n_x = self.x_const.shape[0]
        if self.noise_cov.shape != (n_x, n_x):
            raise ModelValidationError('DimensionMismatch', 'noise_cov precisa ser n_x x n_x', 'plan.noise_cov')
        if asymmetric_entries(self.noise_cov, get_setting('SYM_TOL')) or not is_psd(self.noise_cov):
            raise ModelValidationError('NonPsdPlanNoise', 'Covariância do ruído do plano não é simétrica PSD', 'plan.noise_cov')

    @classmethod
    def build(
        cls,
        part: Partition,
        x_const: Any,
        gain_f: Any = None,
        gain_w: Any = None,
        noise_cov: Any = None,
    ) -> 'ControlPlan':
        """Constrói o plano com dimensões verificadas contra a partição (zeros por padrão)."""
        n_x, n_f, n_w = part.n_x, part.n_f, part.n_w
        return cls(
            x_const=as_vector(x_const, n_x, 'plan.x'),
            gain_f=np.zeros((n_x, n_f)) if gain_f is None else as_matrix(gain_f, (n_x, n_f), 'plan.a'),
            gain_w=np.zeros((n_x, n_w)) if gain_w is None else as_matrix(gain_w, (n_x, n_w), 'plan.b'),
            noise_cov=np.zeros((n_x, n_x)) if noise_cov is None else as_matrix(noise_cov, (n_x, n_x), 'plan.noise_cov'),
        )

    @property
    def n_x(self) -> int:
        return self.x_const.shape[0]

    @property
    def is_unconditional(self) -> bool:
        return not np.any(self.gain_f) and not np.any(self.gain_w)

    @property
    def is_perfect(self) -> bool:
        return not np.any(self.noise_cov)

    def check_dimensions(self, part: Partition) -> None:
        expected = {
            'x_const': (part.n_x,),
            'gain_f': (part.n_x, part.n_f),
            'gain_w': (part.n_x, part.n_w),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ModelValidationError(
                    'DimensionMismatch', f'{name} precisa ter forma {shape}', f'plan.{name}'
                )

    def padded(self, part: Partition) -> Tuple[np.ndarray, np.ndarray]:
        """C_xs = (a; 0_{n_x,n_u}) e C_xt = (b; 0_{n_x,n_z}), lado a lado por colunas."""
        self.check_dimensions(part)
        c_xs = np.hstack([self.gain_f, np.zeros((part.n_x, part.n_u))])
        c_xt = np.hstack([self.gain_w, np.zeros((part.n_x, len(part.z_idx)))])
        return c_xs, c_xt

    def with_gain_f(self, gain_f: np.ndarray) -> 'ControlPlan':
        return replace(self, gain_f=gain_f)

    def with_gain_w(self, gain_w: np.ndarray) -> 'ControlPlan':
        return replace(self, gain_w=gain_w)

    def with_x(self, x_const: np.ndarray) -> 'ControlPlan':
        return replace(self, x_const=x_const)

    def echo(self) -> Dict[str, Any]:
        return {
            'x': self.x_const.tolist(),
            'a': self.gain_f.tolist(),
            'b': self.gain_w.tolist(),
            'noise_cov': self.noise_cov.tolist(),
            'unconditional': self.is_unconditional,
            'perfect': self.is_perfect,
        }


# =============================================================================
# EVIDENCE
# =============================================================================

@dataclass(frozen=True)
class Evidence:
    """
    Conhecimento H ∈ R_h sobre o mundo real.

    ``kind`` é 'none', 'box' ou 'moments'. Evidência pontual é guardada como
    caixa degenerada (lower == upper) e o código segue a degenerescência.
    """
    kind: str = 'none'
    indices: Tuple[int, ...] = ()
    lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    user_mean: Optional[np.ndarray] = None
    user_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'indices', tuple(self.indices))
        object.__setattr__(self, 'lower', frozen(self.lower))
        object.__setattr__(self, 'upper', frozen(self.upper))
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo > hi:
                raise ModelValidationError('InvalidBox', 'Limite inferior maior que o superior', self.indices[k])
            if math.isinf(lo) and math.isinf(hi) and lo == hi:
                raise ModelValidationError('InvalidBox', 'Intervalo vazio no infinito', self.indices[k])

    @classmethod
    def none(cls) -> 'Evidence':
        return cls()

    @classmethod
    def from_blocks(
        cls,
        sem: LinearSem,
        point: Optional[Mapping[str, Any]] = None,
        box: Optional[Mapping[str, Any]] = None,
    ) -> 'Evidence':
        """
        Constrói a evidência a partir dos blocos ``point`` e/ou ``box``.

        Args:
            sem: Modelo (para resolver os nomes)
            point: {nome: valor}
            box: {nome: [lo, hi]} com "-inf"/"inf" permitidos
        """
        point = as_mapping(point, 'evidence.point')
        box = as_mapping(box, 'evidence.box')
        overlap = set(point) & set(box)
        if overlap:
            raise ModelValidationError('MalformedInput', 'Variável em point e box ao mesmo tempo', sorted(overlap)[0])
        indices, lower, upper = [], [], []
        for name, value in point.items():
            value = as_float(value, f'evidence.point.{name}')
            indices.append(sem.index(name))
            lower.append(value)
            upper.append(value)
        for name, bounds in box.items():
            if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
                raise ModelValidationError('MalformedInput', 'Intervalo precisa ser [lo, hi]', name)
            lo = parse_bound(bounds[0], f'evidence.box.{name}')
            hi = parse_bound(bounds[1], f'evidence.box.{name}')
            if math.isinf(lo) and math.isinf(hi) and not (lo < 0 < hi):
                raise ModelValidationError('InvalidBox', 'Intervalo vazio no infinito', name)
            indices.append(sem.index(name))
            lower.append(lo)
            upper.append(hi)
        if not indices:
            return cls.none()
        return cls(kind='box', indices=tuple(indices), lower=np.array(lower), upper=np.array(upper))

    @classmethod
    def point(cls, sem: LinearSem, values: Mapping[str, Any]) -> 'Evidence':
        return cls.from_blocks(sem, point=values)

    @classmethod
    def box(cls, sem: LinearSem, bounds: Mapping[str, Any]) -> 'Evidence':
        return cls.from_blocks(sem, box=bounds)

    @classmethod
    def user_moments(cls, sem: LinearSem, mean: Any, cov: Any) -> 'Evidence':
        """Momentos condicionais fornecidos pelo usuário (mu_{v.r_h}, Sigma_{vv.r_h})."""
        n_v = sem.n_v
        mean = as_vector(mean, n_v, 'evidence.moments.mean')
        cov = as_matrix(cov, (n_v, n_v), 'evidence.moments.cov')
        if asymmetric_entries(cov, get_setting('SYM_TOL')) or not is_psd(cov):
            raise ModelValidationError('NonPsdEvidenceCov', 'Covariância condicional não é simétrica PSD', 'evidence.moments.cov')
        return cls(kind='moments', user_mean=frozen(mean), user_cov=frozen((cov + cov.T) / 2))

    @property
    def is_empty(self) -> bool:
        return self.kind == 'none'

    @property
    def degenerate(self) -> np.ndarray:
        """Máscara das coordenadas pontuais (lower == upper)."""
        return self.lower == self.upper

    @property
    def is_point(self) -> bool:
        return self.kind == 'box' and bool(np.all(self.degenerate))

    def point_part(self) -> Tuple[Tuple[int, ...], np.ndarray]:
        mask = self.degenerate
        return tuple(k for k, m in zip(self.indices, mask) if m), self.lower[mask]

    def interval_part(self) -> Tuple[Tuple[int, ...], np.ndarray, np.ndarray]:
        mask = ~self.degenerate
        return tuple(k for k, m in zip(self.indices, mask) if m), self.lower[mask], self.upper[mask]

    def describe(self, names: Sequence[str]) -> Dict[str, Any]:
        if self.kind == 'moments':
            return {'kind': 'moments'}
        return {
            'kind': 'point' if self.is_point else self.kind,
            'constraints': {
                names[k]: [float(lo), float(hi)] for k, lo, hi in zip(self.indices, self.lower, self.upper)
            },
        }

"""
Amostragem determinística em blocos.

O fluxo de amostras é dividido em blocos de tamanho fixo; o gerador de cada
bloco nasce de SeedSequence([seed, índice_do_bloco]). Os blocos são reduzidos
na ordem do índice, então o resultado não depende do número de workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

from apps.core.exceptions import ModelValidationError

logger = logging.getLogger(__name__)

T = TypeVar('T')

FAMILIES = ('gaussian', 'uniform', 'laplace')


def check_family(family: str) -> str:
    if family not in FAMILIES:
        raise ModelValidationError('MalformedInput', f'Família desconhecida (use {", ".join(FAMILIES)})', family)
    return family


def standard_draws(rng: np.random.Generator, family: str, size: Tuple[int, int]) -> np.ndarray:
    """Sorteios i.i.d. de média 0 e variância 1 na família pedida."""
    if family == 'gaussian':
        return rng.standard_normal(size)
    if family == 'uniform':
        half_width = math.sqrt(3.0)
        return rng.uniform(-half_width, half_width, size)
    if family == 'laplace':
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
    raise ModelValidationError('MalformedInput', 'Família desconhecida', family)


def chunk_rng(seed: int, chunk_index: int, stream: int = 0) -> np.random.Generator:
    """Gerador do bloco: hash de (seed, bloco, fluxo) via SeedSequence."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk_index), int(stream)]))


def chunk_sizes(n_samples: int, chunk_size: int) -> List[int]:
    """Tamanhos dos blocos; o último pode ser menor."""
    if chunk_size <= 0:
        raise ModelValidationError('MalformedInput', 'chunk_size precisa ser positivo', chunk_size)
    full, rest = divmod(n_samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunks(work: Callable[[int, int], T], sizes: Sequence[int], workers: int = 1) -> List[T]:
    """
    Executa ``work(índice, tamanho)`` para cada bloco e devolve na ordem dos índices.

    ``ThreadPoolExecutor.map`` preserva a ordem; o numpy libera o GIL nas
    operações pesadas.
    """
    if workers <= 1 or len(sizes) <= 1:
        return [work(k, size) for k, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, range(len(sizes)), sizes))


def solve_batch(i_minus_a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Resolve (I - A) v = rhs para cada linha de ``rhs`` (n x n_v)."""
    return np.linalg.solve(i_minus_a, rhs.T).T


def in_box(values: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Máscara das linhas dentro da caixa fechada [lower, upper]."""
    if values.shape[1] == 0:
        return np.ones(values.shape[0], dtype=bool)
    return np.all((values >= lower) & (values <= upper), axis=1)

"""
Utilitários Core - Funções auxiliares numéricas e de configuração
"""
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from apps.core.exceptions import ModelValidationError

logger = logging.getLogger(__name__)


# Valores usados quando a biblioteca roda fora de um projeto Django configurado.
DEFAULT_SETTINGS: Dict[str, Any] = {
    'SEED': 0,
    'N_SAMPLES': 1_000_000,
    'CHUNK_SIZE': 50_000,
    'WORKERS': 1,
    'FAMILY': 'gaussian',
    'MIN_ACCEPTANCE': 1e-4,
    'K_SIGMA': 4.0,
    'TOL_STABILITY': 1e-9,
    'RHO_WARNING': 0.99,
    'COND_WARNING': 1e12,
    'PSD_TOL': 1e-8,
    'SYM_TOL': 1e-10,
    'ZERO_MASS': 1e-15,
    'CONSISTENCY_TOL': 1e-8,
}


def get_setting(key: str) -> Any:
    """
    Lê uma chave de ``SEMPLAN_SETTINGS`` com fallback para os padrões internos.

    Args:
        key: Nome da chave (ex.: 'TOL_STABILITY')

    Returns:
        Valor configurado ou o padrão embutido
    """
    try:
        project_settings = getattr(settings, 'SEMPLAN_SETTINGS', {})
    except ImproperlyConfigured:
        project_settings = {}
    return project_settings.get(key, DEFAULT_SETTINGS[key])


def note_warning(notes: Optional[List[str]], message: str) -> None:
    """Registra um aviso numérico no log e na lista de metadados do resultado."""
    logger.warning(message)
    if notes is not None:
        notes.append(message)


def as_mapping(value: Any, label: str) -> Mapping[str, Any]:
    """Bloco opcional do tipo objeto; ausente vira {}."""
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ModelValidationError('MalformedInput', f'{label} precisa ser um objeto', label)
    return value


def as_list(value: Any, label: str) -> List[Any]:
    """Bloco opcional do tipo lista; ausente vira []."""
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        raise ModelValidationError('MalformedInput', f'{label} precisa ser uma lista', label)
    return list(value)


def as_names(value: Any, label: str) -> List[str]:
    """Lista de nomes de variáveis; um nome isolado vale como lista de um elemento."""
    if isinstance(value, str):
        return [value]
    names = as_list(value, label)
    if not all(isinstance(name, str) for name in names):
        raise ModelValidationError('MalformedInput', f'{label} aceita apenas nomes', label)
    return names


def parse_bound(value: Any, label: str) -> float:
    """
    Converte um limite de intervalo, aceitando as strings "-inf" e "inf".

    Args:
        value: Número ou string
        label: Nome usado na mensagem de erro

    Returns:
        float (possivelmente infinito)
    """
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ('inf', '+inf'):
            return math.inf
        if text == '-inf':
            return -math.inf
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ModelValidationError('MalformedInput', f'Limite inválido: {value!r}', label)
    if math.isnan(result):
        raise ModelValidationError('MalformedInput', 'Limite NaN não é permitido', label)
    return result


def as_float(value: Any, label: str) -> float:
    """Converte para float finito ou levanta MalformedInput."""
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ModelValidationError('MalformedInput', f'Valor numérico inválido: {value!r}', label)
    if not math.isfinite(result):
        raise ModelValidationError('MalformedInput', 'Valor precisa ser finito', label)
    return result


def as_matrix(value: Any, shape: Tuple[int, int], label: str) -> np.ndarray:
    """
    Converte uma lista aninhada em matriz float com forma verificada.

    Matrizes com uma dimensão nula aceitam ``None`` ou lista vazia.
    """
    if value is None or (isinstance(value, (list, tuple)) and len(value) == 0 and 0 in shape):
        return np.zeros(shape)
    try:
        matrix = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelValidationError('MalformedInput', 'Matriz com entradas não numéricas', label)
    if matrix.ndim == 1 and shape[0] == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.shape != shape:
        raise ModelValidationError(
            'DimensionMismatch',
            f'Esperado {shape[0]}x{shape[1]}, recebido {"x".join(map(str, matrix.shape))}',
            label,
        )
    if not np.all(np.isfinite(matrix)):
        raise ModelValidationError('MalformedInput', 'Matriz com entradas não finitas', label)
    return matrix


def as_vector(value: Any, size: int, label: str) -> np.ndarray:
    """Converte uma lista em vetor float de tamanho verificado."""
    try:
        vector = np.array(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ModelValidationError('MalformedInput', 'Vetor com entradas não numéricas', label)
    if vector.shape != (size,):
        raise ModelValidationError(
            'DimensionMismatch', f'Esperado tamanho {size}, recebido {vector.size}', label
        )
    if not np.all(np.isfinite(vector)):
        raise ModelValidationError('MalformedInput', 'Vetor com entradas não finitas', label)
    return vector


def frozen(array: np.ndarray) -> np.ndarray:
    """Cópia somente-leitura (tipos de domínio são imutáveis)."""
    result = np.array(array, dtype=float, copy=True)
    result.setflags(write=False)
    return result


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def asymmetric_entries(matrix: np.ndarray, tol: float) -> List[Tuple[int, int]]:
    """Pares (i, j), i < j, onde a matriz não é simétrica."""
    rows, cols = np.nonzero(np.abs(matrix - matrix.T) > tol * max(1.0, float(np.max(np.abs(matrix), initial=0.0))))
    return [(int(i), int(j)) for i, j in zip(rows, cols) if i < j]


def min_eigenvalue(matrix: np.ndarray) -> float:
    """Menor autovalor de uma matriz simétrica (0 para matriz vazia)."""
    if matrix.size == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(symmetrize(matrix))))


def is_psd(matrix: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = get_setting('PSD_TOL') if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
    return min_eigenvalue(matrix) >= -tol * scale


def symmetric_factor(cov: np.ndarray) -> np.ndarray:
    """
    Fator simétrico L (L L' = cov) por autodecomposição.

    Autovalores negativos por arredondamento são truncados em zero, o que
    cobre matrizes de posto incompleto.
    """
    if cov.size == 0:
        return np.zeros_like(cov)
    values, vectors = np.linalg.eigh(symmetrize(cov))
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def inverse_or_pinv(
    matrix: np.ndarray,
    label: str,
    notes: Optional[List[str]] = None,
) -> Tuple[np.ndarray, bool]:
    """
    Inversa de uma matriz quadrada, caindo para a pseudoinversa quando singular.

    Args:
        matrix: Matriz quadrada
        label: Nome do bloco (para o aviso)
        notes: Lista de avisos do resultado (opcional)

    Returns:
        Tupla (inversa, usou_pseudoinversa)
    """
    if matrix.size == 0:
        return np.zeros_like(matrix), False
    with np.errstate(divide='ignore', invalid='ignore'):
        condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > get_setting('COND_WARNING'):
        note_warning(notes, f'{label} singular ou mal condicionada: usando pseudoinversa')
        return np.linalg.pinv(matrix, rcond=1e-12), True
    return np.linalg.inv(matrix), False


def select(matrix: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Sub-bloco por listas de índices (aceita listas vazias)."""
    return matrix[np.ix_(list(rows), list(cols))]

"""
Serviço de Relatórios - montagem e emissão dos resultados da linha de comando.

Os relatórios são dicionários simples (ordem de inserção preservada) montados
a partir dos tipos de domínio. Dois formatos de saída:
- json: estruturado, floats com 17 dígitos significativos, nunca arredonda;
- table: tabela legível, floats com 6 dígitos significativos.
Mesmas entradas produzem bytes idênticos.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)

BANNER = '=' * 80


# =============================================================================
# SANITIZAÇÃO
# =============================================================================

def safe_float(value: Any) -> float:
    """Converte escalares numpy/python para float puro."""
    return float(value)


def to_plain(value: Any) -> Any:
    """Converte arrays e escalares numpy em listas e números python."""
    if isinstance(value, np.ndarray):
        return [to_plain(item) for item in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Mapping):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    return value


def labeled_vector(names: Sequence[str], values: Iterable[float]) -> Dict[str, float]:
    return {name: safe_float(value) for name, value in zip(names, values)}


def labeled_matrix(
    rows: Sequence[str],
    matrix: np.ndarray,
    cols: Optional[Sequence[str]] = None,
) -> Dict[str, Dict[str, float]]:
    cols = rows if cols is None else cols
    matrix = np.asarray(matrix)
    return {row: labeled_vector(cols, matrix[i]) for i, row in enumerate(rows)}


# =============================================================================
# JSON ESTRUTURADO
# =============================================================================

def format_float_17(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    text = '%.17g' % value
    if text == '-0':
        text = '0'
    return text


def _json_string(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def _emit_json(value: Any, indent: int, level: int, parts: List[str]) -> None:
    pad = ' ' * (indent * (level + 1))
    close = ' ' * (indent * level)
    if value is None:
        parts.append('null')
    elif isinstance(value, bool):
        parts.append('true' if value else 'false')
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        parts.append(format_float_17(value))
    elif isinstance(value, str):
        parts.append(_json_string(value))
    elif isinstance(value, Mapping):
        if not value:
            parts.append('{}')
            return
        parts.append('{\n')
        for k, (key, item) in enumerate(value.items()):
            parts.append(f'{pad}{_json_string(str(key))}: ')
            _emit_json(item, indent, level + 1, parts)
            parts.append(',\n' if k < len(value) - 1 else '\n')
        parts.append(close + '}')
    elif isinstance(value, (list, tuple)):
        if not value:
            parts.append('[]')
            return
        if all(isinstance(item, (int, float)) and not isinstance(item, bool) for item in value):
            inner: List[str] = []
            for item in value:
                _emit_json(item, indent, level + 1, inner)
            parts.append('[' + ', '.join(inner) + ']')
            return
        parts.append('[\n')
        for k, item in enumerate(value):
            parts.append(pad)
            _emit_json(item, indent, level + 1, parts)
            parts.append(',\n' if k < len(value) - 1 else '\n')
        parts.append(close + ']')
    else:
        parts.append(_json_string(str(value)))


def render_json(report: Mapping[str, Any], indent: int = 2) -> str:
    """JSON determinístico com floats em '%.17g'."""
    parts: List[str] = []
    _emit_json(to_plain(report), indent, 0, parts)
    return ''.join(parts) + '\n'


# =============================================================================
# TABELA LEGÍVEL
# =============================================================================

def format_float_6(value: Any) -> str:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return str(value)
    return '%.6g' % value


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_grid(value: Any) -> bool:
    return (
        isinstance(value, Mapping)
        and bool(value)
        and all(isinstance(row, Mapping) and row and all(_is_number(v) for v in row.values()) for row in value.values())
    )


def _render_grid(grid: Mapping[str, Mapping[str, Any]], pad: str, lines: List[str]) -> None:
    cols = list(next(iter(grid.values())).keys())
    width = max([12] + [len(str(c)) + 2 for c in cols] + [len(str(r)) + 2 for r in grid])
    lines.append(pad + ' ' * width + ''.join(str(c).rjust(width) for c in cols))
    for row_name, row in grid.items():
        lines.append(pad + str(row_name).ljust(width) + ''.join(format_float_6(row[c]).rjust(width) for c in cols))


def _render_table(report: Mapping[str, Any], level: int, lines: List[str]) -> None:
    pad = '  ' * level
    for key, value in report.items():
        if _is_grid(value):
            lines.append(f'{pad}{key}:')
            _render_grid(value, pad + '  ', lines)
        elif isinstance(value, Mapping):
            lines.append(f'{pad}{key}:')
            _render_table(value, level + 1, lines)
        elif isinstance(value, (list, tuple)) and value and all(_is_number(v) for v in value):
            lines.append(f'{pad}{key}: ' + '  '.join(format_float_6(v) for v in value))
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, (list, tuple)) for v in value):
            lines.append(f'{pad}{key}:')
            for row in value:
                lines.append(pad + '  ' + '  '.join(format_float_6(v) for v in row))
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Mapping) for v in value):
            lines.append(f'{pad}{key}:')
            for item in value:
                lines.append(pad + '  - ' + ', '.join(f'{k}={format_float_6(v)}' for k, v in item.items()))
        elif isinstance(value, (list, tuple)):
            lines.append(f'{pad}{key}: ' + (', '.join(format_float_6(v) for v in value) or '---'))
        else:
            lines.append(f'{pad}{key}: {"---" if value is None else format_float_6(value)}')


def render_table(report: Mapping[str, Any], title: Optional[str] = None) -> str:
    """Tabela legível com floats em 6 dígitos significativos."""
    lines: List[str] = []
    if title:
        lines.extend([BANNER, title, BANNER])
    _render_table(to_plain(report), 0, lines)
    return '\n'.join(lines) + '\n'


def render(report: Mapping[str, Any], fmt: str, title: Optional[str] = None) -> str:
    if fmt == 'json':
        return render_json(report)
    return render_table(report, title)


def emit(report: Mapping[str, Any], fmt: str, stream: TextIO, out: Optional[str] = None, title: Optional[str] = None) -> str:
    """Escreve o relatório em ``out`` (se dado) ou no stream; devolve o texto."""
    text = render(report, fmt, title)
    if out:
        Path(out).write_text(text, encoding='utf-8')
        logger.info(f'Relatório gravado em {out}')
    else:
        stream.write(text)
    return text


# =============================================================================
# RELATÓRIOS DE DOMÍNIO
# =============================================================================

def stability_report(stability) -> Dict[str, Any]:
    data = stability.as_dict()
    data['warnings'] = list(stability.warnings)
    return data


def moments_report(names: Sequence[str], mean: np.ndarray, cov: np.ndarray, **extra: Any) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        'mean': labeled_vector(names, mean),
        'cov': labeled_matrix(names, cov),
    }
    data.update(extra)
    return data


def effects_report(part, te) -> Dict[str, Any]:
    s_names = part.labels(part.s_idx)
    x_names = part.labels(part.x_idx)
    return {
        'partition': {
            'F': part.labels(part.f_idx),
            'U': part.labels(part.u_idx),
            'X': x_names,
            'W': part.labels(part.w_idx),
            'Z': part.labels(part.z_idx),
            'Y': part.y_name,
        },
        'tau_sx': labeled_matrix(s_names, te.tau_sx, x_names),
        'warnings': list(te.warnings),
    }


def counterfactual_report(cf) -> Dict[str, Any]:
    data = moments_report(cf.names, cf.mean_s, cf.cov_s)
    data.update(to_plain(cf.metadata))
    return data


def optimal_plan_report(result, part, target: Optional[Mapping[str, Any]] = None, decorrelation=None) -> Dict[str, Any]:
    x_names = part.labels(part.x_idx)
    w_names = part.labels(part.w_idx)
    data: Dict[str, Any] = {
        'response': result.y_name,
        'b_star': labeled_matrix(x_names, result.b_star, w_names) if w_names else {},
        'mean_y': result.mean_y,
        'var_y': result.var_y,
        'sigma_star': labeled_matrix(result.s_names, result.sigma_star),
    }
    if decorrelation is not None:
        data['cov_y_w'] = labeled_vector(w_names, decorrelation)
    if target is not None:
        data['target'] = dict(target)
    data.update(to_plain(result.metadata()))
    return data


def empirical_report(emp) -> Dict[str, Any]:
    return {
        'mean': labeled_vector(emp.names, emp.mean_s),
        'cov': labeled_matrix(emp.names, emp.cov_s),
        'se_mean': labeled_vector(emp.names, emp.se_mean_s),
        'se_cov': labeled_matrix(emp.names, emp.se_cov_s),
        'n_samples': emp.n_samples,
        'n_accepted': emp.n_accepted,
        'acceptance_rate': emp.acceptance_rate,
        'seed': emp.seed,
        'family': emp.family,
    }


def comparison_report(report, worst: int = 10) -> Dict[str, Any]:
    return {
        'passed': report.passed,
        'k_sigma': report.k_sigma,
        'max_abs_z': report.max_abs_z,
        'worst': [
            {'entry': e.label, 'closed': e.closed, 'empirical': e.empirical, 'se': e.se, 'z': e.z}
            for e in report.worst(worst)
        ],
    }

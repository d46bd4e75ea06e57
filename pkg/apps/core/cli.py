"""
Ponto de entrada da linha de comando.

    python manage.py validate --model modelo.json
    python manage.py optimal-plan --model modelo.json --target-y 4

Códigos de saída: 0 sucesso, 1 erro de validação, 2 falha numérica,
3 divergência do oráculo.
"""

import logging
import os
from typing import List, Optional, Sequence

from django.core.management import execute_from_command_line

logger = logging.getLogger(__name__)

# Grafias com hífen aceitas para subcomandos cujo módulo usa sublinhado.
ALIASES = {
    'optimal-plan': 'optimal_plan',
    'discrete-disjunctive': 'discrete_disjunctive',
}


def normalize_argv(argv: Sequence[str]) -> List[str]:
    argv = list(argv)
    if len(argv) > 1:
        argv[1] = ALIASES.get(argv[1], argv[1])
    return argv


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Executa um subcomando e devolve o código de saída.

    Args:
        argv: Argumentos no formato de ``sys.argv`` (programa primeiro)

    Returns:
        0 em sucesso; o ``returncode`` do CommandError em falha
    """
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'semplan.settings')
    argv = normalize_argv(argv if argv is not None else ['manage.py'])
    try:
        execute_from_command_line(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        if isinstance(exc.code, int):
            return exc.code
        return 1
    return 0

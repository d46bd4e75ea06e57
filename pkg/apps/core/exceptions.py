"""
Exceções do Semplan.

Toda falha carrega um ``code`` (nome estável do erro, usado nos relatórios
estruturados) e a ``entity`` ofensora (variável, entrada de matriz, tabela).
A categoria define o código de saída da linha de comando.
"""

from typing import Any, Dict, Optional


class SemplanError(Exception):
    """Base de todos os erros da biblioteca."""

    exit_code = 1

    def __init__(self, code: str, message: str, entity: Optional[Any] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.entity = entity

    def as_payload(self) -> Dict[str, Any]:
        """Payload legível por máquina para a CLI."""
        return {
            'error': self.code,
            'entity': self.entity if self.entity is None else str(self.entity),
            'message': self.message,
        }

    def __str__(self) -> str:
        if self.entity is None:
            return f'{self.code}: {self.message}'
        return f'{self.code} [{self.entity}]: {self.message}'


class ModelValidationError(SemplanError):
    """Entrada estruturalmente inválida (modelo, partição, plano, evidência, tabelas)."""

    exit_code = 1


class NumericalError(SemplanError):
    """Falha numérica: instabilidade, singularidade, aceitação baixa, inconsistência."""

    exit_code = 2


class OracleMismatch(SemplanError):
    """Forma fechada e oráculo de Monte Carlo discordam além de k_sigma."""

    exit_code = 3

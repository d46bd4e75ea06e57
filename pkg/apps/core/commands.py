"""
Base dos subcomandos da linha de comando.

Cada subcomando é um management command do Django que herda de
``SemplanCommand``: as opções comuns são validadas pelo RunConfigForm, os
erros da biblioteca viram ``CommandError`` com o código de saída da categoria
(1 validação, 2 numérico, 3 oráculo) e o relatório é emitido em tabela ou JSON.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ModelValidationError, NumericalError, SemplanError
from apps.core.forms import RunConfigForm
from apps.core.loaders import RunInput, load_input, read_json
from apps.core.reports import emit, render_json
from apps.core.utils import as_matrix, get_setting

logger = logging.getLogger(__name__)

COMMON_OPTIONS = (
    'model', 'seed', 'samples', 'k_sigma', 'format', 'out', 'family',
    'workers', 'chunk_size', 'target_y', 'gain_a',
)

# Chaves aceitas no bloco "config" do arquivo de entrada.
FILE_CONFIG_KEYS = ('seed', 'samples', 'k_sigma', 'family', 'workers', 'chunk_size')


class SemplanCommand(BaseCommand):
    """Comando com opções comuns, tradução de erros e emissão de relatório."""

    requires_system_checks = []
    title = 'Semplan'
    accepts_model_free_input = False

    def add_arguments(self, parser):
        parser.add_argument('--model', help='Arquivo JSON com modelo, partição, plano e evidência')
        parser.add_argument('--seed', type=int, help='Semente do Monte Carlo')
        parser.add_argument('--samples', type=int, help='Número de amostras')
        parser.add_argument('--k-sigma', dest='k_sigma', type=float, help='Tolerância em erros-padrão')
        parser.add_argument('--format', help='table | json (json-like é aceito)')
        parser.add_argument('--out', help='Grava o relatório neste arquivo')
        parser.add_argument('--family', help='Família dos distúrbios: gaussian, uniform, laplace')
        parser.add_argument('--workers', type=int, help='Threads para o Monte Carlo')
        parser.add_argument('--chunk-size', dest='chunk_size', type=int, help='Tamanho dos blocos de amostras')
        parser.add_argument('--target-y', dest='target_y', type=float, help='Valor alvo y0 para a resposta')
        parser.add_argument('--gain-a', dest='gain_a', help='Arquivo JSON com a matriz de ganho a')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        """Opções específicas do subcomando."""

    def handle(self, *args, **options):
        fmt = 'json' if options.get('format') in ('json', 'json-like') else 'table'
        try:
            opts = RunConfigForm({key: options.get(key) for key in COMMON_OPTIONS}).options()
            fmt = opts['format']
            opts.update({key: value for key, value in options.items() if key not in COMMON_OPTIONS})
            report = self.run_command(opts)
            emit(report, fmt, self.stdout, out=opts.get('out'), title=self.title)
            self.after_emit(report, opts)
        except SemplanError as exc:
            self.fail(exc, fmt)
        except np.linalg.LinAlgError as exc:
            self.fail(NumericalError('SingularSystem', f'Falha de álgebra linear: {exc}'), fmt)

    def run_command(self, opts: Dict[str, Any]) -> Dict[str, Any]:
        raise NotImplementedError

    def after_emit(self, report: Dict[str, Any], opts: Dict[str, Any]) -> None:
        """Gancho após a emissão (o comando compare sinaliza falha aqui)."""

    def fail(self, exc: SemplanError, fmt: str) -> None:
        logger.debug(f'Falha no comando: {exc}')
        if fmt == 'json':
            self.stderr.write(render_json(exc.as_payload()), ending='')
        raise CommandError(str(exc), returncode=exc.exit_code)

    # -------------------------------------------------------------------------
    # Helpers de entrada
    # -------------------------------------------------------------------------

    def load(self, opts: Dict[str, Any]) -> RunInput:
        if not opts.get('model'):
            raise ModelValidationError('MalformedInput', 'Informe --model', '--model')
        run_input = load_input(opts['model'])
        if run_input.sem is None and not self.accepts_model_free_input:
            raise ModelValidationError('MalformedInput', 'Arquivo sem bloco model', opts['model'])
        return run_input

    def setting(self, opts: Dict[str, Any], run_input: Optional[RunInput], key: str, setting_key: str) -> Any:
        """Precedência: flag > bloco config do arquivo > SEMPLAN_SETTINGS."""
        if opts.get(key) is not None:
            return opts[key]
        file_config = (run_input.raw.get('config') or {}) if run_input is not None else {}
        if key in FILE_CONFIG_KEYS and file_config.get(key) is not None:
            return file_config[key]
        return get_setting(setting_key)

    def sampling_kwargs(self, opts: Dict[str, Any], run_input: Optional[RunInput]) -> Dict[str, Any]:
        return {
            'n_samples': int(self.setting(opts, run_input, 'samples', 'N_SAMPLES')),
            'seed': int(self.setting(opts, run_input, 'seed', 'SEED')),
            'family': self.setting(opts, run_input, 'family', 'FAMILY'),
            'chunk_size': int(self.setting(opts, run_input, 'chunk_size', 'CHUNK_SIZE')),
            'workers': int(self.setting(opts, run_input, 'workers', 'WORKERS')),
        }

    def gain_override(self, opts: Dict[str, Any], shape) -> Optional[np.ndarray]:
        """Matriz a vinda de --gain-a (arquivo JSON {"a": [[...]]})."""
        if not opts.get('gain_a'):
            return None
        return as_matrix(read_json(opts['gain_a']).get('a'), shape, '--gain-a')

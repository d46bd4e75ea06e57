"""
Management Command: Validação do modelo

Valida o modelo do arquivo de entrada e relata os raios espectrais de A_vv,
A_tt e A_{xs,xs} (estes dois quando há partição). Modelo instável sai com
código 2 depois do relatório.

Uso:
    python manage.py validate --model modelo.json [--format json] [--out relatorio.json]
"""

from apps.core.algebra import check_stability
from apps.core.commands import SemplanCommand
from apps.core.exceptions import NumericalError
from apps.core.reports import stability_report
from apps.core.structures import serialize_model


class Command(SemplanCommand):
    help = 'Valida o modelo e relata a estabilidade'
    title = '🔍 Validação do modelo'

    def run_command(self, opts):
        run_input = self.load(opts)
        stability = check_stability(run_input.sem, run_input.partition)
        self.stability = stability
        return {
            'variables': list(run_input.sem.names),
            'n_edges': len(run_input.sem.edges),
            'stability': stability_report(stability),
            'model': serialize_model(run_input.sem),
        }

    def after_emit(self, report, opts):
        if not self.stability.stable:
            raise NumericalError(
                'Unstable',
                f'Modelo instável: raio espectral {self.stability.rho_full:.10g}',
                'A_vv',
            )

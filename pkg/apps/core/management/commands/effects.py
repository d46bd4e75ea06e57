"""
Management Command: Efeitos totais

Relata tau_sx = (I - A_ss)^{-1} A_sx para a partição do arquivo. Quando o
arquivo traz um plano, inclui também E(S | do(X = x)) sem evidência.

Uso:
    python manage.py effects --model modelo.json
"""

from apps.core.algebra import total_effects
from apps.core.commands import SemplanCommand
from apps.core.reports import effects_report, labeled_vector
from apps.counterfactual.services import interventional_moments


class Command(SemplanCommand):
    help = 'Efeitos totais de X sobre S'
    title = '➡️ Efeitos totais'

    def run_command(self, opts):
        run_input = self.load(opts)
        part = run_input.require_partition()
        report = effects_report(part, total_effects(run_input.sem, part))
        if run_input.plan is not None:
            moments = interventional_moments(run_input.sem, part, run_input.plan.x_const)
            report['interventional_mean'] = labeled_vector(moments.names, moments.mean_s)
        return report

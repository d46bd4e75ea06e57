"""
Management Command: Consulta contrafactual

Condiciona a evidência, aplica o plano e relata E(S | do, H ∈ R_h) e
var(S | do, H ∈ R_h). Com --check resolve também o sistema modificado e relata
a maior diferença entre os dois caminhos.

Uso:
    python manage.py counterfactual --model entrada.json [--gain-a ganho.json] [--check]
"""

from apps.core.commands import SemplanCommand
from apps.core.reports import counterfactual_report
from apps.counterfactual.services import consistency_gap, predict, predict_via_modified
from apps.evidence.services import SamplingConfig, condition


class Command(SemplanCommand):
    help = 'Momentos contrafactuais sob um plano de controle'
    title = '🔀 Consulta contrafactual'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--check',
            action='store_true',
            help='Confere contra o equilíbrio numérico do sistema modificado',
        )

    def run_command(self, opts):
        run_input = self.load(opts)
        sem, part = run_input.sem, run_input.require_partition()
        plan = run_input.require_plan()
        gain_f = self.gain_override(opts, (part.n_x, part.n_f))
        if gain_f is not None:
            plan = plan.with_gain_f(gain_f)

        cm = condition(sem, run_input.evidence, SamplingConfig(**self.sampling_kwargs(opts, run_input)))
        result = predict(sem, part, plan, cm)
        report = counterfactual_report(result)
        report['evidence'] = run_input.evidence.describe(sem.names)
        if opts.get('check'):
            report['check_gap'] = consistency_gap(result, predict_via_modified(sem, part, plan, cm))
        return report

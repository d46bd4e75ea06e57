"""
Management Command: Forma fechada contra o oráculo

Roda a simulação de mundos gêmeos e compara com a predição em forma fechada
por z-scores. Sai com código 3 se algum |z| passar de k_sigma.

Uso:
    python manage.py compare --model entrada.json --k-sigma 4 [--mode independent]
"""

from apps.core.commands import SemplanCommand
from apps.core.reports import comparison_report, counterfactual_report, empirical_report
from apps.oracle.services import MODES, TwinConfig, oracle_check


class Command(SemplanCommand):
    help = 'Compara a predição em forma fechada com a simulação'
    title = '⚖️ Comparação com o oráculo'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--mode',
            default='self_consistent',
            help=f'Condicionamento da forma fechada: {", ".join(MODES)}',
        )

    def run_command(self, opts):
        run_input = self.load(opts)
        part = run_input.require_partition()
        plan = run_input.require_plan()
        gain_f = self.gain_override(opts, (part.n_x, part.n_f))
        if gain_f is not None:
            plan = plan.with_gain_f(gain_f)
        cfg = TwinConfig(**self.sampling_kwargs(opts, run_input))
        k_sigma = float(self.setting(opts, run_input, 'k_sigma', 'K_SIGMA'))

        report, closed, emp = oracle_check(
            run_input.sem, part, plan, run_input.evidence, cfg, mode=opts.get('mode'), k_sigma=k_sigma,
        )
        self.comparison = report
        data = comparison_report(report)
        data['closed'] = counterfactual_report(closed)
        data['empirical'] = empirical_report(emp)
        return data

    def after_emit(self, report, opts):
        self.comparison.raise_on_failure()

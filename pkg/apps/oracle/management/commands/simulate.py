"""
Management Command: Simulação de mundos gêmeos

Relata médias e covariâncias empíricas de S no mundo contrafactual, com
erros-padrão, número de amostras aceitas e taxa de aceitação.

Uso:
    python manage.py simulate --model entrada.json --samples 1000000 --seed 7
"""

from apps.core.commands import SemplanCommand
from apps.core.reports import empirical_report
from apps.oracle.services import TwinConfig, simulate_twin


class Command(SemplanCommand):
    help = 'Simulação Monte Carlo dos mundos real e contrafactual'
    title = '🧪 Mundos gêmeos'

    def run_command(self, opts):
        run_input = self.load(opts)
        part = run_input.require_partition()
        plan = run_input.require_plan()
        gain_f = self.gain_override(opts, (part.n_x, part.n_f))
        if gain_f is not None:
            plan = plan.with_gain_f(gain_f)
        cfg = TwinConfig(**self.sampling_kwargs(opts, run_input))
        emp = simulate_twin(run_input.sem, part, plan, run_input.evidence, cfg)
        return empirical_report(emp)

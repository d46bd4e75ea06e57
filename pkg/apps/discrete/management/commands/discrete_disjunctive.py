"""
Management Command: Plano disjuntivo discreto

Lê o bloco ``tabular`` do arquivo de entrada e relata pr(y \\ X ∈ R_x) para
todo y, a política renormalizada e a diferença para a enumeração exaustiva.

Uso:
    python manage.py discrete-disjunctive --model tabelas.json --region 0,1 [--y 1]
"""

from apps.core.commands import SemplanCommand
from apps.core.exceptions import ModelValidationError
from apps.core.reports import labeled_vector
from apps.discrete.services import (
    atomic_effect,
    disjunctive_effect,
    disjunctive_report,
    load_tabular,
    observational_distribution,
)


class Command(SemplanCommand):
    help = 'Efeito de um plano disjuntivo em um modelo tabular'
    title = '🎲 Plano disjuntivo'
    accepts_model_free_input = True

    def add_command_arguments(self, parser):
        parser.add_argument('--region', help='Valores de R_x separados por vírgula')
        parser.add_argument('--y', dest='y_value', help='Valor da resposta para o efeito pontual')

    def run_command(self, opts):
        run_input = self.load(opts)
        if not run_input.tabular:
            raise ModelValidationError('MalformedInput', 'Arquivo sem bloco tabular', 'tabular')
        model = load_tabular(run_input.tabular)

        if opts.get('region'):
            region = [value.strip() for value in opts['region'].split(',') if value.strip()]
        else:
            region = run_input.raw.get('region') or list(model.x_domain)

        report = disjunctive_report(model, region)
        report['observational'] = labeled_vector(model.y_domain, observational_distribution(model))
        if len(model.x_positions(region)) == 1:
            report['atomic'] = labeled_vector(model.y_domain, atomic_effect(model, region[0]))

        y_value = opts.get('y_value') if opts.get('y_value') is not None else run_input.raw.get('y')
        if y_value is not None:
            report['effect'] = {'y': str(y_value), 'probability': disjunctive_effect(model, region, y_value)}
        return report

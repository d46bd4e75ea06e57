"""
Management Command: Plano ótimo

Para o ganho a (do plano, de --gain-a ou nulo) calcula b*, E(Y) e var(Y) sob
o plano ótimo e confere que cov(Y, W | do) se anula. Com --target-y resolve o
x que leva E(Y) ao alvo; com --minimality N compara var(Y; b*) com N ganhos
sorteados.

Uso:
    python manage.py optimal-plan --model entrada.json --target-y 4
"""

import numpy as np

from apps.core.algebra import total_effects
from apps.core.commands import SemplanCommand
from apps.core.reports import labeled_vector, optimal_plan_report
from apps.evidence.services import SamplingConfig, condition
from apps.planning.services import (
    check_w_decorrelation,
    minimality_check,
    optimal_plan_moments,
    regression_coefs,
    solve_target_x,
)


class Command(SemplanCommand):
    help = 'Plano de variância mínima para a resposta'
    title = '🎯 Plano ótimo'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--minimality',
            type=int,
            default=0,
            help='Número de ganhos b sorteados para a conferência de minimalidade',
        )

    def run_command(self, opts):
        run_input = self.load(opts)
        sem, part = run_input.sem, run_input.require_partition()
        plan = run_input.plan

        gain_f = self.gain_override(opts, (part.n_x, part.n_f))
        if gain_f is None:
            gain_f = plan.gain_f if plan is not None else np.zeros((part.n_x, part.n_f))
        x_const = plan.x_const if plan is not None else np.zeros(part.n_x)
        noise_cov = plan.noise_cov if plan is not None else None

        sampling = self.sampling_kwargs(opts, run_input)
        cm = condition(sem, run_input.evidence, SamplingConfig(**sampling))
        te = total_effects(sem, part)
        rc = regression_coefs(cm, part)
        result = optimal_plan_moments(sem, part, cm, gain_f, x_const, noise_cov, te=te, rc=rc)

        target = None
        if opts.get('target_y') is not None:
            x_target = solve_target_x(result, opts['target_y'])
            result = optimal_plan_moments(sem, part, cm, gain_f, x_target, noise_cov, te=te, rc=rc)
            target = {
                'y0': opts['target_y'],
                'x': labeled_vector(part.labels(part.x_idx), x_target),
                'mean_y': result.mean_y,
            }

        report = optimal_plan_report(
            result,
            part,
            target=target,
            decorrelation=check_w_decorrelation(sem, part, result.plan, cm, te=te, rc=rc),
        )
        if opts.get('minimality'):
            check = minimality_check(
                sem, part, cm, result,
                n_candidates=opts['minimality'],
                seed=sampling['seed'],
                workers=sampling['workers'],
            )
            report['minimality'] = {
                'var_star': check.var_star,
                'best_candidate_var': check.best_candidate_var,
                'n_candidates': check.n_candidates,
                'violations': check.violations,
                'passed': check.passed,
            }
        return report

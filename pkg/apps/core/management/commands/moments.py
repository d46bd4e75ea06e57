"""
Management Command: Momentos implicados e condicionais

Sem evidência relata (mu_v, Sigma_vv); com evidência relata
(mu_{v.r_h}, Sigma_{vv.r_h}) e a proveniência (gaussiana pontual ou Monte Carlo).

Uso:
    python manage.py moments --model modelo.json [--samples N] [--seed S]
"""

from apps.core.commands import SemplanCommand
from apps.core.reports import moments_report
from apps.evidence.services import SamplingConfig, condition


class Command(SemplanCommand):
    help = 'Momentos implicados ou condicionais à evidência'
    title = '📊 Momentos'

    def run_command(self, opts):
        run_input = self.load(opts)
        sem = run_input.sem
        cm = condition(sem, run_input.evidence, SamplingConfig(**self.sampling_kwargs(opts, run_input)))
        return moments_report(
            sem.names,
            cm.mean,
            cm.cov,
            evidence=run_input.evidence.describe(sem.names),
            provenance=cm.provenance.as_dict(),
            warnings=list(cm.warnings),
        )

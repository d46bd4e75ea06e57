import json
from contextlib import redirect_stderr, redirect_stdout
from io import StringIO
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.core.cli import normalize_argv, run
from apps.core.tests import fixtures

CHAIN_PLAN = {'x': {'X': 2.0}, 'b': [[0.0]]}
CHAIN_PARTITION = (['X'], [], ['W'], 'Y')


def first_json(text):
    """Primeiro objeto JSON do texto (o Django acrescenta a linha do CommandError)."""
    value, _ = json.JSONDecoder().raw_decode(text)
    return value


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        self.files = fixtures.InputFiles()
        self.addCleanup(self.files.cleanup)

    def chain_file(self, name='chain.json', **kwargs):
        kwargs.setdefault('plan', CHAIN_PLAN)
        return self.files.write(name, fixtures.input_document(fixtures.chain_spec(), *CHAIN_PARTITION, **kwargs))

    def call(self, name, **options):
        out, err = StringIO(), StringIO()
        call_command(name, stdout=out, stderr=err, **options)
        return out.getvalue()

    def call_json(self, name, **options):
        return json.loads(self.call(name, format='json', **options))

    def run_cli(self, *args):
        out, err = StringIO(), StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = run(['manage.py', *args])
        return code, out.getvalue(), err.getvalue()


class ValidateCommandTests(CommandTestCase):

    def test_stable_model(self):
        report = self.call_json('validate', model=self.chain_file())
        self.assertEqual(report['variables'], ['W', 'X', 'Y'])
        self.assertTrue(report['stability']['stable'])
        self.assertAlmostEqual(report['stability']['rho_full'], 0.0, places=12)

    def test_unstable_model_reports_then_exits_2(self):
        path = self.files.write('feedback.json', {'model': fixtures.feedback_spec(1.1, 1.0)})
        out = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command('validate', model=path, format='json', stdout=out, stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse(json.loads(out.getvalue())['stability']['stable'])

    def test_self_loop_payload_on_stderr(self):
        spec = fixtures.chain_spec()
        spec['edges'].append({'from': 'X', 'to': 'X', 'coeff': 0.5})
        path = self.files.write('loop.json', {'model': spec})
        code, out, err = self.run_cli('validate', '--model', path, '--format', 'json')
        self.assertEqual(code, 1)
        self.assertEqual(out, '')
        payload = first_json(err)
        self.assertEqual(payload['error'], 'SelfLoop')
        self.assertEqual(payload['entity'], 'X->X')

    def test_wrong_type_evidence_block_payload(self):
        path = self.chain_file(evidence={'point': [1.0]})
        code, out, err = self.run_cli('counterfactual', '--model', path, '--format', 'json')
        self.assertEqual(code, 1)
        self.assertEqual(out, '')
        payload = first_json(err)
        self.assertEqual(payload['error'], 'MalformedInput')
        self.assertEqual(payload['entity'], 'evidence.point')

    def test_missing_model_flag(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('validate')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_family(self):
        code, _, err = self.run_cli('validate', '--model', self.chain_file(), '--family', 'cauchy', '--format', 'json')
        self.assertEqual(code, 1)
        self.assertEqual(first_json(err)['entity'], '--family')

    def test_table_output(self):
        text = self.call('validate', model=self.chain_file())
        self.assertIn('Validação do modelo', text)
        self.assertIn('rho_full', text)


class QueryCommandTests(CommandTestCase):

    def test_counterfactual_with_point_evidence(self):
        path = self.chain_file(evidence={'point': {'W': 1.0}})
        report = self.call_json('counterfactual', model=path, check=True)
        self.assertAlmostEqual(report['mean']['Y'], 5.0, places=12)
        self.assertAlmostEqual(report['cov']['Y']['Y'], 1.0, places=12)
        self.assertLess(report['check_gap'], 1e-10)
        self.assertEqual(report['provenance']['kind'], 'GaussianPoint')

    def test_counterfactual_without_evidence_matches_effects(self):
        path = self.chain_file()
        counterfactual = self.call_json('counterfactual', model=path)
        effects = self.call_json('effects', model=path)
        self.assertAlmostEqual(counterfactual['mean']['Y'], effects['interventional_mean']['Y'], places=12)
        self.assertAlmostEqual(effects['tau_sx']['Y']['X'], 2.0, places=12)
        self.assertEqual(effects['partition']['W'], ['W'])

    def test_moments_with_box_evidence(self):
        path = self.chain_file(evidence={'box': {'W': [0.0, 'inf']}})
        report = self.call_json('moments', model=path, samples=20_000, seed=3)
        self.assertEqual(report['provenance']['kind'], 'MonteCarloBox')
        self.assertGreater(report['mean']['W'], 0.0)

    def test_json_is_byte_identical_across_runs(self):
        path = self.chain_file(evidence={'box': {'Y': ['-inf', 1.0]}})
        options = {'model': path, 'samples': 20_000, 'seed': 7}
        self.assertEqual(self.call('counterfactual', format='json', **options), self.call('counterfactual', format='json', **options))

    def test_gain_override_file(self):
        path = self.files.write('feedback_plan.json', fixtures.input_document(
            fixtures.chain_spec(), ['X'], ['Y'], [], 'Y', plan={'x': [1.0]},
        ))
        gain = self.files.write('gain.json', {'a': [[0.25]]})
        report = self.call_json('counterfactual', model=path, gain_a=gain)
        self.assertAlmostEqual(report['mean']['Y'], 4.0, places=12)
        self.assertAlmostEqual(report['plan_radius'], 0.5, places=12)

    def test_out_file(self):
        target = self.files.path('report.json')
        text = self.call('counterfactual', model=self.chain_file(), format='json', out=target)
        self.assertEqual(text, '')
        with open(target, encoding='utf-8') as handle:
            self.assertAlmostEqual(json.load(handle)['mean']['Y'], 4.0, places=12)


class OptimalPlanCommandTests(CommandTestCase):

    def test_target_through_hyphenated_name(self):
        path = self.files.write('plain.json', fixtures.input_document(fixtures.chain_spec(), *CHAIN_PARTITION))
        code, out, _ = self.run_cli('optimal-plan', '--model', path, '--target-y', '4', '--format', 'json')
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertAlmostEqual(report['b_star']['X']['W'], -0.5, places=12)
        self.assertAlmostEqual(report['target']['x']['X'], 2.0, places=12)
        self.assertAlmostEqual(report['mean_y'], 4.0, places=12)
        self.assertAlmostEqual(report['var_y'], 1.0, places=12)
        self.assertAlmostEqual(report['cov_y_w']['W'], 0.0, places=12)

    def test_minimality(self):
        report = self.call_json('optimal_plan', model=self.chain_file(), minimality=25)
        self.assertTrue(report['minimality']['passed'])
        self.assertEqual(report['minimality']['n_candidates'], 25)


class DiscreteCommandTests(CommandTestCase):

    def test_hyphenated_name_and_region(self):
        path = self.files.write('tables.json', {'tabular': fixtures.tabular_binary()})
        code, out, _ = self.run_cli('discrete-disjunctive', '--model', path, '--region', '0,1', '--y', '1', '--format', 'json')
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertAlmostEqual(report['effect']['probability'], 0.59, places=12)
        self.assertNotIn('atomic', report)

    def test_singleton_region_reports_atomic_effect(self):
        path = self.files.write('tables.json', {'tabular': fixtures.tabular_binary(), 'region': [1]})
        report = self.call_json('discrete_disjunctive', model=path)
        self.assertAlmostEqual(report['atomic']['1'], 0.75, places=12)

    def test_missing_tables(self):
        path = self.files.write('empty.json', {'region': [1]})
        with self.assertRaises(CommandError) as ctx:
            self.call('discrete_disjunctive', model=path)
        self.assertEqual(ctx.exception.returncode, 1)


class OracleCommandTests(CommandTestCase):

    def test_simulate(self):
        report = self.call_json('simulate', model=self.chain_file(), samples=20_000, seed=1)
        self.assertEqual(report['n_accepted'], 20_000)
        self.assertEqual(report['family'], 'gaussian')

    def test_compare_passes(self):
        path = self.chain_file(evidence={'box': {'W': [0.0, 'inf']}})
        report = self.call_json('compare', model=path, samples=100_000, seed=5, k_sigma=4.5)
        self.assertTrue(report['passed'])
        self.assertEqual(report['empirical']['n_samples'], 100_000)

    def test_compare_fails_with_zero_tolerance(self):
        out = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command('compare', model=self.chain_file(), samples=10_000, k_sigma=0.0,
                         format='json', stdout=out, stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertFalse(json.loads(out.getvalue())['passed'])

    def test_file_config_block(self):
        path = self.chain_file(config={'samples': 5_000, 'seed': 9})
        report = self.call_json('simulate', model=path)
        self.assertEqual(report['n_samples'], 5_000)
        self.assertEqual(report['seed'], 9)


class ArgvTests(SimpleTestCase):

    def test_aliases(self):
        self.assertEqual(normalize_argv(['manage.py', 'optimal-plan', '--x']), ['manage.py', 'optimal_plan', '--x'])
        self.assertEqual(normalize_argv(['manage.py', 'compare']), ['manage.py', 'compare'])

    def test_manage_delegates_to_cli_runner(self):
        import manage

        with mock.patch('apps.core.cli.run', return_value=3) as runner, mock.patch('sys.argv', ['manage.py', 'validate']):
            with self.assertRaises(SystemExit) as ctx:
                manage.main()
        runner.assert_called_once_with(['manage.py', 'validate'])
        self.assertEqual(ctx.exception.code, 3)

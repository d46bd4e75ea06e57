import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ModelValidationError
from apps.core.loaders import load_input, parse_input, read_json
from apps.core.sampling import chunk_rng, chunk_sizes, in_box, run_chunks, standard_draws
from apps.core.tests import fixtures


class ParseInputTests(SimpleTestCase):

    def test_full_document(self):
        document = fixtures.input_document(
            fixtures.chain_spec(), ['X'], [], ['W'], 'Y',
            plan={'x': {'X': 2.0}, 'b': [[0.25]], 'noise_cov': [[0.5]]},
            evidence={'point': {'W': 1.0}},
        )
        run_input = parse_input(document)
        self.assertEqual(run_input.partition.y_name, 'Y')
        np.testing.assert_array_equal(run_input.plan.x_const, [2.0])
        np.testing.assert_array_equal(run_input.plan.gain_w, [[0.25]])
        self.assertTrue(run_input.evidence.is_point)

    def test_model_keys_at_top_level(self):
        run_input = parse_input(fixtures.chain_spec())
        self.assertEqual(run_input.sem.names, ('W', 'X', 'Y'))
        self.assertIsNone(run_input.partition)

    def test_plan_x_as_list(self):
        document = fixtures.input_document(fixtures.chain_spec(), ['X'], [], ['W'], 'Y', plan={'x': [1.5]})
        np.testing.assert_array_equal(parse_input(document).plan.x_const, [1.5])

    def test_plan_x_for_non_treatment(self):
        document = fixtures.input_document(fixtures.chain_spec(), ['X'], [], ['W'], 'Y', plan={'x': {'Y': 1.0}})
        with self.assertRaises(ModelValidationError) as ctx:
            parse_input(document)
        self.assertEqual(ctx.exception.code, 'UnknownVariable')

    def test_moments_evidence(self):
        document = fixtures.input_document(
            fixtures.chain_spec(), evidence={'moments': {'mean': [0, 0, 0], 'cov': np.eye(3).tolist()}},
        )
        self.assertEqual(parse_input(document).evidence.kind, 'moments')

    def test_single_name_partition_entries(self):
        document = fixtures.input_document(fixtures.chain_spec(), ['X'], [], [], 'Y')
        document['partition'].update(treatments='X', plan_f='Y', plan_w='W')
        part = parse_input(document).partition
        self.assertEqual(part.labels(part.x_idx), ['X'])
        self.assertEqual(part.labels(part.f_idx), ['Y'])
        self.assertEqual(part.labels(part.w_idx), ['W'])

    def test_wrong_type_partition_entries(self):
        for key, value in (('treatments', {'X': 1}), ('plan_f', 3), ('plan_w', ['W', 2])):
            document = fixtures.input_document(fixtures.chain_spec(), ['X'], [], ['W'], 'Y')
            document['partition'][key] = value
            with self.subTest(key=key):
                with self.assertRaises(ModelValidationError) as ctx:
                    parse_input(document)
                self.assertEqual(ctx.exception.code, 'MalformedInput')
                self.assertEqual(ctx.exception.entity, f'partition.{key}')

    def test_wrong_type_moments_block(self):
        document = fixtures.input_document(fixtures.chain_spec(), evidence={'moments': [0, 0, 0]})
        with self.assertRaises(ModelValidationError) as ctx:
            parse_input(document)
        self.assertEqual(ctx.exception.entity, 'evidence.moments')

    def test_require_plan(self):
        run_input = parse_input(fixtures.input_document(fixtures.chain_spec(), ['X'], [], ['W'], 'Y'))
        with self.assertRaises(ModelValidationError):
            run_input.require_plan()

    def test_missing_file(self):
        with self.assertRaises(ModelValidationError) as ctx:
            load_input('/nao/existe.json')
        self.assertEqual(ctx.exception.code, 'MalformedInput')

    def test_invalid_json(self):
        files = fixtures.InputFiles()
        self.addCleanup(files.cleanup)
        path = files.path('quebrado.json')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write('{"model": ')
        with self.assertRaises(ModelValidationError) as ctx:
            read_json(path)
        self.assertEqual(ctx.exception.entity, path)


class SamplingTests(SimpleTestCase):

    def test_chunk_sizes(self):
        self.assertEqual(chunk_sizes(10, 4), [4, 4, 2])
        self.assertEqual(chunk_sizes(8, 4), [4, 4])

    def test_streams_are_independent_and_reproducible(self):
        first = chunk_rng(7, 3, 0).standard_normal(5)
        np.testing.assert_array_equal(first, chunk_rng(7, 3, 0).standard_normal(5))
        self.assertFalse(np.array_equal(first, chunk_rng(7, 3, 1).standard_normal(5)))
        self.assertFalse(np.array_equal(first, chunk_rng(7, 4, 0).standard_normal(5)))

    def test_run_chunks_preserves_order_with_threads(self):
        work = lambda index, size: chunk_rng(1, index).standard_normal(size)
        serial = run_chunks(work, [100] * 6, workers=1)
        threaded = run_chunks(work, [100] * 6, workers=4)
        np.testing.assert_array_equal(np.concatenate(serial), np.concatenate(threaded))

    def test_families_are_standardized(self):
        for family in ('gaussian', 'uniform', 'laplace'):
            with self.subTest(family=family):
                draws = standard_draws(chunk_rng(0, 0), family, (200_000, 1))
                self.assertAlmostEqual(float(draws.mean()), 0.0, delta=0.02)
                self.assertAlmostEqual(float(draws.var()), 1.0, delta=0.03)

    def test_unknown_family(self):
        with self.assertRaises(ModelValidationError):
            standard_draws(chunk_rng(0, 0), 'cauchy', (1, 1))

    def test_in_box_closed_bounds(self):
        values = np.array([[0.0], [1.0], [1.5]])
        np.testing.assert_array_equal(in_box(values, np.array([0.0]), np.array([1.0])), [True, True, False])

#!/usr/bin/env python3
"""Integration tests for CLI module."""

import unittest
import os
import sys
import tempfile
import shutil
from click.testing import CliRunner

import pytest

# Add the project root directory to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

# Import the CLI module
from cli_commands.cli import cli, COMMAND_TABLE


class TestCLI(unittest.TestCase):
    """Test cases for CLI module."""

    def setUp(self):
        """Set up test fixtures."""
        self.test_dir = tempfile.mkdtemp()
        self.runner = CliRunner()

    def tearDown(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def create_test_file(self, filename, content):
        """Helper to create a test file."""
        filepath = os.path.join(self.test_dir, filename)
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(content)
        return filepath

    def path(self, name):
        return os.path.join(self.test_dir, name)

    def invoke(self, args):
        return self.runner.invoke(cli, args, env={'HYBRIDASR_WORKERS': None, 'HYBRIDASR_DECODE__BEAM': None})

    def test_cli_help(self):
        """Every subcommand is listed in the help text."""
        result = self.invoke(['--help'])
        self.assertEqual(result.exit_code, 0)
        for name in COMMAND_TABLE:
            self.assertIn(name, result.output)

    def test_command_table_covers_every_subcommand(self):
        self.assertEqual(set(cli.commands), set(COMMAND_TABLE))
        self.assertEqual(len(set(map(id, COMMAND_TABLE.values()))), len(COMMAND_TABLE))

    def test_version(self):
        result = self.invoke(['--version'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('hybrid-asr', result.output)
        self.assertIn('fst text format v1', result.output)

    @pytest.mark.unit
    def test_score_apostrophe_modes(self):
        """The apostrophe fixture scores 0% lenient and 50% strict."""
        ref = self.create_test_file('ref.txt', "u1\ta' bhùth\n")
        hyp = self.create_test_file('hyp.txt', "u1\ta bhùth\n")

        result = self.invoke(['score', ref, hyp, '--lenient-apostrophe'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('WER 0.00%', result.output)

        result = self.invoke(['score', ref, hyp])
        self.assertEqual(result.exit_code, 0)
        self.assertIn('WER 50.00%', result.output)

    def test_score_lenient_from_config(self):
        ref = self.create_test_file('ref.txt', "u1\ta' bhùth\n")
        hyp = self.create_test_file('hyp.txt', "u1\ta bhùth\n")
        config = self.create_test_file('config.toml', "[eval]\nlenient_apostrophe = true\n")
        result = self.invoke(['--config', config, 'score', ref, hyp])
        self.assertIn('WER 0.00%', result.output)
        result = self.invoke(['--config', config, 'score', ref, hyp, '--strict-apostrophe'])
        self.assertIn('WER 50.00%', result.output)

    def test_toolkit_errors_exit_with_one(self):
        result = self.invoke(['score', self.path('absent.txt'), self.path('absent.txt')])
        self.assertEqual(result.exit_code, 1)
        self.assertIn('ERROR MissingPath:', result.output)

        ref = self.create_test_file('ref.txt', "u1\ta\n")
        hyp = self.create_test_file('hyp.txt', "u2\ta\n")
        result = self.invoke(['score', ref, hyp])
        self.assertEqual(result.exit_code, 1)
        self.assertIn('ERROR MissingReference:', result.output)

    def test_bad_config_exits_with_one(self):
        config = self.create_test_file('config.toml', "[decode]\nbeam = -1\n")
        ref = self.create_test_file('ref.txt', "u1\ta\n")
        result = self.invoke(['--config', config, 'score', ref, ref])
        self.assertEqual(result.exit_code, 1)
        self.assertIn('ERROR BadConfig:', result.output)

    def test_usage_errors_exit_with_two(self):
        for args in (['score'], ['no-such-command'], ['score', '--no-such-flag', 'a', 'b'], []):
            result = self.invoke(args)
            self.assertEqual(result.exit_code, 2, msg=str(args))
            self.assertIn('ERROR UsageError:', result.output)

    def test_normalize(self):
        raw = self.create_test_file('raw.txt', "  Tha, d'fhàg   e! \nutt9\tÁ mhàthair\n")
        out = self.path('norm.txt')
        result = self.invoke(['normalize', raw, out])
        self.assertEqual(result.exit_code, 0)
        with open(out, encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines, ["utt000001\ttha d'fhàg e", "utt9\tà mhàthair"])

    def test_train_lm_and_perplexity(self):
        corpus = self.create_test_file('corpus.txt', "s1\ta b\ns2\ta b c\ns3\tb c\n")
        lm = self.path('lm.arpa')
        result = self.invoke(['train-lm', corpus, '-o', lm, '--order', '2'])
        self.assertEqual(result.exit_code, 0, msg=result.output)
        with open(lm, encoding='utf-8') as f:
            self.assertIn('\\data\\', f.read())
        result = self.invoke(['ppl', lm, corpus])
        self.assertEqual(result.exit_code, 0)
        self.assertTrue(result.output.strip().splitlines()[-1].startswith('ppl '))

    def test_bpe_round(self):
        corpus = self.create_test_file('corpus.txt', "s1\tmath math\ns2\tmàthair\n")
        model = self.path('bpe.json')
        result = self.invoke(['train-bpe', corpus, model, '--vocab-size', '12'])
        self.assertEqual(result.exit_code, 0, msg=result.output)
        out = self.path('units.txt')
        result = self.invoke(['encode', model, corpus, out])
        self.assertEqual(result.exit_code, 0, msg=result.output)
        with open(out, encoding='utf-8') as f:
            self.assertEqual([line.split('\t')[0] for line in f.read().splitlines()], ['s1', 's2'])

    @pytest.mark.integration
    def test_cli_integration_workflow(self):
        """Synthesize, build a graph, decode, rescore and score through the CLI."""
        data = self.path('synth')
        result = self.invoke(['synth', data, '--seed', '3', '--train-sentences', '150',
                              '--test-utterances', '6'])
        self.assertEqual(result.exit_code, 0, msg=result.output)

        lm = self.path('lm.arpa')
        result = self.invoke(['train-lm', os.path.join(data, 'corpus.txt'), '-o', lm, '--order', '2'])
        self.assertEqual(result.exit_code, 0, msg=result.output)

        graph_dir = self.path('graph')
        result = self.invoke(['build-graph', '--lm', lm, '--out-dir', graph_dir,
                              '--tying', os.path.join(data, 'tying.txt')])
        self.assertEqual(result.exit_code, 0, msg=result.output)
        for name in ('graph.fst', 'words.txt', 'classes.txt', 'tying.txt'):
            self.assertTrue(os.path.exists(os.path.join(graph_dir, name)))

        hyp, lattices, ctm = self.path('hyp.txt'), self.path('lat.txt'), self.path('hyp.ctm')
        result = self.invoke(['decode', os.path.join(data, 'posteriorgrams.txt'), hyp,
                              '--graph-dir', graph_dir, '--lattices', lattices, '--ctm', ctm,
                              '--beam', '12', '--lattice-beam', '4'])
        self.assertEqual(result.exit_code, 0, msg=result.output)

        nbest_path = self.path('nbest.txt')
        result = self.invoke(['nbest', lattices, nbest_path, '-n', '10'])
        self.assertEqual(result.exit_code, 0, msg=result.output)

        rescored = self.path('rescored.txt')
        result = self.invoke(['rescore', nbest_path, rescored, '--lm', lm, '--lambda', '1.0',
                              '--lm-scale', '1.0'])
        self.assertEqual(result.exit_code, 0, msg=result.output)

        references = os.path.join(data, 'references.txt')
        for hypotheses in (hyp, rescored):
            result = self.invoke(['score', references, hypotheses])
            self.assertEqual(result.exit_code, 0, msg=result.output)
            self.assertIn('WER ', result.output)

        with open(hyp, encoding='utf-8') as f:
            self.assertEqual(len(f.read().splitlines()), 6)

    def test_rescore_needs_exactly_one_model(self):
        nbest_path = self.create_test_file('nbest.txt', "u1 1 1.0 2.0 a b\n")
        result = self.invoke(['rescore', nbest_path, self.path('out.txt')])
        self.assertEqual(result.exit_code, 1)
        self.assertIn('ERROR BadConfig:', result.output)

    def test_rescore_weights_have_no_defaults(self):
        nbest_path = self.create_test_file('nbest.txt', "u1 1 1.0 2.0 a b\n")
        lm = self.create_test_file('lm.arpa', "\\data\\\nngram 1=4\n\n\\1-grams:\n-99\t<s>\n"
                                              "-0.5\ta\n-0.5\tb\n-0.3\t</s>\n\n\\end\\\n")
        for extra in ([], ['--lm-scale', '1.0'], ['--lambda', '0.5']):
            result = self.invoke(['rescore', nbest_path, self.path('out.txt'), '--lm', lm, *extra])
            self.assertEqual(result.exit_code, 1, msg=result.output)
            self.assertIn('ERROR BadConfig:', result.output)
        self.assertFalse(os.path.exists(self.path('out.txt')))

        result = self.invoke(['rescore', nbest_path, self.path('out.txt'), '--lm', lm,
                              '--lm-scale', '1.0', '--lambda', '0.5'])
        self.assertEqual(result.exit_code, 0, msg=result.output)
        self.assertTrue(os.path.exists(self.path('out.txt')))

    def test_interpolate_lm_needs_a_weight(self):
        lm = self.create_test_file('lm.arpa', "\\data\\\nngram 1=3\n\n\\1-grams:\n-99\t<s>\n"
                                              "-0.3\ta\n-0.3\t</s>\n\n\\end\\\n")
        result = self.invoke(['interpolate-lm', lm, lm, self.path('mix.arpa')])
        self.assertEqual(result.exit_code, 1)
        self.assertIn('ERROR BadConfig:', result.output)
        result = self.invoke(['interpolate-lm', lm, lm, self.path('mix.arpa'), '--lambda', '0.3'])
        self.assertEqual(result.exit_code, 0, msg=result.output)


if __name__ == '__main__':
    unittest.main()

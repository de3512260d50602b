#!/usr/bin/env python3
"""Unit tests for configuration loading."""

import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

import pytest

# Add the project root directory to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from pkg.config import PipelineConfig, config_lines, load_config, override
from pkg.utils.errors import BadConfig, MissingPath


def clean_environ():
    return {k: v for k, v in os.environ.items() if not k.startswith("HYBRIDASR_")}


@pytest.mark.unit
class TestLoadConfig(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def write_toml(self, text: str) -> str:
        path = os.path.join(self.temp_dir, "config.toml")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_defaults(self):
        with patch.dict(os.environ, clean_environ(), clear=True):
            cfg = load_config()
        self.assertEqual(cfg.decode.beam, 16.0)
        self.assertEqual(cfg.decode.max_active, 7000)
        self.assertEqual(cfg.ngram.order, 3)
        self.assertEqual(cfg.pipeline.chunk, 30.0)
        self.assertEqual(cfg.pipeline.copies, 3)
        self.assertEqual((cfg.pipeline.min_duration, cfg.pipeline.max_duration), (5.0, 30.0))
        self.assertFalse(cfg.eval.lenient_apostrophe)
        self.assertEqual(cfg.workers, 1)
        self.assertIsNone(cfg.rescore.lm_scale)
        self.assertIsNone(cfg.rescore.interp_lambda)

    def test_toml_sections(self):
        path = self.write_toml(
            "workers = 2\n"
            "[decode]\nbeam = 10.0\nlattice_beam = 4.0\n"
            "[ngram]\norder = 2\n"
            "[pipeline]\nsnrs = [10.0, 0.0]\n"
        )
        with patch.dict(os.environ, clean_environ(), clear=True):
            cfg = load_config(path)
        self.assertEqual(cfg.workers, 2)
        self.assertEqual((cfg.decode.beam, cfg.decode.lattice_beam), (10.0, 4.0))
        self.assertEqual(cfg.decode.acoustic_scale, 1.0)
        self.assertEqual(cfg.ngram.order, 2)
        self.assertEqual(cfg.pipeline.snrs, (10.0, 0.0))

    def test_environment_fills_in_below_file(self):
        path = self.write_toml("[decode]\nbeam = 10.0\n")
        env = clean_environ()
        env.update({"HYBRIDASR_DECODE__BEAM": "20.0", "HYBRIDASR_DECODE__LATTICE_BEAM": "2.0"})
        with patch.dict(os.environ, env, clear=True):
            from_env = load_config()
            from_both = load_config(path)
        self.assertEqual((from_env.decode.beam, from_env.decode.lattice_beam), (20.0, 2.0))
        self.assertEqual((from_both.decode.beam, from_both.decode.lattice_beam), (10.0, 2.0))

    def test_bad_files(self):
        with patch.dict(os.environ, clean_environ(), clear=True):
            with self.assertRaises(BadConfig):
                load_config(self.write_toml("[decode]\nbeem = 3.0\n"))
            with self.assertRaises(BadConfig):
                load_config(self.write_toml("[ngram]\norder = 0\n"))
            with self.assertRaises(BadConfig):
                load_config(self.write_toml("[pipeline]\nmin_duration = 40.0\n"))
            with self.assertRaises(BadConfig):
                load_config(self.write_toml("[decode\nbeam = 1\n"))
            with self.assertRaises(MissingPath):
                load_config(os.path.join(self.temp_dir, "absent.toml"))

    def test_bad_environment_value(self):
        env = clean_environ()
        env["HYBRIDASR_WORKERS"] = "0"
        with patch.dict(os.environ, env, clear=True):
            with self.assertRaises(BadConfig):
                load_config()


@pytest.mark.unit
class TestOverride(unittest.TestCase):

    def setUp(self):
        with patch.dict(os.environ, clean_environ(), clear=True):
            self.cfg = PipelineConfig()

    def test_none_values_are_ignored(self):
        self.assertIs(override(self.cfg.decode, beam=None), self.cfg.decode)

    def test_values_are_applied(self):
        decode = override(self.cfg.decode, beam=12.0, acoustic_scale=0.5)
        self.assertEqual((decode.beam, decode.acoustic_scale), (12.0, 0.5))
        self.assertEqual(self.cfg.decode.beam, 16.0)

    def test_invalid_values(self):
        with self.assertRaises(BadConfig):
            override(self.cfg.decode, beam=4.0)  # below lattice_beam
        with self.assertRaises(BadConfig):
            override(self.cfg.rescore, interp_lambda=1.5)

    def test_config_lines(self):
        lines = config_lines(self.cfg)
        self.assertIn("workers = 1", lines)
        self.assertIn("decode.beam = 16.0", lines)
        self.assertIn("ngram.order = 3", lines)


if __name__ == '__main__':
    unittest.main()

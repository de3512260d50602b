#!/usr/bin/env python3
"""
Run the whole recipe on a synthetic language:
synth -> normalize -> train-bpe -> encode -> train-lm -> build-graph -> decode
-> nbest -> rescore (subword LM) -> score.

Usage: python run_toy_pipeline.py [WORK_DIR] [SEED]
"""

import os
import sys

# Add the project root to Python path
project_root = os.path.abspath(os.path.dirname(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

try:
    from cli_commands.cli import cli
except ImportError as e:
    print(f"❌ Error importing CLI: {e}")
    sys.exit(1)

CONFIG = os.path.join(project_root, 'data', 'toy.toml')


def run(*args: str) -> None:
    print(f"▶ hybrid-asr {' '.join(args)}")
    code = cli.main(['--config', CONFIG, *args], prog_name='hybrid-asr', standalone_mode=False)
    if code:
        print(f"❌ Step failed with exit code {code}")
        sys.exit(code)


def main(work_dir: str, seed: str) -> None:
    data = os.path.join(work_dir, 'data')
    lm_dir = os.path.join(work_dir, 'lm')
    graph_dir = os.path.join(work_dir, 'graph')
    decode_dir = os.path.join(work_dir, 'decode')
    os.makedirs(lm_dir, exist_ok=True)

    run('synth', data, '--seed', seed, '--train-sentences', '500', '--test-utterances', '50')
    corpus = os.path.join(lm_dir, 'corpus.txt')
    run('normalize', os.path.join(data, 'corpus.txt'), corpus)

    bpe = os.path.join(lm_dir, 'bpe.model')
    units = os.path.join(lm_dir, 'corpus.units.txt')
    run('train-bpe', corpus, bpe)
    run('encode', bpe, corpus, units)

    word_lm = os.path.join(lm_dir, 'word.2g.arpa')
    subword_lm = os.path.join(lm_dir, 'subword.4g.arpa')
    run('train-lm', corpus, '-o', word_lm)
    run('train-lm', units, '-o', subword_lm, '--order', '4')

    run('build-graph', '--lm', word_lm, '--out-dir', graph_dir, '--tying', os.path.join(data, 'tying.txt'))

    hyp = os.path.join(decode_dir, 'hyp.txt')
    lattices = os.path.join(decode_dir, 'lattices.txt')
    run('decode', os.path.join(data, 'posteriorgrams.txt'), hyp, '--graph-dir', graph_dir,
        '--lattices', lattices, '--ctm', os.path.join(decode_dir, 'hyp.ctm'))
    nbest_path = os.path.join(decode_dir, 'nbest.txt')
    run('nbest', lattices, nbest_path)
    rescored = os.path.join(decode_dir, 'rescored.txt')
    run('rescore', nbest_path, rescored, '--lm', subword_lm, '--bpe-model', bpe)

    references = os.path.join(data, 'references.txt')
    print("First pass:")
    run('score', references, hyp)
    print("After subword LM rescoring:")
    run('score', references, rescored, '--report', os.path.join(decode_dir, 'wer.tsv'))
    print(f"✅ Toy pipeline finished in {work_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join('exp', 'toy'),
         sys.argv[2] if len(sys.argv) > 2 else '0')

import click
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

# Import the core logic functions from the pkg directory
from pkg import __version__
from pkg.config import PipelineConfig, load_config, override
from pkg.decoder.core import decode_many, write_ctm, write_transcripts
from pkg.decoder.lattice import read_lattices, write_lattices
from pkg.decoder.posteriorgram import DEFAULT_FRAME_RATE, read_posteriorgrams, write_posteriorgrams
from pkg.fst.graph import (
    SILENCE,
    build_decoding_graph,
    class_symbols,
    cluster_biphones,
    context_fst,
    count_biphones,
    grammar_fst,
    lexicon_fst,
    load_graph,
    make_lexicon,
    read_tying,
    save_graph,
    topology_fst,
    write_tying,
)
from pkg.ngram.arpa import export_arpa, import_arpa
from pkg.ngram.core import interpolate, perplexity, train_ngram
from pkg.pipeline.augment import augment_files
from pkg.pipeline.manifest import Manifest, make_pseudo_manifest, merge_manifests, read_manifest, write_manifest
from pkg.pipeline.segments import decode_chunks, derive_segments, read_segments, write_segments
from pkg.rescore.nbest import nbest, read_nbest, rescore_nbest, write_nbest
from pkg.rescore.rnnlm import FORMAT_VERSION as RNNLM_FORMAT_VERSION
from pkg.rescore.rnnlm import load_rnnlm, resolve_dims, save_rnnlm, train_rnnlm
from pkg.scorer.core import compute_wer, format_alignment, format_report, read_transcripts, write_report_tsv
from pkg.subword.core import FORMAT_VERSION as BPE_FORMAT_VERSION
from pkg.subword.core import encode as bpe_encode
from pkg.subword.core import load_model, save_model, train_bpe
from pkg.synthetic.core import (
    DEFAULT_PAUSE_PROBABILITY,
    generate_language,
    sample_corpus,
    sample_pauses,
    synthesize_posteriorgram,
)
from pkg.textnorm.core import DEFAULT_RULES, load_rules, normalize_text, read_corpus, write_corpus
from pkg.utils.errors import BadConfig, ToolkitError
from pkg.utils.io import read_table, require_path, write_table
from pkg.utils.logging import set_package_level, setup_secure_logging

logger = setup_secure_logging(__name__, logging.WARNING)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
VERSION_MESSAGE = (f"%(prog)s %(version)s (bpe model {BPE_FORMAT_VERSION}, "
                   f"rnnlm format {RNNLM_FORMAT_VERSION}, fst text format v1)")


class ToolkitGroup(click.Group):
    """
    Click group that reports failures as one "ERROR <code>: <message>" line.

    Toolkit errors exit with 1, usage errors with 2.
    """

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            _usage_failure(e)

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            _usage_failure(e)
        except ToolkitError as e:
            logger.debug(f"{ctx.invoked_subcommand} failed", exc_info=True)
            click.echo(f"ERROR {e.code}: {e}", err=True)
            raise click.exceptions.Exit(1)


def _usage_failure(e: click.UsageError):
    message = " ".join(e.format_message().split())
    click.echo(f"ERROR UsageError: {message}", err=True)
    raise click.exceptions.Exit(2)


def _pick(flag, configured, what: str):
    value = flag if flag is not None else configured
    if value is None:
        raise BadConfig(f"no {what} given on the command line or in the config")
    return value


def _sentences(path: str) -> List[Tuple[str, ...]]:
    """Token sequences of an already normalized "utt-id<TAB>words" file."""
    return [tuple(text.split()) for _, text in read_table(path)]


def _done(message: str):
    click.echo(f"✅ {message}", err=True)


# --- Main Click Group ---
@click.group(cls=ToolkitGroup, no_args_is_help=False)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='TOML config file; sections mirror the module names')
@click.option('--log-level', type=click.Choice(LOG_LEVELS, case_sensitive=False), default='WARNING',
              show_default=True, help='Level of the toolkit loggers (stderr)')
@click.version_option(version=__version__, prog_name='hybrid-asr', message=VERSION_MESSAGE)
@click.pass_context
def cli(ctx, config_path: Optional[str], log_level: str):
    """
    Hybrid ASR toolkit: text normalization, subword and n-gram language models,
    WFST decoding graphs, lattice decoding and rescoring, pseudo-labelling and WER scoring.
    """
    set_package_level(getattr(logging, log_level.upper()))
    ctx.obj = load_config(config_path)


# --- Normalize Command ---
@cli.command()
@click.argument('input_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--rules', 'rules_path', type=click.Path(), default=None, help='TOML normalization rules')
@click.pass_obj
def normalize(cfg: PipelineConfig, input_path: str, output_path: str, rules_path: Optional[str]):
    """
    Normalize a raw text corpus into "utt-id<TAB>words" lines.
    """
    require_path(input_path)
    rules_path = rules_path or cfg.textnorm.rules
    rules = load_rules(rules_path) if rules_path else DEFAULT_RULES
    utterances = read_corpus(input_path, rules)
    write_corpus(utterances, output_path)
    _done(f"Normalized {len(utterances)} utterances")


# --- Train BPE Command ---
@cli.command('train-bpe')
@click.argument('corpus_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--vocab-size', type=int, default=None, help='Target inventory size')
@click.pass_obj
def train_bpe_command(cfg: PipelineConfig, corpus_path: str, output_path: str, vocab_size: Optional[int]):
    """Learn BPE merges from a normalized corpus."""
    require_path(corpus_path)
    model = train_bpe(_sentences(corpus_path), _pick(vocab_size, cfg.subword.vocab_size, 'vocabulary size'))
    save_model(model, output_path)
    _done(f"Learned {len(model.merges)} merges, {len(model.inventory)} units")


# --- Encode Command ---
@cli.command()
@click.argument('model_path', type=click.Path())
@click.argument('input_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--boundaries/--no-boundaries', default=None,
              help='Prefix word-initial units with the boundary marker')
@click.pass_obj
def encode(cfg: PipelineConfig, model_path: str, input_path: str, output_path: str, boundaries: Optional[bool]):
    """Split every word of a normalized corpus into BPE units."""
    model = load_model(require_path(model_path))
    require_path(input_path)
    mark = _pick(boundaries, cfg.subword.mark_boundaries, 'boundary setting')
    rows = [(utt_id, " ".join(bpe_encode(model, text.split(), mark_boundaries=mark)))
            for utt_id, text in read_table(input_path)]
    write_table(rows, output_path)


# --- Train LM Command ---
@cli.command('train-lm')
@click.argument('corpora', nargs=-1, required=True, type=click.Path())
@click.option('--output', '-o', 'output_path', required=True, type=click.Path(), help='ARPA file to write')
@click.option('--order', type=int, default=None, help='N-gram order')
@click.option('--discount', type=float, default=None, help='Kneser-Ney discount')
@click.pass_obj
def train_lm(cfg: PipelineConfig, corpora: Sequence[str], output_path: str,
             order: Optional[int], discount: Optional[float]):
    """
    Train a Kneser-Ney backoff model on one or more normalized corpora
    (pooled before counting) and export it in ARPA format.
    """
    for path in corpora:
        require_path(path)
    ngram_cfg = override(cfg.ngram, order=order, discount=discount)
    sentences = [_sentences(path) for path in corpora]
    lm = train_ngram(sentences[0], order=ngram_cfg.order, discount=ngram_cfg.discount,
                     extra_corpora=sentences[1:])
    export_arpa(lm, output_path)
    _done(f"Trained {lm.order}-gram model: " + ", ".join(str(c) for c in lm.counts()) + " n-grams")


# --- Perplexity Command ---
@cli.command()
@click.argument('lm_path', type=click.Path())
@click.argument('corpus_path', type=click.Path())
def ppl(lm_path: str, corpus_path: str):
    """Print the perplexity of a normalized corpus under an ARPA model."""
    lm = import_arpa(require_path(lm_path))
    value = perplexity(lm, _sentences(require_path(corpus_path)))
    click.echo(f"ppl {value:.4f}")


# --- Interpolate LM Command ---
@cli.command('interpolate-lm')
@click.argument('lm_a', type=click.Path())
@click.argument('lm_b', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--lambda', 'lam', type=float, default=None,
              help='Weight of the first model (default: rescore.interp_lambda)')
@click.pass_obj
def interpolate_lm(cfg: PipelineConfig, lm_a: str, lm_b: str, output_path: str, lam: Optional[float]):
    """Linearly interpolate two ARPA models into a new one."""
    lam = _pick(lam, cfg.rescore.interp_lambda, 'interpolation weight (--lambda)')
    a = import_arpa(require_path(lm_a))
    b = import_arpa(require_path(lm_b))
    export_arpa(interpolate(a, b, lam), output_path)


# --- Build Graph Command ---
@cli.command('build-graph')
@click.option('--lm', 'lm_path', type=click.Path(), default=None, help='ARPA grammar')
@click.option('--out-dir', type=click.Path(), default=None, help='Directory for graph.fst and symbol tables')
@click.option('--bpe-model', type=click.Path(), default=None,
              help='Acoustic BPE model; graphemes are used without one')
@click.option('--tying', 'tying_path', type=click.Path(), default=None, help='Reuse an existing biphone tying')
@click.option('--units', 'units_corpus', type=click.Path(), default=None,
              help='Normalized corpus for biphone counts (default: the lexicon itself)')
@click.option('--threshold', type=float, default=None, help='Minimum biphone count for a distinct class')
@click.option('--determinize/--no-determinize', default=None)
@click.option('--silence/--no-silence', default=None,
              help='Optional pauses between words (a given --tying decides on its own)')
@click.pass_obj
def build_graph(cfg: PipelineConfig, lm_path: Optional[str], out_dir: Optional[str], bpe_model: Optional[str],
                tying_path: Optional[str], units_corpus: Optional[str], threshold: Optional[float],
                determinize: Optional[bool], silence: Optional[bool]):
    """
    Compose the HCLG decoding graph from an ARPA grammar, a lexicon and a
    biphone tying, and write it to OUT_DIR.
    """
    lm = import_arpa(require_path(_pick(lm_path, cfg.paths.lm, 'grammar (--lm)')))
    out_dir = out_dir or cfg.paths.graph_dir or os.path.join(cfg.paths.work_dir, 'graph')
    bpe_model = bpe_model or cfg.paths.bpe_model
    model = load_model(require_path(bpe_model)) if bpe_model else None
    graph_cfg = override(cfg.graph, tying_threshold=threshold, determinize=determinize, silence=silence)

    lexicon = make_lexicon(lm.vocab, model)
    if tying_path:
        tying = read_tying(require_path(tying_path))
    else:
        if units_corpus:
            sequences = [[u for word in sentence if word in lexicon for u in lexicon[word]]
                         for sentence in _sentences(require_path(units_corpus))]
        else:
            sequences = list(lexicon.values())
        units = {u for pron in lexicon.values() for u in pron}
        if graph_cfg.silence:
            units.add(SILENCE)
        tying = cluster_biphones(count_biphones(sequences), graph_cfg.tying_threshold, units)

    pause = SILENCE if SILENCE in tying.units else None
    graph = build_decoding_graph(topology_fst(class_symbols(tying)), context_fst(tying),
                                 lexicon_fst(lexicon, silence=pause), grammar_fst(lm),
                                 determinize_graph=graph_cfg.determinize,
                                 max_multiplier=graph_cfg.max_multiplier)
    save_graph(graph, tying, out_dir)
    _done(f"Decoding graph: {graph.num_states} states, {graph.num_arcs} arcs, {tying.num_classes} classes")


# --- Decode Command ---
@cli.command()
@click.argument('posteriorgrams_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--graph-dir', type=click.Path(), default=None)
@click.option('--lattices', 'lattices_path', type=click.Path(), default=None, help='Write the lattice archive here')
@click.option('--ctm', 'ctm_path', type=click.Path(), default=None, help='Write word timings here')
@click.option('--beam', type=float, default=None)
@click.option('--max-active', type=int, default=None)
@click.option('--acoustic-scale', type=float, default=None)
@click.option('--lattice-beam', type=float, default=None)
@click.option('--workers', type=int, default=None, help='Utterances decoded in parallel')
@click.pass_obj
def decode(cfg: PipelineConfig, posteriorgrams_path: str, output_path: str, graph_dir: Optional[str],
           lattices_path: Optional[str], ctm_path: Optional[str], beam: Optional[float],
           max_active: Optional[int], acoustic_scale: Optional[float], lattice_beam: Optional[float],
           workers: Optional[int]):
    """Beam-search decode posteriorgrams against a decoding graph."""
    graph, _ = load_graph(_pick(graph_dir, cfg.paths.graph_dir, 'graph directory (--graph-dir)'))
    pgs = read_posteriorgrams(require_path(posteriorgrams_path))
    decode_cfg = override(cfg.decode, beam=beam, max_active=max_active,
                          acoustic_scale=acoustic_scale, lattice_beam=lattice_beam)
    results = decode_many(graph, pgs, decode_cfg, workers=_pick(workers, cfg.workers, 'workers'))
    write_transcripts(results, output_path)
    if lattices_path:
        write_lattices([r.lattice for r in results], lattices_path)
    if ctm_path:
        write_ctm(results, ctm_path)
    forced = sum(1 for r in results if r.forced_final)
    _done(f"Decoded {len(results)} utterances ({forced} without a final state)")


# --- N-best Command ---
@cli.command('nbest')
@click.argument('lattices_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('-n', 'n', type=int, default=None, help='Hypotheses per utterance')
@click.pass_obj
def nbest_command(cfg: PipelineConfig, lattices_path: str, output_path: str, n: Optional[int]):
    """Extract n-best lists from a lattice archive."""
    count = override(cfg.rescore, n=n).n
    lists = {lattice.utt_id: nbest(lattice, count) for lattice in read_lattices(require_path(lattices_path))}
    write_nbest(lists, output_path)


# --- Train RNN LM Command ---
@cli.command('train-rnnlm')
@click.argument('corpus_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--preset', type=click.Choice(['512', '1024', '2048']), default=None)
@click.option('--embed-dim', type=int, default=None)
@click.option('--hidden-dim', type=int, default=None)
@click.option('--epochs', type=int, default=None)
@click.option('--learning-rate', type=float, default=None)
@click.option('--seed', type=int, default=None)
@click.pass_obj
def train_rnnlm_command(cfg: PipelineConfig, corpus_path: str, output_path: str, preset: Optional[str],
                        embed_dim: Optional[int], hidden_dim: Optional[int], epochs: Optional[int],
                        learning_rate: Optional[float], seed: Optional[int]):
    """
    Train an LSTM language model on a (word or subword) corpus.

    Prints one "epoch train_loss heldout_perplexity" line per epoch.
    """
    rescore_cfg = override(cfg.rescore, rnn_preset=preset, embed_dim=embed_dim, hidden_dim=hidden_dim,
                           epochs=epochs, learning_rate=learning_rate, seed=seed)
    embed, hidden = resolve_dims(rescore_cfg.rnn_preset, rescore_cfg.embed_dim, rescore_cfg.hidden_dim)
    model = train_rnnlm(_sentences(require_path(corpus_path)), embed, hidden, epochs=rescore_cfg.epochs,
                        learning_rate=rescore_cfg.learning_rate, seed=rescore_cfg.seed, bptt=rescore_cfg.bptt)
    for stats in model.history:
        click.echo(f"{stats.epoch} {stats.train_loss:.4f} {stats.heldout_perplexity:.2f}")
    save_rnnlm(model, output_path)


# --- Rescore Command ---
@cli.command()
@click.argument('nbest_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--lm', 'lm_path', type=click.Path(), default=None, help='ARPA model for the second pass')
@click.option('--rnnlm', 'rnnlm_path', type=click.Path(), default=None, help='RNN LM for the second pass')
@click.option('--bpe-model', type=click.Path(), default=None, help='Score BPE units instead of words')
@click.option('--lm-scale', type=float, default=None)
@click.option('--lambda', 'lam', type=float, default=None, help='Weight of the new LM')
@click.option('--nbest-out', type=click.Path(), default=None, help='Also write the reranked lists')
@click.option('--workers', type=int, default=None)
@click.pass_obj
def rescore(cfg: PipelineConfig, nbest_path: str, output_path: str, lm_path: Optional[str],
            rnnlm_path: Optional[str], bpe_model: Optional[str], lm_scale: Optional[float],
            lam: Optional[float], nbest_out: Optional[str], workers: Optional[int]):
    """Rerank n-best lists with a new LM and write the 1-best transcripts."""
    rescore_cfg = override(cfg.rescore, lm_scale=lm_scale, interp_lambda=lam)
    lm_scale = _pick(None, rescore_cfg.lm_scale, 'LM scale (--lm-scale)')
    lam = _pick(None, rescore_cfg.interp_lambda, 'interpolation weight (--lambda)')
    lm_path = lm_path or (None if rnnlm_path else cfg.paths.lm)
    rnnlm_path = rnnlm_path or (None if lm_path else cfg.paths.rnnlm)
    if bool(lm_path) == bool(rnnlm_path):
        raise BadConfig("give exactly one of --lm and --rnnlm")
    new_lm = import_arpa(require_path(lm_path)) if lm_path else load_rnnlm(require_path(rnnlm_path))
    model = load_model(require_path(bpe_model)) if bpe_model else None
    lists = read_nbest(require_path(nbest_path))

    def run(utt_id):
        return rescore_nbest(lists[utt_id], new_lm, lm_scale, lam, model)

    ids = list(lists)
    workers = _pick(workers, cfg.workers, 'workers')
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reranked = list(pool.map(run, ids))
    else:
        reranked = [run(utt_id) for utt_id in ids]
    write_table([(utt_id, " ".join(r[0].words)) for utt_id, r in zip(ids, reranked)], output_path)
    if nbest_out:
        write_nbest({utt_id: [x.entry for x in r] for utt_id, r in zip(ids, reranked)}, nbest_out)


# --- Segment Command ---
@cli.command()
@click.argument('recordings_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--graph-dir', type=click.Path(), default=None)
@click.option('--chunk', type=float, default=None, help='Chunk length in seconds')
@click.option('--min-duration', type=float, default=None)
@click.option('--max-duration', type=float, default=None)
@click.option('--silence-gap', type=float, default=None)
@click.option('--max-merge-gap', type=float, default=None)
@click.option('--workers', type=int, default=None)
@click.pass_obj
def segment(cfg: PipelineConfig, recordings_path: str, output_path: str, graph_dir: Optional[str],
            chunk: Optional[float], min_duration: Optional[float], max_duration: Optional[float],
            silence_gap: Optional[float], max_merge_gap: Optional[float], workers: Optional[int]):
    """
    Decode long recordings in chunks and derive training segments from the
    first-pass word timings.
    """
    seg_cfg = override(cfg.pipeline, chunk=chunk, min_duration=min_duration, max_duration=max_duration,
                       silence_gap=silence_gap, max_merge_gap=max_merge_gap)
    graph, _ = load_graph(_pick(graph_dir, cfg.paths.graph_dir, 'graph directory (--graph-dir)'))
    recordings = read_posteriorgrams(require_path(recordings_path))
    rates = {pg.frame_rate for pg in recordings}
    if len(rates) > 1:
        raise BadConfig(f"recordings mix frame rates {sorted(rates)}")
    frame_rate = rates.pop() if rates else DEFAULT_FRAME_RATE
    chunks = decode_chunks(graph, recordings, cfg.decode, seg_cfg.chunk, _pick(workers, cfg.workers, 'workers'))
    segments = derive_segments(chunks, frame_rate, seg_cfg.min_duration, seg_cfg.max_duration,
                               seg_cfg.silence_gap, seg_cfg.max_merge_gap)
    write_segments(segments, output_path)
    _done(f"Derived {len(segments)} segments from {len(chunks)} chunks")


# --- Pseudo Manifest Command ---
@cli.command('pseudo-manifest')
@click.argument('segments_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--corrections', type=click.Path(), default=None,
              help='Manually corrected "segment-id<TAB>text" transcripts')
@click.option('--audio-dir', type=click.Path(), default=None, help='Directory holding <source-id>.wav files')
@click.option('--merge', 'merge_paths', multiple=True, type=click.Path(), help='Existing manifests to prepend')
def pseudo_manifest(segments_path: str, output_path: str, corrections: Optional[str],
                    audio_dir: Optional[str], merge_paths: Sequence[str]):
    """Turn derived segments into a pseudo-labelled training manifest."""
    segments = read_segments(require_path(segments_path))
    transcripts = dict(read_table(require_path(corrections))) if corrections else None
    audio_paths = None
    if audio_dir:
        audio_paths = {s.source_id: os.path.join(audio_dir, f"{s.source_id}.wav") for s in segments}
    existing = [read_manifest(require_path(path)) for path in merge_paths]
    manifest = merge_manifests(*existing, make_pseudo_manifest(segments, transcripts, audio_paths))
    write_manifest(manifest, output_path)
    _done(f"Manifest with {len(manifest)} rows")


# --- Augment Command ---
@cli.command()
@click.argument('manifest_path', type=click.Path())
@click.argument('output_path', type=click.Path())
@click.option('--noise', 'noise_paths', multiple=True, required=True, type=click.Path(),
              help='Noise WAV file (repeatable)')
@click.option('--out-dir', required=True, type=click.Path(), help='Directory for the noisy WAV files')
@click.option('--snr', 'snrs', multiple=True, type=float, help='Target SNR in dB (repeatable)')
@click.option('--copies', type=int, default=None)
@click.option('--seed', type=int, default=None)
@click.option('--workers', type=int, default=None)
@click.pass_obj
def augment(cfg: PipelineConfig, manifest_path: str, output_path: str, noise_paths: Sequence[str],
            out_dir: str, snrs: Sequence[float], copies: Optional[int], seed: Optional[int],
            workers: Optional[int]):
    """Add noisy copies of every manifest row at the configured SNRs."""
    for path in noise_paths:
        require_path(path)
    aug_cfg = override(cfg.pipeline, snrs=tuple(snrs) or None, copies=copies, seed=seed)
    rows = list(read_manifest(require_path(manifest_path)))

    def run(row):
        return augment_files(row, noise_paths, out_dir, aug_cfg.snrs, aug_cfg.copies, aug_cfg.seed)

    workers = _pick(workers, cfg.workers, 'workers')
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(run, rows))
    else:
        groups = [run(row) for row in rows]
    manifest = Manifest()
    for group in groups:
        manifest.extend(group)
    write_manifest(manifest, output_path)
    _done(f"Augmented {len(rows)} rows into {len(manifest)}")


# --- Score Command ---
@cli.command()
@click.argument('ref_path', type=click.Path())
@click.argument('hyp_path', type=click.Path())
@click.option('--lenient-apostrophe/--strict-apostrophe', default=None,
              help='Count substitutions that differ only in edge apostrophes as correct')
@click.option('--report', 'report_path', type=click.Path(), default=None, help='Per-utterance TSV report')
@click.option('--show-alignments', is_flag=True, help='Print the alignment of every utterance with errors')
@click.option('--workers', type=int, default=None)
@click.pass_obj
def score(cfg: PipelineConfig, ref_path: str, hyp_path: str, lenient_apostrophe: Optional[bool],
          report_path: Optional[str], show_alignments: bool, workers: Optional[int]):
    """Print the word error rate of hypotheses against references."""
    refs = read_transcripts(require_path(ref_path))
    hyps = read_transcripts(require_path(hyp_path))
    lenient = _pick(lenient_apostrophe, cfg.eval.lenient_apostrophe, 'apostrophe mode')
    report = compute_wer(refs, hyps, lenient_apostrophe=lenient, workers=_pick(workers, cfg.workers, 'workers'))
    if show_alignments:
        for utterance in report.utterances:
            if utterance.errors:
                click.echo(utterance.utt_id)
                click.echo(format_alignment(utterance))
    if report_path:
        write_report_tsv(report, report_path)
    click.echo(format_report(report))


# --- Synth Command ---
@cli.command()
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--words', 'n_words', type=int, default=10, show_default=True)
@click.option('--train-sentences', type=int, default=500, show_default=True)
@click.option('--test-utterances', type=int, default=50, show_default=True)
@click.option('--label-noise', type=float, default=0.2, show_default=True)
@click.option('--threshold', type=float, default=float('inf'), help='Biphone tying threshold (default: monophones)')
@click.option('--pause-prob', type=float, default=DEFAULT_PAUSE_PROBABILITY, show_default=True,
              help='Chance of a silent pause before each word and at the end')
def synth(out_dir: str, seed: int, n_words: int, train_sentences: int, test_utterances: int,
          label_noise: float, threshold: float, pause_prob: float):
    """
    Write a synthetic corpus for an end-to-end run: corpus.txt (LM training
    text), references.txt, posteriorgrams.txt and the matching tying.txt.
    """
    language = generate_language(seed, n_words)
    train = sample_corpus(language, train_sentences, seed + 1)
    test = sample_corpus(language, test_utterances, seed + 2)
    lexicon = make_lexicon(language.words)
    sequences = [[u for word in sentence for u in lexicon[word]] for sentence in train]
    tying = cluster_biphones(count_biphones(sequences), threshold, [*language.alphabet, SILENCE])

    os.makedirs(out_dir, exist_ok=True)
    write_table([(f"train{i:05d}", " ".join(s)) for i, s in enumerate(train)], os.path.join(out_dir, 'corpus.txt'))
    test_ids = [f"test{i:05d}" for i in range(len(test))]
    write_table([(utt_id, " ".join(s)) for utt_id, s in zip(test_ids, test)],
                os.path.join(out_dir, 'references.txt'))
    pgs = [synthesize_posteriorgram(utt_id, s, lexicon, tying, label_noise, seed * 1000003 + i,
                                    pauses=sample_pauses(len(s), seed * 1000033 + i, pause_prob))
           for i, (utt_id, s) in enumerate(zip(test_ids, test))]
    write_posteriorgrams(pgs, os.path.join(out_dir, 'posteriorgrams.txt'))
    write_tying(tying, os.path.join(out_dir, 'tying.txt'))
    _done(f"Synthetic language with {len(language.words)} words written to {out_dir}")


# Subcommand -> the module operation it delegates to
COMMAND_TABLE = {
    'normalize': normalize_text,
    'train-bpe': train_bpe,
    'encode': bpe_encode,
    'train-lm': train_ngram,
    'ppl': perplexity,
    'interpolate-lm': interpolate,
    'build-graph': build_decoding_graph,
    'decode': decode_many,
    'nbest': nbest,
    'train-rnnlm': train_rnnlm,
    'rescore': rescore_nbest,
    'segment': derive_segments,
    'pseudo-manifest': make_pseudo_manifest,
    'augment': augment_files,
    'score': compute_wer,
    'synth': synthesize_posteriorgram,
}

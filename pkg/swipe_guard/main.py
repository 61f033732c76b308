import argparse
import json
import logging
from pathlib import Path
import sys
from typing import Optional

from .bundle import FusionMode, ModelBundle, load_bundle, parse_request, save_bundle, verify
from .classifiers import ClassifierKind, ClassifierSpec, train_classifier, train_one_class
from .errors import SwipeGuardError, ValidationError
from .features import FeatureMode, export_features_csv, featurize_corpus
from .gan import GAN_PRESETS, GanConfig, corpus_sequences, gan_synthesize_corpus, load_gan, save_gan, train_gan
from .handcrafted import synth_handcrafted_corpus
from .ingest import FORMATS, ingest_corpus, load_corpora, write_corpus
from .prior import fit_prior, load_prior, save_prior
from .protocol import (BotSource, EvalConfig, Scenario, ablation_curve, ablation_to_frame, distribution_to_frame,
                       feature_distribution_report, format_reports, read_report, run_scenario, write_report)
from .service import serve
from .settings import Config, get_service_settings, load_config
from .traces import Label

LOGGER = logging.getLogger('swg.main')

LOG_LEVELS = ('notset', 'debug', 'info', 'warning', 'error', 'critical')


def _seed(args: argparse.Namespace, default: int) -> int:
    return default if args.seed is None else args.seed


def _require_out(args: argparse.Namespace) -> Path:
    if not args.out:
        raise ValidationError(f'{args.command} needs --out')
    return Path(args.out)


def _optional_corpus(paths, pad: float):
    return load_corpora(paths, pad) if paths else None


def cmd_ingest(args: argparse.Namespace, config: Config):
    corpus = ingest_corpus(args.root, args.format, config.ingest.accel_pad_s, config.ingest.workers)
    write_corpus(corpus, _require_out(args))
    if args.features_csv:
        vectors, _ = featurize_corpus(corpus, FeatureMode(args.modality), config.features.zero_distance_efficiency)
        export_features_csv(vectors, args.features_csv)


def cmd_fit_prior(args: argparse.Namespace, config: Config):
    corpus = load_corpora(args.corpus, config.ingest.accel_pad_s)
    prior = fit_prior(corpus, config.synth.grid, config.synth.accel_rate_hz)
    save_prior(prior, _require_out(args))


def cmd_synth(args: argparse.Namespace, config: Config):
    seed = _seed(args, 0)
    if args.method == 'handcrafted':
        if not args.prior:
            raise ValidationError('handcrafted synthesis needs --prior')
        reverse = args.reverse_profile or config.synth.reverse_profile
        corpus = synth_handcrafted_corpus(load_prior(args.prior), args.count, seed, reverse)
    else:
        if not args.touch_model or not args.humans:
            raise ValidationError('GAN synthesis needs --model and --humans')
        accel_model = load_gan(args.accel_model) if args.accel_model else None
        humans = load_corpora(args.humans, config.ingest.accel_pad_s).by_label(Label.HUMAN)
        corpus = gan_synthesize_corpus(load_gan(args.touch_model), humans, args.count, seed, accel_model)
    write_corpus(corpus, _require_out(args))


def cmd_train_gan(args: argparse.Namespace, config: Config):
    gan_config = GanConfig.from_table(config.gan, args.preset)
    overrides = {'epochs': args.epochs, 'batch_size': args.batch_size, 'seed': args.seed}
    gan_config = gan_config._replace(**{key: val for key, val in overrides.items() if val is not None}).validate()
    humans = load_corpora(args.corpus, config.ingest.accel_pad_s).by_label(Label.HUMAN)
    seqs, durations = corpus_sequences(humans, args.modality, gan_config.seq_len)
    LOGGER.info('training %s GAN %s on %d sequences', args.modality, gan_config.lstm_sizes, len(seqs))
    save_gan(train_gan(seqs, gan_config, durations), _require_out(args))


def classifier_spec(args: argparse.Namespace, config: Config) -> ClassifierSpec:
    spec = ClassifierSpec.from_table(config.classifier)
    if getattr(args, 'kind', None):
        spec = spec._replace(kind=ClassifierKind(args.kind))
    if args.seed is not None:
        spec = spec._replace(seed=args.seed)
    return spec.validate()


def train_bundle_model(spec: ClassifierSpec, mode: FeatureMode, humans, bots, config: Config):
    if mode is FeatureMode.TOUCH_ACCEL:
        humans = humans.with_accel()
        bots = bots.with_accel() if bots is not None else None
    zde = config.features.zero_distance_efficiency
    human_vectors, _ = featurize_corpus(humans, mode, zde)
    if spec.kind is ClassifierKind.ONE_CLASS_SVM:
        return train_one_class(human_vectors, spec)
    if bots is None:
        raise ValidationError(f'{spec.kind.value} training needs --bots')
    bot_vectors, _ = featurize_corpus(bots, mode, zde)
    return train_classifier(spec, human_vectors + bot_vectors)


def cmd_train_clf(args: argparse.Namespace, config: Config):
    spec = classifier_spec(args, config)
    pad = config.ingest.accel_pad_s
    humans = load_corpora(args.humans, pad).by_label(Label.HUMAN)
    bots = _optional_corpus(args.bots, pad)
    fusion = FusionMode(args.fusion)
    if fusion is FusionMode.SCORE_MEAN:
        models = {'touch': train_bundle_model(spec, FeatureMode.TOUCH_ONLY, humans, bots, config),
                  'accel': train_bundle_model(spec, FeatureMode.TOUCH_ACCEL, humans, bots, config)}
    else:
        models = {args.modality: train_bundle_model(spec, FeatureMode(args.modality), humans, bots, config)}
    tau = args.tau if args.tau is not None else (config.service.tau if config.service.tau is not None else 0.5)
    bundle = ModelBundle(models, fusion, tau, args.touch_weight, config.features.zero_distance_efficiency)
    save_bundle(bundle, _require_out(args))


def eval_config(args: argparse.Namespace, config: Config) -> EvalConfig:
    table = dict(config.eval)
    for key in ('scenario', 'modality', 'train_size', 'repetitions', 'bot_sources_train', 'bot_sources_test'):
        val = getattr(args, key, None)
        if val is not None:
            table[key] = val
    if args.no_tune:
        table['tune'] = False
    if args.seed is not None:
        table['seed'] = args.seed
    if table.get('scenario') == Scenario.ONE_CLASS.value and 'bot_sources_train' not in table:
        table['bot_sources_train'] = []
    return EvalConfig.from_table(table)


def _eval_inputs(args: argparse.Namespace, config: Config):
    pad = config.ingest.accel_pad_s
    human = load_corpora(args.humans, pad).by_label(Label.HUMAN)
    handcrafted = _optional_corpus(args.handcrafted, pad)
    gan = _optional_corpus(args.gan, pad)
    discriminators = None
    if args.discriminator:
        discriminators = {'touch': load_gan(args.discriminator)}
        if args.accel_discriminator:
            discriminators['accel'] = load_gan(args.accel_discriminator)
    return human, handcrafted, gan, discriminators


def cmd_eval(args: argparse.Namespace, config: Config):
    human, handcrafted, gan, discriminators = _eval_inputs(args, config)
    report = run_scenario(human, handcrafted, gan, classifier_spec(args, config), eval_config(args, config),
                          discriminators)
    if args.out:
        write_report(report, args.out)
    sys.stdout.write(report.to_text())


def cmd_ablate(args: argparse.Namespace, config: Config):
    human, handcrafted, gan, discriminators = _eval_inputs(args, config)
    points = ablation_curve(human, handcrafted, gan, classifier_spec(args, config), eval_config(args, config),
                            args.sizes, discriminators)
    frame = ablation_to_frame(points)
    if args.out:
        frame.to_csv(args.out, index=False)
        LOGGER.info('wrote %d ablation points to "%s"', len(points), args.out)
    else:
        frame.to_csv(sys.stdout, index=False)


def cmd_report(args: argparse.Namespace, config: Config):
    if args.reports:
        sys.stdout.write(format_reports([read_report(pp) for pp in args.reports]))
    if args.corpus:
        corpora = {}
        for item in args.corpus:
            name, sep, path = item.partition('=')
            if not sep or not name or not path:
                raise ValidationError(f'--corpus expects NAME=PATH, got "{item}"')
            corpora[name] = load_corpora([path], config.ingest.accel_pad_s)
        frame = distribution_to_frame(feature_distribution_report(corpora, args.bins))
        frame.to_csv(_require_out(args), index=False)
        LOGGER.info('wrote feature histograms of %s to "%s"', ', '.join(corpora), args.out)


def cmd_verify(args: argparse.Namespace, config: Config):
    bundle = load_bundle(args.bundle)
    if args.tau is not None:
        bundle = bundle.with_tau(args.tau)
    try:
        body = json.loads(Path(args.request).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f'cannot read request "{args.request}": {exc}')
    response = verify(bundle, parse_request(body))
    text = json.dumps(response._asdict(), sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + '\n', encoding='utf-8')
    sys.stdout.write(text + '\n')


def cmd_serve(args: argparse.Namespace, config: Config):
    cli = {key: val for key, val in (('bundle', args.bundle), ('host', args.host), ('port', args.port),
                                     ('tau', args.tau)) if val is not None}
    settings = get_service_settings(config._replace(service=config.service._replace(**cli)))
    serve(settings._replace(**cli))


COMMANDS = {
    'ingest': cmd_ingest,
    'fit-prior': cmd_fit_prior,
    'synth': cmd_synth,
    'train-gan': cmd_train_gan,
    'train-clf': cmd_train_clf,
    'eval': cmd_eval,
    'ablate': cmd_ablate,
    'report': cmd_report,
    'verify': cmd_verify,
    'serve': cmd_serve,
}


def _add_eval_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--humans', nargs='+', required=True, help='human corpus files or directories')
    parser.add_argument('--handcrafted', nargs='+', help='handcrafted bot corpora')
    parser.add_argument('--gan', nargs='+', help='GAN bot corpora')
    parser.add_argument('--kind', choices=[kk.value for kk in ClassifierKind], help='classifier kind')
    parser.add_argument('--scenario', choices=[ss.value for ss in Scenario], help='evaluation scenario')
    parser.add_argument('--modality', choices=[mm.value for mm in FeatureMode], help='feature modality')
    parser.add_argument('--train-size', type=int, help='training samples, half human and half bot')
    parser.add_argument('--repetitions', type=int, help='number of repetitions')
    parser.add_argument('--bots-train', dest='bot_sources_train', nargs='*',
                        choices=[bb.value for bb in BotSource], help='bot sources to train on')
    parser.add_argument('--bots-test', dest='bot_sources_test', nargs='+',
                        choices=[bb.value for bb in BotSource], help='bot sources to test on')
    parser.add_argument('--no-tune', action='store_true', help='skip hyperparameter tuning')
    parser.add_argument('--discriminator', help='touch GAN model for the discriminator scenario')
    parser.add_argument('--accel-discriminator', help='accelerometer GAN model for the discriminator scenario')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-l', '--log-level', choices=LOG_LEVELS, default='info', help='set the log level [info]')
    common.add_argument('-c', '--config', help='TOML configuration file')
    common.add_argument('-s', '--seed', type=int, help='seed overriding every configured seed')
    common.add_argument('-o', '--out', help='output path')

    parser = argparse.ArgumentParser(prog='swipe-guard',
                                     description='Detect bot swipes from touch and accelerometer traces')
    sub = parser.add_subparsers(dest='command', required=True)

    pp = sub.add_parser('ingest', parents=[common], help='read a raw corpus into canonical JSONL')
    pp.add_argument('root', help='corpus file or directory')
    pp.add_argument('-f', '--format', choices=FORMATS, default='canonical', help='input format [canonical]')
    pp.add_argument('--features-csv', help='also export feature vectors to this CSV')
    pp.add_argument('--modality', choices=[mm.value for mm in FeatureMode], default=FeatureMode.TOUCH_ONLY.value,
                    help='feature modality of the CSV export [touch]')

    pp = sub.add_parser('fit-prior', parents=[common], help='fit the human swipe prior')
    pp.add_argument('corpus', nargs='+', help='human corpus files or directories')

    pp = sub.add_parser('synth', parents=[common], help='synthesize bot swipes')
    pp.add_argument('--method', choices=('handcrafted', 'gan'), default='handcrafted', help='generator [handcrafted]')
    pp.add_argument('-n', '--count', type=int, default=1000, help='number of swipes [1000]')
    pp.add_argument('--prior', help='prior file for handcrafted synthesis')
    pp.add_argument('--reverse-profile', action='store_true', help='dense points at the end of the swipe')
    pp.add_argument('--model', '--touch-model', dest='touch_model', help='touch GAN model')
    pp.add_argument('--accel-model', help='accelerometer GAN model')
    pp.add_argument('--humans', nargs='+', help='human corpora seeding the GAN')

    pp = sub.add_parser('train-gan', parents=[common], help='train a sequence GAN on human swipes')
    pp.add_argument('--corpus', nargs='+', required=True, help='human corpus files or directories')
    pp.add_argument('--modality', choices=('touch', 'accel'), default='touch', help='sequence modality [touch]')
    pp.add_argument('--preset', choices=list(GAN_PRESETS), help='network architecture')
    pp.add_argument('--epochs', type=int, help='training epochs')
    pp.add_argument('--batch-size', type=int, help='minibatch size')

    pp = sub.add_parser('train-clf', parents=[common], help='train classifiers into a model bundle')
    pp.add_argument('--humans', nargs='+', required=True, help='human corpora')
    pp.add_argument('--bots', nargs='+', help='bot corpora')
    feature_kinds = [kk.value for kk in ClassifierKind if kk is not ClassifierKind.GAN_DISCRIMINATOR]
    pp.add_argument('--kind', choices=feature_kinds, help='classifier kind')
    pp.add_argument('--modality', choices=[mm.value for mm in FeatureMode], default=FeatureMode.TOUCH_ACCEL.value,
                    help='feature modality for feature_concat bundles [touch_accel]')
    pp.add_argument('--fusion', choices=[ff.value for ff in FusionMode], default=FusionMode.FEATURE_CONCAT.value,
                    help='how modalities are combined [feature_concat]')
    pp.add_argument('--tau', type=float, help='decision threshold [0.5]')
    pp.add_argument('--touch-weight', type=float, default=0.5, help='touch share of a score_mean fusion [0.5]')

    pp = sub.add_parser('eval', parents=[common], help='run an evaluation scenario')
    _add_eval_arguments(pp)

    pp = sub.add_parser('ablate', parents=[common], help='accuracy against training-set size')
    _add_eval_arguments(pp)
    pp.add_argument('--sizes', nargs='+', type=int, help='training sizes (even) [8 points from 70 to 1400]')

    pp = sub.add_parser('report', parents=[common], help='print reports and feature histograms')
    pp.add_argument('reports', nargs='*', help='JSON reports written by eval')
    pp.add_argument('--corpus', action='append', help='NAME=PATH corpus for the feature histograms')
    pp.add_argument('--bins', type=int, default=50, help='histogram bins [50]')

    pp = sub.add_parser('verify', parents=[common], help='score one request against a bundle')
    pp.add_argument('--bundle', required=True, help='model bundle')
    pp.add_argument('--tau', type=float, help='override the bundle threshold')
    pp.add_argument('request', help='JSON request file')

    pp = sub.add_parser('serve', parents=[common], help='run the verification service')
    pp.add_argument('--bundle', help='model bundle [SWIPE_GUARD_BUNDLE]')
    pp.add_argument('--host', help='bind address [0.0.0.0]')
    pp.add_argument('--port', type=int, help='port [8080]')
    pp.add_argument('--tau', type=float, help='override the bundle threshold')
    return parser


def main(argv: Optional[list] = None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')
    try:
        config = load_config(args.config)
        COMMANDS[args.command](args, config)
    except KeyboardInterrupt:
        pass
    except SwipeGuardError as exc:
        LOGGER.critical('%s', exc)
        raise SystemExit(exc.exit_code)


if __name__ == '__main__':
    main()

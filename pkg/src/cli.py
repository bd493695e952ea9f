"""
Command-line driver for the loop soup toolkit.

Commands:
    sample  - write a walk and/or Brownian soup realization as JSON
    couple  - run the correspondence report over several seeds (optionally several N)
    verify  - run a statistical verification suite
    render  - draw soup JSON files as SVG

Exit codes: 0 success, 1 validation or schema error, 2 I/O error, 3 suite failure.
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from .analyzers.verification import SUITES, SuiteSettings, run_suite
from .coupling.soup import (
    BROWNIAN,
    WALK,
    PoissonField,
    Window,
    brownian_soup,
    document_to_soup,
    report_to_document,
    rw_soup,
    soup_to_document,
    theorem1_report,
)
from .utils.config import Config
from .utils.exceptions import ExportError, SchemaError, SuiteFailure, ValidationError
from .utils.report_generator import ReportGenerator
from .utils.schema import SoupDocument, load_document
from .visualizers.svg_renderer import render_svg

logger = logging.getLogger(__name__)

COMMANDS = ('sample', 'couple', 'verify', 'render')
KINDS = (WALK, BROWNIAN, 'both')


@dataclass
class ExperimentConfig:
    """Parameters of one command invocation; fields unused by a command keep their defaults."""

    command: str
    kind: str = WALK
    lam: float = 1.0
    scale: int = 16
    window: Optional[Tuple[int, int, int, int]] = None
    n_max: int = 256
    lambda_max: float = Config.LAMBDA_MAX
    seed: int = Config.DEFAULT_SEED
    seeds: int = 1
    r: float = 1.0
    theta: float = 1.0
    sweep: Tuple[int, ...] = ()
    include_small: bool = False
    t_min: Optional[float] = None
    suite: Optional[str] = None
    samples: int = 100_000
    cells: int = 100_000
    realizations: int = 200
    m_values: Tuple[int, ...] = (20, 50, 100, 200)
    inputs: Tuple[str, ...] = ()
    out: Optional[str] = None
    size: int = 800
    threads: int = Config.THREADS

    def validate(self) -> 'ExperimentConfig':
        if self.command not in COMMANDS:
            raise ValidationError('command', f"unknown command {self.command!r}")
        Config.validate_seed(self.seed)
        Config.validate_threads(self.threads)
        if self.kind not in KINDS:
            raise ValidationError('kind', f"must be one of {', '.join(KINDS)}, got {self.kind!r}")
        if self.command in ('sample', 'couple'):
            if self.lam < 0:
                raise ValidationError('lambda', f"must be >= 0, got {self.lam}")
            if self.scale < 1 or any(n < 1 for n in self.sweep):
                raise ValidationError('scale', "N must be a positive integer")
            if self.seeds < 1:
                raise ValidationError('seeds', f"must be >= 1, got {self.seeds}")
        if self.command == 'couple':
            if not 2.0 / 3.0 < self.theta < 2.0:
                raise ValidationError('theta', f"must lie in (2/3, 2), got {self.theta}")
            if self.r < 1:
                raise ValidationError('r', f"must be >= 1, got {self.r}")
        if self.command == 'render' and not self.inputs:
            raise ValidationError('inputs', "render needs at least one soup JSON file")
        return self


def format_config(config: ExperimentConfig) -> str:
    return json.dumps(dataclasses.asdict(config), sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    """Inverse of format_config."""
    try:
        values = json.loads(text)
        for name in ('window', 'sweep', 'm_values', 'inputs'):
            if values.get(name) is not None:
                values[name] = tuple(values[name])
        return ExperimentConfig(**values)
    except (json.JSONDecodeError, TypeError) as e:
        raise ValidationError('config', str(e))


def parse_window(text: str) -> Tuple[int, int, int, int]:
    """'lo:hi' for a square window, 'x0:x1,y0:y1' for a box; bounds inclusive."""
    try:
        parts = [tuple(int(v) for v in axis.split(':')) for axis in text.split(',')]
        if len(parts) == 1:
            parts = parts * 2
        (x0, x1), (y0, y1) = parts
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window {text!r}; use lo:hi or x0:x1,y0:y1")
    return x0, x1, y0, y1


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(',') if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _join_negative_windows(argv: Sequence[str]) -> List[str]:
    # '--window -8:8' would otherwise be read as an option
    joined = []
    args = list(argv)
    i = 0
    while i < len(args):
        if args[i] == '--window' and i + 1 < len(args) and ':' in args[i + 1]:
            joined.append(f"--window={args[i + 1]}")
            i += 2
        else:
            joined.append(args[i])
            i += 1
    return joined


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors raise ValidationError (exit code 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError('arguments', f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog='loopsoup', description='Random walk and Brownian loop soup coupling')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    def soup_options(sub):
        sub.add_argument('--lambda', dest='lam', type=float, default=1.0, help='soup intensity')
        sub.add_argument('--scale', type=int, default=16, help='scaling N')
        sub.add_argument('--window', type=parse_window, default=None, help='root window lo:hi or x0:x1,y0:y1')
        sub.add_argument('--nmax', dest='n_max', type=int, default=256, help='largest loop index n')
        sub.add_argument('--lambda-max', type=float, default=Config.LAMBDA_MAX, help='field horizon')
        sub.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
        sub.add_argument('--threads', type=int, default=Config.THREADS)
        sub.add_argument('--out', default=None, help='output file or directory')

    sample = commands.add_parser('sample', help='sample a soup realization')
    soup_options(sample)
    sample.add_argument('--kind', choices=KINDS, default=WALK)
    sample.add_argument('--small', dest='include_small', action='store_true',
                        help='add uncoupled Brownian loops with duration below 5/8')
    sample.add_argument('--t-min', type=float, default=None, help='shortest small loop')

    couple = commands.add_parser('couple', help='index correspondence report over seeds')
    soup_options(couple)
    couple.add_argument('--r', type=float, default=1.0)
    couple.add_argument('--theta', type=float, default=1.0)
    couple.add_argument('--seeds', type=int, default=1, help='number of consecutive seeds')
    couple.add_argument('--sweep', type=_int_list, default=(), help='comma-separated list of N')

    verify = commands.add_parser('verify', help='run a verification suite')
    verify.add_argument('suite', nargs='?', default=None, help=f"one of {', '.join(SUITES)}")
    verify.add_argument('--list', action='store_true', help='list the suites')
    verify.add_argument('--samples', type=int, default=100_000)
    verify.add_argument('--cells', type=int, default=100_000)
    verify.add_argument('--realizations', type=int, default=200)
    verify.add_argument('--m', dest='m_values', type=_int_list, default=(20, 50, 100, 200))
    verify.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    verify.add_argument('--out', default=None, help='CSV path')

    render = commands.add_parser('render', help='draw soup JSON files as SVG')
    render.add_argument('inputs', nargs='+')
    render.add_argument('--out', default=None, help='SVG path')
    render.add_argument('--size', type=int, default=800)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {k: v for k, v in vars(args).items() if k in names and v is not None}
    for name in ('sweep', 'm_values', 'inputs'):
        if name in values:
            values[name] = tuple(values[name])
    return ExperimentConfig(**values).validate()


def _field(config: ExperimentConfig, seed: int, scale: int) -> PoissonField:
    if config.window is not None:
        window = Window(*config.window)
    else:
        bound = int(math.ceil(config.r * scale))
        window = Window.square(-bound, bound)
    return PoissonField(window, config.n_max, config.lambda_max, seed)


def cmd_sample(config: ExperimentConfig, reports: ReportGenerator) -> List[str]:
    """Write the requested soup realization(s) as JSON."""
    field_ = _field(config, config.seed, config.scale)
    kinds = [WALK, BROWNIAN] if config.kind == 'both' else [config.kind]
    written = []
    for kind in kinds:
        if kind == WALK:
            realization = rw_soup(field_, config.lam, config.scale, threads=config.threads)
        else:
            realization = brownian_soup(field_, config.lam, config.scale, config.include_small,
                                        config.t_min, threads=config.threads)
        if config.out is None:
            name = f"soup_{kind}_seed{config.seed}.json"
        elif len(kinds) > 1:
            name = str(Path(config.out).with_suffix('')) + f".{kind}.json"
        else:
            name = config.out
        written.append(reports.write_document(name, soup_to_document(realization)))
        print(f"✓ {kind} soup: {len(realization)} loops -> {written[-1]}")
    return written


def _summary_row(label, rows: pd.DataFrame) -> dict:
    return {
        'seed': label,
        'failure_rate': float((~rows['bijective'].astype(bool)).mean()),
        'max_duration_gap': float(rows['max_duration_gap'].max()),
        'max_sup_distance': float(rows['max_sup_distance'].max()),
        'median_sup_distance': float(rows['median_sup_distance'].median()),
        'matched': int(rows['matched'].sum()),
    }


def cmd_couple(config: ExperimentConfig, reports: ReportGenerator) -> List[str]:
    """Correspondence reports per seed, one aggregate CSV per N and a sweep summary."""
    out_dir = Path(config.out) if config.out else Path('.')
    scales = list(config.sweep) or [config.scale]
    written = []
    sweep_rows = []
    for scale in scales:
        rows = []
        seeds = range(config.seed, config.seed + config.seeds)
        for seed in tqdm(seeds, desc=f"N={scale}", file=sys.stderr, disable=len(seeds) < 2):
            report = theorem1_report(_field(config, seed, scale), config.lam, scale,
                                     config.r, config.theta, threads=config.threads)
            written.append(reports.write_document(out_dir / f"couple_N{scale}_seed{seed}.json",
                                                  report_to_document(report)))
            rows.append(report.summary())
        table = pd.DataFrame(rows)
        summary = _summary_row('summary', table)
        table['failure_rate'] = (~table['bijective'].astype(bool)).astype(float)
        table = pd.concat([table, pd.DataFrame([summary])], ignore_index=True)
        written.append(reports.write_table(out_dir / f"couple_N{scale}.csv", table))
        sweep_rows.append({'N': scale, 'seeds': config.seeds,
                           'duration_gap_limit': 0.625 / scale ** 2,
                           **{k: v for k, v in summary.items() if k != 'seed'}})
        mark = '✓' if summary['max_duration_gap'] <= 0.625 / scale ** 2 else '✗'
        print(f"{mark} N={scale}: failure rate {summary['failure_rate']:.3f}, "
              f"max duration gap {summary['max_duration_gap']:.3g}, "
              f"max sup distance {summary['max_sup_distance']:.3g}")
    if config.sweep:
        written.append(reports.write_table(out_dir / 'couple_sweep.csv', pd.DataFrame(sweep_rows)))
    return written


def cmd_verify(config: ExperimentConfig, reports: ReportGenerator) -> List[str]:
    """Run one suite, print its table and checks, write the CSV; SuiteFailure if a check fails."""
    if config.suite is None:
        raise ValidationError('suite', f"choose one of {', '.join(SUITES)}")
    settings = SuiteSettings(samples=config.samples, cells=config.cells,
                             realizations=config.realizations, m_values=config.m_values)
    result = run_suite(config.suite, settings, config.seed)
    print(result.table.to_string(index=False))
    for name, ok in result.checks.items():
        print(f"{'✓' if ok else '✗'} {name}")
    path = reports.write_table(config.out or f"verify_{config.suite}.csv", result.table)
    if not result.passed:
        raise SuiteFailure(config.suite, result.failed_checks)
    return [path]


def cmd_render(config: ExperimentConfig, reports: ReportGenerator) -> List[str]:
    """Draw the input soups into one SVG."""
    realizations = []
    for name in config.inputs:
        try:
            realizations.append(document_to_soup(load_document(reports.read_text(name), SoupDocument)))
        except SchemaError as e:
            raise SchemaError(f"{name}:{e.location}", e.message)
    out = config.out or str(Path(config.inputs[0]).with_suffix('.svg'))
    path = reports.write_svg(out, render_svg(realizations, size=config.size))
    print(f"✓ rendered {sum(len(r) for r in realizations)} loops -> {path}")
    return [path]


HANDLERS = {
    'sample': cmd_sample,
    'couple': cmd_couple,
    'verify': cmd_verify,
    'render': cmd_render,
}


def main(argv: Sequence[str] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_windows(sys.argv[1:] if argv is None else argv))
    except ValidationError as e:
        print(f"✗ {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else Config.LOG_LEVEL,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)

    if args.command == 'verify' and args.list:
        for name, suite in SUITES.items():
            print(f"{name:12s} {suite.__doc__.strip().splitlines()[0]}")
        return 0

    try:
        config = config_from_args(args)
        logger.debug("config %s", format_config(config))
        # relative output paths resolve against the working directory
        HANDLERS[config.command](config, ReportGenerator(Path('.')))
    except (ValidationError, SchemaError) as e:
        print(f"✗ {e}", file=sys.stderr)
        return 1
    except (ExportError, OSError) as e:
        print(f"✗ {e}", file=sys.stderr)
        return 2
    except SuiteFailure as e:
        print(f"✗ {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == '__main__':
    sys.exit(main())

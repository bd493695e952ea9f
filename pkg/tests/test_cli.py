"""
Tests for the command-line driver: configuration, exit codes and output determinism.
"""

import json

import pandas as pd
import pytest

from src.cli import ExperimentConfig, format_config, main, parse_config, parse_window
from src.utils.exceptions import ValidationError


def run(*args) -> int:
    return main([str(a) for a in args])


class TestConfig:

    def test_square_window(self):
        assert parse_window('-8:8') == (-8, 8, -8, 8)

    def test_box_window(self):
        assert parse_window('0:3,1:2') == (0, 3, 1, 2)

    def test_round_trip(self):
        config = ExperimentConfig(command='couple', lam=0.5, window=(-8, 8, -4, 4), sweep=(8, 16, 32),
                                  m_values=(20, 40), inputs=('a.json',), t_min=0.1)
        assert parse_config(format_config(config)) == config

    def test_theta_range(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(command='couple', theta=0.6).validate()

    def test_malformed_config(self):
        with pytest.raises(ValidationError):
            parse_config('{"command": "sample", "bogus": 1}')


class TestArguments:

    @pytest.mark.parametrize('args', [
        ('sample', '--kind', 'nope'),
        ('sample', '--scale', 'abc'),
        ('couple', '--theta', 'x'),
        ('sample', '--window', 'a:b'),
        ('bogus',),
    ])
    def test_bad_values_exit_1(self, args, capsys):
        assert run(*args) == 1
        assert 'usage:' in capsys.readouterr().err

    def test_help_still_exits_0(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            run('sample', '--help')
        assert exit_info.value.code == 0


class TestSample:

    def sample(self, out, *extra):
        return run('sample', '--kind', 'walk', '--lambda', 1, '--scale', 4, '--window', '-3:3',
                   '--nmax', 16, '--seed', 7, '--out', out, *extra)

    def test_byte_identical_reruns(self, tmp_path):
        first, second = tmp_path / 'a.json', tmp_path / 'b.json'
        assert self.sample(first) == 0
        assert self.sample(second) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_zero_intensity(self, tmp_path):
        out = tmp_path / 'empty.json'
        assert run('sample', '--lambda', 0, '--window', '-2:2', '--nmax', 8, '--out', out) == 0
        document = json.loads(out.read_text())
        assert document['loops'] == []
        assert document['schema_version'] == 1
        assert document['lambda'] == 0.0

    def test_both_kinds(self, tmp_path):
        base = tmp_path / 'soup.json'
        assert run('sample', '--kind', 'both', '--lambda', 2, '--scale', 2, '--window', '-2:2',
                   '--nmax', 8, '--out', base) == 0
        walk = json.loads((tmp_path / 'soup.walk.json').read_text())
        brownian = json.loads((tmp_path / 'soup.brownian.json').read_text())
        assert walk['kind'] == 'walk' and brownian['kind'] == 'brownian'
        index = lambda doc: {(l['n'], *l['z'], l['m']) for l in doc['loops']}
        # the index sets can only differ where N and N~ disagree, which is rare at n > 1
        differing = index(walk) ^ index(brownian)
        assert len(differing) < len(index(walk) | index(brownian))

    def test_invalid_seed(self, tmp_path, capsys):
        assert self.sample(tmp_path / 'x.json', '--seed', -1) == 1
        assert 'seed' in capsys.readouterr().err

    def test_intensity_beyond_field(self, tmp_path):
        assert run('sample', '--lambda', 50, '--lambda-max', 10, '--window', '-1:1',
                   '--out', tmp_path / 'x.json') == 1

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / 'file.txt'
        blocker.write_text('x')
        assert self.sample(blocker / 'soup.json') == 2


class TestCouple:

    def test_aggregate_table(self, tmp_path):
        assert run('couple', '--lambda', 1, '--scale', 4, '--nmax', 24, '--seeds', 3,
                   '--seed', 1, '--out', tmp_path) == 0
        table = pd.read_csv(tmp_path / 'couple_N4.csv')
        assert len(table) == 4
        assert table['seed'].astype(str).tolist()[-1] == 'summary'
        assert (table['max_duration_gap'] <= 0.625 / 16 + 1e-15).all()
        for seed in (1, 2, 3):
            report = json.loads((tmp_path / f'couple_N4_seed{seed}.json').read_text())
            assert report['scaleN'] == 4

    def test_sweep(self, tmp_path):
        assert run('couple', '--lambda', 1, '--sweep', '2,4', '--nmax', 16, '--seeds', 2,
                   '--out', tmp_path) == 0
        sweep = pd.read_csv(tmp_path / 'couple_sweep.csv')
        assert sweep['N'].tolist() == [2, 4]
        assert (sweep['max_duration_gap'] <= sweep['duration_gap_limit'] + 1e-15).all()

    def test_theta_out_of_range(self, tmp_path):
        assert run('couple', '--theta', 2.5, '--out', tmp_path) == 1


class TestVerify:

    def test_list(self, capsys):
        assert run('verify', '--list') == 0
        out = capsys.readouterr().out
        assert 'soup-counts' in out and 'beurling' in out

    def test_unknown_suite(self):
        assert run('verify', 'nope') == 1

    def test_missing_suite(self):
        assert run('verify') == 1

    def test_writes_table(self, tmp_path, capsys):
        out = tmp_path / 'duration.csv'
        assert run('verify', 'duration', '--samples', 20000, '--out', out) == 0
        assert len(pd.read_csv(out)) == 3
        assert '✓' in capsys.readouterr().out


class TestRender:

    @pytest.fixture
    def soups(self, tmp_path):
        base = tmp_path / 'soup.json'
        assert run('sample', '--kind', 'both', '--lambda', 2, '--scale', 2, '--window', '-2:2',
                   '--nmax', 8, '--out', base) == 0
        return tmp_path / 'soup.walk.json', tmp_path / 'soup.brownian.json'

    def test_deterministic(self, soups, tmp_path):
        first, second = tmp_path / 'a.svg', tmp_path / 'b.svg'
        assert run('render', *soups, '--out', first) == 0
        assert run('render', *soups, '--out', second) == 0
        assert first.read_bytes() == second.read_bytes()
        loops = sum(len(json.loads(p.read_text())['loops']) for p in soups)
        assert first.read_text().count('<polyline') == loops

    def test_schema_violation(self, tmp_path, capsys):
        bad = tmp_path / 'bad.json'
        bad.write_text('{"kind": "walk"}')
        assert run('render', bad, '--out', tmp_path / 'bad.svg') == 1
        assert 'bad.json' in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert run('render', tmp_path / 'missing.json') == 2

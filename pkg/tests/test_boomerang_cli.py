"""End-to-end tests for the command line."""

import json

import pytest

from boomerang_cli import SEED_ENV, main
from opinion_io import write_graph
from signed_graph import generate_complete_clustered


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture
def fig1_graph_file(tmp_path):
    path = tmp_path / 'fig1.txt'
    write_graph(generate_complete_clustered([5, 7])[0], path)
    return path


@pytest.fixture
def fig1_config(tmp_path):
    path = tmp_path / 'fig1.json'
    path.write_text(json.dumps({'preset': 'fig1', 'self_weight': 0.5, 'horizon': 2000, 'trials': 2}))
    return path


def _last_line(path):
    return path.read_text().rstrip('\n').rsplit('\n', 1)[-1]


class TestCheckBalance:
    def test_structural_balance(self, fig1_graph_file, capsys):
        assert main(['check-balance', '--graph', str(fig1_graph_file)]) == 0
        out = capsys.readouterr().out
        assert 'k=2 structural balance' in out
        assert 'Factions: 0 1 2 3 4 | 5 6 7 8 9 10 11' in out

    def test_clustering_balance(self, negative_triangle, tmp_path, capsys):
        path = tmp_path / 'triangle.txt'
        write_graph(negative_triangle, path)
        assert main(['check-balance', '--graph', str(path)]) == 0
        assert 'k=3 clustering balance' in capsys.readouterr().out

    def test_violation_lists_offending_edges(self, unbalanced_triangle, tmp_path, capsys):
        path = tmp_path / 'unbalanced.txt'
        write_graph(unbalanced_triangle, path)
        assert main(['check-balance', '--graph', str(path)]) == 1
        out = capsys.readouterr().out
        assert 'sign arrangement violated' in out
        assert 'negative edge 0 2 lies inside a faction' in out

    def test_missing_file(self, tmp_path, capsys):
        assert main(['check-balance', '--graph', str(tmp_path / 'absent.txt')]) == 2
        assert 'I/O error' in capsys.readouterr().err

    def test_malformed_file(self, tmp_path, capsys):
        path = tmp_path / 'bad.txt'
        path.write_text('n 3\n0 1\n')
        assert main(['check-balance', '--graph', str(path)]) == 2
        assert 'GraphFormatError' in capsys.readouterr().err

    def test_non_utf8_file(self, tmp_path, capsys):
        path = tmp_path / 'binary.txt'
        path.write_bytes(b'\xff\xfe')
        assert main(['check-balance', '--graph', str(path)]) == 2
        assert 'GraphFormatError' in capsys.readouterr().err


class TestSimulateAndReplay:
    def test_same_seed_gives_identical_files(self, fig1_config, tmp_path):
        first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
        assert main(['simulate', '--config', str(fig1_config), '--seed', '7', '--out', str(first)]) == 0
        assert main(['simulate', '--config', str(fig1_config), '--seed', '7', '--out', str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert (tmp_path / 'a.csv.edges').read_bytes() == (tmp_path / 'b.csv.edges').read_bytes()

    def test_replay_reproduces_final_state(self, fig1_config, fig1_graph_file, tmp_path):
        simulated, replayed = tmp_path / 'sim.csv', tmp_path / 'replay.csv'
        assert main(['simulate', '--config', str(fig1_config), '--seed', '3', '--out', str(simulated)]) == 0
        assert main(['replay', '--graph', str(fig1_graph_file), '--edges', f"{simulated}.edges",
                     '--trajectory', str(simulated), '--config', str(fig1_config),
                     '--out', str(replayed)]) == 0
        assert _last_line(replayed) == _last_line(simulated)

    def test_report_and_graph_outputs(self, fig1_config, tmp_path):
        report, graph = tmp_path / 'report.json', tmp_path / 'graph.txt'
        assert main(['simulate', '--config', str(fig1_config), '--seed', '1', '--out', str(tmp_path / 't.csv'),
                     '--report', str(report), '--graph-out', str(graph)]) == 0
        payload = json.loads(report.read_text())
        assert payload['schema_version'] == '1.0'
        assert payload['verdict'] in {'consensus', 'polarization', 'not_yet'}
        assert graph.read_text().startswith('n 12\n')

    def test_seed_is_required(self, fig1_config, tmp_path, capsys):
        assert main(['simulate', '--config', str(fig1_config), '--out', str(tmp_path / 't.csv')]) == 2
        assert SEED_ENV in capsys.readouterr().err

    def test_seed_from_environment(self, fig1_config, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, '7')
        from_env, from_flag = tmp_path / 'env.csv', tmp_path / 'flag.csv'
        assert main(['simulate', '--config', str(fig1_config), '--out', str(from_env)]) == 0
        assert main(['simulate', '--config', str(fig1_config), '--seed', '7', '--out', str(from_flag)]) == 0
        assert from_env.read_bytes() == from_flag.read_bytes()

    def test_invalid_config(self, tmp_path, capsys):
        config = tmp_path / 'bad.json'
        config.write_text(json.dumps({'preset': 'fig1', 'self_weight': 1.0}))
        assert main(['simulate', '--config', str(config), '--seed', '1', '--out', str(tmp_path / 't.csv')]) == 2
        assert 'self_weight' in capsys.readouterr().err


class TestMonteCarlo:
    def test_writes_summary_and_table(self, fig1_config, tmp_path, capsys):
        out = tmp_path / 'summary.json'
        assert main(['montecarlo', '--config', str(fig1_config), '--seed', '4', '--out', str(out)]) == 0
        assert json.loads(out.read_text())['aggregates']['trials'] == 2
        assert (tmp_path / 'summary.csv').exists()
        assert 'Regime: polarization' in capsys.readouterr().out

    def test_output_is_deterministic(self, fig1_config, tmp_path):
        first, second = tmp_path / 'one.json', tmp_path / 'two.json'
        for out in (first, second):
            assert main(['montecarlo', '--config', str(fig1_config), '--seed', '9', '--out', str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_non_utf8_config(self, tmp_path, capsys):
        config = tmp_path / 'latin.json'
        config.write_bytes(b'{"preset": "fig1", "self_weight": 0.5, "note": "caf\xe9"}')
        assert main(['montecarlo', '--config', str(config), '--seed', '1',
                     '--out', str(tmp_path / 'summary.json')]) == 2
        assert 'ConfigParseError' in capsys.readouterr().err


class TestPerturbAndProximity:
    def test_perturb_is_deterministic(self, fig1_graph_file, tmp_path, capsys):
        first, second = tmp_path / 'p1.txt', tmp_path / 'p2.txt'
        for out in (first, second):
            assert main(['perturb', '--graph', str(fig1_graph_file), '--flip', '3',
                         '--seed', '5', '--out', str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert 'Flipped 3 edges' in capsys.readouterr().out

    def test_proximity_on_two_factions(self, fig1_graph_file, tmp_path):
        out = tmp_path / 'seq.txt'
        assert main(['proximity', '--graph', str(fig1_graph_file), '--pair', '0', '5',
                     '--a', '0.5', '--out', str(out)]) == 0
        assert out.read_text().strip()

    def test_proximity_needs_two_factions(self, negative_triangle, tmp_path, capsys):
        path = tmp_path / 'triangle.txt'
        write_graph(negative_triangle, path)
        assert main(['proximity', '--graph', str(path), '--pair', '0', '1',
                     '--a', '0.5', '--out', str(tmp_path / 'seq.txt')]) == 1
        assert 'ArrangementViolated' in capsys.readouterr().err


def test_unknown_command():
    assert main(['explode']) == 2

import numpy as np
import pytest

from chns_fem.cli import load, main
from chns_fem.cli.config import InitKind, RunMode, parse_config, parse_init_spec
from chns_fem.cli.output import ENERGY_COLUMNS, read_csv, read_vtk_legacy, write_vtk_legacy
from chns_fem.cli.runner import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    FAILURE_MARKER,
    RunRecorder,
    random_phase,
    run_stability_sweep,
)
from chns_fem.errors import ConfigError, SpaceMismatchError, VtkFormatError
from chns_fem.mesh import build_structured_mesh
from chns_fem.mms import StudyKind
from chns_fem.simulation import EXIT_WATCH


SMALL = ['--mesh', '4', '4']


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_defaults():
    config = parse_config()

    assert config.mode is RunMode.SIMULATE
    assert config.grid.tau == 0.01
    assert config.grid.steps == 100
    assert (config.mesh.nx, config.mesh.ny) == (16, 16)
    assert config.params.epsilon == 0.1
    assert config.newton.tol == 1e-11
    assert config.init.kind is InitKind.RANDOM_SEED
    assert config.study.kind is StudyKind.TEMPORAL
    assert config.study.levels() == [(1 / 64, 1 / 10), (1 / 64, 1 / 20), (1 / 64, 1 / 40)]


def test_rejection_names_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config(overrides={'params.epsilon': -0.1})

    assert info.value.key_path == 'params.epsilon'


def test_flags_beat_file(tmp_path):
    path = _write(tmp_path / 'run.toml', '[run]\nmode = "simulate"\n\n[grid]\ntau = 0.02\nsteps = 7\n')
    config = load(['--config', path, '--tau', '0.05'])

    assert config.grid.tau == 0.05
    assert config.grid.steps == 7


@pytest.mark.parametrize('text, key', [
    ('[run]\nmode = "simulate"\n\n[grid]\ndt = 0.1\n', 'grid.dt'),
    ('[run]\nmode = "simulate"\n\n[solver]\ntol = 0.1\n', 'solver'),
    ('[grid]\ntau = 0.1\n', 'run.mode'),
    ('[run]\nmode = "sprint"\n', 'run.mode'),
    ('[run]\nmode = "simulate"\n\n[mesh]\nnx = 0\n', 'mesh.nx'),
    ('[run]\nmode = "simulate"\n\n[mesh]\nrect = [0, 0, 0, 1]\n', 'mesh.rect'),
    ('[run]\nmode = "simulate"\n\n[output]\nformats = ["hdf5"]\n', 'output.formats'),
    ('[run]\nmode = "mms-study"\n\n[study]\nsolution = "vortex"\n', 'study.solution'),
])
def test_file_rejections(tmp_path, text, key):
    path = _write(tmp_path / 'run.toml', text)

    with pytest.raises(ConfigError) as info:
        parse_config(path)

    assert info.value.key_path == key


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / 'missing.toml')

    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path / 'broken.toml', '[run\nmode = 1\n'))


def test_init_specs():
    assert parse_init_spec('constant:0.5').value == 0.5
    assert parse_init_spec('random-seed:7').value == 7
    assert parse_init_spec('exact-mms:default').kind is InitKind.EXACT_MMS
    assert str(parse_init_spec('random-seed:7')) == 'random-seed:7'

    for text in ('random-seed', 'random-seed:x', 'random-seed:-1', 'bogus:1', 'exact-mms:nope', 'constant:abc'):
        with pytest.raises(ConfigError):
            parse_init_spec(text)


def test_seed_steers_random_init():
    assert parse_config(overrides={'run.seed': 5}).init.value == 5
    assert parse_config(overrides={'init.spec': 'random-seed:9'}).seed == 9
    assert parse_config(overrides={'run.seed': 5, 'init.spec': 'constant:1'}).init.value == 1.0


def test_study_levels_pair_up():
    config = parse_config(overrides={'study.kind': 'coupled', 'study.h_levels': [0.25, 0.125],
                                     'study.tau_levels': [0.1, 0.05]})

    assert config.study.kind is StudyKind.COUPLED
    assert config.study.levels() == [(0.25, 0.1), (0.125, 0.05)]


def test_study_kinds_parse():
    assert parse_config(overrides={'study.kind': 'temporal-self'}).study.kind is StudyKind.TEMPORAL_SELF

    with pytest.raises(ConfigError) as info:
        parse_config(overrides={'study.kind': 'reference'})

    assert info.value.key_path == 'study.kind'


def test_random_phase_is_seeded(ctx):
    first = random_phase(ctx, 3)

    assert first.coeffs.mean() == pytest.approx(0.0, abs=1e-15)
    assert np.abs(first.coeffs).max() <= 0.1
    np.testing.assert_array_equal(first.coeffs, random_phase(ctx, 3).coeffs)
    assert not np.array_equal(first.coeffs, random_phase(ctx, 4).coeffs)


def test_vtk_snapshot(tmp_path, ctx, random_phi):
    mu = ctx.phase_space.constant(0.25)
    p  = ctx.pressure_space.zeros()
    u  = ctx.velocity_space.zeros()

    path = write_vtk_legacy(tmp_path / 'snap.vtk', ctx.mesh, random_phi, mu, p, u, title='level 3')
    data = read_vtk_legacy(path)
    mesh = ctx.mesh

    assert data.version == '3.0'
    assert data.title == 'level 3'
    assert data.points.shape == (mesh.num_vertices, 3)
    assert len(data.cells) == mesh.num_triangles
    assert all(len(cell) == 3 for cell in data.cells)
    assert np.all(data.cell_types == 5)
    assert sorted(data.point_data) == ['mu', 'p', 'phi', 'u']
    np.testing.assert_array_equal(data.point_data['phi'], random_phi.coeffs[:mesh.num_vertices])
    np.testing.assert_array_equal(data.point_data['mu'], 0.25)
    assert data.point_data['u'].shape == (mesh.num_vertices, 3)


def test_vtk_rejects_foreign_mesh(tmp_path, ctx, random_phi):
    with pytest.raises(SpaceMismatchError):
        write_vtk_legacy(tmp_path / 'snap.vtk', build_structured_mesh(3, 3), random_phi)


def test_vtk_reader_rejects_garbage(tmp_path):
    with pytest.raises(VtkFormatError):
        read_vtk_legacy(_write(tmp_path / 'bad.vtk', 'hello\nworld\nASCII\nDATASET UNSTRUCTURED_GRID\n'))

    with pytest.raises(VtkFormatError):
        read_vtk_legacy(_write(tmp_path / 'short.vtk', '# vtk DataFile Version 3.0\nt\nASCII\n'
                                                       'DATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0 0\n'))


def test_recorder_marker(tmp_path):
    recorder = RunRecorder(tmp_path / 'run')
    recorder.fail('stale')
    assert recorder.marker_path.read_text() == 'stale\n'

    fresh = RunRecorder(tmp_path / 'run')
    fresh.begin()
    assert not (tmp_path / 'run' / FAILURE_MARKER).exists()
    assert fresh in EXIT_WATCH

    fresh.complete()
    assert fresh.completed and not fresh.failed
    assert fresh not in EXIT_WATCH


def test_settled_recorders_ignore_exit(tmp_path):
    failed = RunRecorder(tmp_path / 'failed')
    failed.begin()
    failed.fail('diverged')

    assert failed not in EXIT_WATCH

    failed.on_exit('Program exited.')
    assert failed.marker_path.read_text() == 'diverged\n'

    pending = RunRecorder(tmp_path / 'pending')
    pending.begin()
    pending.on_exit('Program exited.')

    assert pending.failed
    assert pending not in EXIT_WATCH


def test_bad_config_exit_status(tmp_path):
    assert main(['--epsilon', '-1', '--out', str(tmp_path / 'out')]) == EXIT_CONFIG
    assert not (tmp_path / 'out').exists()


def test_pure_phase_run(tmp_path):
    out = tmp_path / 'pure'
    assert main([*SMALL, '--init', 'constant:1', '--steps', '10', '--out', str(out)]) == EXIT_OK

    rows = read_csv(out / 'energy.csv')
    assert list(rows[0]) == list(ENERGY_COLUMNS)
    assert [row['m'] for row in rows] == [str(m) for m in range(1, 11)]
    for row in rows:
        assert float(row['E']) == pytest.approx(0.0, abs=1e-12)
        assert float(row['F']) == pytest.approx(0.0, abs=1e-12)

    assert (out / 'snapshots' / 'snapshot_000001.vtk').exists()
    assert (out / 'snapshots' / 'snapshot_000010.vtk').exists()
    assert not (out / FAILURE_MARKER).exists()


def test_runs_are_bitwise_reproducible(tmp_path):
    args = [*SMALL, '--steps', '5', '--seed', '42']

    assert main([*args, '--out', str(tmp_path / 'a')]) == EXIT_OK
    assert main([*args, '--out', str(tmp_path / 'b')]) == EXIT_OK

    assert (tmp_path / 'a' / 'energy.csv').read_bytes() == (tmp_path / 'b' / 'energy.csv').read_bytes()


def test_gronwall_mode(tmp_path):
    assert main(['--mode', 'gronwall-selftest', '--seed', '1', '--out', str(tmp_path)]) == EXIT_OK

    rows = (tmp_path / 'gronwall.csv').read_text().splitlines()
    assert rows[0] == 'check,value'
    assert rows[-1] == 'passed,True'


def test_mms_study_mode(tmp_path):
    path = _write(tmp_path / 'study.toml', '[run]\nmode = "mms-study"\n\n'
                                           '[study]\nkind = "temporal-self"\nh_levels = [0.25]\n'
                                           'tau_levels = [0.05, 0.025]\nfinal_time = 0.1\n')

    assert main(['--config', path, '--out', str(tmp_path / 'out')]) == EXIT_OK

    rows = read_csv(tmp_path / 'out' / 'rates.csv')
    assert len(rows) == 2
    assert float(rows[1]['combined']) < float(rows[0]['combined'])


def test_stability_sweep(tmp_path):
    config = parse_config(overrides={'mesh.nx': 4, 'mesh.ny': 4, 'grid.steps': 3, 'output.formats': ['csv'],
                                     'output.directory': str(tmp_path)})
    recorder = RunRecorder(tmp_path)
    recorder.begin()

    assert run_stability_sweep(config, recorder, ladder=(1e-3, 1e-2)) == EXIT_OK

    rows = read_csv(tmp_path / 'stability.csv')
    assert [row['verdict'] for row in rows] == ['stable', 'stable']
    assert (tmp_path / 'energy_tau_1e-03.csv').exists()


def test_failed_sweep_leaves_marker(tmp_path):
    config = parse_config(overrides={'mesh.nx': 4, 'mesh.ny': 4, 'grid.steps': 3, 'newton.tol': 1e-30,
                                     'newton.max_iters': 1, 'output.directory': str(tmp_path)})
    recorder = RunRecorder(tmp_path)
    recorder.begin()

    assert run_stability_sweep(config, recorder, ladder=(1e-2,)) == EXIT_NUMERICAL

    rows = read_csv(tmp_path / 'stability.csv')
    assert rows[0]['verdict'].startswith('failed')
    assert recorder.failed
    assert (tmp_path / FAILURE_MARKER).exists()


@pytest.mark.slow
def test_stability_ladder(tmp_path):
    config = parse_config(overrides={'grid.steps': 10, 'output.formats': ['csv'],
                                     'output.directory': str(tmp_path)})
    recorder = RunRecorder(tmp_path)
    recorder.begin()

    assert run_stability_sweep(config, recorder) == EXIT_OK
    assert [row['verdict'] for row in read_csv(tmp_path / 'stability.csv')] == ['stable'] * 4

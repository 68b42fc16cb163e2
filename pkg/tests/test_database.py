import pytest

from database import ExperimentDatabase


@pytest.fixture
def db(tmp_path):
    database = ExperimentDatabase(str(tmp_path / "runs.db"))
    yield database
    database.close()


def _run(command, exit_code, **extra):
    return {'command': command, 'exit_code': exit_code, 'report': {'passed': exit_code == 0}, **extra}


def test_save_and_get(db):
    run_id = db.save_run(_run('subgrad', 0, fixture='pinned-relu-2-3-2', seed=7, summary="ok"))
    run = db.get_run(run_id)
    assert run['command'] == 'subgrad'
    assert run['seed'] == 7
    assert run['report'] == {'passed': True}
    assert db.get_run(run_id + 1) is None


def test_history_filter_and_delete(db):
    first = db.save_run(_run('gradcheck', 0))
    db.save_run(_run('converge', 1))
    db.save_run(_run('gradcheck', 1))
    assert len(db.get_run_history()) == 3
    assert [r['exit_code'] for r in db.get_run_history(command='gradcheck')] == [1, 0]
    assert len(db.get_run_history(limit=1)) == 1
    db.delete_run(first)
    assert len(db.get_run_history(command='gradcheck')) == 1


def test_stats(db):
    db.save_run(_run('gradcheck', 0))
    db.save_run(_run('gradcheck', 1))
    db.save_run(_run('lipschitz', 0))
    stats = db.get_run_stats()
    assert stats['total_runs'] == 3
    assert stats['total_passed'] == 2
    assert stats['by_command']['gradcheck'] == {'runs': 2, 'passed': 1}


def test_empty_report(db):
    run_id = db.save_run({'command': 'mollifier', 'exit_code': 0, 'report': None})
    assert db.get_run(run_id)['report'] is None

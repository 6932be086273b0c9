"""
Tests for the command-line entry point, the run store and the report writers
"""
import io
import json
import math
from datetime import datetime, timedelta
from pathlib import Path

import pytest
from rich.console import Console

from database import STATUS_ERROR, STATUS_FAILED, STATUS_PASSED, RunStore
from fourier_taylor import FourierTaylorSeries
from lindstedt import EXIT_OK, EXIT_USAGE, main
from model import reference_document
from renormalized import DomainReport, ProbeSample
from reports import Report, Reporter
from settings import Settings


@pytest.fixture
def cli(tmp_path):
    """main() with a private config file and run store"""
    def run(*args):
        return main(list(args) + ['--config', str(tmp_path / 'config.json'), '--db', str(tmp_path / 'runs.db')])
    return run


class TestCommandLine:
    def test_expand_writes_reports(self, cli, tmp_path):
        out = tmp_path / 'reports'
        assert cli('expand', '--order', '2', '--out', str(out)) == EXIT_OK
        text = (out / 'expand.txt').read_text()
        assert text.startswith('# expand')
        assert text.rstrip().endswith('status: pass')
        first = (out / 'coefficients.txt').read_text().splitlines()[0]
        assert len(first.split()) == 6

        store = RunStore(str(tmp_path / 'runs.db'))
        runs = store.get_runs()
        assert [(r.command, r.status, r.exit_code) for r in runs] == [('expand', STATUS_PASSED, 0)]
        store.close()

    def test_model_file(self, cli, tmp_path):
        path = tmp_path / 'model.json'
        path.write_text(json.dumps(reference_document()))
        assert cli('expand', '--model', str(path), '--order', '1') == EXIT_OK

    def test_verify_suites(self, cli):
        assert cli('verify', 'oracle', '--order', '2') == EXIT_OK
        assert cli('verify', 'scales', '--vmax', '1') == EXIT_OK
        assert cli('verify', 'resummation', '--order', '2') == EXIT_OK

    def test_bench_records_metrics(self, cli, tmp_path):
        assert cli('bench', '--order', '2') == EXIT_OK
        store = RunStore(str(tmp_path / 'runs.db'))
        names = {m.name for m in store.get_runs(command='bench')[0].metrics}
        assert {'trees_per_second', 'enumeration_seconds', 'failed_checks'} <= names
        store.close()

    def test_history(self, cli, capsys):
        assert cli('history') == EXIT_OK
        assert 'No runs recorded' in capsys.readouterr().out

    @pytest.mark.parametrize("args", [
        ('expand', 'trees'),
        ('expand', '--order', '0'),
        ('expand', '--vmax', '0'),
        ('expand', '--model', 'missing.json'),
        ('history', '--since', 'not a date at all'),
        ('expand', '--log-level', 'LOUD'),
    ])
    def test_usage_errors(self, cli, capsys, args):
        assert cli(*args) == EXIT_USAGE
        assert '❌ Error' in capsys.readouterr().out

    def test_history_needs_the_store(self, tmp_path):
        assert main(['history', '--no-db', '--config', str(tmp_path / 'config.json')]) == EXIT_USAGE

    def test_invalid_model_document(self, cli, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"r": 2')
        assert cli('expand', '--model', str(path)) == EXIT_USAGE

    def test_precision_override_leaves_the_config_alone(self, cli, tmp_path):
        assert cli('expand', '--order', '1', '--precision', 'extended', '--no-db') == EXIT_OK
        assert Settings(str(tmp_path / 'config.json')).precision == 'double'


class TestRunStore:
    @pytest.fixture
    def store(self):
        store = RunStore(":memory:")
        yield store
        store.close()

    def test_lifecycle(self, store):
        run = store.start_run('bench', 'ref1', order=4, vmax=2, precision='extended', seed=3)
        assert run.status == 'running' and run.duration is None
        store.add_metric(run, 'trees_per_second', 1234.5)
        store.finish_run(run, 0)
        assert run.status == STATUS_PASSED
        assert run.duration >= 0
        assert [m.value for m in store.get_metrics('trees_per_second')] == [1234.5]

    def test_status_follows_the_exit_code(self, store):
        failed = store.finish_run(store.start_run('verify', 'ref1'), 1)
        broken = store.finish_run(store.start_run('verify', 'ref1'), 2)
        forced = store.finish_run(store.start_run('resum', 'ref1'), 1, STATUS_ERROR)
        assert (failed.status, broken.status, forced.status) == (STATUS_FAILED, STATUS_ERROR, STATUS_ERROR)

    def test_queries(self, store):
        for command in ('expand', 'verify', 'verify'):
            store.start_run(command, 'ref1')
        assert len(store.get_runs()) == 3
        assert len(store.get_runs(command='verify')) == 2
        assert len(store.get_runs(limit=1)) == 1
        assert store.get_runs(since=datetime.utcnow() + timedelta(days=1)) == []

    def test_rejects_non_string_path(self):
        with pytest.raises(TypeError):
            RunStore(Path("runs.db"))


class TestReports:
    def test_render(self):
        report = Report('demo').section('numbers').add('half', 0.5).add('unit', 1j).add('pair', [0.5, 0.25])
        assert report.check('always', True)
        assert not report.check('small enough', False, 1e-3)
        text = report.render()
        assert '[numbers]' in text
        assert 'half: 0.5' in text
        assert 'unit: 0 1' in text
        assert 'pair: 0.5 0.25' in text
        assert 'always: pass' in text
        assert 'small enough: fail 0.001' in text
        assert text.rstrip().endswith('status: fail')
        assert report.failures == ['small enough']

    def test_add_without_section(self):
        report = Report('bare').add('count', 3)
        assert report.sections == [('bare', [('count', 3)])]
        assert report.ok

    def test_writers(self, tmp_path):
        settings = Settings(str(tmp_path / 'config.json'))
        console = Console(file=io.StringIO())
        reporter = Reporter(settings, str(tmp_path / 'out'), console=console)

        path = reporter.write_report(Report('demo').add('x', 1.0))
        assert Path(path).read_text().startswith('# demo')

        series = FourierTaylorSeries.zeros(2, 1, 1)
        series.set(1, (1, 0), [0.5])
        path = reporter.write_coefficients(series)
        assert Path(path).read_text() == "1 1 0 0 0.5 0\n"

        domain = DomainReport(samples=[ProbeSample(phi=1.0, eps=0.01 + 0j, passed=True, norm_margin=0.5)],
                              cusp_points=[], cusp_slope=math.nan)
        lines = Path(reporter.write_domain(domain)).read_text().splitlines()
        assert lines[0] == "phi,re_eps,im_eps,pass,norm_margin"
        assert lines[1].split(',')[3] == '1'

        reporter.print_history([])
        assert 'No runs recorded' in console.file.getvalue()

    def test_no_output_directory(self, tmp_path):
        reporter = Reporter(Settings(str(tmp_path / 'config.json')), None, console=Console(file=io.StringIO()))
        assert reporter.write_report(Report('demo')) is None

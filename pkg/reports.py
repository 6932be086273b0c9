"""
Reporting module: plain-text reports, coefficient dumps, domain grids and console tables
"""
import os
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

from database import Run
from fourier_taylor import FourierTaylorSeries, dump_coefficients
from renormalized import DomainReport
from settings import Settings
from utils import format_complex, format_real


@dataclass
class Report:
    """Sections of key: value lines in insertion order"""
    command: str
    sections: List[Tuple[str, List[Tuple[str, Any]]]] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    def section(self, name: str) -> "Report":
        self.sections.append((name, []))
        return self

    def add(self, key: str, value: Any) -> "Report":
        if not self.sections:
            self.section(self.command)
        self.sections[-1][1].append((key, value))
        return self

    def check(self, key: str, passed: bool, value: Any = None) -> bool:
        """Add a pass/fail line and remember failures"""
        self.add(key, passed if value is None else f"{'pass' if passed else 'fail'} {self.format(value)}")
        if not passed:
            self.failures.append(key)
        return passed

    @property
    def ok(self) -> bool:
        return not self.failures

    @staticmethod
    def format(value: Any, digits: int = 17) -> str:
        if isinstance(value, (bool, np.bool_)):
            return 'pass' if value else 'fail'
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return format_real(value, digits)
        if isinstance(value, (complex, np.complexfloating)):
            return format_complex(value, digits)
        if isinstance(value, (list, tuple)) and value and all(isinstance(v, (float, np.floating)) for v in value):
            return " ".join(format_real(v, digits) for v in value)
        return str(value)

    def render(self, digits: int = 17) -> str:
        lines = [f"# {self.command}"]
        for name, entries in self.sections:
            lines.append("")
            lines.append(f"[{name}]")
            for key, value in entries:
                lines.append(f"{key}: {self.format(value, digits)}")
        lines.append("")
        lines.append(f"status: {'pass' if self.ok else 'fail'}")
        return "\n".join(lines) + "\n"


class Reporter:
    def __init__(self, settings: Settings, out_dir: Optional[str] = None, console: Optional[Console] = None):
        self.settings = settings
        self.out_dir = out_dir
        self.console = console or Console()

    def _path(self, name: str) -> Optional[str]:
        if self.out_dir is None:
            return None
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def write_report(self, report: Report) -> Optional[str]:
        """Write <command>.txt into the output directory"""
        path = self._path(f"{report.command}.txt")
        if path is not None:
            with open(path, 'w') as f:
                f.write(report.render(self.settings.report_digits))
        return path

    def write_coefficients(self, series: FourierTaylorSeries) -> Optional[str]:
        path = self._path("coefficients.txt")
        if path is not None:
            with open(path, 'w') as f:
                f.write("\n".join(dump_coefficients(series, self.settings.report_digits)) + "\n")
        return path

    def write_domain(self, domain: DomainReport) -> Optional[str]:
        path = self._path("domain.csv")
        if path is not None:
            with open(path, 'w') as f:
                f.write("\n".join(domain.csv_rows(self.settings.report_digits)) + "\n")
        return path

    def print_report(self, report: Report):
        """Print each section as a two-column table"""
        for name, entries in report.sections:
            table = Table(title=name, show_header=False, box=None, padding=(0, 1))
            table.add_column("Key", style="bold cyan")
            table.add_column("Value", justify="right")
            for key, value in entries:
                text = Report.format(value, 10)
                if text.startswith('fail'):
                    text = f"[red]{text}[/red]"
                elif text.startswith('pass'):
                    text = f"[green]{text}[/green]"
                table.add_row(key, text)
            self.console.print(table)
        status = "[bold green]✅ all checks pass[/bold green]" if report.ok else \
            f"[bold red]❌ {len(report.failures)} check(s) failed: {', '.join(report.failures)}[/bold red]"
        self.console.print(status)

    def print_table(self, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]):
        table = Table(title=title)
        for column in columns:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(*[Report.format(v, 10) for v in row])
        self.console.print(table)

    def print_history(self, runs: List[Run]):
        """Recent runs with their metrics"""
        if not runs:
            self.console.print("\n📊 No runs recorded.")
            return
        table = Table(title="Run history")
        table.add_column("Id", justify="right")
        table.add_column("Started", style="cyan")
        table.add_column("Command", style="bold")
        table.add_column("Model")
        table.add_column("Order", justify="right")
        table.add_column("Status")
        table.add_column("Seconds", justify="right")
        table.add_column("Metrics")
        for run in runs:
            color = "green" if run.status == 'passed' else "red" if run.status in ('failed', 'error') else "yellow"
            duration = f"{run.duration:.2f}" if run.duration is not None else ""
            metrics = ", ".join(f"{m.name}={m.value:.4g}" for m in run.metrics)
            table.add_row(str(run.id), run.started_at.strftime("%Y-%m-%d %H:%M:%S"), run.command, run.model_name,
                          "" if run.order is None else str(run.order), f"[{color}]{run.status}[/{color}]",
                          duration, metrics)
        self.console.print(table)


if __name__ == "__main__":
    report = Report("demo").section("numbers").add("pi", float(np.pi)).add("unit", 1j)
    report.check("always", True)
    print(report.render())

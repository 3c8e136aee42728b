from typing import Callable, Dict, Optional

from rich.console import Console
from rich.live import Live
from rich.style import Style
from rich.table import Table
from rich.text import Text

from src.skewfit.types import IterationDiagnostics

console = Console(stderr=True)

_RUNNING_STYLE = ("⋯", Style(color="yellow"))
_STATUS_STYLES = {
    "done": ("✓", Style(color="green", bold=True)),
    "error": ("✗", Style(color="red", bold=True)),
}


class FitProgress:
    """Live per-model progress of population Monte Carlo runs."""

    def __init__(self):
        self.fit_status: Dict[str, Dict[str, str]] = {}
        self.table = Table(show_header=False, box=None, padding=(0, 1))
        self.live = Live(self.table, console=console, refresh_per_second=4)
        self.started = False

    def start(self):
        if not self.started and console.is_terminal:
            self.live.start()
            self.started = True

    def stop(self):
        if self.started:
            self.live.stop()
            self.started = False

    def update_status(self, name: str, status: str = "", record: Optional[IterationDiagnostics] = None):
        """Update the status line of one fit, optionally with the latest iteration record."""
        info = self.fit_status.setdefault(name, {"status": "", "detail": ""})
        if status:
            info["status"] = status
        if record is not None:
            info["detail"] = f"t={record['t']} H={record['entropy']:.3f} ESS={record['ess']:.0f}"

        self._refresh_display()

    def iteration_callback(self, name: str, iterations: int) -> Callable[[IterationDiagnostics], None]:
        """Adapter for the engine's ``on_iteration`` hook."""

        def on_iteration(record: IterationDiagnostics) -> None:
            self.update_status(name, f"iteration {record['t']}/{iterations}", record)

        return on_iteration

    def _refresh_display(self):
        self.table.columns.clear()
        self.table.add_column(width=100)

        for name, info in self.fit_status.items():
            symbol, style = _STATUS_STYLES.get(info["status"].lower(), _RUNNING_STYLE)
            line = Text.assemble((f"{symbol} ", style), (f"{name:<20}", Style(bold=True)), (info["status"], style))
            if info["detail"]:
                line.append(f"  {info['detail']}", style=Style(color="cyan"))
            self.table.add_row(line)


progress = FitProgress()

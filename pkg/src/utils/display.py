from colorama import Fore, Style
from tabulate import tabulate

from src.data.models import CompareReport, FitReport, StudyReport


def _fmt(value: float | None, spec: str = ".4f") -> str:
    return "n/a" if value is None else format(value, spec)


def _vector(values: list[float]) -> str:
    return "(" + ", ".join(f"{v:.3f}" for v in values) + ")"


def print_fit_summary(report: FitReport, *, verbose: bool = False, initial_centre: list[float] | None = None) -> None:
    """Print the posterior summary of one fit."""
    print(f"\n{Fore.WHITE}{Style.BRIGHT}POSTERIOR SUMMARY: {Fore.CYAN}{report.model.label}{Style.RESET_ALL}")
    print(f"{Fore.WHITE}{Style.BRIGHT}{'=' * 50}{Style.RESET_ALL}")
    print(f"log p(y): {Fore.YELLOW}{report.log_marginal_likelihood:.4f}{Style.RESET_ALL}  (n={report.n}, p={report.p}, N={report.particles}, T={report.iterations})")

    table_data = []
    for j in range(report.p):
        table_data.append(
            [
                f"{Fore.CYAN}y{j + 1}{Style.RESET_ALL}",
                f"{report.xi[j]:.4f}",
                f"{report.xi_sd[j]:.4f}",
                f"{report.alpha[j]:.4f}",
                f"{report.delta[j]:.4f}",
                f"{report.sigma[j][j]:.4f}",
            ]
        )
    print(
        tabulate(
            table_data,
            headers=[f"{Fore.WHITE}Coord", "xi", "sd(xi)", "alpha", "delta", "Sigma_jj"],
            tablefmt="grid",
            colalign=("left", "right", "right", "right", "right", "right"),
        )
    )
    if report.nu_mean is not None:
        print(f"E[nu | y]: {Fore.GREEN}{report.nu_mean:.3f}{Style.RESET_ALL}")
        if verbose and report.nu_grid is not None and report.nu_pmf is not None:
            pmf_rows = [[f"{nu:g}", f"{prob:.4f}"] for nu, prob in zip(report.nu_grid, report.nu_pmf)]
            print(tabulate(pmf_rows, headers=["nu", "P(nu | y)"], tablefmt="grid", colalign=("right", "right")))
    if verbose:
        if initial_centre is not None:
            print(f"Initialization centre (mean CML xi): {Fore.CYAN}{_vector(initial_centre)}{Style.RESET_ALL}")
        print_diagnostics(report)
    if report.wall_time is not None:
        print(f"Wall time: {report.wall_time:.2f}s")


def print_diagnostics(report: FitReport) -> None:
    rows = [
        [
            record.t,
            f"{record.entropy:.4f}",
            f"{record.log_sum_unnorm:.4f}",
            f"{record.ess:.1f}",
            _fmt(record.v_acceptance, ".3f"),
            f"{Fore.RED if record.zero_weight_count else Fore.WHITE}{record.zero_weight_count}{Style.RESET_ALL}",
        ]
        for record in report.diagnostics
    ]
    print(
        tabulate(
            rows,
            headers=["t", "Entropy", "log sum w", "ESS", "v accept", "Zero w"],
            tablefmt="grid",
            colalign=("right", "right", "right", "right", "right", "right"),
        )
    )


def print_model_probabilities(report: CompareReport) -> None:
    """Print the posterior model probabilities with log Bayes factors against the best model."""
    print(f"\n{Fore.WHITE}{Style.BRIGHT}MODEL PROBABILITIES{Style.RESET_ALL}")
    table_data = []
    for row in report.rows:
        if row.failed:
            table_data.append([f"{Fore.RED}{row.model.label}{Style.RESET_ALL}", "", "", "", f"{Fore.RED}FAILED{Style.RESET_ALL}"])
            continue
        color = Fore.GREEN if row.model == report.best_model else Fore.WHITE
        table_data.append(
            [
                f"{color}{row.model.label}{Style.RESET_ALL}",
                f"{row.log_marginal_likelihood:.4f}",
                f"{color}{row.probability:.4e}{Style.RESET_ALL}",
                f"{row.log_bayes_factor:.4f}",
                "",
            ]
        )
    print(
        tabulate(
            table_data,
            headers=[f"{Fore.WHITE}Model", "log p(y|M)", "P(M|y)", "log BF vs best", "Status"],
            tablefmt="grid",
            colalign=("left", "right", "right", "right", "center"),
        )
    )


def print_study_summary(report: StudyReport) -> None:
    """Print how often each candidate was top-ranked, per generating model."""
    print(f"\n{Fore.WHITE}{Style.BRIGHT}STUDY SUMMARY{Style.RESET_ALL} ({report.replications} replications, n={report.n}, N={report.particles}, T={report.iterations})")
    candidates = sorted({name for counts in report.top_counts.values() for name in counts})
    table_data = []
    for true_model, counts in report.top_counts.items():
        cells = []
        for name in candidates:
            count = counts.get(name, 0)
            cells.append(f"{Fore.GREEN}{count}{Style.RESET_ALL}" if name == true_model else str(count))
        table_data.append([f"{Fore.CYAN}{true_model}{Style.RESET_ALL}", *cells])
    print(
        tabulate(
            table_data,
            headers=["True \\ Top", *candidates],
            tablefmt="grid",
            colalign=("left", *(["right"] * len(candidates))),
        )
    )
    failed = sum(1 for row in report.rows if row.error is not None)
    if failed:
        print(f"{Fore.YELLOW}{failed} replication(s) failed; see the report for details{Style.RESET_ALL}")

"""Markdown report of benchmark results."""

from datetime import datetime
from pathlib import Path

from strl.utils.logger import setup_logger

logger = setup_logger(__name__)


def write_report(path, results, date_str=None):
    """
    Write benchmark results as a markdown table.

    Args:
        path: Destination .md file
        results: List of BenchResult
        date_str: Date shown in the header. If None, uses current date.
    """
    if date_str is None:
        date_str = datetime.now().strftime('%Y-%m-%d')

    logger.info("Generating benchmark report...")

    lines = []
    lines.append("# STRL benchmark")
    lines.append(f"*Generated: {date_str}*")
    lines.append("")
    if results:
        lines.extend(_create_results_table(results))
    else:
        lines.append("*No benchmarks were run.*")
    lines.append("")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write('\n'.join(lines))
        logger.info(f"Benchmark report generated: {path}")
    except OSError as e:
        logger.error(f"Error writing benchmark report: {e}")
        raise

    return path


def _create_results_table(results):
    table = []
    table.append("| Measurement | Value | Unit | Target |")
    table.append("|-------------|-------|------|--------|")
    for result in results:
        value = f"{int(result.value):,}" if result.unit == "params" else f"{result.value:.2f}"
        table.append(f"| {result.name} | {value} | {result.unit} | {result.target or '-'} |")
    return table

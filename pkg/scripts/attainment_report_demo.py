"""Render an attainment report from example metric figures.

Demonstrates the comparison arithmetic on a five-dataset example: per-metric
agent/RAG means, attainment percentages, the column averages, and multi-run
aggregation shown both as the per-run values and as mean with sample sigma.

    python3 scripts/attainment_report_demo.py
"""

from docqa.harness import render_report_markdown
from docqa.metrics import aggregate_runs, build_attainment_report, round_half_up

EXAMPLE_PAIRS = [
    (
        "essays",
        {
            "faithfulness": (0.8662, 0.9056),
            "context_recall": (0.7527, 0.8583),
            "answer_correctness": (0.5808, 0.7268),
        },
    ),
    (
        "model-paper",
        {
            "faithfulness": (0.7252, 0.8199),
            "context_recall": (0.6148, 0.8713),
            "answer_correctness": (0.5823, 0.6661),
        },
    ),
    (
        "network-history",
        {
            "faithfulness": (0.7280, 0.7657),
            "context_recall": (0.6968, 0.8330),
            "answer_correctness": (0.6406, 0.7073),
        },
    ),
    (
        "ledger-docs",
        {
            "faithfulness": (0.8122, 0.8627),
            "context_recall": (0.7422, 0.7450),
            "answer_correctness": (0.5870, 0.5872),
        },
    ),
    (
        "survey",
        {
            "faithfulness": (0.8061, 0.8121),
            "context_recall": (0.6355, 0.6438),
            "answer_correctness": (0.5123, 0.5148),
        },
    ),
]

# Percent-scale correctness from three agent runs against a fixed baseline.
AGENT_RUN_CORRECTNESS = [31.2, 32.5, 27.5]
BASELINE_CORRECTNESS = 24.24


def main() -> int:
    report = build_attainment_report(EXAMPLE_PAIRS)
    print(render_report_markdown(report))

    stats = aggregate_runs(AGENT_RUN_CORRECTNESS)
    print(f"agent runs: {AGENT_RUN_CORRECTNESS}")
    print(
        f"agent mean correctness: {round_half_up(stats.mean):.2f} "
        f"(sigma = {round_half_up(stats.stddev):.2f})"
    )
    delta = round_half_up(stats.mean - BASELINE_CORRECTNESS)
    print(f"baseline correctness:   {BASELINE_CORRECTNESS:.2f}")
    print(f"improvement:            {delta:+.2f} points")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

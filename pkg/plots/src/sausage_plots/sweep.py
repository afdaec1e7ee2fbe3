"""Growth-rate-vs-r figure from a sweep CSV.

The CSV contract is the sweep output of sausage-lab: columns
r, gamma_hat, std_error, n_realizations, T, dt, m, J, eps, seed. This layer
draws exactly what it is given; every numerical reference value arrives as
an argument, none is computed here.
"""

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_COLUMNS = (
    "r", "gamma_hat", "std_error", "n_realizations",
    "T", "dt", "m", "J", "eps", "seed",
)


class SchemaError(ValueError):
    """The CSV does not conform to the sweep schema."""


@dataclass(frozen=True)
class SweepTable:
    """Sweep rows, sorted by r ascending. All r values are positive."""

    r: np.ndarray
    gamma_hat: np.ndarray
    std_error: np.ndarray

    def __post_init__(self):
        if self.r.size and (not np.all(self.r > 0) or not np.all(np.isfinite(self.r))):
            raise SchemaError("r values must be positive and finite")


def read_sweep_csv(csv_path) -> SweepTable:
    """Parse a sweep CSV, validating the schema and sorting rows by r."""
    path = Path(csv_path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise SchemaError("missing column: r (file has no header row)")
        for col in SCHEMA_COLUMNS:
            if col not in header:
                raise SchemaError(f"missing column: {col}")
        rows = list(reader)
    if not rows:
        raise SchemaError("no data rows")
    try:
        r = np.array([float(row["r"]) for row in rows])
        gamma = np.array([float(row["gamma_hat"]) for row in rows])
        se = np.array([float(row["std_error"]) for row in rows])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric cell: {exc}") from exc
    order = np.argsort(r)
    return SweepTable(r=r[order], gamma_hat=gamma[order], std_error=se[order])


def prepare_arrays(table: SweepTable) -> dict:
    """The exact arrays the figure plots; separated out for golden testing."""
    return {
        "r": table.r.copy(),
        "gamma_hat": table.gamma_hat.copy(),
        "yerr": table.std_error.copy(),
    }


def render_sweep(
    csv_path,
    out_image_path,
    eps: float,
    alpha: float | None,
    capp_value: float,
    small_r_value: float,
) -> Path:
    """Render the sweep figure: gamma_hat vs r on a log-r axis.

    Horizontal reference lines are drawn at small_r_value and capp_value;
    both are inputs, as is eps (annotation only). alpha, when given, is
    added to the capacity-line label.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    table = read_sweep_csv(csv_path)
    data = prepare_arrays(table)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(
        data["r"], data["gamma_hat"], yerr=data["yerr"],
        fmt="o", capsize=3, color="tab:blue", label="estimate (1 s.e.)",
    )
    ax.axhline(
        small_r_value, color="tab:gray", linestyle="--",
        label=f"small-r reference = {small_r_value:g}",
    )
    cap_label = f"capacity reference = {capp_value:g}"
    if alpha is not None:
        cap_label += f" (alpha = {alpha:g})"
    ax.axhline(capp_value, color="tab:red", linestyle=":", label=cap_label)
    ax.set_xscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("growth rate")
    ax.set_title(f"Sausage growth rate vs drift scale (eps = {eps:g})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    out = Path(out_image_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot_sweep",
        description="Render a growth-rate-vs-r figure from a sweep CSV.",
    )
    parser.add_argument("csv", help="sweep CSV file")
    parser.add_argument("out", help="output image path (extension picks the format)")
    parser.add_argument("--eps", type=float, required=True, help="noise strength label")
    parser.add_argument(
        "--cap", type=float, required=True,
        help="capacity reference line value",
    )
    parser.add_argument(
        "--small-r-ref", type=float, required=True,
        help="small-r reference line value",
    )
    parser.add_argument(
        "--alpha", type=float, default=None,
        help="effective diffusivity, annotation only",
    )
    args = parser.parse_args(argv)
    try:
        out = render_sweep(
            args.csv, args.out, args.eps, args.alpha, args.cap, args.small_r_ref
        )
    except SchemaError as exc:
        print(f"plot_sweep: schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"plot_sweep: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

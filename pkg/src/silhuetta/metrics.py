"""Volume accuracy metrics: signed relative percent error and the
precision figure, plus the CSV comparison report.

precision = |RE| / real_volume * 100. The denominator is the real
volume: that is the reading under which every entry of the bundled
comparison table and both method averages reproduce to +/-0.01, and
the report footnotes it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal


@dataclass(frozen=True)
class VolumeRecord:
    experiment: str
    method: str
    experimental_volume: float  # X0, cm^3
    real_volume: float  # X, cm^3
    real_uncertainty: float = 0.5  # graduated-cylinder accuracy, cm^3

    def __post_init__(self):
        if self.experimental_volume <= 0 or self.real_volume <= 0:
            raise ValueError("volumes must be positive")


def relative_error(real: float, experimental: float) -> float:
    """Signed relative percent error RE = (X - X0) / X0 * 100."""
    if experimental == 0:
        raise ZeroDivisionError("experimental volume X0 is zero")
    if experimental < 0:
        raise ValueError(f"experimental volume must be positive, got {experimental}")
    return (real - experimental) / experimental * 100.0


def precision_metric(real: float, experimental: float) -> float:
    """Relative uncertainty of a measurement: |RE| / X * 100 (percent)."""
    if real <= 0:
        raise ValueError(f"real volume must be positive, got {real}")
    return abs(relative_error(real, experimental)) / real * 100.0


def _round2(x: float) -> str:
    return str(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def report(records) -> str:
    """CSV comparison table with per-method average rows appended.

    Columns: experiment,method,exp_volume_cm3,real_volume_cm3,RE_pct,
    precision_pct; averages are taken over unrounded values and emitted
    as AVERAGE rows. Values round half-up to 2 decimals.
    """
    out = io.StringIO()
    out.write("experiment,method,exp_volume_cm3,real_volume_cm3,RE_pct,precision_pct\n")
    records = list(records)
    by_method: dict[str, list] = {}
    for rec in records:
        re_pct = relative_error(rec.real_volume, rec.experimental_volume)
        prec = precision_metric(rec.real_volume, rec.experimental_volume)
        out.write(
            f"{rec.experiment},{rec.method},{rec.experimental_volume:g},"
            f"{rec.real_volume:g},{_round2(re_pct)},{_round2(prec)}\n"
        )
        by_method.setdefault(rec.method, []).append((re_pct, prec))
    for method, vals in by_method.items():
        avg_re = sum(v[0] for v in vals) / len(vals)
        avg_prec = sum(v[1] for v in vals) / len(vals)
        out.write(f"AVERAGE,{method},,,{_round2(avg_re)},{_round2(avg_prec)}\n")
    if records:
        out.write("# precision = |RE| / real_volume * 100 (table-consistent denominator)\n")
    return out.getvalue()


def load_records_csv(path) -> list:
    """Read VolumeRecords from a CSV with columns
    experiment,method,exp_volume_cm3,real_volume_cm3[,...]."""
    import csv

    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if not row.get("experiment") or row["experiment"].startswith("#"):
                continue
            records.append(
                VolumeRecord(
                    experiment=row["experiment"],
                    method=row["method"],
                    experimental_volume=float(row["exp_volume_cm3"]),
                    real_volume=float(row["real_volume_cm3"]),
                )
            )
    return records

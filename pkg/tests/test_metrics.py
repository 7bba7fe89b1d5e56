import pytest

from silhuetta.metrics import (VolumeRecord, load_records_csv, precision_metric,
                               relative_error, report)

# the eight bundled (experimental, real) volume pairs and their
# uncertainty column, reproduced by |RE| / real * 100
TABLE_ROWS = [
    ("1", "existing", 290.7, 240.0, 7.27),
    ("1", "proposed", 258.9, 240.0, 3.04),
    ("2", "existing", 712.8, 565.0, 3.67),
    ("2", "proposed", 559.2, 565.0, 0.18),
    ("3", "existing", 1214.8, 720.0, 5.66),
    ("3", "proposed", 694.1, 720.0, 0.52),
    ("4", "existing", 237.4, 220.0, 3.33),
    ("4", "proposed", 211.5, 220.0, 1.83),
]


class TestRelativeError:
    def test_identity_is_zero(self):
        assert relative_error(240.0, 240.0) == 0.0

    def test_experiment2_value(self):
        assert relative_error(565.0, 559.2) == pytest.approx(1.0372, abs=1e-4)

    def test_experiment1_value_is_signed(self):
        assert relative_error(240.0, 258.9) == pytest.approx(-7.3001, abs=1e-4)

    def test_zero_experimental_rejected(self):
        with pytest.raises(ZeroDivisionError):
            relative_error(100.0, 0.0)

    def test_scale_invariance(self):
        for lam in (0.5, 2.0, 13.7):
            assert relative_error(720.0 * lam, 694.1 * lam) == pytest.approx(
                relative_error(720.0, 694.1), rel=1e-12)


class TestPrecision:
    @pytest.mark.parametrize("exp,method,x0,x,expected", TABLE_ROWS)
    def test_reproduces_all_reference_entries(self, exp, method, x0, x, expected):
        assert precision_metric(x, x0) == pytest.approx(expected, abs=0.01)

    def test_scaling_both_volumes_divides_precision(self):
        base = precision_metric(240.0, 258.9)
        assert precision_metric(480.0, 517.8) == pytest.approx(base / 2.0, rel=1e-12)

    def test_positive_even_for_negative_re(self):
        assert precision_metric(240.0, 258.9) > 0


class TestReport:
    def _records(self):
        return [VolumeRecord(experiment=e, method=m, experimental_volume=x0, real_volume=x)
                for e, m, x0, x, _ in TABLE_ROWS]

    def test_method_averages(self):
        text = report(self._records())
        rows = [ln for ln in text.splitlines() if ln.startswith("AVERAGE")]
        avg = {ln.split(",")[1]: ln.split(",")[5] for ln in rows}
        assert avg["proposed"] == "1.39"
        assert avg["existing"] == "4.98"

    def test_per_row_values_round_half_up(self):
        text = report(self._records())
        lines = text.splitlines()
        for e, m, x0, x, expected in TABLE_ROWS:
            row = next(ln for ln in lines if ln.startswith(f"{e},{m},"))
            assert float(row.split(",")[5]) == pytest.approx(expected, abs=0.005)

    def test_empty_records_gives_header_only(self):
        text = report([])
        assert text.splitlines() == [
            "experiment,method,exp_volume_cm3,real_volume_cm3,RE_pct,precision_pct"
        ]

    def test_footnote_mentions_denominator(self):
        assert "real_volume" in report(self._records()).splitlines()[-1]

    def test_bundled_table_csv(self):
        from silhuetta import data_path

        records = load_records_csv(data_path("table1.csv"))
        assert len(records) == 8
        text = report(records)
        assert "AVERAGE,proposed,,,0.37,1.39" in text
        assert "AVERAGE,existing,,,-21.56,4.98" in text


def test_record_validation():
    with pytest.raises(ValueError):
        VolumeRecord(experiment="x", method="m", experimental_volume=-1.0, real_volume=2.0)

import json
from pathlib import Path

import numpy as np
import pytest

from mmep_figures.cli import main
from mmep_figures.plot import (DISPLAY_NAMES, FigureSpec, FigureSpecError,
                               build_figure, extract_series, load_rows,
                               render)

HERE = Path(__file__).parent
CSV = HERE / "data" / "desk_sweeps.csv"
GOLDEN = json.loads((HERE / "data" / "golden_series.json").read_text())
SPEC_DIR = HERE.parent / "specs"

SPEC_FILES = {
    "M:delta_h_db": "delta_vs_M.json",
    "M:ser": "ser_vs_M.json",
    "a:delta_h_db": "delta_vs_a.json",
    "a:ser": "ser_vs_a.json",
    "T_d:delta_h_db": "delta_vs_Td.json",
    "T_d:ser": "ser_vs_Td.json",
    "f_d:delta_h_db": "delta_vs_fd.json",
    "f_d:ser": "ser_vs_fd.json",
}


class TestFigureSpec:
    def test_log_scale_reserved_for_ser(self):
        with pytest.raises(FigureSpecError):
            FigureSpec(x_field="M", y_field="delta_h_db",
                       algorithms=("ep",), y_scale="log")

    def test_unknown_y_field(self):
        with pytest.raises(FigureSpecError):
            FigureSpec(x_field="M", y_field="evm", algorithms=("ep",))

    def test_loads_all_shipped_specs(self):
        for name in SPEC_FILES.values():
            spec = FigureSpec.from_json(SPEC_DIR / name)
            assert spec.algorithms


class TestGoldenSeries:
    @pytest.mark.parametrize("key", sorted(SPEC_FILES))
    def test_rendered_series_match_golden(self, key, tmp_path):
        spec = FigureSpec.from_json(SPEC_DIR / SPEC_FILES[key])
        out = tmp_path / "fig.png"
        series = render(CSV, spec, out)
        assert out.exists() and out.stat().st_size > 0
        golden = GOLDEN[key]
        assert set(series) == set(golden)
        for alg, (x, y) in series.items():
            np.testing.assert_allclose(x, golden[alg]["x"], rtol=0, atol=0)
            np.testing.assert_allclose(y, golden[alg]["y"], rtol=0, atol=0)

    @pytest.mark.parametrize("key", sorted(SPEC_FILES))
    def test_drawn_lines_carry_the_series(self, key):
        spec = FigureSpec.from_json(SPEC_DIR / SPEC_FILES[key])
        fig, series = build_figure(CSV, spec)
        try:
            ax = fig.axes[0]
            assert ax.get_yscale() == ("log" if spec.y_field == "ser"
                                       else "linear")
            labels = [t.get_text() for t in ax.get_legend().get_texts()]
            expected = [DISPLAY_NAMES[a] for a in spec.algorithms
                        if a in series]
            assert labels == expected
            for line, alg in zip(ax.get_lines(), expected):
                src = next(a for a in spec.algorithms
                           if DISPLAY_NAMES[a] == alg)
                np.testing.assert_allclose(line.get_xdata(), series[src][0])
                np.testing.assert_allclose(line.get_ydata(), series[src][1])
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)

    def test_rendering_is_deterministic(self, tmp_path):
        spec = FigureSpec.from_json(SPEC_DIR / "ser_vs_M.json")
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render(CSV, spec, a)
        render(CSV, spec, b)
        assert a.read_bytes() == b.read_bytes()


class TestCsvHandling:
    def test_missing_columns_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sweep_name,algorithm\nM,ep\n")
        with pytest.raises(FigureSpecError):
            load_rows(bad)

    def test_missing_sweep_rejected(self):
        spec = FigureSpec(x_field="T_p", y_field="ser", algorithms=("ep",))
        rows = load_rows(CSV)
        with pytest.raises(FigureSpecError):
            extract_series(rows, spec)


class TestCli:
    def test_renders_all_four_sweeps(self, tmp_path):
        for key in ("delta_vs_M", "ser_vs_M", "delta_vs_a", "ser_vs_Td",
                    "delta_vs_fd"):
            out = tmp_path / f"{key}.png"
            code = main(["--csv", str(CSV),
                         "--spec", str(SPEC_DIR / f"{key}.json"),
                         "--out", str(out)])
            assert code == 0
            assert out.exists() and out.stat().st_size > 0

    def test_bad_csv_exits_nonzero(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n1\n")
        code = main(["--csv", str(bad),
                     "--spec", str(SPEC_DIR / "ser_vs_M.json"),
                     "--out", str(tmp_path / "x.png")])
        assert code == 1

    def test_bad_spec_exits_nonzero(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"x_field": "M", "y_field": "delta_h_db",
                                    "algorithms": ["ep"], "y_scale": "log"}))
        code = main(["--csv", str(CSV), "--spec", str(spec),
                     "--out", str(tmp_path / "x.png")])
        assert code == 1

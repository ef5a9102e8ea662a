import subprocess
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from plot_sweep import CSV_HEADER, FigureSpec, SchemaError, read_rows, render

SCRIPT = Path(__file__).resolve().parents[1] / "plot_sweep.py"


def golden_csv(tmp_path) -> Path:
    """An 18-row sweep: K in {10, 20, 50} x R in {1, 2, 4, 5, 10, 20}."""
    lines = [CSV_HEADER]
    for K in (10, 20, 50):
        for i, R in enumerate((1, 2, 4, 5, 10, 20)):
            gen = -0.55 + 0.02 * i + 0.001 * K
            lines.append(
                f"{K},{R},100,24,0.5,0.5,1.01,false,42,"
                f"{gen:.6f},0.08,{0.73 - 0.01 * i:.6f},{0.2 + 0.005 * i:.6f},{0.07 + 0.01 * i:.6f}"
            )
    path = tmp_path / "golden.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("y", ["gen_mean", "bound_t5", "emp_mean", "pop_mean"])
def test_four_figure_families_render(tmp_path, y):
    csv = golden_csv(tmp_path)
    out = tmp_path / f"{y}.png"
    lines = render(FigureSpec(csv=str(csv), y=y, group_by="K", out=str(out)))
    assert lines == 3  # one line per K value
    assert out.stat().st_size > 0


def test_group_by_n_single_line(tmp_path):
    csv = golden_csv(tmp_path)
    out = tmp_path / "by_n.png"
    assert render(FigureSpec(csv=str(csv), y="pop_mean", group_by="n", out=str(out))) == 1


def test_single_row_plot(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text(
        CSV_HEADER + "\n10,5,100,20,0.5,0.5,1.0,false,1,0.01,0.002,0.02,0.03,0.07\n"
    )
    out = tmp_path / "one.png"
    assert render(FigureSpec(csv=str(path), y="gen_mean", group_by="K", out=str(out))) == 1


def test_rendering_is_idempotent_and_leaves_csv_alone(tmp_path):
    csv = golden_csv(tmp_path)
    before = csv.read_bytes()
    out1 = tmp_path / "a.png"
    out2 = tmp_path / "b.png"
    render(FigureSpec(csv=str(csv), y="gen_mean", group_by="K", out=str(out1)))
    render(FigureSpec(csv=str(csv), y="gen_mean", group_by="K", out=str(out2)))
    assert out1.read_bytes() == out2.read_bytes()
    assert csv.read_bytes() == before


def test_column_typo_raises_schema_error(tmp_path):
    csv = golden_csv(tmp_path)
    with pytest.raises(SchemaError, match="gen_meen"):
        FigureSpec(csv=str(csv), y="gen_meen", group_by="K", out="x.png")


def test_bad_header_raises_schema_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("K,R\n1,2\n")
    with pytest.raises(SchemaError):
        read_rows(str(path))


def test_cli_renders_and_reports(tmp_path):
    csv = golden_csv(tmp_path)
    out = tmp_path / "cli.png"
    proc = subprocess.run(
        [sys.executable, str(SCRIPT), "--csv", str(csv), "--y", "bound_t5",
         "--group-by", "K", "--out", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == f"lines=3 out={out}"
    assert out.exists()


def test_cli_bad_column_exits_one(tmp_path):
    csv = golden_csv(tmp_path)
    proc = subprocess.run(
        [sys.executable, str(SCRIPT), "--csv", str(csv), "--y", "nope",
         "--group-by", "K", "--out", str(tmp_path / "x.png")],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 2  # argparse rejects non-choice values

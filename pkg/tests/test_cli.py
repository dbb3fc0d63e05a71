import io
import json
import subprocess
import sys

import pytest

from dxtext.cli import build_parser, main
from dxtext.vocab import synthetic_vocabulary, write_glove_text, save_binary


def run(argv, stdin_text=""):
    stdin = io.TextIOWrapper(io.BytesIO(stdin_text.encode("utf-8")), encoding="utf-8")
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdin=stdin, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def vocab_file(tmp_path_factory):
    v = synthetic_vocabulary(300, 10, seed=1)
    path = tmp_path_factory.mktemp("v") / "vocab.txt"
    write_glove_text(v, path)
    return path


def test_sanitize_text_file(vocab_file, tmp_path):
    report = tmp_path / "r.jsonl"
    code, out, err = run(
        ["sanitize", "--vocab", str(vocab_file), "--epsilon", "10", "--seed", "7", "--report", str(report)],
        "Hello w1, w2 and w3.\n",
    )
    assert code == 0
    assert out.endswith(".\n") and "," in out
    assert len(out.split()) == 5
    assert "composed guarantee 30.0" in err
    rows = [json.loads(l) for l in report.read_text().splitlines()]
    assert [r["original"] for r in rows] == ["Hello", "w1", ",", "w2", "and", "w3", "."]
    assert rows[2]["punctuation"] is True
    again = run(["sanitize", "--vocab", str(vocab_file), "--epsilon", "10", "--seed", "7"], "Hello w1, w2 and w3.\n")
    assert again[1] == out


def test_sanitize_binary_vocab_and_input_file(tmp_path):
    v = synthetic_vocabulary(50, 4)
    save_binary(v, tmp_path / "v.bin")
    (tmp_path / "in.txt").write_text("w1 w2\n", encoding="utf-8")
    code, out, _ = run(["sanitize", "--vocab", str(tmp_path / "v.bin"), "--epsilon", "1e6",
                        "--input", str(tmp_path / "in.txt")])
    assert code == 0 and out == "w1 w2\n"


def test_sanitize_fixed_and_empty():
    code, out, _ = run(["sanitize", "--synthetic", "100x5", "--epsilon", "3", "--variant", "laplace-dx-fixed",
                        "--c", "0.04"], "w1 w2 w3")
    assert code == 0 and len(out.split()) == 3
    code, out, _ = run(["sanitize", "--synthetic", "100x5", "--epsilon", "3"], "")
    assert code == 0 and out == ""


def test_sanitize_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("a 1 2\nb 1\n")
    code, _, err = run(["sanitize", "--vocab", str(bad), "--epsilon", "1"], "a")
    assert code == 2 and "line 2" in err and err.count("\n") == 1
    code, _, err = run(["sanitize", "--vocab", str(tmp_path / "missing"), "--epsilon", "1"], "a")
    assert code == 2
    code, _, err = run(["sanitize", "--synthetic", "10x2", "--epsilon", "1", "--variant", "laplace-dx-fixed"])
    assert code == 1 and err.count("\n") == 1
    code, _, _ = run(["sanitize", "--synthetic", "10x2", "--epsilon", "-1"])
    assert code == 1
    code, _, _ = run(["sanitize", "--synthetic", "10x2", "--vocab", "x", "--epsilon", "1"])
    assert code == 1
    code, _, _ = run(["sanitize", "--epsilon", "1"])
    assert code == 1


def test_unknown_flag_fails():
    code, _, err = run(["dist", "moment", "--j", "2", "--n", "3", "--bogus"])
    assert code == 1 and "unrecognized" in err and err.count("\n") == 1
    code, _, _ = run(["dist", "moment", "--j", "2", "--n", "3", "--ep", "1"])
    assert code == 1


def test_dist_moment():
    code, out, _ = run(["dist", "moment", "--j", "2", "--n", "300"])
    assert code == 0
    assert out.splitlines() == ["j,n,moment", "2,300," + repr(1 / 300)]


def test_dist_cdf_monte_carlo_and_quadrature():
    code, out, _ = run(["dist", "cdf", "--z", "4.8", "--n", "100", "--epsilon", "10", "--trials", "100000"])
    assert code == 0
    header, row = out.splitlines()
    assert header == "z,n,epsilon,method,cdf,trials,standard_error"
    fields = row.split(",")
    assert float(fields[4]) >= 0.995 and fields[5] == "100000"
    code, out, _ = run(["dist", "cdf", "--z", "0,1", "--n", "10", "--epsilon", "1", "--method", "quadrature"])
    rows = out.splitlines()[1:]
    assert rows[0].split(",")[4] == "0.5"
    assert abs(float(rows[1].split(",")[4]) - 0.6267) < 1e-3


def test_dist_pdf():
    code, out, _ = run(["dist", "pdf", "--kind", "angular", "--x=-0.5,0.5", "--n", "3"])
    assert code == 0
    assert [float(r.split(",")[-1]) for r in out.splitlines()[1:]] == pytest.approx([0.5, 0.5])
    code, out, _ = run(["dist", "pdf", "--kind", "radius", "--x", "1", "--n", "2", "--epsilon", "1"])
    assert float(out.splitlines()[1].split(",")[-1]) == pytest.approx(0.36787944117144233)
    code, out, _ = run(["dist", "pdf", "--x", "1", "--n", "10"])
    assert float(out.splitlines()[1].split(",")[-1]) == pytest.approx(0.121584, abs=1e-5)


def test_dist_bound():
    code, _, err = run(["dist", "bound", "--kind", "gamma-upper", "--c", "1", "--n", "5"])
    assert code == 1 and "c must exceed 1" in err
    code, _, err = run(["dist", "bound", "--kind", "gamma-upper", "--c", "2"])
    assert code == 1 and "--n" in err
    code, out, _ = run(["dist", "bound", "--kind", "z-concentration", "--c1", "3.4613", "--c2", "1.3872", "--n", "100"])
    assert code == 0 and abs(float(out.splitlines()[1].split(",")[-1]) - 0.99) < 1e-3
    code, out, _ = run(["dist", "bound", "--kind", "chebyshev", "--m", "10", "--delta", "1", "--n", "100",
                        "--epsilon", "10"])
    assert float(out.splitlines()[1].split(",")[-1]) == pytest.approx(0.101)
    for kind, extra in [("gamma-lower", ["--c", "2", "--n", "5"]), ("angular", ["--c", "2"])]:
        code, out, _ = run(["dist", "bound", "--kind", kind] + extra)
        assert code == 0 and 0 < float(out.splitlines()[1].split(",")[-1]) <= 1


def test_experiment_outputs(tmp_path):
    code, out, _ = run(["experiment", "proportions", "--synthetic", "500x20", "--samples", "50",
                        "--grid", "1,10", "--close-k", "10"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "epsilon,original,close,distant,trials"
    for line in lines[1:]:
        _, o, c, d, _ = line.split(",")
        assert abs(float(o) + float(c) + float(d) - 1) < 1e-12
    code, out, _ = run(["experiment", "proportions-1d", "--grid", "0.001,10", "--trials", "1000", "--format", "json"])
    assert code == 0 and len(json.loads(out)["rows"]) == 2
    code, _, _ = run(["experiment", "table2", "--synthetic", "300x10", "--samples", "20", "--far-rank", "11",
                      "--output", str(tmp_path / "t.csv")])
    assert code == 0 and (tmp_path / "t.csv").read_text().startswith("z_w_x1,")
    code, out, _ = run(["experiment", "curves", "--synthetic", "300x10", "--samples", "20", "--far-rank", "11",
                        "--grid", "1,5", "--trials", "1000"])
    assert code == 0 and len(out.splitlines()) == 3


def test_experiment_errors():
    code, _, err = run(["experiment", "table2", "--samples", "5"])
    assert code == 1
    code, _, err = run(["experiment", "table2", "--synthetic", "50x4", "--samples", "5"])
    assert code == 1 and "rank 101" in err
    code, _, _ = run(["experiment", "proportions", "--synthetic", "50x4", "--grid", "0,1"])
    assert code == 1
    code, _, _ = run(["experiment", "proportions", "--synthetic", "50x4", "--variant", "laplace-dx-fixed"])
    assert code == 1


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--vocab", "--synthetic", "--vocab-seed", "--grid", "--variant", "--c", "--samples", "--close-k",
                 "--trials-per-word", "--far-rank", "--trials", "--a", "--close-radius", "--seed", "--output",
                 "--format"):
        assert flag in text
    parser = build_parser()
    assert "sanitize" in parser.format_help() and "experiment" in parser.format_help()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dxtext", "dist", "moment", "--j", "4", "--n", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "4,3,0.2"
    proc = subprocess.run([sys.executable, "-m", "dxtext", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stderr.count("\n") == 1

import pytest

from termhide.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_answer(capsys):
    code, out, _ = run(capsys, "run", "@bt", "-q", "insert(5,empty,T)")
    assert code == 0 and out == "T = tree(empty,5,empty)\n"


def test_run_multiple_answers_and_false(tmp_path, capsys):
    f = tmp_path / "m.mpl"
    f.write_text(":- module(m, [p/1]).\np(1).\np(2).\n")
    code, out, _ = run(capsys, "run", str(f), "-q", "p(X)")
    assert code == 0 and out == "X = 1\n;\nX = 2\n"
    code, out, _ = run(capsys, "run", str(f), "-q", "p(3)")
    assert code == 0 and out == "false.\n"


def test_run_violation(capsys):
    code, out, _ = run(capsys, "run", "@bt", "-q", "insert(foo,empty,T)")
    assert code == 1
    assert out.splitlines()[0] == "violation: bt:insert/3#0 (calls)"
    code, _, _ = run(capsys, "run", "@bt", "-q", "insert(foo,empty,T)", "--mode", "unsafe")
    assert code == 0


def test_run_forgery_from_user(capsys):
    code, out, _ = run(capsys, "run", "@bt", "--module", "user", "--mode", "client-safe", "-q", "insert(3,tree(empty,1,empty),T)")
    assert code == 1 and "bt:insert/3#0" in out


def test_run_runtime_error(capsys):
    code, out, _ = run(capsys, "run", "@bt", "-q", "X < 1")
    assert code == 4 and out.startswith("error:")


def test_trace_file(tmp_path, capsys):
    path = tmp_path / "t.txt"
    code, _, _ = run(capsys, "run", "@bt", "-q", "insert(5,empty,T)", "--trace", str(path))
    lines = path.read_text().splitlines()
    assert code == 0
    assert lines[0] == "init\tcall bt:insert(5,bt:empty,_A)@bt\t1"
    assert lines[1].startswith("resolve\tretchk") and "['bt:insert/3#1']" in lines[1]


def test_discharge(tmp_path, capsys):
    d = tmp_path / "d.txt"
    d.write_text("bt:insert/3#0\nbt:insert/3#1\n")
    code, _, _ = run(capsys, "run", "@bt", "-q", "insert(foo,empty,T)", "--mode", "safe-ct-rt", "--discharge", str(d))
    assert code == 0
    code, _, _ = run(capsys, "run", "@bt", "-q", "insert(1,empty,T)", "--discharge", str(d))
    assert code == 3


def test_explain(capsys):
    code, out, _ = run(capsys, "explain", "escape", "bt", "@bt_min")
    assert code == 0 and out.startswith("esc_bt(bt:empty).")
    code, out, _ = run(capsys, "explain", "conditions", "heap")
    assert code == 0 and "heap:heap_insert/3#0.calls" in out
    code, _, _ = run(capsys, "explain", "shallow", "nosuch", "@bt")
    assert code == 3


def test_check_and_version(capsys):
    code, out, _ = run(capsys, "check", "@bt", "@avl", "@heap")
    assert code == 0 and out.splitlines()[2].startswith("heap: 4 exported, 3 hidden")
    code, out, _ = run(capsys, "version")
    assert code == 0 and out.startswith("termhide ")


@pytest.mark.parametrize(
    "argv,code",
    [
        (["run", "/no/such/file.mpl", "-q", "p"], 2),
        (["run", "@nosuch", "-q", "p"], 2),
        (["frobnicate"], 3),
        (["run", "@bt"], 3),
        (["run", "@bt", "-q", "p", "--max-answers", "0"], 3),
        (["bench", "--reps", "2"], 3),
        (["bench", "--sizes", "64,32"], 3),
        (["bench", "--sizes", "x"], 3),
    ],
)
def test_exit_codes(capsys, argv, code):
    try:
        got = main(argv)
    except SystemExit as exc:
        got = exc.code
    assert got == code


def test_load_error_message(tmp_path, capsys):
    f = tmp_path / "bad.mpl"
    f.write_text(":- module(m, [box/1]).\n:- hide(box/1).\nbox(a).\n")
    code, _, err = run(capsys, "check", str(f))
    assert code == 2 and "hidden-functor-leak" in err


def test_bench_stdout(capsys, monkeypatch):
    from termhide import bench

    monkeypatch.setattr(bench, "MIN_BATCH_NS", 100_000)
    code, out, _ = run(capsys, "bench", "--library", "heap", "--op", "const", "--mode", "unsafe", "--shallow", "no", "--sizes", "4,8", "--reps", "3")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "library,op,mode,shallow,n,ns_per_op,checks" and len(lines) == 3

import json

import pytest

from bwdam.cli import main


def run(args):
    return main(args)


class TestSampleAndCheck:
    def test_sample_check_pipeline(self, tmp_path, capsys):
        bank_path = tmp_path / "bank.json"
        code = run(
            ["--seed", "7", "--out", str(bank_path), "sample", "commuting",
             "--dim", "6", "--n", "20", "--lambda-min", "1", "--lambda-max", "1.1",
             "--beta", "1000"]
        )
        assert code == 0
        code = run(["check", "--bank", str(bank_path)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["lambda_min_observed"] >= 1.0
        assert report["lambda_max_observed"] <= 1.1
        assert report["commuting_ok"] is True

    def test_sample_noncommuting(self, tmp_path):
        bank_path = tmp_path / "bank.json"
        code = run(
            ["--seed", "3", "--out", str(bank_path), "sample", "noncommuting",
             "--dim", "4", "--n", "5", "--radius", "2.83"]
        )
        assert code == 0
        doc = json.loads(bank_path.read_text())
        assert doc["basis"] is None
        assert "cov" in doc["patterns"][0]

    def test_check_noncommuting_bank_exits_two(self, tmp_path):
        bank_path = tmp_path / "bank.json"
        run(["--seed", "3", "--out", str(bank_path), "sample", "noncommuting",
             "--dim", "4", "--n", "5", "--radius", "2.83"])
        assert run(["check", "--bank", str(bank_path)]) == 2


class TestBounds:
    def test_capacity_example(self, capsys):
        code = run(["bounds", "capacity", "--dim", "100", "--p", "0.02",
                    "--gamma", "1"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n"] == 51
        assert payload["beta_min"] == pytest.approx(3.0)

    def test_gamma_too_large_exit_code(self, capsys):
        code = run(["bounds", "capacity", "--dim", "100", "--p", "0.02",
                    "--gamma", "1.7"])
        assert code == 2

    def test_one_step(self, capsys):
        code = run(["bounds", "one-step", "--beta", "1", "--n", "1000"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["bound"] == pytest.approx(0.0948683298050514)

    def test_csv_format(self, capsys):
        code = run(["--format", "csv", "bounds", "one-step", "--beta", "9",
                    "--n", "1"])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "key,value"
        assert out[1].startswith("bound,1")


class TestPerturbRetrieve:
    def test_single_pattern_trace(self, tmp_path):
        bank_path = tmp_path / "bank.json"
        run(["--seed", "1", "--out", str(bank_path), "sample", "commuting",
             "--dim", "3", "--n", "1", "--lambda-min", "1", "--lambda-max", "1.1"])
        q_path = tmp_path / "q.json"
        code = run(["--seed", "2", "--out", str(q_path), "perturb",
                    "--bank", str(bank_path), "--radius", "0"])
        assert code == 0
        trace_path = tmp_path / "trace.csv"
        code = run(["--out", str(trace_path), "retrieve", "--bank", str(bank_path),
                    "--queries", str(q_path)])
        assert code == 0
        lines = trace_path.read_text().splitlines()
        assert lines[0] == "query,iteration,step_w2,w2_to_target,nearest_pattern_id"
        assert len(lines) == 2  # header + a single converged iterate

    def test_perturbed_queries_converge_home(self, tmp_path):
        bank_path = tmp_path / "bank.json"
        run(["--seed", "5", "--out", str(bank_path), "sample", "commuting",
             "--dim", "8", "--n", "30", "--lambda-min", "1", "--lambda-max", "1.1",
             "--beta", "50"])
        q_path = tmp_path / "q.json"
        run(["--seed", "6", "--out", str(q_path), "perturb", "--bank",
             str(bank_path), "--multiplier", "1", "--fraction", "0.5"])
        trace_path = tmp_path / "trace.csv"
        code = run(["--out", str(trace_path), "retrieve", "--bank", str(bank_path),
                    "--queries", str(q_path)])
        assert code == 0
        rows = trace_path.read_text().splitlines()[1:]
        finals = {}
        for row in rows:
            q, it, _, tgt, nearest = row.split(",")
            finals[int(q)] = (float(tgt), int(nearest))
        q_doc = json.loads(q_path.read_text())
        for qi, (tgt, nearest) in finals.items():
            assert tgt <= 1e-6
            assert nearest == q_doc["queries"][qi]["original_index"]


class TestExperimentsCli:
    def test_convergence_determinism_across_threads(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["convergence", "--dim", "8", "--n", "40", "--betas", "1",
                "--multipliers", "1", "--fraction", "0.5", "--iters", "3"]
        assert run(["--seed", "3", "--threads", "1", "--out", str(a)] + args) == 0
        assert run(["--seed", "3", "--threads", "8", "--out", str(b)] + args) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.csv.manifest.json").read_bytes() == (
            tmp_path / "b.csv.manifest.json"
        ).read_bytes()

    def test_energy_grid_smoke(self, tmp_path):
        bank_path = tmp_path / "bank1d.json"
        run(["--seed", "4", "--out", str(bank_path), "sample", "commuting",
             "--dim", "1", "--n", "5", "--lambda-min", "0.04",
             "--lambda-max", "1.0", "--radius", "1.0", "--beta", "10"])
        out = tmp_path / "grid.csv"
        code = run(["--out", str(out), "energy-grid", "--bank", str(bank_path),
                    "--grid", "10x10"])
        assert code == 0
        assert out.read_text().splitlines()[0] == "mu,sigma,energy"
        assert (tmp_path / "grid.csv.patterns.csv").exists()

    def test_beta_sweep_from_vocab(self, tmp_path):
        vocab_path = tmp_path / "vocab.txt"
        run(["--seed", "9", "--out", str(vocab_path), "embed", "generate",
             "--n", "60", "--dim", "8"])
        out = tmp_path / "sweep.csv"
        code = run(["--seed", "9", "--out", str(out), "beta-sweep", "--vocab",
                    str(vocab_path), "--betas", "0.01,500", "--fraction", "0.5"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "beta,success_rate"
        rates = {float(l.split(",")[0]): float(l.split(",")[1]) for l in lines[1:]}
        assert rates[500.0] == 1.0

    def test_embed_import_summary(self, tmp_path, capsys):
        vocab_path = tmp_path / "vocab.txt"
        run(["--seed", "12", "--out", str(vocab_path), "embed", "generate",
             "--n", "7", "--dim", "3"])
        code = run(["embed", "import", "--path", str(vocab_path)])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary == {"n": 7, "dim": 3, "spherical": True}

    def test_embed_retrieve(self, tmp_path):
        vocab_path = tmp_path / "vocab.txt"
        run(["--seed", "10", "--out", str(vocab_path), "embed", "generate",
             "--n", "40", "--dim", "6"])
        out = tmp_path / "words.csv"
        code = run(["--seed", "11", "--out", str(out), "embed", "retrieve",
                    "--vocab", str(vocab_path), "--word-ids", "1,5",
                    "--beta", "200", "--iters", "3"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "word,iteration,w2_to_original,retrieved_word"
        assert len(lines) == 1 + 2 * 4


class TestExitCodes:
    def test_usage_error(self, capsys):
        assert run(["sample"]) == 1

    def test_unknown_flag(self, capsys):
        assert run(["--bogus", "check", "--bank", "x"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_file_is_io_error(self):
        assert run(["check", "--bank", "/nonexistent/bank.json"]) == 3

    def test_malformed_bank_is_io_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert run(["check", "--bank", str(path)]) == 3

    def test_numeric_error_exit(self, capsys):
        assert run(["bounds", "iters", "--eps", "0.001", "--beta", "1",
                    "--n", "10", "--m-w", "2"]) == 2


class TestByteDeterminism:
    def test_repeat_runs_identical(self, tmp_path):
        args_a = ["--seed", "21", "--out", str(tmp_path / "x.json"), "sample",
                  "commuting", "--dim", "5", "--n", "8", "--lambda-min", "1",
                  "--lambda-max", "1.2"]
        args_b = ["--seed", "21", "--out", str(tmp_path / "y.json"), "sample",
                  "commuting", "--dim", "5", "--n", "8", "--lambda-min", "1",
                  "--lambda-max", "1.2"]
        assert run(args_a) == 0
        assert run(args_b) == 0
        assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()

"""Command-line interface tests: subcommands, file outputs, exit codes,
and determinism under a fixed seed."""

import json

import numpy as np
import pytest

from streamkey.bitvec import BitString
from streamkey.cli import EXIT_ABORT, EXIT_INVALID, EXIT_OK, main
from streamkey.hashing import load_matrix
from streamkey.privacy_amp import load_key, load_pad


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


SESSION_CONFIG = {
    "n_target": 1024,
    "sample_fraction": 0.2,
    "eps_pe": 0.01,
    "eps_ec": 2.0 ** -12,
    "predicted_eb": 0.02,
    "predicted_ep": 0.02,
    "channel": {"flip_prob_z": 0.02, "flip_prob_x": 0.02, "loss_prob": 0.1},
}


@pytest.fixture
def session_config(tmp_path):
    path = tmp_path / "session.json"
    path.write_text(json.dumps(SESSION_CONFIG))
    return path


class TestRates:
    def test_noiseless(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "rates", "--eb", "0", "--ep", "0")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["shor_preskill_rate"] == 1.0
        assert doc["seed_bits"] == 0
        assert doc["rng_seed"] == 20220919

    def test_near_threshold(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "rates",
                               "--eb", "0.11", "--ep", "0.11")
        doc = json.loads(out)
        assert doc["shor_preskill_rate"] == pytest.approx(1.7e-4, rel=0.02)

    def test_gllp_profile(self, capsys, tmp_path):
        profile = {"e_b": 0.02, "tags": [{"q": 0.9, "e_p": 0.02},
                                         {"q": 0.1, "e_p": 0.5}]}
        path = tmp_path / "profile.json"
        path.write_text(json.dumps(profile))
        code, out, _ = run_cli(capsys, "--json", "rates", "--eb", "0.02",
                               "--ep", "0.02", "--gllp", str(path))
        assert code == EXIT_OK
        doc = json.loads(out)
        from streamkey.rates import GllpTagProfile, gllp_rate

        expected = gllp_rate(0.02, GllpTagProfile([(0.9, 0.02), (0.1, 0.5)]))
        assert doc["gllp_rate"] == pytest.approx(expected, rel=1e-12)

    def test_invalid_input_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "rates", "--eb", "1.5", "--ep", "0")
        assert code == EXIT_INVALID
        assert "error" in err


class TestBounds:
    def test_values(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "bounds", "--n", "20",
                               "--r", "0.1", "--c", "2")
        doc = json.loads(out)
        assert doc["tight_log2"] == pytest.approx(14.4386, abs=1e-3)
        assert doc["general_log2"] >= doc["tight_log2"]
        assert doc["exact_log2"] <= doc["tight_log2"]

    def test_tight_rejection_reported(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "bounds", "--n", "10",
                               "--r", "0.4", "--c", "1")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["tight_log2"] is None
        assert "1/3" in doc["tight_rejected"]

    def test_high_rate_uses_high_weight_set(self, capsys):
        # for r > 1/2 the bounded set is the heavy-weight tail; by bit-flip
        # symmetry its count equals the light tail at 1 - r
        code, hi_out, _ = run_cli(capsys, "--json", "bounds", "--n", "12",
                                  "--r", "0.75", "--c", "1")
        _, lo_out, _ = run_cli(capsys, "--json", "bounds", "--n", "12",
                               "--r", "0.25", "--c", "1")
        hi_doc, lo_doc = json.loads(hi_out), json.loads(lo_out)
        assert code == EXIT_OK
        assert hi_doc["exact_log2"] == pytest.approx(lo_doc["exact_log2"], abs=1e-12)
        assert hi_doc["exact_log2"] < hi_doc["general_log2"]


class TestMatrixAndPad:
    def test_matrix_gen_round_trip(self, capsys, tmp_path):
        out_path = tmp_path / "m.txt"
        code, out, _ = run_cli(capsys, "--json", "matrix", "gen", "--rows", "6",
                               "--cols", "10", "--out", str(out_path))
        assert code == EXIT_OK
        t = load_matrix(out_path)
        assert (t.rows, t.cols) == (6, 10)
        assert json.loads(out)["matrix_id"] == t.matrix_id

    def test_pad_gen(self, capsys, tmp_path):
        pad_path = tmp_path / "pad.txt"
        m_path = tmp_path / "m.txt"
        code, out, _ = run_cli(capsys, "--json", "pad", "gen", "--cols", "64",
                               "--rows", "10", "--out", str(pad_path),
                               "--save-matrix", str(m_path))
        assert code == EXIT_OK
        pad = load_pad(pad_path)
        assert len(pad) == 64 and pad.seed_len == 10
        assert load_matrix(m_path).matrix_id == pad.matrix_id

    def test_pad_gen_requires_shape(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "pad", "gen", "--cols", "64",
                               "--out", str(tmp_path / "p.txt"))
        assert code == EXIT_INVALID


class TestExtract:
    def test_full_entropy_identity(self, capsys, tmp_path):
        raw = BitString.random(256, np.random.default_rng(0))
        raw_path = tmp_path / "raw.hex"
        raw_path.write_text(raw.to_hex() + "\n")
        out_path = tmp_path / "out.hex"
        code, _, _ = run_cli(capsys, "extract", "--input", str(raw_path),
                             "--hmin", "256", "--out", str(out_path))
        assert code == EXIT_OK
        assert BitString.from_hex(out_path.read_text()) == raw

    def test_partial_entropy(self, capsys, tmp_path):
        raw = BitString.random(256, np.random.default_rng(1))
        raw_path = tmp_path / "raw.hex"
        raw_path.write_text(raw.to_hex() + "\n")
        out_path = tmp_path / "out.hex"
        code, out, _ = run_cli(capsys, "--json", "extract", "--input",
                               str(raw_path), "--hmin", "192.5",
                               "--out", str(out_path))
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["seed_bits"] == 256 - 193
        got = BitString.from_hex(out_path.read_text())
        assert len(got) == 256 and got != raw


class TestSession:
    def test_happy_path(self, capsys, session_config, tmp_path):
        outdir = tmp_path / "run"
        code, out, _ = run_cli(capsys, "--json", "session", "--config",
                               str(session_config), "--out", str(outdir))
        assert code == EXIT_OK
        report = json.loads((outdir / "report.json").read_text())
        assert not report["aborted"] and report["verified"]
        alice, sidecar = load_key(outdir / "alice.key")
        bob, _ = load_key(outdir / "bob.key")
        assert alice == bob
        assert len(alice) == report["final_len"]
        assert sidecar["ledger_state"]
        ident = (report["final_len"] + report["seed_consumed"]
                 + report["disclosed_bits"] + report["sampled_bits"])
        assert ident == report["n_sifted"]

    def test_ordering_flag_byte_identical(self, capsys, session_config, tmp_path):
        for mode, sub in (("ir-first", "a"), ("pa-first", "b")):
            code, _, _ = run_cli(capsys, "--rng-seed", "77", "session",
                                 "--config", str(session_config),
                                 "--out", str(tmp_path / sub),
                                 "--ordering", mode)
            assert code == EXIT_OK
        a = (tmp_path / "a" / "alice.key").read_bytes()
        b = (tmp_path / "b" / "alice.key").read_bytes()
        assert a == b

    def test_budget_exhaustion_exit(self, capsys, session_config, tmp_path):
        code, out, _ = run_cli(capsys, "session", "--config", str(session_config),
                               "--out", str(tmp_path / "run"),
                               "--pa-budget", str(2.0 ** -40), "--pre-spend", "1")
        assert code == EXIT_ABORT
        assert json.loads(out.splitlines()[-1]) == {
            "aborted": True, "reason": "budget-exhausted"}

    def test_block_mode_flag(self, capsys, tmp_path):
        config = dict(SESSION_CONFIG, n_target=2048)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        outdir = tmp_path / "run"
        code, _, _ = run_cli(capsys, "session", "--config", str(path),
                             "--out", str(outdir), "--pa-mode", "block")
        assert code == EXIT_OK
        report = json.loads((outdir / "report.json").read_text())
        assert report["pa_mode"] == "block" and not report["aborted"]
        alice, _ = load_key(outdir / "alice.key")
        bob, _ = load_key(outdir / "bob.key")
        assert alice == bob

    def test_bad_config_exit(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"n_target\": -1}")
        code, _, err = run_cli(capsys, "session", "--config", str(bad),
                               "--out", str(tmp_path / "x"))
        assert code == EXIT_INVALID

    def test_missing_config_exit(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "session", "--config",
                             str(tmp_path / "none.json"), "--out",
                             str(tmp_path / "x"))
        assert code == EXIT_INVALID


class TestRelayCommand:
    def test_chain_report(self, capsys, tmp_path):
        scenario = {
            "nodes": ["alice", "r1", "bob"],
            "hops": [{"n_target": 1024, "flip_prob": 0.02, "eps_pe": 0.01},
                     {"n_target": 1024, "flip_prob": 0.02, "eps_pe": 0.01}],
            "compromised": [],
        }
        path = tmp_path / "chain.json"
        path.write_text(json.dumps(scenario))
        report_path = tmp_path / "report.json"
        code, out, _ = run_cli(capsys, "--json", "relay", "--scenario",
                               str(path), "--out", str(report_path))
        assert code == EXIT_OK
        doc = json.loads(report_path.read_text())
        assert doc["telescoping_ok"] and doc["endpoint_keys_equal"]
        assert doc["relays"][0]["pad_bits_known"] == 0


class TestVerifyBounds:
    def test_small_suite_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify-bounds", "--trials", "4000",
                               "--draws", "500")
        assert code == EXIT_OK
        lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
        assert len(lines) == 4
        assert all(l.startswith("PASS") for l in lines)

    def test_forced_failure_flagged(self, capsys):
        code, out, _ = run_cli(capsys, "verify-bounds", "--suite", "decode",
                               "--trials", "4000", "--forced-failure")
        assert code == EXIT_OK
        assert "forced failure" in out


class TestBench:
    def test_small_sizes(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "bench", "--log2-sizes",
                               "12,13,14", "--repeats", "2")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert len(doc["stream"]) == 3
        assert doc["stream_beats_fast_at_largest"]


class TestDeterminism:
    def test_repeat_run_identical(self, capsys):
        _, out1, _ = run_cli(capsys, "--rng-seed", "9", "--json", "matrix",
                             "gen", "--rows", "4", "--cols", "6",
                             "--out", "/dev/null")
        _, out2, _ = run_cli(capsys, "--rng-seed", "9", "--json", "matrix",
                             "gen", "--rows", "4", "--cols", "6",
                             "--out", "/dev/null")
        assert out1 == out2

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("STREAMKEY_SEED", "31337")
        code, out, _ = run_cli(capsys, "--json", "rates", "--eb", "0.1",
                               "--ep", "0.1")
        assert json.loads(out)["rng_seed"] == 31337

    def test_unknown_command_exit(self, capsys):
        assert main(["frobnicate"]) == EXIT_INVALID

"""CLI surface tests: every subcommand, exit codes, determinism."""
import json

import numpy as np
import pytest

from seqembed.autoencoder import init_params, load_checkpoint
from seqembed.cli import main
from seqembed.data import Dataset, SegmentRecord, parse_manifest, write_manifest


def run(capsys, *argv):
    capsys.readouterr()  # drain anything printed by setup calls
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    code = main([
        "synth", "--out-dir", str(out), "--seed", "3",
        "--alphabet", "6", "--words", "5", "--tokens", "4",
        "--phonemes-min", "2", "--phonemes-max", "3",
        "--dim", "5", "--frames-min", "1", "--frames-max", "2",
        "--noise", "0.05",
    ])
    assert code == 0
    return out


def fixture_manifest(tmp_path, vectors, words, split="test"):
    records = [
        SegmentRecord(
            id=f"q{i}",
            word=words[i],
            phonemes=None,
            split=split,
            features=np.asarray([vec], dtype=float),
        )
        for i, vec in enumerate(vectors)
    ]
    return write_manifest(Dataset.from_records(records), tmp_path / "fixture.jsonl")


class TestSynth:
    def test_record_count_and_roundtrip(self, corpus_dir):
        ds = parse_manifest(corpus_dir / "manifest.jsonl")
        assert len(ds.records) == 20  # 5 words x 4 tokens
        assert ds.dim == 5
        assert len(ds.subset("train")) == 10 and len(ds.subset("test")) == 10

    def test_rerun_is_byte_identical(self, tmp_path, corpus_dir):
        other = tmp_path / "again"
        assert main([
            "synth", "--out-dir", str(other), "--seed", "3",
            "--alphabet", "6", "--words", "5", "--tokens", "4",
            "--phonemes-min", "2", "--phonemes-max", "3",
            "--dim", "5", "--frames-min", "1", "--frames-max", "2",
            "--noise", "0.05",
        ]) == 0
        for path in sorted(corpus_dir.rglob("*")):
            if path.is_file():
                twin = other / path.relative_to(corpus_dir)
                assert twin.read_bytes() == path.read_bytes()

    def test_word_and_token_arithmetic(self, tmp_path, capsys):
        out = tmp_path / "big"
        code, stdout, _ = run(
            capsys, "synth", "--out-dir", str(out), "--seed", "1",
            "--words", "6", "--tokens", "3", "--dim", "2",
            "--phonemes-min", "1", "--phonemes-max", "2",
            "--frames-min", "1", "--frames-max", "1",
        )
        assert code == 0 and "wrote 18 records" in stdout


class TestTrain:
    def test_sa_mode_records_zero_denoise(self, corpus_dir, tmp_path, capsys):
        ckpt = tmp_path / "sa.json"
        code, _, _ = run(
            capsys, "train", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--out", str(ckpt), "--mode", "sa", "--seed", "7",
            "--hidden", "4", "--epochs", "2", "--lr", "0.05",
        )
        assert code == 0
        payload = json.loads(ckpt.read_text())
        assert payload["train"]["denoise_p"] == 0.0
        assert payload["epochs"] == 2
        assert (tmp_path / "sa.json.loss.csv").read_text().startswith("epoch,mean_loss\n")

    def test_dsa_mode_records_default_denoise(self, corpus_dir, tmp_path, capsys):
        ckpt = tmp_path / "dsa.json"
        code, _, _ = run(
            capsys, "train", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--out", str(ckpt), "--mode", "dsa", "--seed", "7",
            "--hidden", "4", "--epochs", "1", "--lr", "0.05",
        )
        assert code == 0
        assert json.loads(ckpt.read_text())["train"]["denoise_p"] == 0.3

    def test_zero_epochs_equals_initialization(self, corpus_dir, tmp_path, capsys):
        ckpt = tmp_path / "init.json"
        code, _, _ = run(
            capsys, "train", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--out", str(ckpt), "--seed", "11", "--hidden", "3", "--epochs", "0",
        )
        assert code == 0
        loaded = load_checkpoint(ckpt)
        fresh = init_params(5, 3, seed=11)
        from seqembed.autoencoder import parameter_arrays

        for a, b in zip(parameter_arrays(loaded), parameter_arrays(fresh)):
            assert np.array_equal(a, b)

    def test_divergence_exit_code(self, corpus_dir, tmp_path, capsys):
        with np.errstate(over="ignore", invalid="ignore"):
            code, _, err = run(
                capsys, "train", "--manifest", str(corpus_dir / "manifest.jsonl"),
                "--out", str(tmp_path / "x.json"), "--seed", "0",
                "--hidden", "4", "--epochs", "50", "--lr", "1e12", "--no-clip",
            )
        assert code == 4
        assert "epoch" in err

    def test_missing_manifest_exit_code(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "train", "--manifest", str(tmp_path / "nope.jsonl"),
            "--out", str(tmp_path / "x.json"), "--seed", "0",
        )
        assert code == 3 and "manifest" in err

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--manifest", "m.jsonl"])  # --out and --seed missing
        assert exc.value.code == 2
        capsys.readouterr()


@pytest.fixture
def trained(corpus_dir, tmp_path):
    ckpt = tmp_path / "model.json"
    assert main([
        "train", "--manifest", str(corpus_dir / "manifest.jsonl"),
        "--out", str(ckpt), "--seed", "5", "--hidden", "4",
        "--epochs", "2", "--lr", "0.05",
    ]) == 0
    return ckpt


class TestEncode:
    def test_model_archive_width(self, corpus_dir, trained, tmp_path, capsys):
        out = tmp_path / "arch.csv"
        code, _, _ = run(
            capsys, "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(out),
        )
        assert code == 0
        header = out.read_text().splitlines()[0].split(",")
        assert header == ["id", "word"] + [f"z{i}" for i in range(4)]

    def test_naive_encoder_width_52_on_13dim(self, tmp_path, capsys):
        synth = tmp_path / "wide"
        assert main([
            "synth", "--out-dir", str(synth), "--seed", "2", "--words", "3",
            "--tokens", "2", "--dim", "13", "--phonemes-min", "2",
            "--phonemes-max", "2", "--frames-min", "2", "--frames-max", "3",
        ]) == 0
        out = tmp_path / "ne.csv"
        code, _, _ = run(
            capsys, "encode", "--manifest", str(synth / "manifest.jsonl"),
            "--encoder", "ne", "--m", "4", "--out", str(out), "--split", "all",
        )
        assert code == 0
        header = out.read_text().splitlines()[0].split(",")
        assert len(header) == 2 + 52

    def test_rerun_byte_identical(self, corpus_dir, trained, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            code, _, _ = run(
                capsys, "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
                "--checkpoint", str(trained), "--out", str(out),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_checkpoint_data_mismatch(self, trained, tmp_path, capsys):
        synth = tmp_path / "other"
        assert main([
            "synth", "--out-dir", str(synth), "--seed", "2", "--words", "2",
            "--tokens", "2", "--dim", "3", "--phonemes-min", "1",
            "--phonemes-max", "1", "--frames-min", "1", "--frames-max", "1",
        ]) == 0
        code, _, err = run(
            capsys, "encode", "--manifest", str(synth / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(tmp_path / "x.csv"),
        )
        assert code == 3 and "width" in err


class TestSearch:
    def test_self_exclusion_and_top(self, corpus_dir, trained, tmp_path, capsys):
        arch = tmp_path / "arch.csv"
        assert main([
            "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(arch),
        ]) == 0
        query = parse_manifest(corpus_dir / "manifest.jsonl").subset("test")[0].id
        code, stdout, _ = run(
            capsys, "search", "--archive", str(arch), "--query-id", query, "--top", "5",
        )
        assert code == 0
        lines = stdout.strip().splitlines()
        assert lines[0] == "rank,id,word,score"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 5
        assert all(row[1] != query for row in rows)
        assert [row[0] for row in rows] == ["1", "2", "3", "4", "5"]

    def test_unknown_query_id(self, corpus_dir, trained, tmp_path, capsys):
        arch = tmp_path / "arch.csv"
        assert main([
            "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(arch),
        ]) == 0
        code, _, err = run(capsys, "search", "--archive", str(arch), "--query-id", "ghost")
        assert code == 3 and "ghost" in err

    def test_dtw_search_finds_identical_segment(self, corpus_dir, capsys):
        ds = parse_manifest(corpus_dir / "manifest.jsonl")
        target = ds.subset("test")[2]
        query_file = corpus_dir / "query.csv"
        from seqembed.data import write_feature_csv

        write_feature_csv(query_file, target.features)
        code, stdout, _ = run(
            capsys, "search", "--method", "dtw",
            "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--query-features", str(query_file), "--top", "3",
        )
        assert code == 0
        first = stdout.strip().splitlines()[1].split(",")
        assert first[1] == target.id
        assert float(first[3]) == 0.0


class TestEvaluate:
    def test_hand_fixture_map(self, tmp_path, capsys):
        manifest = fixture_manifest(
            tmp_path,
            [[1.0, 0.0], [0.8, 0.6], [0.6, 0.8], [0.0, 1.0]],
            ["a", "a", "b", "b"],
        )
        code, stdout, _ = run(
            capsys, "evaluate", "--manifest", str(manifest), "--method", "ne1",
            "--report-dir", str(tmp_path / "reports"),
        )
        assert code == 0
        assert "MAP = 0.75" in stdout
        report = (tmp_path / "reports" / "per_query_ne1.csv").read_text().splitlines()
        assert report[0] == "query_id,word,num_relevant,ap"
        assert len(report) == 5

    def test_all_unique_words_exit(self, tmp_path, capsys):
        manifest = fixture_manifest(
            tmp_path, [[1.0, 0.0], [0.0, 1.0]], ["only", "single"]
        )
        code, stdout, _ = run(
            capsys, "evaluate", "--manifest", str(manifest), "--method", "ne1",
            "--report-dir", str(tmp_path / "reports"),
        )
        assert code == 3
        assert "no scorable queries" in stdout

    def test_multi_method_comparison_csv(self, corpus_dir, trained, tmp_path, capsys):
        out = tmp_path / "compare.csv"
        code, _, _ = run(
            capsys, "evaluate", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--method", f"sa={trained}", "--method", "ne1", "--method", "ne2",
            "--method", "dtw",
            "--report-dir", str(tmp_path / "reports"), "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "method,map"
        assert [line.split(",")[0] for line in lines[1:]] == ["sa", "ne1", "ne2", "dtw"]
        for label in ("sa", "ne1", "ne2", "dtw"):
            assert (tmp_path / "reports" / f"per_query_{label}.csv").is_file()

    def test_bad_method_token(self, corpus_dir, capsys):
        with pytest.raises(SystemExit) as exc:
            main([
                "evaluate", "--manifest", str(corpus_dir / "manifest.jsonl"),
                "--method", "bogus",
            ])
        assert exc.value.code == 2
        capsys.readouterr()


class TestAnalyze:
    def test_edit_distance_table(self, corpus_dir, trained, tmp_path, capsys):
        arch = tmp_path / "arch.csv"
        assert main([
            "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(arch),
        ]) == 0
        out = tmp_path / "table.csv"
        code, _, _ = run(
            capsys, "analyze", "edit-distance", "--archive", str(arch),
            "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "edit_distance,pair_count,mean_cosine"
        assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2", "3", "4", "5+"]
        total_pairs = sum(int(line.split(",")[1]) for line in lines[1:])
        assert total_pairs == 10 * 9 // 2

    def test_diff_vectors_same_word_is_zero(self, corpus_dir, trained, tmp_path, capsys):
        arch = tmp_path / "arch.csv"
        assert main([
            "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(arch),
        ]) == 0
        ds = parse_manifest(corpus_dir / "manifest.jsonl")
        word = ds.subset("test")[0].word
        out = tmp_path / "diffs.csv"
        code, _, _ = run(
            capsys, "analyze", "diff-vectors", "--archive", str(arch),
            "--pairs", f"{word}:{word}", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("pair,dx0")
        row = lines[1].split(",")
        assert row[0] == f"{word}:{word}"
        assert all(float(v) == 0.0 for v in row[1:])

    def test_unknown_pair_word(self, corpus_dir, trained, tmp_path, capsys):
        arch = tmp_path / "arch.csv"
        assert main([
            "encode", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--checkpoint", str(trained), "--out", str(arch),
        ]) == 0
        code, _, err = run(
            capsys, "analyze", "diff-vectors", "--archive", str(arch),
            "--pairs", "ghost:w000",
        )
        assert code == 3 and "ghost" in err

import csv

import numpy as np
import pytest

from crip.cli import main
from crip.features import read_feature_matrix
from crip.imaging import resize_bilinear, save_pgm
from crip.synthetic import make_texture_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    make_texture_dataset(root, n_subjects=4, per_class=2, size=48, seed=3)
    return root / "manifest.csv"


@pytest.fixture
def ten_images(tmp_path, rng):
    lines = ["path,subject,label"]
    for i in range(10):
        save_pgm(rng.integers(0, 256, (40, 40)), tmp_path / f"img{i}.pgm")
        lines.append(f"img{i}.pgm,s{i % 3},{'ab'[i % 2]}")
    path = tmp_path / "manifest.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_extract_defaults(ten_images, tmp_path):
    assert main(["extract", "--manifest", str(ten_images), "--out", str(tmp_path / "o")]) == 0
    ids, X, cfg = read_feature_matrix(tmp_path / "o" / "features.csv")
    assert X.shape == (10, 16384)
    assert cfg.descriptor == "crip" and cfg.size == 128 and cfg.block_size == 16
    assert (tmp_path / "o" / "run_config.json").exists()


def test_extract_lbp_differs(ten_images, tmp_path):
    main(["extract", "--manifest", str(ten_images), "--out", str(tmp_path / "c")])
    main(["extract", "--manifest", str(ten_images), "--out", str(tmp_path / "l"), "--descriptor", "lbp"])
    _, c, _ = read_feature_matrix(tmp_path / "c" / "features.csv")
    _, l, _ = read_feature_matrix(tmp_path / "l" / "features.csv")
    assert c.shape == l.shape and not np.array_equal(c, l)


def test_extract_skips_corrupt(ten_images, tmp_path, caplog):
    (ten_images.parent / "img3.pgm").write_bytes(b"not an image")
    code = main(["extract", "--manifest", str(ten_images), "--out", str(tmp_path / "o")])
    assert code != 0
    assert any("img3.pgm" in r.getMessage() for r in caplog.records)
    ids, X, _ = read_feature_matrix(tmp_path / "o" / "features.csv")
    assert X.shape[0] == 9 and "img3.pgm" not in ids


def test_eval_pd_report(dataset, tmp_path):
    out = tmp_path / "e"
    assert main(["eval", "--manifest", str(dataset), "--size", "48", "--protocol", "pd", "--out", str(out)]) == 0
    text = (out / "report.txt").read_text()
    fold_rows = [l for l in text.splitlines() if l.strip()[:1].isdigit() and "." in l]
    assert len(fold_rows) == 5
    assert "mean_accuracy:" in text and "seed: 0" in text
    assert (out / "confusion.csv").exists()


def test_eval_loso_single_subject(tmp_path, rng, capsys):
    for i in range(4):
        save_pgm(rng.integers(0, 256, (20, 20)), tmp_path / f"{i}.pgm")
    (tmp_path / "m.csv").write_text("path,subject,label\n" + "".join(f"{i}.pgm,only,{'ab'[i % 2]}\n" for i in range(4)))
    code = main(["eval", "--manifest", str(tmp_path / "m.csv"), "--protocol", "loso", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "single subject" in capsys.readouterr().err


def test_eval_byte_identical(dataset, tmp_path):
    args = ["eval", "--manifest", str(dataset), "--size", "48", "--protocol", "pd", "--seed", "7",
            "--out", str(tmp_path / "r")]
    main(args)
    first = {p.name: p.read_bytes() for p in (tmp_path / "r").iterdir()}
    main(args)
    second = {p.name: p.read_bytes() for p in (tmp_path / "r").iterdir()}
    assert first == second


def _summary(path):
    with open(path) as fh:
        return [(r["level"], r["descriptor"], float(r["mean_drift"])) for r in csv.DictReader(fh)]


def test_perturb_affine_zero_drift(dataset, tmp_path):
    out = tmp_path / "p"
    code = main(["perturb", "--manifest", str(dataset), "--size", "48", "--perturb", "affine",
                 "--gain", "2", "0.6", "--offset", "-30", "7.25", "--out", str(out)])
    assert code == 0
    assert all(d == 0.0 for _, _, d in _summary(out / "summary.csv"))


def test_perturb_noise_zero_sigma(dataset, tmp_path):
    out = tmp_path / "p"
    assert main(["perturb", "--manifest", str(dataset), "--size", "48", "--perturb", "noise",
                 "--sigma", "0", "--out", str(out)]) == 0
    assert all(d == 0.0 for _, _, d in _summary(out / "summary.csv"))


def test_perturb_invalid_spec(dataset, tmp_path):
    assert main(["perturb", "--manifest", str(dataset), "--perturb", "affine", "--gain", "0",
                 "--out", str(tmp_path / "p")]) == 2
    assert main(["perturb", "--manifest", str(dataset), "--perturb", "noise", "--sigma", "-1",
                 "--out", str(tmp_path / "p")]) == 2


def test_noise_sweep_monotone(tmp_path, rng):
    lines = ["path,subject,label"]
    for i in range(20):
        tex = rng.uniform(0, 255, (12, 12))
        save_pgm(resize_bilinear(tex, 48, 48), tmp_path / f"t{i}.pgm")
        lines.append(f"t{i}.pgm,s{i},x")
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    means = {}
    for seed in range(3):
        out = tmp_path / f"n{seed}"
        main(["perturb", "--manifest", str(tmp_path / "m.csv"), "--size", "48", "--perturb", "noise",
              "--sigma", "5", "10", "20", "--seed", str(seed), "--out", str(out)])
        for level, d, v in _summary(out / "summary.csv"):
            means.setdefault(d, {}).setdefault(level, []).append(v)
    for d, levels in means.items():
        curve = [np.mean(levels[f"sigma={s}"]) for s in (5, 10, 20)]
        assert curve == sorted(curve), (d, curve)


def test_synth_and_codemap(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "s"), "--subjects", "2", "--per-class", "1"]) == 0
    img = next((tmp_path / "s").glob("*.pgm"))
    assert main(["codemap", "--image", str(img), "--out", str(tmp_path / "code.pgm")]) == 0
    assert (tmp_path / "code.pgm").read_bytes().startswith(b"P5")

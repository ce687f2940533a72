"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".  Run alone with

    pytest tests/test_acceptance.py -v
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from crip.cli import main as cli_main
from crip.descriptor import Neighborhood, crip_code, crip_map, crip_map_reference
from crip.evaluation import (ClassifierConfig, accuracy, evaluate_features, make_plan, run_protocol,
                             split_loso, split_person_dependent, split_subject_kfold)
from crip.features import feature_vector
from crip.features import FeatureConfig
from crip.imaging import DatasetManifest, Sample
from crip.svm import train_multiclass
from crip.synthetic import gaussian_blobs, make_texture_dataset


def test_c01_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(1)
    images = np.concatenate([
        rng.integers(0, 256, (50, 64, 64)).astype(np.float64),  # 8-bit content, frequent exact ties
        rng.uniform(0, 255, (50, 64, 64)),
    ])
    t0 = time.perf_counter()
    optimized = np.stack([crip_map(img) for img in images])
    reference = crip_map_reference(images)
    elapsed = time.perf_counter() - t0
    mismatches = int(np.count_nonzero(optimized != reference))
    ok = mismatches == 0 and elapsed < 10.0
    record_criterion(1, "optimized crip_map == per-pixel reference on 100 images", ok,
                     f"{mismatches} mismatching pixels, {elapsed:.2f}s")
    assert mismatches == 0
    assert elapsed < 10.0


def test_c02_affine_invariance(record_criterion):
    rng = np.random.default_rng(2)
    flips = 0
    for _ in range(50):
        img = rng.integers(0, 256, (64, 64)).astype(np.float64)
        base = crip_map(img)
        for _ in range(20):
            gain = 2.0 * (1.0 - rng.random())  # (0, 2]
            offset = rng.uniform(-50, 50)
            flips += int(np.count_nonzero(crip_map(gain * img + offset) != base))
    record_criterion(2, "crip_map(aI+b) == crip_map(I), 50 images x 20 pairs", flips == 0, f"{flips} changed codes")
    assert flips == 0


def test_c03_constant_and_hand_codes(record_criterion):
    constants_ok = all(np.all(crip_map(np.full((32, 32), v)) == 255) for v in (0.0, 7.0, 128.5, -3.3, 1e4))
    up = crip_code(Neighborhood(10.0, (20.0,) * 8, (40.0,) * 16))
    down = crip_code(Neighborhood(10.0, (20.0,) * 8, (0.0,) * 16))
    ok = constants_ok and up == 255 and down == 0
    record_criterion(3, "constant fixpoint and hand-evaluated codes", ok, f"codes {up}, {down}")
    assert constants_ok and up == 255 and down == 0


def test_c04_locality(record_criterion):
    rng = np.random.default_rng(4)
    outside = 0
    for _ in range(50):
        img = rng.uniform(0, 255, (48, 48))
        r, c = rng.integers(0, 48, 2)
        changed = img.copy()
        changed[r, c] = rng.uniform(0, 255)
        diff = np.argwhere(crip_map(changed) != crip_map(img))
        outside += sum(max(abs(i - r), abs(j - c)) > 2 for i, j in diff)
    record_criterion(4, "single-pixel change stays within Chebyshev distance 2", outside == 0,
                     f"{outside} codes changed outside")
    assert outside == 0


def test_c05_featurizer_conservation(record_criterion):
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(50):
        u, v = rng.integers(20, 140, 2)
        codes = rng.integers(0, 256, (u, v)).astype(np.uint8)
        for B in (8, 16, 32):
            fv = feature_vector(codes, B)
            dim = math.ceil(u / B) * math.ceil(v / B) * 256
            failures += int(fv.sum() != u * v or fv.shape != (dim,))
    record_criterion(5, "raw feature vector sums to u*v, dimension ceil(u/B)ceil(v/B)*256", failures == 0,
                     f"{failures} failures over 150 cases")
    assert failures == 0


def test_c06_classifier_sanity(record_criterion):
    counts = {}
    for n in range(2, 8):
        X, labels = gaussian_blobs(4, n, separation=10.0, seed=n)
        counts[n] = len(train_multiclass(X, labels).machines)
    counts_ok = all(counts[n] == n * (n - 1) // 2 for n in counts) and counts[7] == 21

    # centers 8 sigma apart (criterion asks for >= 6 sigma)
    X, labels = gaussian_blobs(200, 3, separation=8.0, sigma=1.0, seed=6)
    model = train_multiclass(X, labels)
    train_acc = accuracy(model.predict(X), labels)
    man = DatasetManifest.from_samples([Sample(str(i), f"p{i}", l) for i, l in enumerate(labels)])
    report = evaluate_features(X, labels, [s.subject_id for s in man.samples], man.classes,
                               make_plan(man, "pd", seed=6))
    ok = counts_ok and train_acc == 100.0 and report.mean_accuracy >= 99.0
    record_criterion(6, "nC2 machines, separable blobs", ok,
                     f"machines {counts}, train {train_acc:.2f}%, PD {report.mean_accuracy:.2f}%")
    assert counts_ok
    assert train_acc == 100.0
    assert report.mean_accuracy >= 99.0


def test_c07_end_to_end(record_criterion, tmp_path):
    t0 = time.perf_counter()
    manifest = make_texture_dataset(tmp_path, n_subjects=12, per_class=4, size=64, seed=7)
    features, clf = FeatureConfig(), ClassifierConfig()
    pd = run_protocol(manifest, features, clf, make_plan(manifest, "pd", seed=7))
    pd_again = run_protocol(manifest, features, clf, make_plan(manifest, "pd", seed=7))
    loso = run_protocol(manifest, features, clf, make_plan(manifest, "loso", seed=7))
    elapsed = time.perf_counter() - t0
    deterministic = pd.to_text() == pd_again.to_text()
    ok = pd.mean_accuracy >= 90 and loso.mean_accuracy >= 80 and deterministic and elapsed < 120
    record_criterion(7, "texture pipeline PD >= 90%, LOSO >= 80%", ok,
                     f"PD {pd.mean_accuracy:.2f}%, LOSO {loso.mean_accuracy:.2f}%, {elapsed:.1f}s")
    assert pd.mean_accuracy >= 90
    assert loso.mean_accuracy >= 80
    assert deterministic
    assert elapsed < 120


def _random_manifest(rng):
    n_classes = int(rng.integers(2, 8))
    n_subjects = int(rng.integers(10, 40))
    samples = []
    for s in range(n_subjects):
        for j in range(int(rng.integers(1, 7))):
            samples.append(Sample(f"{s}_{j}", f"subj{s}", f"c{rng.integers(n_classes)}"))
    return DatasetManifest.from_samples(samples)


def test_c08_protocol_integrity(record_criterion):
    rng = np.random.default_rng(8)
    leaks = bad_pd = bad_partition = 0
    for seed in range(1000):
        m = _random_manifest(rng)
        subj = [s.subject_id for s in m.samples]
        n = len(m.samples)
        for plan in (split_subject_kfold(m, 10), split_loso(m)):
            tested = []
            for train, test in plan.folds:
                leaks += bool({subj[i] for i in train} & {subj[i] for i in test})
                tested += test
            bad_partition += sorted(tested) != list(range(n))
        for train, test in split_person_dependent(m, 0.8, 5, seed).folds:
            bad_pd += (abs(len(test) - 0.2 * n) > 1 or set(train) & set(test)
                       or len(train) + len(test) != n)
    ok = leaks == 0 and bad_pd == 0 and bad_partition == 0
    record_criterion(8, "1000 plans per protocol: no subject leakage, PD 80:20 +-1", ok,
                     f"leaks {leaks}, bad PD folds {bad_pd}, bad partitions {bad_partition}")
    assert leaks == 0 and bad_pd == 0 and bad_partition == 0


def test_c09_cmd_eval_determinism(record_criterion, tmp_path):
    make_texture_dataset(tmp_path / "data", n_subjects=4, per_class=2, size=48, seed=9)
    args = ["eval", "--manifest", str(tmp_path / "data" / "manifest.csv"), "--size", "48",
            "--protocol", "pd", "--seed", "9", "--out", str(tmp_path / "run")]
    runs = []
    for _ in range(2):
        assert cli_main(args) == 0
        runs.append({p.name: p.read_bytes() for p in sorted((tmp_path / "run").iterdir())})
    ok = runs[0] == runs[1] and "report.txt" in runs[0]
    record_criterion(9, "repeated cmd_eval runs are byte-identical", ok, f"files {sorted(runs[0])}")
    assert ok


FER2013 = os.environ.get("CRIP_FER2013", "")


def test_c10_fer2013_conditional(record_criterion):
    if not FER2013 or not Path(FER2013).is_file():
        record_criterion(10, "FER2013 6-class public test (conditional)", True,
                         "set CRIP_FER2013=/path/to/fer2013.csv to run", status="SKIP")
        pytest.skip("FER2013 csv not available")
    from crip.datasets import load_fer2013

    parts = load_fer2013(FER2013, drop_neutral=True)
    cfg = FeatureConfig("crip", 48, 16, True)

    def featurize(images):
        return np.stack([feature_vector(crip_map(img), cfg.block_size, cfg.normalize) for img in images])

    X_train, y_train = parts["Training"]
    model = train_multiclass(featurize(X_train), y_train)
    results = {}
    for split in ("PublicTest", "PrivateTest"):
        X, y = parts[split]
        results[split] = accuracy(model.predict(featurize(X)), y)
    public_ok = abs(results["PublicTest"] - 51.8) <= 5
    band = "within" if public_ok else "outside"
    record_criterion(10, "FER2013 6-class public test (conditional, reported not gated)", True,
                     f"public {results['PublicTest']:.1f}% (reference 51.8, {band} +-5), "
                     f"private {results['PrivateTest']:.1f}% (reference 50.5)", status="INFO")

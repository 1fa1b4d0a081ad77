"""Acceptance gate: one test per primary criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion.
"""

import math
import time

import numpy as np
import pytest

from infolm import (
    MeasureKind,
    MeasureSpec,
    MockModel,
    ScoreMatrix,
    Weighting,
    entropy,
    evaluate_measure,
    fisher_rao,
    infolm_score,
    kendall,
    load_distribution_store,
    pearson,
    score_dataset,
    spearman,
    system_level,
    text_level,
    williams_test,
)
from infolm.cli import main
from infolm.measures import (
    ab_divergence,
    alpha_divergence,
    gamma_divergence,
    kl_divergence,
)
from infolm.scoring import PRESETS, ScoreRequest, dataset_bags

from .conftest import DATA_DIR, make_planted_dataset, write_disjoint_store
from .oracles import (
    kendall_oracle,
    pearson_oracle,
    spearman_oracle,
    t_sf_oracle,
)


def _passed(name):
    print(f"[ACCEPTANCE] {name}: PASS")


# All measure parameterizations named in the paper presets, plus the
# parameter-free measures.
AXIOM_SPECS = [
    MeasureSpec(kind=MeasureKind.ALPHA_DIVERGENCE, alpha=0.75),
    MeasureSpec(kind=MeasureKind.ALPHA_DIVERGENCE, alpha=3.0),
    MeasureSpec(kind=MeasureKind.GAMMA_DIVERGENCE, beta=0.5),
    MeasureSpec(kind=MeasureKind.GAMMA_DIVERGENCE, beta=3.0),
    MeasureSpec(kind=MeasureKind.AB_DIVERGENCE, alpha=0.5, beta=0.25),
    MeasureSpec(kind=MeasureKind.AB_DIVERGENCE, alpha=3.0, beta=0.25),
    MeasureSpec(kind=MeasureKind.L1),
    MeasureSpec(kind=MeasureKind.L2),
    MeasureSpec(kind=MeasureKind.LINF),
    MeasureSpec(kind=MeasureKind.FISHER_RAO),
    MeasureSpec(kind=MeasureKind.KL),
    MeasureSpec(kind=MeasureKind.JEFFREYS_KL),
]


def test_measure_axioms_identity_and_nonnegativity():
    """D(p,p) <= 1e-10 and D(p,q) >= -1e-12 over >= 1000 random pairs."""
    started = time.monotonic()
    rng = np.random.default_rng(20240)
    pairs = []
    for _ in range(1000):
        dim = int(rng.integers(2, 65))
        pairs.append((rng.dirichlet(np.ones(dim)), rng.dirichlet(np.ones(dim))))
    for p, q in pairs:
        for spec in AXIOM_SPECS:
            assert abs(evaluate_measure(spec, p, p)) <= 1e-10, spec.label()
            assert evaluate_measure(spec, p, q) >= -1e-12, spec.label()
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"axioms took {elapsed:.1f}s, budget is 10s"
    _passed(f"measure-axioms (1000 pairs x {len(AXIOM_SPECS)} measures, "
            f"{elapsed:.1f}s)")


def test_limit_and_reduction_suite():
    rng = np.random.default_rng(20241)
    for _ in range(50):
        dim = int(rng.integers(2, 17))
        # bounded away from zero so the alpha -> 1 expansion is well-behaved
        p = 0.9 * rng.dirichlet(np.ones(dim)) + 0.1 / dim
        q = 0.9 * rng.dirichlet(np.ones(dim)) + 0.1 / dim
        p, q = p / p.sum(), q / q.sum()
        target = kl_divergence(p, q)
        for delta in (1e-6, -1e-6):
            assert abs(alpha_divergence(p, q, 1.0 + delta) - target) <= 1e-4
        bhattacharyya = float(np.sum(np.sqrt(p * q)))
        assert abs(
            alpha_divergence(p, q, 0.5) - 4.0 * (1.0 - bhattacharyya)
        ) <= 1e-12
        for beta in (0.25, 0.5, 3.0):
            assert abs(
                ab_divergence(p, q, 1.0, beta) - gamma_divergence(p, q, beta)
            ) <= 1e-12
    assert abs(fisher_rao([1.0, 0.0], [0.0, 1.0]) - 1.0) <= 1e-12
    _passed("limit-reduction (alpha->1 KL, Hellinger, AB->gamma, Fisher-Rao)")


def test_correlation_oracles():
    rng = np.random.default_rng(20242)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 51))
        if rng.random() < 0.5:  # force ties roughly half the time
            a = rng.integers(0, max(2, n // 2), size=n).astype(float)
            b = rng.integers(0, max(2, n // 2), size=n).astype(float)
        else:
            a = rng.normal(size=n)
            b = rng.normal(size=n)
        if np.all(a == a[0]) or np.all(b == b[0]):
            continue
        assert abs(pearson(a, b) - pearson_oracle(a, b)) <= 1e-12
        assert abs(spearman(a, b) - spearman_oracle(a, b)) <= 1e-12
        assert abs(kendall(a, b) - kendall_oracle(a, b)) <= 1e-12
        checked += 1
    _passed("correlation-oracles (200 vectors, ties included, 1e-12)")


def test_correlation_level_composition():
    rng = np.random.default_rng(20243)
    for _ in range(25):
        scores_values = rng.normal(size=(5, 4))
        human_values = rng.normal(size=(5, 4))
        ids = dict(
            text_ids=tuple(f"t{i}" for i in range(5)),
            system_ids=tuple(f"s{j}" for j in range(4)),
        )
        scores = ScoreMatrix(values=scores_values, **ids)
        human = ScoreMatrix(values=human_values, **ids)
        for kind, oracle in (
            ("pearson", pearson_oracle),
            ("spearman", spearman_oracle),
            ("kendall", kendall_oracle),
        ):
            text_expected = np.mean(
                [oracle(scores_values[i], human_values[i]) for i in range(5)]
            )
            assert abs(
                text_level(scores, human, kind).value - text_expected
            ) <= 1e-12
            system_expected = oracle(
                scores_values.mean(axis=0), human_values.mean(axis=0)
            )
            assert abs(
                system_level(scores, human, kind).value - system_expected
            ) <= 1e-12
    _passed("eq1-eq2-composition (text/system level vs oracle, 1e-12)")


def test_williams_acceptance():
    tie = williams_test(0.6, 0.6, 0.3, 12)
    assert tie.t_statistic == 0.0 and tie.p_value == 0.5

    forward = williams_test(0.9, 0.8, 0.7, 30)
    backward = williams_test(0.8, 0.9, 0.7, 30)
    assert abs(forward.p_value - (1.0 - backward.p_value)) <= 1e-12

    previous = 1.0
    for r1 in np.linspace(0.15, 0.85, 15):
        p = williams_test(float(r1), 0.1, 0.5, 25).p_value
        assert p < previous
        previous = p

    # worked example against an independent closed-form + quadrature oracle
    r1, r2, r12, n = 0.9, 0.8, 0.7, 30
    k = 1 - r1**2 - r2**2 - r12**2 + 2 * r1 * r2 * r12
    t_expected = (r1 - r2) * math.sqrt((n - 1) * (1 + r12)) / math.sqrt(
        2 * k * (n - 1) / (n - 3) + ((r1 + r2) ** 2 / 4) * (1 - r12) ** 3
    )
    result = williams_test(r1, r2, r12, n)
    assert abs(result.t_statistic - t_expected) <= 1e-6
    assert abs(result.p_value - t_sf_oracle(t_expected, n - 3)) <= 1e-6
    _passed("williams-test (tie, antisymmetry, monotonicity, worked example)")


def test_end_to_end_golden(tmp_path):
    golden = (DATA_DIR / "golden_scores.csv").read_bytes()
    flags = [
        "--dataset", str(DATA_DIR / "golden_dataset.jsonl"),
        "--backend", "mock", "--seed", "42", "--vocab-size", "16",
        "--smoothing", "0.1", "--measure", "jeffreys-kl",
        "--weighting", "uniform",
    ]
    for run, workers in (("run1", 1), ("run2", 1), ("run4", 4)):
        out = tmp_path / run
        assert main(["score", "--out", str(out), "--workers", str(workers)]
                    + flags) == 0
        assert (out / "scores.csv").read_bytes() == golden, run

    # perfect-match invariant, every measure
    model = MockModel(seed=42, vocab_size=16, smoothing=0.1)
    text = model.tokenize("x", "the cat sat on the mat")
    for name, p in PRESETS.items():
        request = ScoreRequest(text, text, p.measure, Weighting.UNIFORM)
        assert abs(infolm_score(request, model).divergence_value) <= 1e-10, name

    # no-match invariant on the disjoint-support store fixture
    store = load_distribution_store(write_disjoint_store(tmp_path / "s.jsonl"))
    request = ScoreRequest(
        store.tokenize("d1", ""), store.tokenize("d1@s1", ""),
        MeasureSpec(kind=MeasureKind.FISHER_RAO), Weighting.UNIFORM,
    )
    assert abs(infolm_score(request, store).divergence_value - 1.0) <= 1e-10
    _passed("end-to-end-golden (byte-identical CSV, perfect match, no match)")


def test_planted_quality_fixture():
    started = time.monotonic()
    dataset = make_planted_dataset(n_texts=20, length=20, n_systems=9, seed=7)
    model = MockModel(seed=42, vocab_size=64, smoothing=0.2)
    matrix = score_dataset(
        dataset, MeasureSpec(kind=MeasureKind.FISHER_RAO), model,
        weighting=Weighting.UNIFORM,
    )
    report = system_level(
        matrix, dataset.human_matrix("quality"), "kendall", "quality"
    )
    elapsed = time.monotonic() - started
    assert report.value >= 0.9, report
    assert elapsed < 30.0, f"planted fixture took {elapsed:.1f}s, budget is 30s"
    _passed(f"planted-quality (kendall tau {report.value:.3f} >= 0.9, "
            f"{elapsed:.1f}s)")


def test_temperature_behavior(tmp_path):
    temperatures = [0.5, 1.0, 2.0, 5.0]
    dataset = make_planted_dataset(n_texts=5, length=10, n_systems=3, seed=2)

    previous = -math.inf
    for temperature in temperatures:
        model = MockModel(
            seed=42, vocab_size=32, smoothing=0.2, temperature=temperature
        )
        bags, failures, _ = dataset_bags(dataset, model, Weighting.UNIFORM)
        assert not failures
        mean_entropy = float(np.mean([entropy(bag) for bag in bags.values()]))
        assert mean_entropy > previous, f"entropy not increasing at T={temperature}"
        previous = mean_entropy

    dataset_path = tmp_path / "planted.jsonl"
    dataset.save(dataset_path)
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--kind", "temperature", "--dataset", str(dataset_path),
         "--out", str(out), "--criterion", "quality",
         "--temperatures", ",".join(str(t) for t in temperatures),
         "--coefficients", "pearson",
         "--backend", "mock", "--seed", "42", "--vocab-size", "32",
         "--smoothing", "0.2", "--measure", "fisher-rao",
         "--weighting", "uniform"]
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == len(temperatures)
    for row in rows:
        assert row[4] == ""  # no error
        assert math.isfinite(float(row[3]))
    _passed("temperature-behavior (entropy strictly increasing, sweep rows finite)")

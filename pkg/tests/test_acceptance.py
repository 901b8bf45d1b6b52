"""Exit criteria. Each test records a one-line PASS/FAIL shown at the end of the run."""

import time

import numpy as np
import pytest
from scipy import stats

from emnet.matdist import generate_training_set, norm_likelihood, sample_matrix_with_norm
from emnet.netcore import (
    Architecture,
    TrainBatch,
    forward,
    loss_and_grads,
    mask_apply,
    merge,
    new_model,
    second_order_forward,
    sgd_step,
    tile_mask,
)
from emnet.plots import emit_plots
from emnet.sweep import Cell, SweepConfig, load_results, run_cell, run_sweep
from emnet.trainer import TrainConfig, meta_epoch_schedule

from oracles import (
    brute_norm_counts,
    enumerate_binary_symmetric,
    finite_difference_grads,
    matrix_power_apply,
    straight_line_forward,
)

ARCHS = [(), (1,), (2, 2), (2, 3)]


@pytest.fixture(scope="module")
def sweep_n5(tmp_path_factory):
    """The full (epochs x meta-epochs) grid at n=5 for all three conditions."""
    out = tmp_path_factory.mktemp("sweep_n5")
    run_sweep(SweepConfig(sizes=(5,), seed=7, out_dir=str(out)))
    return out, {(r.condition, r.epochs, r.meta_epochs): r for r in load_results(out)}


@pytest.fixture(scope="module")
def sweep_n10(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep_n10")
    run_sweep(SweepConfig(sizes=(10,), epochs=(1,), meta_epochs=(1, 16), conditions=("shuffled",),
                          seed=7, out_dir=str(out)))
    return out, {(r.condition, r.epochs, r.meta_epochs): r for r in load_results(out)}


def test_1_forward_oracle_equivalence(acceptance):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 9))
        model = new_model(Architecture(n, ARCHS[i % 4]), rng)
        A = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
        x = rng.random(n)
        worst = max(worst, float(np.max(np.abs(forward(model, A, x) - straight_line_forward(model.layers, A, x)))))
    dt = time.perf_counter() - t0
    acceptance("1 forward-oracle equivalence", worst <= 1e-12 and dt < 10,
               f"1000 cases, max |diff| {worst:.2e} (tol 1e-12), {dt:.1f}s (limit 10s)")


def test_2_gradient_correctness(acceptance):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(1, 5))
        model = new_model(Architecture(n, ARCHS[i % 4]), rng)
        A = (rng.random((n, n)) < 0.6).astype(float)
        mask_apply(model, A)
        batch = TrainBatch.from_matrix(A, rng.random((3, n)))
        _, grads = loss_and_grads(model, A, batch)
        fd = finite_difference_grads(model.layers, A, batch.inputs, batch.targets, h=1e-6)
        for g, f in zip(grads, fd):
            worst = max(worst, float(np.linalg.norm(g - f) / max(np.linalg.norm(f), 1e-8)))
    dt = time.perf_counter() - t0
    acceptance("2 gradient correctness", worst < 1e-4 and dt < 30,
               f"100 models, worst per-layer relative error {worst:.2e} (tol 1e-4), {dt:.1f}s (limit 30s)")


def test_3_distribution_exactness(acceptance):
    t0 = time.perf_counter()
    exact = all(norm_likelihood(n, d).counts == brute_norm_counts(n, d) for n in (2, 3, 4) for d in (True, False))
    # 1e5 two-stage draws (norm ~ p(x), then uniform within the norm) must be uniform over all 64 matrices
    lik = norm_likelihood(3, True)
    norms = sorted(lik.counts)
    rng = np.random.default_rng(3)
    drawn = rng.choice(norms, size=100_000, p=[lik.p(x) for x in norms])
    index = {m.astype(float).tobytes(): i for i, m in enumerate(enumerate_binary_symmetric(3))}
    hist = np.zeros(len(index))
    for x in drawn:
        hist[index[sample_matrix_with_norm(3, int(x), True, rng).entries.tobytes()]] += 1
    p_sampler = stats.chisquare(hist).pvalue
    dist = generate_training_set(3, 100_000, True, np.random.default_rng(4))
    observed = [dist.norm_histogram().get(x, 0) for x in norms]
    p_set = stats.chisquare(observed, [lik.p(x) * 100_000 for x in norms]).pvalue
    dt = time.perf_counter() - t0
    acceptance("3 distribution exactness", exact and p_sampler > 1e-3 and p_set > 1e-3 and dt < 60,
               f"enumeration match={exact}, sampler chi2 p={p_sampler:.3f}, training-set chi2 p={p_set:.3f}, "
               f"{dt:.1f}s (limit 60s)")


def test_4_table1_desk_reproduction(acceptance, sweep_n5):
    _, cells = sweep_n5
    shuf, ctrl = cells[("shuffled", 3, 16)], cells[("control", 3, 16)]
    ok = all(r.status == "ok" and r.error < 1e-8 and r.max_deviation < 1e-4 for r in (shuf, ctrl))
    acceptance("4 Table 1 desk reproduction (n=5, (3,16))", ok,
               f"shuffled error {shuf.error:.2e} cert {shuf.max_deviation:.1e}; "
               f"control error {ctrl.error:.2e} cert {ctrl.max_deviation:.1e} (tol error<1e-8, cert<1e-4)")


def test_5_condition_separation(acceptance, sweep_n5):
    _, cells = sweep_n5
    best = {c: min((r for (cond, _, _), r in cells.items() if cond == c), key=lambda r: r.error)
            for c in ("shuffled", "subsampled")}
    ratio = best["subsampled"].error / best["shuffled"].error
    acceptance("5 condition separation (n=5)", ratio >= 1e3,
               f"best subsampled {best['subsampled'].error:.2e} at ({best['subsampled'].epochs},"
               f"{best['subsampled'].meta_epochs}), best shuffled {best['shuffled'].error:.2e} at "
               f"({best['shuffled'].epochs},{best['shuffled'].meta_epochs}); ratio {ratio:.2e} (need >= 1e3)")


def test_6_convergence_onset(acceptance, sweep_n10):
    _, cells = sweep_n10
    early, late = cells[("shuffled", 1, 1)], cells[("shuffled", 1, 16)]
    assert early.seed == late.seed
    ratio = early.error / late.error
    acceptance("6 convergence onset (n=10 shuffled)", ratio >= 1e3,
               f"(1,1) error {early.error:.2e}, (1,16) error {late.error:.2e}, ratio {ratio:.2e} (need >= 1e3)")


def test_7_mask_merge_exactness(acceptance):
    rng = np.random.default_rng(7)
    roundtrip = freeze = True
    for i in range(200):
        n = int(rng.integers(1, 7))
        model = new_model(Architecture(n, ARCHS[i % 4]), rng)
        A = (rng.random((n, n)) < 0.5).astype(float)
        before = model.layers[0].copy()
        merge(model, mask_apply(model, A))
        roundtrip &= np.array_equal(model.layers[0], before)
        masked = tile_mask(A, model.arch) == 0
        snap = mask_apply(model, A)
        for _ in range(int(rng.integers(1, 10))):
            sgd_step(model, A, TrainBatch.from_matrix(A, rng.random((4, n))), 0.1)
            freeze &= bool(np.all(model.layers[0][masked] == 0.0))
        merge(model, snap)
        freeze &= np.array_equal(model.layers[0][masked], before[masked])
    multiset = True
    for seed in range(5):
        dists = list(meta_epoch_schedule(TrainConfig(n=5, meta_epochs=4, condition="shuffled", seed=seed)))
        keys = [sorted(m.entries.astype(np.int8).tobytes() for m in d) for d in dists]
        multiset &= all(k == keys[0] for k in keys)
    acceptance("7 mask/merge exactness", roundtrip and freeze and multiset,
               f"round-trip identity={roundtrip}, masked freeze={freeze}, shuffle multiset={multiset} (exact)")


def test_8_second_order_mechanic(acceptance):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    ok = True
    for _ in range(200):
        n = int(rng.integers(1, 7))
        A = (rng.random((n, n)) < 0.5).astype(float)
        np.fill_diagonal(A, 0.0)
        x = rng.integers(0, 10, size=n).astype(float)
        ones = np.ones((n, n))
        two, one = matrix_power_apply(A, x, 2), matrix_power_apply(A, x, 1)
        ok &= np.array_equal(second_order_forward(ones, ones, A, x, self_loops=False), two)
        ok &= np.array_equal(second_order_forward(ones, ones, A, x, self_loops=True), two + one)
    dt = time.perf_counter() - t0
    acceptance("8 second-order mechanic", bool(ok) and dt < 5,
               f"200 random binary A (n<=6): exact match={bool(ok)}, {dt:.2f}s (limit 5s)")


def test_9_sparsity_sweep_output(acceptance, sweep_n5, sweep_n10, tmp_path):
    results = [r for r in load_results(sweep_n5[0]) if r.condition == "shuffled"]
    results += load_results(sweep_n10[0])
    paths = emit_plots(results, tmp_path)
    names = sorted(p.name for p in paths)
    points = [p.read_text().count('class="point"') for p in paths]
    worst = max(row["mean_error"] for r in results for row in r.sparsity_rows)
    ok = names == ["sparsity_n10_shuffled.svg", "sparsity_n5_shuffled.svg"] and points == [9, 9] and worst < 1e-6
    ok &= all((tmp_path / f"{p.stem}.csv").exists() for p in paths)
    acceptance("9 sparsity sweep output", ok,
               f"charts {names}, points {points}, worst per-level mean error {worst:.2e} (tol 1e-6)")


def test_10_determinism(acceptance, sweep_n5):
    _, cells = sweep_n5
    checked = []
    for key in [("shuffled", 1, 1), ("subsampled", 2, 4), ("control", 3, 16)]:
        r = cells[key]
        rerun = run_cell(Cell(r.n, r.condition, r.epochs, r.meta_epochs, r.replicate, r.seed))
        checked.append(rerun.error == r.error and rerun.max_deviation == r.max_deviation)
    acceptance("10 determinism", all(checked),
               f"3 cells rerun from recorded seeds, bit-exact={checked}")

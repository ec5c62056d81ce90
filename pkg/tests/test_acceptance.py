"""Acceptance gate.

One test per criterion; each prints a single PASS/FAIL line (visible with
pytest -s or on failure) and asserts the criterion at its stated tolerance,
including the runtime budget where one is specified.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

from fdtlab import mnn
from fdtlab import perturbation_lab as plab
from fdtlab import wireless_experiment as wx
from fdtlab.cli import main as cli_main
from fdtlab.seeding import rng_for
from fdtlab.spectral_core import (
    build_cycle_laplacian,
    build_torus_laplacian,
    sym_eig,
    symmetric_operator,
)
from fdtlab.spectrum_partition import partition_spectrum, weyl_law_fit

MASTER_SEED = 20240811


def report(num, name, ok, detail):
    print(f"ACCEPTANCE {num:02d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_01_weyl_inequality():
    start = time.perf_counter()
    worst = 0.0
    failures = 0
    for t in range(500):
        rng = rng_for(MASTER_SEED, f"weyl/{t}")
        n = int(rng.integers(4, 65))
        eps = 2.0 * (1.0 - rng.random())  # in (0, 2]
        g = rng.standard_normal((n, n))
        op = symmetric_operator((g + g.T) / 2.0)
        pert = plab.random_symmetric_perturbation(n, eps, int(rng.integers(0, 2**62)))
        rep = plab.weyl_check(op, pert)
        worst = max(worst, rep.max_shift - rep.norm_a)
        failures += 0 if rep.holds else 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 30.0
    report(1, "Weyl eigenvalue inequality", ok,
           f"500 trials, violations={failures}, worst slack={worst:.3e}, {elapsed:.1f}s (<30s)")


def test_02_davis_kahan():
    start = time.perf_counter()
    failures = 0
    worst_ratio = 0.0
    for t in range(200):
        rng = rng_for(MASTER_SEED, f"dk/{t}")
        n = int(rng.integers(8, 17))
        lam = plab.clustered_spectrum(rng, 1.0, n)
        op = plab.clustered_operator(lam, rng)
        part = partition_spectrum(lam, 1.0)
        clusters = sorted(
            [[i] for i in part.singletons] + [list(g) for g in part.groups],
            key=lambda c: c[0],
        )
        cluster = clusters[int(rng.integers(0, len(clusters)))]
        inside = np.zeros(n, dtype=bool)
        inside[cluster] = True
        gap0 = float(np.min(np.abs(lam[inside][:, None] - lam[~inside][None, :])))
        eps = gap0 / 10.0
        pert = plab.random_symmetric_perturbation(n, eps, int(rng.integers(0, 2**62)))
        rep = plab.davis_kahan_check(op, pert, cluster)
        failures += 0 if rep.holds else 1
        if rep.bound > 0:
            worst_ratio = max(worst_ratio, rep.projector_diff / rep.bound)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 30.0
    report(2, "Davis-Kahan sin-theta bound", ok,
           f"200 trials, violations={failures}, max diff/bound={worst_ratio:.3f}, "
           f"{elapsed:.1f}s (<30s)")


def test_03_filter_stability_domination():
    start = time.perf_counter()
    reports = plab.run_filter_stability_suite(
        trials=200, seed=MASTER_SEED, alpha=0.5, epsilon=0.25, dimension=16
    )
    elapsed = time.perf_counter() - start
    violations = sum(1 for r in reports if not r.holds)
    ratios = [r.empirical_diff / r.theoretical_bound for r in reports if r.theoretical_bound > 0]
    median_ratio = float(np.median(ratios))
    ok = violations == 0 and median_ratio < 0.5 and elapsed < 120.0
    report(3, "filter stability bound domination", ok,
           f"200 trials (n=16, eps=alpha/2), violations={violations}, "
           f"median(empirical/bound)={median_ratio:.2e} (<0.5), {elapsed:.1f}s (<2min)")


def test_04_nn_stability_domination():
    start = time.perf_counter()
    alpha = 0.5
    failures = 0
    count = 0
    for t in range(100):
        rng = rng_for(MASTER_SEED, f"nn-acc/{t}")
        layers = int(rng.choice([1, 2, 3]))
        width = int(rng.choice([1, 2, 4]))
        n = int(rng.integers(8, 17))
        lam = plab.clustered_spectrum(rng, alpha, n)
        op = plab.clustered_operator(lam, rng)
        f = rng.standard_normal(n)
        features = (1,) + (width,) * (layers - 1) + (1,)
        params = mnn.init_mnn_params(features, 4, "relu", seed=int(rng.integers(0, 2**62)))
        params = mnn.scale_to_nonamplifying(
            params, (lam.min() - alpha, lam.max() + alpha), float(rng.uniform(0.5, 0.9))
        )
        pert = plab.PerturbationConfig(
            epsilon=alpha / 2.0, seed=int(rng.integers(0, 2**62))
        )
        rep = plab.run_nn_stability_trial(op, f, params, alpha, pert)
        failures += 0 if rep.holds else 1
        count += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and count == 100 and elapsed < 180.0
    report(4, "network stability bound domination", ok,
           f"100 trials over L in {{1,2,3}}, F in {{1,2,4}}, violations={failures}, "
           f"{elapsed:.1f}s (<3min)")


def test_05_partition_coarsening():
    failures = 0
    for t in range(100):
        rng = rng_for(MASTER_SEED, f"coarsen/{t}")
        n = int(rng.integers(5, 40))
        lam = np.sort(rng.uniform(0.0, 10.0, size=n))
        alphas = np.sort(rng.uniform(0.01, 5.0, size=20))
        prev_clusters, prev_count = None, None
        for alpha in alphas:
            part = partition_spectrum(lam, float(alpha))
            clusters = [[i] for i in part.singletons] + [list(g) for g in part.groups]
            count = part.d_count + part.n_count
            if prev_clusters is not None:
                for c in prev_clusters:
                    if sum(1 for c2 in clusters if set(c) <= set(c2)) != 1:
                        failures += 1
                if count > prev_count:
                    failures += 1
            prev_clusters, prev_count = clusters, count
    ok = failures == 0
    report(5, "partition coarsening monotone in alpha", ok,
           f"100 spectra x 20-point alpha grids, violations={failures}")


def test_06_weyl_law_slopes():
    start = time.perf_counter()
    cycle = sym_eig(build_cycle_laplacian(200)).eigenvalues
    slope1 = weyl_law_fit(cycle, 2, 20)
    torus = sym_eig(build_torus_laplacian(20, 20)).eigenvalues
    slope2 = weyl_law_fit(torus, 4, 40)
    elapsed = time.perf_counter() - start
    ok = abs(slope1 - 2.0) <= 0.1 and abs(slope2 - 1.0) <= 0.15 and elapsed < 10.0
    report(6, "spectral growth slopes", ok,
           f"cycle n=200 slope={slope1:.3f} (2.0+-0.1), torus 20x20 slope={slope2:.3f} "
           f"(1.0+-0.15), {elapsed:.1f}s (<10s)")


def test_07_gradient_correctness():
    worst = 0.0
    for t in range(50):
        rng = rng_for(MASTER_SEED, f"grad/{t}")
        n = int(rng.integers(3, 11))
        layers = int(rng.integers(1, 4))
        width = int(rng.integers(1, 4))
        taps = int(rng.integers(1, 5))
        features = (1,) + (width,) * (layers - 1) + (1,)
        params = mnn.init_mnn_params(features, taps, "tanh", seed=int(rng.integers(0, 2**62)))
        g = rng.standard_normal((n, n))
        eig = sym_eig(symmetric_operator((g + g.T) / 2.0))
        x = rng.standard_normal(n)
        target = rng.standard_normal((n, 1))
        out, state = mnn.forward(params, eig, x, keep_state=True)
        grads = mnn.gradient(params, eig, state, out - target)

        def loss(p):
            o = mnn.forward(p, eig, x)
            return 0.5 * float(np.sum((o - target) ** 2))

        step = 1e-5
        for layer in range(params.num_layers):
            for idx in np.ndindex(*params.coeffs[layer].shape):
                coeffs = [c.copy() for c in params.coeffs]
                coeffs[layer][idx] += step
                hi = loss(replace(params, coeffs=tuple(coeffs)))
                coeffs[layer][idx] -= 2 * step
                lo = loss(replace(params, coeffs=tuple(coeffs)))
                num = (hi - lo) / (2 * step)
                rel = abs(grads[layer][idx] - num) / max(abs(num), 1e-6)
                worst = max(worst, rel)
    ok = worst <= 1e-4
    report(7, "analytic gradients vs central differences", ok,
           f"50 configs (n<=10, L<=3, F<=3, K<=4), worst rel err={worst:.2e} (<=1e-4)")


def test_08_non_amplification():
    from fdtlab.filters import PolyFilter, frequency_response, poly_filter_apply, validate_assumption

    worst = -np.inf
    for t in range(100):
        rng = rng_for(MASTER_SEED, f"nonamp/{t}")
        n = int(rng.integers(3, 17))
        g = rng.standard_normal((n, n))
        eig = sym_eig(symmetric_operator((g + g.T) / 2.0))
        lo, hi = float(eig.eigenvalues.min()), float(eig.eigenvalues.max())
        coeffs = rng.uniform(-1.0, 1.0, size=int(rng.integers(1, 6)))
        filt = PolyFilter(coeffs)
        peak = max(
            float(np.max(np.abs(frequency_response(filt, np.linspace(lo, hi, 2001))))),
            float(np.max(np.abs(frequency_response(filt, eig.eigenvalues)))),
            1e-12,
        )
        filt = PolyFilter(coeffs * (rng.uniform(0.3, 0.99) / peak))
        check = validate_assumption(
            lambda lam: frequency_response(filt, lam), (lo, hi), 2001
        )
        assert check.passes
        f = rng.standard_normal(n)
        excess = float(np.linalg.norm(poly_filter_apply(filt, eig, f)) - np.linalg.norm(f))
        worst = max(worst, excess)
    ok = worst <= 1e-10
    report(8, "validated filters never amplify", ok,
           f"100 filters, worst ||out||-||f||={worst:.3e} (<=1e-10)")


def test_09_wireless_experiment():
    start = time.perf_counter()
    seed = 2  # frozen reference seed
    scenario = wx.generate_scenario(15, seed=seed)
    train_cfg = wx.TrainingConfig(iterations=500, seed=seed)
    eval_cfg = wx.EvaluationConfig(seed=seed)
    rep = wx.run_experiment(
        scenario, [1, 2, 3], [4], train_cfg, eval_cfg,
        taps=4, activation="tanh", output_mode="relaxed",
    )
    elapsed = time.perf_counter() - start

    hist = rep.histories[(2, 4)]
    improvement = hist.final_objective / hist.initial_objective
    part_a = hist.initial_objective > 0 and improvement >= 1.2

    medians = {e.layers: float(np.median(np.abs(e.gaps))) for e in rep.entries}
    part_b = medians[1] <= medians[2] + 1e-12 and medians[2] <= medians[3] + 1e-12

    ok = part_a and part_b and elapsed < 600.0
    report(9, "wireless experiment (training gain + depth trend)", ok,
           f"L=2,F=4 objective x{improvement:.2f} (>=1.2); median |gap| by depth "
           f"{medians[1]:.2e} <= {medians[2]:.2e} <= {medians[3]:.2e}; "
           f"{elapsed:.0f}s (<10min)")


def test_10_cli_determinism(tmp_path):
    np.savetxt(tmp_path / "m.csv", [[2.0, 0.1], [0.1, 4.0]], delimiter=",")
    np.savetxt(tmp_path / "vals.csv", [0.0, 1.0, 1.05, 1.12, 3.0], delimiter=",")
    np.savetxt(tmp_path / "m3.csv", np.diag([0.0, 0.2, 9.0]), delimiter=",")
    (tmp_path / "poly.json").write_text('{"coeffs": [0.1, 0.2]}')
    params = mnn.init_mnn_params((1, 2, 1), 3, "tanh", seed=0)
    (tmp_path / "params.json").write_text(mnn.params_to_json(params))
    np.savetxt(tmp_path / "x.csv", [1.0, -1.0], delimiter=",")
    (tmp_path / "stab.json").write_text(
        '{"trials": 3, "alpha": 0.5, "dimension": 6, "seed": 2}'
    )
    (tmp_path / "nnstab.json").write_text(
        '{"trials": 2, "alpha": 0.5, "dimension": 6, "layers": 2, "width": 2, "seed": 2}'
    )
    (tmp_path / "wire.json").write_text(json.dumps({
        "n": 6, "layers": [1], "widths": [2], "iterations": 3, "fading_draws": 3,
        "eval_draws": 3, "perturbation_draws": 2, "eval_fading_draws": 3, "seed": 4,
    }))

    commands = {
        "eig": ["eig", "--matrix", "m.csv", "--seed", "3"],
        "partition": ["partition", "--eigenvalues", "vals.csv", "--alpha", "0.2"],
        "filter-response": ["filter-response", "--filter", "poly.json",
                            "--eigenvalues", "vals.csv"],
        "nn-forward": ["nn-forward", "--params", "params.json", "--matrix", "m.csv",
                       "--input", "x.csv"],
        "weyl-check": ["weyl-check", "--matrix", "m.csv", "--epsilon", "0.3",
                       "--seed", "3"],
        "dk-check": ["dk-check", "--matrix", "m3.csv", "--epsilon", "0.05",
                     "--cluster", "0:1", "--seed", "3"],
        "weyl-law": ["weyl-law", "--kind", "cycle", "--size", "40", "--k-lo", "2",
                     "--k-hi", "10"],
        "filter-stability": ["filter-stability", "--config", "stab.json"],
        "nn-stability": ["nn-stability", "--config", "nnstab.json"],
        "wireless-train": ["wireless", "train", "--config", "wire.json"],
    }

    mismatches = []
    for name, args in commands.items():
        outputs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name}_{tag}.out"
            argv = [str(a) for a in args]
            argv = [str(tmp_path / a) if (tmp_path / a).exists() else a for a in argv]
            extra = ["--output", str(out)]
            if name in ("filter-stability", "nn-stability"):
                extra += ["--summary", str(tmp_path / f"{name}_{tag}.sum")]
            assert cli_main(argv + extra) == 0, f"{name} failed"
            blob = out.read_bytes()
            if name in ("filter-stability", "nn-stability"):
                blob += (tmp_path / f"{name}_{tag}.sum").read_bytes()
            outputs.append(blob)
        if outputs[0] != outputs[1]:
            mismatches.append(name)

    # wireless eval consumes the trained bundle from the determinism pass above
    bundle = tmp_path / "wireless-train_a.out"
    evals = []
    for tag in ("a", "b"):
        gap_csv = tmp_path / f"weval_{tag}.csv"
        rep = tmp_path / f"weval_{tag}.json"
        assert cli_main(["wireless", "eval", "--config", str(tmp_path / "wire.json"),
                         "--policies", str(bundle), "--output", str(gap_csv),
                         "--report", str(rep)]) == 0
        evals.append(gap_csv.read_bytes() + rep.read_bytes())
    if evals[0] != evals[1]:
        mismatches.append("wireless-eval")

    ok = not mismatches
    report(10, "CLI byte-identical determinism", ok,
           f"11 subcommand invocations run twice; mismatches={mismatches or 'none'}")

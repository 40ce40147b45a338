"""
Tests for growth fits, the experiment runner and its cache, and the CLI
"""
import sys
import os
import tempfile

# Add src to path
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np


def test_fit_growth():
    """Growth-model selection"""
    print("\n" + "="*60)
    print("TEST 1: Growth Fits")
    print("="*60)

    from src.errors import NonpositiveValuesError, TooFewPointsError
    from src.growth import fit_growth

    R = np.array([4.0, 6.0, 9.0, 13.0, 20.0, 30.0])

    print("\n[TEST] Exact series pick their model...")
    assert fit_growth(R, np.full(6, 2.5)).model == "constant"
    assert fit_growth(R, 3 * np.log(R) + 1).model == "log"
    assert fit_growth(R, 2 * np.sqrt(R) + 1).model == "sqrt"
    fit = fit_growth(R, 0.5 * R + 4)
    assert fit.model == "linear" and abs(fit.coefficients["slope"] - 0.5) < 1e-9
    print("✓ constant, log, sqrt, linear")

    print("\n[TEST] Free power law...")
    fit = fit_growth(R, 2 * R ** 0.4)
    assert fit.model == "power"
    assert abs(fit.beta - 0.4) < 1e-6 and fit.r2 > 1 - 1e-9
    print(f"✓ beta = {fit.beta:.6f}")

    print("\n[TEST] Ties go to the simpler model...")
    fit = fit_growth(R, 2 * R)
    assert fit.model == "linear"
    assert abs(fit.candidates["power"] - 1.0) < 1e-9
    print("✓ linear beats an equally good power law")

    print("\n[TEST] Residuals and bad input...")
    assert len(fit.residuals) == 6 and fit.residuals[0][0] == 4.0
    try:
        fit_growth([1, 2, 3], [1, 2, 3])
        assert False, "expected TooFewPointsError"
    except TooFewPointsError:
        pass
    try:
        fit_growth([1, 2, 3, 4], [1, 0, 3, 4])
        assert False, "expected NonpositiveValuesError"
    except NonpositiveValuesError:
        print("✓ TooFewPointsError, NonpositiveValuesError")

    return True


def test_net_cache():
    """LRU behaviour of the net cache"""
    print("\n" + "="*60)
    print("TEST 2: Net Cache")
    print("="*60)

    from src.experiments import NetCache

    print("\n[TEST] Testing LRU eviction...")
    cache = NetCache(maxsize=3)
    cache.set(("h2", 1), "a")
    cache.set(("h2", 2), "b")
    cache.set(("h2", 3), "c")
    cache.get(("h2", 1))
    cache.set(("h2", 4), "d")  # evicts ("h2", 2)
    assert cache.get(("h2", 2)) is None
    assert cache.get(("h2", 1)) == "a"
    assert cache.get(("h2", 4)) == "d"
    print("✓ least recently used entry evicted")

    print("\n[TEST] get_or_build builds once...")
    calls = []
    for _ in range(3):
        value = cache.get_or_build(("tree", 3), lambda: calls.append(1) or "net")
    assert value == "net" and len(calls) == 1
    print(f"✓ 1 build, {cache.hits} hits, {cache.misses} misses so far")

    print("\n[TEST] Size 0 stores nothing...")
    off = NetCache(maxsize=0)
    off.set(("x",), 1)
    assert off.get(("x",)) is None
    print("✓ disabled")

    return True


def test_thread_safety():
    """Concurrent cache access"""
    print("\n" + "="*60)
    print("TEST 3: Thread Safety")
    print("="*60)

    from src.experiments import NetCache
    import threading

    cache = NetCache(maxsize=1000)
    errors = []

    def worker(thread_id):
        try:
            for i in range(100):
                cache.set((thread_id, i), f"net_{i}")
                result = cache.get((thread_id, i))
                if result != f"net_{i}":
                    errors.append(f"Thread {thread_id}: Expected net_{i}, got {result}")
        except Exception as e:
            errors.append(f"Thread {thread_id}: {e}")

    print("\n[TEST] Running 5 threads with 100 operations each...")
    threads = []
    for i in range(5):
        t = threading.Thread(target=worker, args=(i,))
        threads.append(t)
        t.start()

    for t in threads:
        t.join()

    for error in errors[:5]:
        print(f"  - {error}")
    assert not errors, f"{len(errors)} thread safety issues"
    print("✓ No race conditions detected in 500 concurrent operations")

    print("\n[TEST] Concurrent get_or_build runs one build...")
    import time
    builds = []
    start = threading.Barrier(8)

    def slow_build():
        builds.append(threading.get_ident())
        time.sleep(0.05)
        return "net"

    def builder_worker():
        start.wait()
        if cache.get_or_build(("h2", 9.0), slow_build) != "net":
            errors.append("wrong value from get_or_build")

    threads = [threading.Thread(target=builder_worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors, errors
    assert len(builds) == 1, f"{len(builds)} builds for one key"
    print("✓ 8 threads, 1 build")
    return True


def test_row_persistence():
    """Experiment rows persisted between cache instances"""
    print("\n" + "="*60)
    print("TEST 4: Row Persistence")
    print("="*60)

    from src.experiments import NetCache

    with tempfile.NamedTemporaryFile(mode="w", delete=False, suffix=".json") as f:
        rows_file = f.name

    try:
        print("\n[TEST] Saving rows...")
        cache = NetCache(rows_file=rows_file)
        cache.save_rows("abc", [{"R": 5.0, "K": np.float64(1.5), "points": np.int64(7)}])

        cache2 = NetCache(rows_file=rows_file)
        rows = cache2.load_rows("abc")
        assert rows == [{"R": 5.0, "K": 1.5, "points": 7}]
        assert cache2.load_rows("missing") is None
        print("✓ rows reloaded, numpy scalars stored as plain numbers")

        print("\n[TEST] Expired rows are ignored...")
        stale = NetCache(rows_file=rows_file, ttl_seconds=0)
        assert stale.load_rows("abc") is None
        print("✓ ttl respected")

        print("\n[TEST] clear() removes the file...")
        cache2.clear()
        assert not os.path.exists(rows_file)
        print("✓ removed")
    finally:
        if os.path.exists(rows_file):
            os.remove(rows_file)

    return True


def test_experiment_spec():
    """Spec defaults, validation and hashing"""
    print("\n" + "="*60)
    print("TEST 5: Experiment Specs")
    print("="*60)

    from src.errors import UsageError
    from src.experiments import DEFAULT_R, Experiment, ExperimentSpec

    print("\n[TEST] Defaults...")
    spec = ExperimentSpec.for_experiment("testfn")
    assert spec.mu == (1.0, 1.0) and spec.p == 3.0 and spec.level_cap is None
    assert spec.R_list == tuple(float(r) for r in DEFAULT_R[Experiment.TESTFN])
    spec = ExperimentSpec.for_experiment("radial_identity", mesh=None)
    assert spec.mu_prime == spec.mu and spec.mesh == 1.0
    print("✓ per-experiment parameters; None overrides ignored")

    print("\n[TEST] Validation...")
    for bad in ({"R_list": (5.0, 3.0)}, {"R_list": (0.0, 1.0)}, {"p": 0.5}, {"grid_n": 1}):
        try:
            ExperimentSpec.for_experiment("kr_curve", **bad)
            assert False, f"expected UsageError for {bad}"
        except UsageError:
            pass
    print("✓ UsageError for unordered R, R <= 0, p < 1, grid_n < 2")

    print("\n[TEST] Hash ignores the output path only...")
    a = ExperimentSpec.for_experiment("kr_curve", seed=1)
    b = ExperimentSpec.for_experiment("kr_curve", seed=1, output="x.csv")
    c = ExperimentSpec.for_experiment("kr_curve", seed=2)
    assert a.key() == b.key() != c.key()
    print(f"✓ key {a.key()}")

    return True


def test_run_experiment():
    """Runner output, determinism and error wrapping"""
    print("\n" + "="*60)
    print("TEST 6: Experiment Runner")
    print("="*60)

    from src.errors import ExperimentError, PoleOrBelowError
    from src.experiments import ExperimentSpec, NetCache, check_acceptance, run

    print("\n[TEST] distance_approx rows in R order...")
    spec = ExperimentSpec.for_experiment("distance_approx", n_pairs=2000, seed=9)
    cache = NetCache()
    rows = run(spec, cache, workers=3)
    assert [r["R"] for r in rows] == [10.0, 20.0, 30.0]
    assert all(r["experiment"] == "distance_approx" and r["seed"] == 9 for r in rows)
    assert all(r["max_error"] <= 8.0 for r in rows)
    failures, detail = check_acceptance(spec, rows)
    assert not failures, failures
    print(f"✓ max errors {[round(r['max_error'], 3) for r in rows]}")

    print("\n[TEST] Deterministic and cached...")
    again = run(spec, NetCache(), workers=1)
    assert again == rows
    assert cache.load_rows(spec.key()) == rows
    print("✓ same rows from a fresh run; rows kept in the cache")

    print("\n[TEST] Errors carry the experiment and R...")
    bad = ExperimentSpec.for_experiment("testfn", p=2.0, mesh=0.5, R_list=(1.0,))
    try:
        run(bad, NetCache())
        assert False, "expected ExperimentError"
    except ExperimentError as e:
        assert e.R == 1.0 and e.experiment == "testfn"
        assert isinstance(e.__cause__, PoleOrBelowError)
        assert e.exit_code == 2
        print(f"✓ {e}")

    return True


def test_logging_config():
    """Test logging configuration"""
    print("\n" + "="*60)
    print("TEST 7: Logging Configuration")
    print("="*60)

    import logging
    from src.logging_config import get_logger, log_timing, setup_logging

    print("\n[TEST] Setting up logging...")
    setup_logging(verbose=True, use_colors=False)
    assert get_logger("src.spaces").name == "qilab.spaces"
    print("✓ Logging configured successfully")

    print("\n[TEST] Testing log levels...")
    test_logger = get_logger("test")
    test_logger.debug("Debug message")
    test_logger.info("Info message")
    test_logger.warning("Warning message")
    test_logger.error("Error message")
    print("✓ All log levels work")

    print("\n[TEST] Log file and timing...")
    tmpdir = tempfile.mkdtemp()
    path = os.path.join(tmpdir, "run.log")
    try:
        setup_logging(verbose=False, use_colors=False, log_file=path)
        with log_timing(test_logger, "R=5"):
            test_logger.debug("inside")
        for handler in logging.getLogger("qilab").handlers:
            handler.flush()
        with open(path, encoding="utf-8") as f:
            text = f.read()
        assert "[DEBUG] qilab.test: inside" in text
        assert "[INFO] qilab.test: R=5 done in" in text
        print("✓ DEBUG lines reach the file, console stays at INFO")
    finally:
        for handler in logging.getLogger("qilab").handlers:
            handler.close()
        setup_logging(verbose=False, use_colors=False)
        os.remove(path)
        os.rmdir(tmpdir)

    return True


def test_cli():
    """Command-line parsing, commands and exit codes"""
    print("\n" + "="*60)
    print("TEST 8: CLI")
    print("="*60)

    from src.cli import main, parse_args
    from src.export import read_jsonl

    print("\n[TEST] Parsing ranges and leaf options...")
    args = parse_args(["run", "tree_embed", "--R-list", "9..12", "--seed", "5"])
    assert args.R_list == [9.0, 10.0, 11.0, 12.0] and args.seed == 5
    print("✓ 9..12 expands; --seed after the subcommand")

    tmpdir = tempfile.mkdtemp()
    out = os.path.join(tmpdir, "out.jsonl")

    print("\n[TEST] fit from lists...")
    assert main(["fit", "--R-list", "1,2,4,8", "--y-list", "2,4,8,16", "-o", out]) == 0
    assert read_jsonl(out)[0]["model"] == "linear"
    print("✓ linear")

    print("\n[TEST] growth-bound...")
    assert main(["sepvol", "growth-bound", "--alpha", "2", "--lambda", "2", "-R", "1000", "-o", out]) == 0
    record = read_jsonl(out)[0]
    assert 0.4 <= record["c_min_over_R"] <= 0.5
    print(f"✓ c_min / R = {record['c_min_over_R']:.4f}")

    print("\n[TEST] Config file supplies defaults...")
    config = os.path.join(tmpdir, "lab.env")
    with open(config, "w") as f:
        f.write("# growth bound defaults\nalpha = 4\nlambda = 3\n")
    assert main(["--config", config, "sepvol", "growth-bound", "-R", "100", "-o", out]) == 0
    record = read_jsonl(out)[0]
    assert record["alpha"] == 4.0 and record["lambda"] == 3.0
    print("✓ alpha = 4, lambda = 3 from the file")

    print("\n[TEST] Usage errors exit with 1...")
    assert main(["no-such-command"]) == 1
    assert main(["sepvol", "growth-bound", "--alpha", "-1", "-o", out]) == 1
    assert main(["fit", "-o", out]) == 1
    with open(config, "w") as f:
        f.write("no_such_flag = 1\n")
    assert main(["--config", config, "fit"]) == 1
    print("✓ unknown command, bad alpha, missing input, unknown config key")

    print("\n[TEST] Computation errors exit with 2...")
    assert main(["fit", "--R-list", "1,2,3", "--y-list", "1,2,3", "-o", out]) == 2
    print("✓ too few points")

    for name in os.listdir(tmpdir):
        os.remove(os.path.join(tmpdir, name))
    os.rmdir(tmpdir)
    return True


def test_net_files():
    """Net CSV files written and read back"""
    print("\n" + "="*60)
    print("TEST 9: Net Files")
    print("="*60)

    import csv
    from src.boundary import BoundaryMap, boundary_directions
    from src.export import read_net_csv, write_net_csv
    from src.spaces import SpaceParams, build_ray_net, build_tree_ball

    tmpdir = tempfile.mkdtemp()
    try:
        print("\n[TEST] Tree header carries both coordinates...")
        tree = build_tree_ball(4, 3)
        path = os.path.join(tmpdir, "tree.csv")
        write_net_csv(tree, path)
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["id", "kind", "depth", "parent", "weight"]
        assert all(len(row) == len(rows[0]) for row in rows)
        with open(path, "rb") as f:
            assert f.readline().endswith(b"\r\n")
        back = read_net_csv(path)
        assert np.array_equal(back.coords, tree.coords)
        assert np.array_equal(back.distance_matrix(), tree.distance_matrix())
        assert all(back.point(i) == tree.point(i) for i in range(len(tree)))
        print(f"✓ {len(tree)} nodes, CRLF rows of width {len(rows[0])}")

        print("\n[TEST] Unipotent ray nets keep their visual metric...")
        params = SpaceParams((1.0, 1.0), 4.0, 1.0)
        dirs = boundary_directions(BoundaryMap.unipotent(), 4.0, per_axis=6, n_random=2)
        rays = build_ray_net(params, dirs, visual="unipotent")
        path = os.path.join(tmpdir, "rays.csv")
        write_net_csv(rays, path)
        back = read_net_csv(path, params=params)
        assert back.meta["visual"] == "unipotent" and back.metric.visual == "unipotent"
        rng = np.random.default_rng(2)
        I, J = rng.integers(0, len(rays), size=(2, 300))
        assert np.allclose(back.pair_distances(I, J), rays.pair_distances(I, J))
        print(f"✓ {len(rays)} points, distances match")
    finally:
        for name in os.listdir(tmpdir):
            os.remove(os.path.join(tmpdir, name))
        os.rmdir(tmpdir)

    return True


def test_acceptance_runs():
    """Quick experiments pass their own thresholds"""
    print("\n" + "="*60)
    print("TEST 10: Acceptance Runs")
    print("="*60)

    from src.experiments import ExperimentSpec, NetCache, run_and_check

    quick = [
        ("tree_to_h2", {"R_list": (4, 5, 6, 7)}),
        ("kr_curve", {}),
        ("kr_curve", {"theta": "zmu_identity", "R_list": (10, 20)}),
        ("radial_identity", {"R_list": (5, 10, 15, 20)}),
        ("radial_zmu", {}),
        ("testfn", {"mesh": 0.25}),
        ("vol_growth", {"R_list": (5, 6, 7, 8)}),
    ]
    for name, overrides in quick:
        print(f"\n[TEST] {name} {overrides or ''}...")
        spec = ExperimentSpec.for_experiment(name, **overrides)
        rows = run_and_check(spec, NetCache())
        assert len(rows) == len(spec.R_list)
        print(f"✓ {len(rows)} rows pass")

    return True


def main():
    """Run all tests"""
    print("\n" + "="*70)
    print(" "*20 + "GROWTH, RUNNER AND CLI TESTS")
    print("="*70)

    tests = [
        ("Growth Fits", test_fit_growth),
        ("Net Cache", test_net_cache),
        ("Thread Safety", test_thread_safety),
        ("Row Persistence", test_row_persistence),
        ("Experiment Specs", test_experiment_spec),
        ("Experiment Runner", test_run_experiment),
        ("Logging Configuration", test_logging_config),
        ("CLI", test_cli),
        ("Net Files", test_net_files),
        ("Acceptance Runs", test_acceptance_runs),
    ]

    results = []

    for name, test_func in tests:
        try:
            success = test_func()
            results.append((name, success))
        except Exception as e:
            print(f"\n✗ Test failed with error: {e}")
            import traceback
            traceback.print_exc()
            results.append((name, False))

    # Summary
    print("\n" + "="*70)
    print(" "*25 + "SUMMARY")
    print("="*70)

    passed = sum(1 for _, success in results if success)
    total = len(results)

    for name, success in results:
        status = "✓ PASS" if success else "✗ FAIL"
        print(f"{status}: {name}")

    print(f"\nTotal: {passed}/{total} tests passed ({passed/total*100:.0f}%)")
    return 0 if passed == total else 1


if __name__ == "__main__":
    sys.exit(main())

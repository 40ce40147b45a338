"""
Tests for boundary maps, visual log-ratios and K(R)
"""
import sys
import os
import math

# Add src to path
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np


def test_unipotent_visual():
    """Shear visual distance and its regimes"""
    print("\n" + "="*60)
    print("TEST 1: Unipotent Visual Distance")
    print("="*60)

    from src.boundary import unipotent_case, unipotent_visual_distance

    print("\n[TEST] Closed form...")
    assert unipotent_visual_distance(0.3, 0.0) == 0.3
    assert unipotent_visual_distance(1.0, 1.0) == 1.0
    y = math.exp(-2)
    assert abs(unipotent_visual_distance(0.0, y) - 2 * y) < 1e-15
    print("✓ max(|y|, |x - y log|y||)")

    print("\n[TEST] Regimes...")
    assert unipotent_case(0.1, 0.5) == 1
    assert unipotent_case(0.1 * math.log(0.1), 0.1) == 2
    assert unipotent_case(0.0, 0.1) == 3
    assert unipotent_case(0.5, 0.01) == 4
    print("✓ cases 1 to 4")

    return True


def test_visual_log_ratio():
    """Log-ratio of visual distances under a boundary map"""
    print("\n" + "="*60)
    print("TEST 2: Visual Log-Ratio")
    print("="*60)

    from src.boundary import BoundaryMap, visual_log_ratio
    from src.errors import CoincidentPointsError

    theta = BoundaryMap.zmu_identity((1.0, 2.0), (1.0, 1.0))

    print("\n[TEST] Offsets along the slow axis...")
    for s in (1e-2, 1e-4, 1e-6):
        r = visual_log_ratio(theta, [0.0, 0.0], [0.0, s])
        assert abs(r - 0.5 * abs(math.log(s))) < 1e-9
    print("✓ |log| ratio = |log s| / 2")

    print("\n[TEST] Identity map...")
    assert visual_log_ratio(BoundaryMap.identity(), [0.1], [0.3]) == 0.0
    print("✓ zero")

    print("\n[TEST] Coincident points...")
    try:
        visual_log_ratio(theta, [0.2, 0.2], [0.2, 0.2])
        assert False, "expected CoincidentPointsError"
    except CoincidentPointsError:
        print("✓ CoincidentPointsError")

    return True


def test_estimate_K():
    """Grid estimates of K(R)"""
    print("\n" + "="*60)
    print("TEST 3: K(R) Estimates")
    print("="*60)

    from src.boundary import BoundaryMap, analytic_K, estimate_K, k_curve

    print("\n[TEST] Identity...")
    assert estimate_K(BoundaryMap.identity(), 10) == 0.0
    print("✓ K = 0")

    print("\n[TEST] Z_mu identity against the closed form...")
    theta = BoundaryMap.zmu_identity((1.0, 2.0), (1.0, 1.0))
    K10 = estimate_K(theta, 10, grid_n=256)
    exact = analytic_K(theta, 10).value
    assert 0.85 <= K10 / exact <= 1.0 + 1e-9, f"K(10) = {K10} vs {exact}"
    print(f"✓ K(10) = {K10:.4f}, closed form {exact:.4f}")

    print("\n[TEST] Monotone in R...")
    curve = k_curve(theta, [2, 5, 10], grid_n=256)
    assert all(b >= a for a, b in zip(curve.K, curve.K[1:]))
    assert len(curve.rows()) == 3 and curve.rows()[0]["method"] == "grid"
    print(f"✓ K = {[round(k, 3) for k in curve.K]}")

    print("\n[TEST] Unipotent map grows slowly...")
    uni = BoundaryMap.unipotent()
    K10 = estimate_K(uni, 10, grid_n=256)
    K20 = estimate_K(uni, 20, grid_n=256)
    assert 0 < K10 <= K20
    assert K20 / math.log(20) <= 3.0
    print(f"✓ K(10) = {K10:.3f}, K(20) = {K20:.3f}")

    print("\n[TEST] Unipotent curve at the default grid fits log R...")
    from src.growth import fit_growth
    R_list = [5.0, 10.0, 20.0, 40.0]
    curve = k_curve(uni, R_list, grid_n=1024)
    # the maximising pair at R = 10 sits past e^-R on the shear curve
    assert curve.K[1] >= 2.58, f"K(10) = {curve.K[1]:.4f}"
    fit = fit_growth(R_list, curve.K)
    assert fit.model == "log", f"selected {fit.model} (beta {fit.beta:.3f})"
    assert all(k / math.log(r) <= 3.0 for r, k in zip(R_list, curve.K))
    print(f"✓ K = {[round(k, 4) for k in curve.K]}, log fit R^2 {fit.r2:.5f}")

    print("\n[TEST] Seeded estimates are reproducible...")
    bih = BoundaryMap.biholder(0.8, 1.5)
    assert estimate_K(bih, 5, grid_n=128, seed=4) == estimate_K(bih, 5, grid_n=128, seed=4)
    print("✓ same seed, same value")

    return True


def test_constants():
    """Closed-form K and the extension constants"""
    print("\n" + "="*60)
    print("TEST 4: Analytic K and Extension Constants")
    print("="*60)

    from src.boundary import BoundaryMap, analytic_K, theta_constants
    from src.errors import NonpositiveCError, UsageError

    print("\n[TEST] analytic_K...")
    assert analytic_K(BoundaryMap.identity(), 10).value == 0.0
    assert analytic_K(BoundaryMap.zmu_identity((1, 2), (1, 1)), 10).value == 10.0
    bound = analytic_K(BoundaryMap.biholder(0.5, 1.5), 10)
    assert bound.value == 5.0 and bound.upper_bound_only
    assert analytic_K(BoundaryMap.unipotent(), 10) is None
    print("✓ 0, 10, 5 (upper bound), none for the shear")

    print("\n[TEST] theta_constants...")
    assert theta_constants(0.0, 1.0) == (1.0, 1.0)
    assert theta_constants(10.0, 2.0) == (11.0, 22.0)
    try:
        theta_constants(1.0, 0.0)
        assert False, "expected NonpositiveCError"
    except NonpositiveCError:
        print("✓ (1, 1), (11, 22), NonpositiveCError for c = 0")

    print("\n[TEST] Bad bi-Holder exponents...")
    try:
        BoundaryMap.biholder(1.5, 0.5)
        assert False, "expected UsageError"
    except UsageError:
        print("✓ UsageError")

    return True


def test_directions():
    """Direction sets for ray nets"""
    print("\n" + "="*60)
    print("TEST 5: Boundary Directions")
    print("="*60)

    from src.boundary import BoundaryMap, boundary_directions

    print("\n[TEST] Distinct directions including the origin...")
    theta = BoundaryMap.unipotent()
    dirs = boundary_directions(theta, 10, per_axis=8, n_random=4, seed=2)
    assert dirs.shape[1] == 2
    assert np.array_equal(dirs[0], [0.0, 0.0])
    assert len(np.unique(dirs, axis=0)) == len(dirs)
    print(f"✓ {len(dirs)} directions")

    print("\n[TEST] Deterministic for a seed...")
    again = boundary_directions(theta, 10, per_axis=8, n_random=4, seed=2)
    assert np.array_equal(dirs, again)
    print("✓ identical")

    return True


def main():
    """Run all tests"""
    print("\n" + "="*70)
    print(" "*20 + "BOUNDARY MAP TESTS")
    print("="*70)

    tests = [
        ("Unipotent Visual Distance", test_unipotent_visual),
        ("Visual Log-Ratio", test_visual_log_ratio),
        ("K(R) Estimates", test_estimate_K),
        ("Analytic K and Extension Constants", test_constants),
        ("Boundary Directions", test_directions),
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

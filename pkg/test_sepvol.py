"""
Tests for coarse volume, separation bounds and the obstruction inequalities
"""
import sys
import os
import math

# Add src to path
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np


def _cliques_with_bridge():
    from src.spaces import graph_net
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    edges += [(i + 4, j + 4) for i, j in edges]
    edges.append((3, 4))
    return graph_net(8, edges)


def _random_connected(rng, n):
    from src.spaces import graph_net
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.add((i, j))
    return graph_net(n, sorted(edges))


def test_vol_a():
    """Greedy covers and packings"""
    print("\n" + "="*60)
    print("TEST 1: Coarse Volume")
    print("="*60)

    from src.errors import UsageError
    from src.sepvol import cover_count, vol_a
    from src.spaces import build_h2_net, build_tree_ball, graph_net

    print("\n[TEST] Single point...")
    rep = vol_a(graph_net(1, []), 1.0)
    assert (rep.covering_count, rep.packing_2a) == (1, 1)
    print("✓ Vol_a = 1")

    print("\n[TEST] a = 0 counts points...")
    tree = build_tree_ball(3, 4)
    assert vol_a(tree, 0.0).covering_count == 46
    print("✓ 46 points")

    print("\n[TEST] Covering centres are a-separated and cover...")
    net = build_h2_net(5, 1)
    rep = vol_a(net, 2.0)
    D = net.distance_matrix()
    c = rep.centres
    assert np.all(D[np.ix_(c, c)][~np.eye(len(c), dtype=bool)] > 2.0)
    assert np.all(D[:, c].min(axis=1) <= 2.0 + 1e-9)
    assert rep.packing_2a <= rep.covering_count
    assert rep.as_dict()["covering_count"] == cover_count(net, 2.0)
    print(f"✓ {rep.covering_count} centres, 2a-packing {rep.packing_2a}")

    print("\n[TEST] Negative a...")
    try:
        vol_a(net, -1.0)
        assert False, "expected UsageError"
    except UsageError:
        print("✓ UsageError")

    return True


def test_sep_upper():
    """Upper bounds from balanced partitions"""
    print("\n" + "="*60)
    print("TEST 2: Separation Upper Bound")
    print("="*60)

    from src.sepvol import exhaustive_separation, sep_upper
    from src.spaces import graph_net

    print("\n[TEST] Two cliques joined by a bridge...")
    net = _cliques_with_bridge()
    count, side = exhaustive_separation(net, 1.0)
    assert count == 1
    rep = sep_upper(net, 1.0)
    assert rep.upper == 1 and rep.notes == ["exhaustive"]
    print(f"✓ sep = 1, side {side.astype(int).tolist()}")

    print("\n[TEST] Path of 8...")
    path = graph_net(8, [(i, i + 1) for i in range(7)])
    assert sep_upper(path, 1.0).upper == 1
    print("✓ sep = 1")

    print("\n[TEST] Path of 30 through the spectral sweep...")
    path = graph_net(30, [(i, i + 1) for i in range(29)])
    rep = sep_upper(path, 1.0)
    assert rep.notes == ["spectral sweep"]
    assert rep.upper == 1
    assert 0 < rep.partition.sum() < 30
    print(f"✓ sep <= 1 with {rep.partition.sum()} points on one side")

    print("\n[TEST] Forced sweep against the exhaustive minimum on random graphs...")
    from src.errors import DegenerateDomainError
    from src.sepvol import _balanced, _greedy
    rng = np.random.default_rng(17)
    compared = 0
    for trial in range(25):
        net = _random_connected(rng, int(rng.integers(6, 13)))
        try:
            exact, _ = exhaustive_separation(net, 1.0)
        except DegenerateDomainError:
            continue
        try:
            rep = sep_upper(net, 1.0, exhaustive_limit=0)
        except DegenerateDomainError:
            continue
        assert rep.notes == ["spectral sweep"]
        assert rep.upper >= exact, f"trial {trial}: sweep {rep.upper} below exact {exact}"
        adj = net.neighbor_lists(1.0)
        assert _balanced(adj, rep.partition, len(_greedy(adj))), f"trial {trial}: unbalanced cut"
        compared += 1
    assert compared >= 10, f"only {compared} graphs compared"
    print(f"✓ sweep >= exact with a balanced cut on {compared} graphs")

    return True


def test_sep_lower():
    """Poincare lower bounds never beat the exact upper bound"""
    print("\n" + "="*60)
    print("TEST 3: Separation Lower Bound")
    print("="*60)

    from src.errors import DegenerateDomainError
    from src.sepvol import family_kernel, sep_lower_poincare, separation
    from src.spaces import graph_net

    print("\n[TEST] Complete graph on 5 vertices...")
    k5 = graph_net(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    kernel, s = family_kernel(k5, 1.0)
    assert s == 5.0
    assert np.allclose(kernel.weights.toarray(), 0.2)
    rep = separation(k5, 1.0)
    assert rep.upper == 1
    assert 0 < rep.lower <= rep.upper
    assert abs(rep.lower - 1 / (3 * (5 / 6) * 5)) < 1e-12
    assert "C1 exact" in rep.notes
    print(f"✓ {rep.lower:.4f} <= sep <= {rep.upper}")

    print("\n[TEST] Supplied C_1...")
    notes = []
    assert abs(sep_lower_poincare(k5, 1.0, c1=2.0, notes=notes) - 1 / 30) < 1e-12
    assert notes == ["C1 supplied"]
    print("✓ Vol_a / (3 C_1 s)")

    print("\n[TEST] 100 random connected graphs...")
    rng = np.random.default_rng(42)
    checked = 0
    for trial in range(100):
        net = _random_connected(rng, int(rng.integers(4, 10)))
        try:
            rep = separation(net, 1.0)
        except DegenerateDomainError:
            continue
        assert rep.lower <= rep.upper + 1e-9, f"trial {trial}: {rep.lower} > {rep.upper}"
        checked += 1
    assert checked >= 50
    print(f"✓ lower <= upper on {checked} graphs")

    return True


def test_inequalities():
    """Tree bound, volume-growth bound and the connectivity bound"""
    print("\n" + "="*60)
    print("TEST 4: Obstruction Inequalities")
    print("="*60)

    from src.errors import UsageError
    from src.sepvol import connectivity_bound_check, tree_bound_check, volume_growth_lower_bound

    print("\n[TEST] Tree bound...")
    holds, slack = tree_bound_check(81, 1, 3, 1.0, 1.0, 3.0)
    assert holds and abs(slack - 1.0) < 1e-9
    holds, slack = tree_bound_check(3 ** 10, 1, 3, 0.5, 1.0, 2.0)
    assert not holds and abs(slack + 7.0) < 1e-9
    try:
        tree_bound_check(81, 1, 1, 1.0, 1.0, 3.0)
        assert False, "expected UsageError"
    except UsageError:
        print("✓ holds with slack 1, fails with slack -7, d = 1 rejected")

    print("\n[TEST] Volume-growth bound...")
    assert volume_growth_lower_bound(2, 2, 1) == 0.0
    bounds = [volume_growth_lower_bound(2, 2, R) for R in (5, 10, 20, 50, 100)]
    assert all(b >= a for a, b in zip(bounds, bounds[1:]))
    assert 0.35 <= bounds[-1] / 100 <= 0.5
    c = volume_growth_lower_bound(2, 2, 1000)
    assert 0.4 <= c / 1000 <= 0.5
    excess = 2 * math.log(c / 2) + 1000 - 2 * c - 2 * math.log(4000 + c)
    assert abs(excess) < 1e-6
    print(f"✓ c_min(100) = {bounds[-1]:.3f}, c_min(1000) = {c:.3f}")

    print("\n[TEST] Connectivity bound...")
    assert connectivity_bound_check(10, 1, 1, 0)
    assert not connectivity_bound_check(20, 1, 1, 0)
    assert connectivity_bound_check(20, 1, 1, 2)
    print("✓ R <= 12 lambda2 c1 + 4 c2")

    return True


def main():
    """Run all tests"""
    print("\n" + "="*70)
    print(" "*20 + "SEPARATION AND VOLUME TESTS")
    print("="*70)

    tests = [
        ("Coarse Volume", test_vol_a),
        ("Separation Upper Bound", test_sep_upper),
        ("Separation Lower Bound", test_sep_lower),
        ("Obstruction Inequalities", test_inequalities),
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

"""
Tests for the model spaces: closed-form distances and net constructions
"""
import sys
import os
import math

# Add src to path
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np


def test_h2_distances():
    """Closed-form H2 distance and the radial formula"""
    print("\n" + "="*60)
    print("TEST 1: H2 Distances")
    print("="*60)

    from src.spaces import H2Point, h2_distance, h2_formula_distance, radial_distance_formula

    print("\n[TEST] Closed form on simple pairs...")
    assert h2_distance(H2Point(3, 0), H2Point(3, 0)) == 0.0
    assert abs(h2_distance(H2Point(5, 0), H2Point(2, 0)) - 3.0) < 1e-12
    # cosh d = cosh^2 3 + sinh^2 3 = cosh 6
    assert abs(h2_distance(H2Point(3, 0), H2Point(3, math.pi)) - 6.0) < 1e-9
    print("✓ identical, same-ray and antipodal pairs")

    print("\n[TEST] Radial formula...")
    assert radial_distance_formula(5, 5, 5) == 0.0
    assert radial_distance_formula(3, 7, 10) == 4.0
    assert radial_distance_formula(5, 5, 1) == 8.0
    assert radial_distance_formula(2, 9, math.inf) == 7.0
    print("✓ t1 + t2 - 2 min(t1, t2, t_inf)")

    print("\n[TEST] Formula tracks the closed form within a constant...")
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        p = H2Point(rng.uniform(0, 20), rng.uniform(0, 2 * math.pi))
        q = H2Point(rng.uniform(0, 20), rng.uniform(0, 2 * math.pi))
        worst = max(worst, abs(h2_formula_distance(p, q) - h2_distance(p, q)))
    assert worst <= 8.0, f"formula error {worst}"
    print(f"✓ max error {worst:.3f}")

    return True


def test_zmu_distances():
    """Visual distance and Z_mu distance"""
    print("\n" + "="*60)
    print("TEST 2: Z_mu Distances")
    print("="*60)

    from src.spaces import SpaceParams, ZPoint, zmu_distance, zmu_visual_distance

    print("\n[TEST] Visual distance...")
    assert zmu_visual_distance([0.3, 0.4], [0.3, 0.4], (1, 2)) == 0.0
    assert abs(zmu_visual_distance([0.1, 0.0], [0.0, 0.0], (1, 2)) - 0.1) < 1e-12
    assert abs(zmu_visual_distance([0.0, 0.25], [0.0, 0.0], (1, 2)) - 0.5) < 1e-12
    # torus wrap: 0.95 and 0.05 are 0.1 apart
    assert abs(zmu_visual_distance([0.95], [0.05], (1,)) - 0.1) < 1e-12
    print("✓ max_i |dx_i|^(1/mu_i) on the torus")

    print("\n[TEST] Z_mu distance...")
    params = SpaceParams((1.0,), 10.0, 1.0)
    p = ZPoint(2.0, (0.3,))
    assert zmu_distance(p, p, params) == 0.0
    assert zmu_distance(ZPoint(2.0, (0.3,)), ZPoint(9.0, (0.3,)), params) == 7.0
    R = 10.0
    d = zmu_distance(ZPoint(R, (0.0,)), ZPoint(R, (0.5,)), params)
    assert abs(d - (2 * R - 2 * math.log(2))) < 1e-12
    print("✓ same point, same ray and half-turn pairs")

    return True


def test_h2_net():
    """H2 nets: origin, size and separation"""
    print("\n" + "="*60)
    print("TEST 3: H2 Nets")
    print("="*60)

    from src.spaces import build_h2_net

    print("\n[TEST] R = 0...")
    net = build_h2_net(0, 1)
    assert len(net) == 1 and net.coords[0, 0] == 0.0
    print("✓ single origin point")

    print("\n[TEST] R = 4, eps = 1 point count vs area...")
    net = build_h2_net(4, 1)
    area = 2 * math.pi * (math.cosh(4) - 1)
    ratio = len(net) / area
    assert 0.25 <= ratio <= 4.0, f"count {len(net)} vs area {area:.1f}"
    assert abs(net.total_measure - area) < 1e-9 * area
    print(f"✓ {len(net)} points for area {area:.1f}; weights sum to the area")

    print("\n[TEST] R = 9, eps = 3 separation...")
    net = build_h2_net(9, 3)
    assert len(net) > 6000
    # too large for the dense matrix; the window search finds every close pair
    I, J, d = net.pairs_within(3.0)
    assert len(d) > 0 and d.min() >= 3.0 - 1e-9, f"min distance {d.min()}"
    rng = np.random.default_rng(3)
    P, Q = rng.integers(0, len(net), size=(2, 500))
    assert np.allclose(net.pair_distances(P, Q), net.pair_distances(Q, P))
    print(f"✓ {len(net)} points, min pairwise distance {d.min():.4f}")

    print("\n[TEST] Window search agrees with a full scan...")
    net = build_h2_net(5, 1)
    I, J, d = net.pairs_within(2.5)
    D = net.distance_matrix()
    iu, ju = np.triu_indices(len(net), k=1)
    expected = np.sum(D[iu, ju] <= 2.5 + 1e-12)
    assert len(I) == expected, f"{len(I)} pairs vs {expected}"
    assert np.all(d <= 2.5 + 1e-9)
    print(f"✓ {len(I)} pairs within 2.5")

    return True


def test_tree_ball():
    """Tree balls: sizes and distances"""
    print("\n" + "="*60)
    print("TEST 4: Tree Balls")
    print("="*60)

    from src.errors import UsageError
    from src.spaces import build_tree_ball, tree_ball_size

    print("\n[TEST] Node counts...")
    assert len(build_tree_ball(3, 0)) == 1
    assert len(build_tree_ball(3, 2)) == 10
    assert len(build_tree_ball(4, 3)) == 53
    assert tree_ball_size(3, 4) == 46
    print("✓ 1, 10, 53 nodes")

    print("\n[TEST] Distances through the lowest common ancestor...")
    tree = build_tree_ball(3, 3)
    D = tree.distance_matrix()
    leaves = np.nonzero(tree.meta["level"] == 3)[0]
    assert D[0, leaves].max() == 3.0
    assert D[leaves[0], leaves[-1]] == 6.0
    assert D[leaves[0], leaves[1]] == 2.0
    print("✓ root-leaf 3, far leaves 6, sibling leaves 2")

    print("\n[TEST] Degree below 3 is rejected...")
    try:
        build_tree_ball(2, 3)
        assert False, "expected UsageError"
    except UsageError:
        print("✓ UsageError")

    return True


def test_zmu_net():
    """Z_mu nets: level sizes, cover and weights"""
    print("\n" + "="*60)
    print("TEST 5: Z_mu Nets")
    print("="*60)

    from src.spaces import SpaceParams, build_zmu_net

    print("\n[TEST] R = 0...")
    net = build_zmu_net(SpaceParams((1.0,), 0.0, 1.0))
    assert len(net) == 1
    print("✓ one level, one point")

    print("\n[TEST] Level sizes track e^(sum(mu) t)...")
    params = SpaceParams((1.0, 1.0), 5.0, 1.0)
    net = build_zmu_net(params, level_cap=None)
    sizes = net.meta["level_counts"].prod(axis=1)
    for k, size in enumerate(sizes):
        ratio = size / math.exp(2 * k)
        assert 0.25 <= ratio <= 4.0, f"level {k}: {size} points"
    volume = (math.exp(2 * 5.0) - 1) / 2
    assert abs(net.total_measure - volume) < 1e-9 * volume
    print(f"✓ level sizes {sizes.tolist()}; weights sum to the ball volume")

    print("\n[TEST] Double cover doubles the last coordinate...")
    small = SpaceParams((1.0, 1.0), 3.0, 1.0)
    base = build_zmu_net(small, level_cap=None)
    cover = build_zmu_net(small, cover=True, level_cap=None)
    assert np.array_equal(cover.meta["level_counts"][:, 0], base.meta["level_counts"][:, 0])
    assert np.array_equal(cover.meta["level_counts"][:, 1], 2 * base.meta["level_counts"][:, 1])
    print(f"✓ {len(base)} points on Z_mu, {len(cover)} on the cover")

    print("\n[TEST] Level cap thins the top levels...")
    capped = build_zmu_net(params, level_cap=256)
    assert capped.meta["thinned_levels"], "expected thinned levels"
    assert capped.meta["level_counts"].prod(axis=1).max() <= 256
    print(f"✓ thinned levels {capped.meta['thinned_levels']}")

    print("\n[TEST] Distances are symmetric and positive off the diagonal...")
    net = build_zmu_net(SpaceParams((1.0, 2.0), 2.0, 1.0))
    D = net.distance_matrix()
    assert np.array_equal(D, D.T)
    assert np.all(D[~np.eye(len(net), dtype=bool)] > 0)
    print(f"✓ {len(net)} points")

    print("\n[TEST] Vertical edges have length mesh...")
    vertical = net.edge_axes == 0
    assert np.allclose(net.edge_lengths[vertical], 1.0)
    net.check_connected()
    print("✓ connected, vertical edges of unit length")

    return True


def test_graph_and_rays():
    """Graph nets and ray nets"""
    print("\n" + "="*60)
    print("TEST 6: Graph and Ray Nets")
    print("="*60)

    from src.errors import DisconnectedError
    from src.spaces import SpaceParams, build_ray_net, graph_net, ray_deviation

    print("\n[TEST] Shortest paths on a weighted graph...")
    g = graph_net(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [1.0, 1.0, 1.0, 5.0])
    assert g.distance(0, 3) == 3.0
    assert g.distance(3, 0) == 3.0
    print("✓ detour beats the long edge")

    print("\n[TEST] Disconnected graph is reported...")
    split = graph_net(4, [(0, 1), (2, 3)])
    try:
        split.check_connected()
        assert False, "expected DisconnectedError"
    except DisconnectedError:
        print("✓ DisconnectedError")

    print("\n[TEST] Ray net levels and representatives...")
    params = SpaceParams((1.0,), 4.0, 1.0)
    dirs = np.array([[0.0], [0.5], [0.05]])
    rays = build_ray_net(params, dirs)
    rep = rays.meta["representative"]
    # at t = 1 the direction 0.05 is within e^-1 of 0.0 and shares its point
    assert rep[1, 2] == rep[1, 0]
    # at t = 4 it is farther than e^-4 and gets its own point
    assert rep[4, 2] != rep[4, 0]
    assert ray_deviation(rays) == 0.0
    print(f"✓ {len(rays)} points on 3 rays")

    return True


def test_metric_invariants():
    """Triangle inequality, Z_mu slack, density and volume growth"""
    print("\n" + "="*60)
    print("TEST 7: Metric Invariants")
    print("="*60)

    from src.spaces import (
        SpaceParams,
        ZPoint,
        build_h2_net,
        build_tree_ball,
        build_zmu_net,
        h2_distance_array,
        zmu_distance,
    )

    rng = np.random.default_rng(21)

    print("\n[TEST] Triangle inequality for the exact oracles...")
    r = rng.uniform(0, 15, size=(3, 5000))
    th = rng.uniform(0, 2 * math.pi, size=(3, 5000))
    ab = h2_distance_array(r[0], th[0], r[1], th[1])
    bc = h2_distance_array(r[1], th[1], r[2], th[2])
    ac = h2_distance_array(r[0], th[0], r[2], th[2])
    assert np.all(ac <= ab + bc + 1e-6), f"H2 violation {np.max(ac - ab - bc)}"
    tree = build_tree_ball(3, 6)
    a, b, c = rng.integers(0, len(tree), size=(3, 5000))
    slack = tree.pair_distances(a, c) - tree.pair_distances(a, b) - tree.pair_distances(b, c)
    assert slack.max() <= 0.0
    print("✓ 5000 H2 triples, 5000 tree triples")

    print("\n[TEST] Z_mu slack stays within 16 delta and does not grow with R...")
    params = SpaceParams((1.0, 2.0), 20.0, 1.0, delta=1.0)
    worst = []
    for R in (5.0, 10.0, 20.0):
        t = rng.uniform(0, R, size=(3, 2000))
        x = rng.random((3, 2000, 2))
        pts = [[ZPoint(float(t[k, i]), tuple(x[k, i])) for i in range(2000)] for k in range(3)]
        excess = 0.0
        for p, q, s in zip(*pts):
            excess = max(excess, zmu_distance(p, s, params)
                         - zmu_distance(p, q, params) - zmu_distance(q, s, params))
        worst.append(excess)
    assert max(worst) <= 16 * params.delta, worst
    # the visual distance is a metric, so the slack never exceeds 2 log 2
    assert max(worst) <= 2 * math.log(2) + 1e-9, worst
    print(f"✓ worst slack {[round(w, 4) for w in worst]} at R = 5, 10, 20")

    print("\n[TEST] Every point of the ball is near the net...")
    eps = 1.0
    net = build_h2_net(4, eps)
    rs = np.arccosh(1 + rng.random(500) * (math.cosh(4) - 1))
    ts = rng.uniform(0, 2 * math.pi, 500)
    D = h2_distance_array(rs[:, None], ts[:, None], net.coords[None, :, 0], net.coords[None, :, 1])
    gap = D.min(axis=1).max()
    assert gap <= 3 * eps, f"point {gap:.3f} from the net"
    print(f"✓ 500 area-uniform points within {gap:.3f} of the net")

    print("\n[TEST] Volume growth exponents...")
    Rs = np.arange(4, 10)
    counts = [len(build_h2_net(float(R), 1.0)) for R in Rs]
    slope = np.polyfit(Rs, np.log(counts), 1)[0]
    assert 0.8 <= slope <= 1.2, f"H2 exponent {slope:.3f}"
    Rs_z = np.arange(2, 7)
    counts_z = [len(build_zmu_net(SpaceParams((1.0, 1.0), float(R), 1.0), level_cap=None)) for R in Rs_z]
    slope_z = np.polyfit(Rs_z, np.log(counts_z), 1)[0]
    assert 0.8 * 2 <= slope_z <= 1.2 * 2, f"Z_mu exponent {slope_z:.3f}"
    print(f"✓ H2 exponent {slope:.3f}, Z_(1,1) exponent {slope_z:.3f}")

    return True


def main():
    """Run all tests"""
    print("\n" + "="*70)
    print(" "*20 + "MODEL SPACE TESTS")
    print("="*70)

    tests = [
        ("H2 Distances", test_h2_distances),
        ("Z_mu Distances", test_zmu_distances),
        ("H2 Nets", test_h2_net),
        ("Tree Balls", test_tree_ball),
        ("Z_mu Nets", test_zmu_net),
        ("Graph and Ray Nets", test_graph_and_rays),
        ("Metric Invariants", test_metric_invariants),
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

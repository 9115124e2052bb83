import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdl import domains as dm
from qdl.domains import GraphDomain, GraphMap


def ball_points(rng, k, N):
    X = rng.normal(size=(k, N))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X * rng.uniform(0, 1, size=(k, 1)) ** (1 / N)


def halfdisk_points(rng, k):
    X = ball_points(rng, k, 2)
    X[:, 1] = np.abs(X[:, 1])
    return X


def linear_energy(mesh, g):
    E, w = mesh.edges_and_weights()
    V = mesh.vertices
    u = V @ g
    return float((w * (u[E[:, 0]] - u[E[:, 1]]) ** 2).sum())


# ---------------------------------------------------------------- ball map


def test_profile_values():
    assert dm.s_profile(1.0) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(dm.map_ball_to_halfball(np.array([0.0, 1.0])), [0.0, 1.0], atol=1e-15)
    a = -1 / np.sqrt(5)
    upper = 0.5 * (-a + np.sqrt(a * a + 3))
    lower = -0.5 / a
    assert upper == pytest.approx(np.sqrt(5) / 2, rel=1e-15)
    assert lower == pytest.approx(np.sqrt(5) / 2, rel=1e-15)
    assert dm.s_profile(a) == pytest.approx(np.sqrt(5) / 2, rel=1e-15)


def test_profile_bounds():
    x = np.linspace(-1, 1, 20001)
    s = dm.s_profile(x)
    assert s.min() >= 0.5 - 1e-15 and s.max() <= np.sqrt(5) / 2 + 1e-15
    assert np.abs(dm.s_profile_derivative(x)).max() < 3


@pytest.mark.parametrize("N", [2, 3])
def test_ball_map_round_trip(N, rng):
    X = ball_points(rng, 10_000, N)
    Y = dm.map_ball_to_halfball(X)
    assert np.all(Y[:, -1] >= -1e-12)
    assert np.all(np.linalg.norm(Y, axis=1) <= 1 + 1e-12)
    assert np.abs(dm.map_halfball_to_ball(Y) - X).max() < 1e-10


def test_ball_map_rejects_outside():
    with pytest.raises(ValueError):
        dm.map_ball_to_halfball(np.array([[1.0, 0.5]]))


@pytest.mark.parametrize("R", [0.5, 0.9])
def test_radial_homogeneity(R, rng):
    c = np.array([0.0, 0.5])
    Y = halfdisk_points(rng, 2000)
    lhs = dm.map_ball_to_halfball(dm.map_halfball_to_ball(Y) / R, extend=True)
    assert np.abs(lhs - ((1 - 1 / R) * c + Y / R)).max() < 1e-12


def test_ball_map_bilipschitz(rng):
    X = ball_points(rng, 4000, 2)
    Z = ball_points(rng, 4000, 2)
    d0 = np.linalg.norm(X - Z, axis=1)
    d1 = np.linalg.norm(dm.map_ball_to_halfball(X) - dm.map_ball_to_halfball(Z), axis=1)
    ratio = d1 / d0
    assert ratio.max() < 10 and ratio.min() > 0.1


# ---------------------------------------------------------------- graph domains


def test_graph_domain_validation():
    with pytest.raises(ValueError):
        GraphDomain(lambda x: x + 1.0, lambda x: np.ones_like(x))
    with pytest.raises(ValueError):
        GraphDomain(lambda x: 0.3 * x, lambda x: 0.3 * np.ones_like(x), eps_F=0.2)
    dom = dm.example_graph("sine")
    assert dom.eps_F == pytest.approx(0.2, rel=1e-6)
    with pytest.raises(ValueError):
        dm.example_graph("zigzag")


def test_smooth_cutoff():
    x = np.linspace(-3, 3, 601)
    c = dm.smooth_cutoff(x)
    assert np.all(c[np.abs(x) <= 1] == 1.0) and np.all(c[np.abs(x) >= 2] == 0.0)
    assert np.all((c >= 0) & (c <= 1))


def test_flat_map_is_identity(rng):
    G = GraphMap(GraphDomain.flat_boundary())
    X = halfdisk_points(rng, 500)
    assert np.abs(G.forward(X) - X).max() < 1e-14


def test_parabola_scale_at_pole():
    G = dm.map_halfball_to_graphdomain(dm.example_graph("parabola"))
    assert G.scale(np.array([0.0, 1.0])) == pytest.approx(1.0, abs=1e-15)


def test_map_rejects_steep_graph():
    dom = GraphDomain(lambda x: 0.3 * np.sin(x), lambda x: 0.3 * np.cos(x))
    with pytest.raises(ValueError):
        GraphMap(dom)


@pytest.mark.parametrize("name", ["parabola", "sine", "wave"])
def test_graph_map_round_trip_and_boundary(name, rng):
    dom = dm.example_graph(name)
    G = GraphMap(dom)
    X = halfdisk_points(rng, 10_000)
    Z = G.forward(X)
    assert np.abs(G.inverse(Z) - X).max() < 1e-10
    th = np.linspace(0, np.pi, 101)
    arc = G.forward(np.stack([np.cos(th), np.sin(th)], -1))
    assert np.allclose(np.linalg.norm(arc, axis=1), 1.0, atol=1e-12)
    x = np.linspace(-1, 1, 101)
    seg = G.forward(np.stack([x, 0 * x], -1))
    assert np.allclose(seg[:, 1], dom.F(seg[:, 0]), atol=1e-12)


@pytest.mark.parametrize("name", ["parabola", "sine", "wave"])
def test_derivative_bound(name):
    dom = dm.example_graph(name)
    G = GraphMap(dom)
    g = np.linspace(-0.99, 0.99, 100)
    X = np.stack(np.meshgrid(g, np.linspace(0.01, 0.99, 100)), -1).reshape(-1, 2)
    X = X[np.linalg.norm(X, axis=1) < 0.99]
    assert G.derivative_deviation(X).max() <= 10 * dom.eps_F


def test_continuous_dependence_on_F(rng):
    base = dm.example_graph("sine")
    X = halfdisk_points(rng, 2000)
    Z = GraphMap(base).forward(X)
    gaps = []
    for k in (2, 8, 32):
        Fk = lambda x, k=k: base.F(x) + 0.1 / k * np.sin(np.asarray(x)) ** 2
        dFk = lambda x, k=k: base.dF(x) + 0.1 / k * np.sin(2 * np.asarray(x))
        gaps.append(np.abs(GraphMap(GraphDomain(Fk, dFk)).forward(X) - Z).max())
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.005


def test_rescaled_slope(rng):
    dom = dm.example_graph("sine")
    x = np.linspace(-1, 1, 2001)
    for r in (0.5, 0.1):
        Fr = dm.rescale_graph(dom, 0.0, r)
        assert np.abs(Fr.dF(x)).max() == pytest.approx(np.abs(dom.dF(r * x)).max(), rel=1e-12)
        # F_(0,r)(x) = F(r x) / r
        assert np.allclose(Fr.F(x), dom.F(r * x) / r, atol=1e-15)
    z1 = 0.3
    osc = [np.ptp(dm.rescale_graph(dom, z1, r).dF(x)) for r in (0.4, 0.04, 0.004)]
    assert osc[0] > osc[1] > osc[2] and osc[2] < 1e-3


# ---------------------------------------------------------------- meshes


def check_mesh(mesh):
    assert np.all(mesh.areas() > 0)
    assert mesh.min_angle_degrees() >= 20.0
    E, w = mesh.edges_and_weights()
    assert np.all(np.isfinite(w))
    # every boundary edge is a triangle edge seen once and is tagged once
    edges = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, count = np.unique(edges, axis=0, return_counts=True)
    bnd = np.sort(mesh.boundary_edges, axis=1)
    assert len(bnd) == len(mesh.boundary_tags)
    assert {tuple(e) for e in uniq[count == 1]} == {tuple(e) for e in bnd}
    assert len({tuple(e) for e in bnd}) == len(bnd)


def test_disk_mesh():
    m = dm.mesh_domain("disk", 0.2)
    check_mesh(m)
    B = m.vertices[m.boundary_vertices()]
    assert np.abs(np.linalg.norm(B, axis=1) - 1).max() < 1e-10
    assert m.areas().sum() == pytest.approx(np.pi, rel=0.05)


def test_halfdisk_mesh_corners():
    m = dm.mesh_domain("halfdisk", 0.1)
    check_mesh(m)
    for corner in ([1.0, 0.0], [-1.0, 0.0]):
        assert np.min(np.linalg.norm(m.vertices - corner, axis=1)) < 1e-14
    assert set(np.unique(m.boundary_tags)) == {"arc", "graph"}
    assert np.all(m.vertices[m.tagged_vertices("graph"), 1] == 0.0)


def test_flat_graph_mesh_topology():
    m = dm.mesh_domain("halfdisk", 0.1)
    g = dm.mesh_domain("graph", 0.1, GraphDomain.flat_boundary())
    assert np.array_equal(np.sort(np.sort(g.triangles, 1), 0), np.sort(np.sort(m.triangles, 1), 0))
    assert np.allclose(g.vertices, m.vertices, atol=1e-14)


@pytest.mark.parametrize("name", ["parabola", "sine", "wave"])
def test_graph_mesh(name):
    dom = dm.example_graph(name)
    m = dm.mesh_domain("graph", 0.05, dom)
    check_mesh(m)
    P = m.vertices[m.tagged_vertices("graph")]
    assert np.abs(P[:, 1] - dom.F(P[:, 0])).max() < 1e-10
    A = m.vertices[m.tagged_vertices("arc")]
    assert np.abs(np.linalg.norm(A, axis=1) - 1).max() < 1e-10


def test_graph_mesh_refuses_coarse():
    with pytest.raises(ValueError, match="per period"):
        dm.mesh_domain("graph", 0.25, dm.example_graph("wave"))
    with pytest.raises(ValueError):
        dm.mesh_domain("disk", 0.0)
    with pytest.raises(ValueError):
        dm.mesh_domain("graph", 0.1)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["disk", "halfdisk", "sine"]), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_energy_exact(kind, a, b):
    m = dm.mesh_domain("graph", 0.1, dm.example_graph("sine")) if kind == "sine" \
        else dm.mesh_domain(kind, 0.1)
    g = np.array([a, b])
    exact = m.areas().sum() * (g @ g)
    assert linear_energy(m, g) == pytest.approx(exact, rel=1e-10, abs=1e-12)


def test_linear_energy_vs_disk_area():
    for h in (0.1, 0.05):
        m = dm.mesh_domain("disk", h)
        assert linear_energy(m, np.array([1.0, 0.0])) == pytest.approx(np.pi, rel=0.02 * h)


def test_vertex_areas_sum():
    m = dm.mesh_domain("halfdisk", 0.1)
    assert m.vertex_areas().sum() == pytest.approx(m.areas().sum(), rel=1e-14)


def test_rescale_domain_identity():
    m = dm.mesh_domain("halfdisk", 0.1)
    r = dm.rescale_domain(m, [0.0, 0.0], 1.0)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.vertices, m.vertices)
    dom = dm.example_graph("sine")
    g = dm.mesh_domain("graph", 0.1, dom)
    gr = dm.rescale_domain(g, [0.0, 0.0], 1.0, dom)
    assert np.array_equal(gr.triangles, g.triangles)
    assert np.allclose(gr.vertices, g.vertices, atol=1e-15)
    small = dm.rescale_domain(g, [0.0, 0.0], 0.2, dom)
    assert small.n_vertices == g.n_vertices
    with pytest.raises(ValueError):
        dm.rescale_domain(m, [0.0, 0.5], 0.2)


def test_mesh_csv_round_trip(tmp_path):
    m = dm.mesh_domain("graph", 0.1, dm.example_graph("parabola"))
    paths = dm.write_mesh(m, str(tmp_path / "g"))
    assert [p.rsplit("_", 1)[1] for p in paths] == ["vertices.csv", "triangles.csv", "boundary.csv"]
    assert open(paths[1]).readline().strip() == "triangle_id,v0,v1,v2"
    r = dm.read_mesh(str(tmp_path / "g"))
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.boundary_tags, m.boundary_tags)
    assert r.h == m.h and r.kind == m.kind

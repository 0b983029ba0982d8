import numpy as np
import pytest

from ddrns import mesh as msh
from ddrns.operators import DdrComplex

_MESH_CACHE = {}
_COMPLEX_CACHE = {}


def get_mesh(family: str, n: int):
    key = (family, n)
    if key not in _MESH_CACHE:
        gen = {"cubic": msh.generate_cubic_mesh, "tet": msh.generate_tet_mesh}
        _MESH_CACHE[key] = gen[family](n)
    return _MESH_CACHE[key]


def get_complex(family: str, n: int, k: int) -> DdrComplex:
    key = (family, n, k)
    if key not in _COMPLEX_CACHE:
        _COMPLEX_CACHE[key] = DdrComplex(get_mesh(family, n), k)
    return _COMPLEX_CACHE[key]


def random_tet_mesh(seed: int = 7):
    """Single well-shaped random tetrahedron."""
    rng = np.random.default_rng(seed)
    while True:
        pts = rng.uniform(-1, 1, size=(4, 3))
        vol = abs(np.linalg.det(pts[1:] - pts[0])) / 6.0
        edges = [np.linalg.norm(pts[i] - pts[j]) for i in range(4)
                 for j in range(i + 1, 4)]
        if vol > 0.05 * max(edges) ** 3:
            break
    faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
    return msh.build_mesh(pts, faces, [[0, 1, 2, 3]])


def random_hex_mesh(seed: int = 11):
    """Random planar-faced hexahedron: a frustum image under a random
    affine map (generic vertex perturbations would break face planarity)."""
    rng = np.random.default_rng(seed)
    s = 0.6  # top face shrink factor: planar trapezoidal side faces
    base = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0.5 - s / 2, 0.5 - s / 2, 1], [0.5 + s / 2, 0.5 - s / 2, 1],
        [0.5 + s / 2, 0.5 + s / 2, 1], [0.5 - s / 2, 0.5 + s / 2, 1],
    ], dtype=float)
    A = np.eye(3) + 0.25 * rng.uniform(-1, 1, size=(3, 3))
    while abs(np.linalg.det(A)) < 0.3:
        A = np.eye(3) + 0.25 * rng.uniform(-1, 1, size=(3, 3))
    pts = base @ A.T + rng.uniform(-0.1, 0.1, size=3)
    faces = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5],
             [2, 3, 7, 6], [3, 0, 4, 7]]
    return msh.build_mesh(pts, faces, [[0, 1, 2, 3, 4, 5]])


def prism_mesh():
    """Two triangular prisms sharing the diagonal rectangle of a unit cube."""
    pts = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ], dtype=float)
    faces = [
        [0, 2, 6, 4],          # shared diagonal rectangle x = y
        [0, 1, 2], [4, 5, 6],  # prism A triangles (x >= y)
        [1, 5, 4, 0], [2, 1, 5, 6],
        [0, 2, 3], [4, 6, 7],  # prism B triangles
        [3, 2, 6, 7], [0, 3, 7, 4],
    ]
    cells = [[0, 1, 2, 3, 4], [0, 5, 6, 7, 8]]
    return msh.build_mesh(pts, faces, cells)


def pentagon_prism_mesh(seed: int = 3):
    """One cell with two pentagonal faces (for non-tensor face operators)."""
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 5))
    while np.min(np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))) < 0.5:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 5))
    r = rng.uniform(0.7, 1.2, 5)
    bot = np.stack([r * np.cos(ang), r * np.sin(ang), np.zeros(5)], axis=-1)
    top = bot + np.array([0.1, -0.05, 0.9])
    pts = np.vstack([bot, top])
    faces = [list(range(5))[::-1], [5 + i for i in range(5)]]
    for i in range(5):
        j = (i + 1) % 5
        faces.append([i, j, 5 + j, 5 + i])
    return msh.build_mesh(pts, faces, [list(range(7))])


@pytest.fixture(scope="session")
def cube1():
    return get_mesh("cubic", 1)


@pytest.fixture(scope="session")
def cube2():
    return get_mesh("cubic", 2)


@pytest.fixture(scope="session")
def tet1():
    return get_mesh("tet", 1)

"""Discrete space DoF layouts, coefficient vectors and boundary subspaces.

Three spaces are carried through the build, mirroring the de Rham sequence:

* GRAD: vertex values, edge/face/cell moments of a scalar unknown;
* CURL: edge tangential moments plus rot-image / complement pairs on faces
  and cells of a vector unknown;
* DIV: face normal moments plus grad-image / complement pairs on cells.

Global numbering is vertices, then edges, then faces, then cells, each in
mesh id order; within an entity, basis order.  All DoF values are
coefficients in the entity-local orthonormal bases built by
:mod:`ddrns.polyspaces`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .mesh import Mesh
from .polyspaces import dim_poly, subspace_dim


class SpaceKind(str, Enum):
    GRAD = "grad"
    CURL = "curl"
    DIV = "div"


@dataclass(frozen=True)
class SerendipityConfig:
    """Reduction exponents eta_Y >= 2 per face/cell; ell_Y = k + 1 - eta_Y.

    The shipped configuration is eta = 2 everywhere ("DDR mode",
    ell_Y = k - 1); the type keeps the door open for stronger reductions.
    """
    eta_face: int = 2
    eta_cell: int = 2

    def __post_init__(self):
        if self.eta_face < 2 or self.eta_cell < 2:
            raise ValueError("eta_Y must be >= 2")

    def ell_face(self, k: int) -> int:
        return k + 1 - self.eta_face

    def ell_cell(self, k: int) -> int:
        return k + 1 - self.eta_cell

    def is_ddr_mode(self, k: int) -> bool:
        return self.ell_face(k) == k - 1 and self.ell_cell(k) == k - 1


class DofLayout:
    """Entity-blocked global numbering for one space kind and degree."""

    def __init__(self, mesh: Mesh, kind: SpaceKind, k: int,
                 serendipity: SerendipityConfig | None = None):
        if k < 0:
            raise ValueError("polynomial degree k must be >= 0")
        self.mesh = mesh
        self.kind = SpaceKind(kind)
        self.k = k
        self.serendipity = serendipity or SerendipityConfig()
        lf = self.serendipity.ell_face(k)
        lt = self.serendipity.ell_cell(k)
        self.ell_face = lf
        self.ell_cell = lt

        if self.kind == SpaceKind.GRAD:
            self.vertex_block = 1
            self.edge_block = dim_poly(1, k - 1)
            self.face_subsizes = [dim_poly(2, lf)]
            self.cell_subsizes = [dim_poly(3, lt)]
        elif self.kind == SpaceKind.CURL:
            self.vertex_block = 0
            self.edge_block = dim_poly(1, k)
            self.face_subsizes = [subspace_dim(2, "R", k - 1), dim_poly(2, lf)]
            self.cell_subsizes = [subspace_dim(3, "R", k - 1), dim_poly(3, lt)]
        elif self.kind == SpaceKind.DIV:
            self.vertex_block = 0
            self.edge_block = 0
            self.face_subsizes = [dim_poly(2, k)]
            self.cell_subsizes = [subspace_dim(3, "G", k - 1),
                                  subspace_dim(3, "Gc", k)]
        self.face_block = sum(self.face_subsizes)
        self.cell_block = sum(self.cell_subsizes)

        nv, ne, nf, nc = (mesh.n_vertices, mesh.n_edges, mesh.n_faces,
                          mesh.n_cells)
        self.vertex_offset = 0
        self.edge_offset = nv * self.vertex_block
        self.face_offset = self.edge_offset + ne * self.edge_block
        self.cell_offset = self.face_offset + nf * self.face_block
        self.total_dim = self.cell_offset + nc * self.cell_block
        self.n_interior = nc * self.cell_block   # condensable cell blocks

    # -- per-entity global index ranges ------------------------------------
    def vertex_dofs(self, v: int) -> np.ndarray:
        if self.vertex_block == 0:
            return np.zeros(0, dtype=int)
        return np.array([self.vertex_offset + v])

    def edge_dofs(self, e: int) -> np.ndarray:
        b = self.edge_block
        return np.arange(self.edge_offset + e * b, self.edge_offset + (e + 1) * b)

    def face_dofs(self, f: int) -> np.ndarray:
        b = self.face_block
        return np.arange(self.face_offset + f * b, self.face_offset + (f + 1) * b)

    def cell_dofs(self, c: int) -> np.ndarray:
        b = self.cell_block
        return np.arange(self.cell_offset + c * b, self.cell_offset + (c + 1) * b)

    def face_subblock(self, f: int, which: int) -> np.ndarray:
        start = self.face_offset + f * self.face_block + sum(self.face_subsizes[:which])
        return np.arange(start, start + self.face_subsizes[which])

    def cell_subblock(self, c: int, which: int) -> np.ndarray:
        start = self.cell_offset + c * self.cell_block + sum(self.cell_subsizes[:which])
        return np.arange(start, start + self.cell_subsizes[which])

    # -- local (restriction) index maps ------------------------------------
    def cell_indices(self, c: int) -> np.ndarray:
        """Global indices of the cell-local DoFs, deterministic local order:
        vertices, edges, faces (each ascending by id), then the cell block."""
        cell = self.mesh.cells[c]
        parts = []
        if self.vertex_block:
            parts.extend(self.vertex_dofs(v) for v in cell.vertex_ids)
        if self.edge_block:
            parts.extend(self.edge_dofs(e) for e in cell.edge_ids)
        if self.face_block:
            parts.extend(self.face_dofs(f) for f in sorted(cell.faces))
        if self.cell_block:
            parts.append(self.cell_dofs(c))
        if not parts:
            return np.zeros(0, dtype=int)
        return np.concatenate(parts)

    def face_indices(self, f: int) -> np.ndarray:
        face = self.mesh.faces[f]
        parts = []
        if self.vertex_block:
            parts.extend(self.vertex_dofs(v) for v in sorted(face.vertex_loop))
        if self.edge_block:
            parts.extend(self.edge_dofs(e) for e in sorted(face.edges))
        if self.face_block:
            parts.append(self.face_dofs(f))
        if not parts:
            return np.zeros(0, dtype=int)
        return np.concatenate(parts)

    def edge_indices(self, e: int) -> np.ndarray:
        edge = self.mesh.edges[e]
        parts = []
        if self.vertex_block:
            parts.extend(self.vertex_dofs(v) for v in sorted(edge.vertices))
        if self.edge_block:
            parts.append(self.edge_dofs(e))
        if not parts:
            return np.zeros(0, dtype=int)
        return np.concatenate(parts)

    def n_cell_local(self) -> int:
        c0 = self.mesh.cells[0]
        return (len(c0.vertex_ids) * self.vertex_block
                + len(c0.edge_ids) * self.edge_block
                + len(c0.faces) * self.face_block + self.cell_block)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind.value,
            "k": self.k,
            "eta": [self.serendipity.eta_face, self.serendipity.eta_cell],
            "counts": [self.mesh.n_vertices, self.mesh.n_edges,
                       self.mesh.n_faces, self.mesh.n_cells],
            "blocks": [self.vertex_block, self.edge_block,
                       self.face_subsizes, self.cell_subsizes],
        }

    def layout_hash(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class DofVector:
    layout: DofLayout
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.layout.total_dim,):
            raise ValueError(f"values length {self.values.shape} does not match "
                             f"layout dimension {self.layout.total_dim}")

    @classmethod
    def zeros(cls, layout: DofLayout) -> "DofVector":
        return cls(layout, np.zeros(layout.total_dim))

    def copy(self) -> "DofVector":
        return DofVector(self.layout, self.values.copy())

    def restrict_cell(self, c: int) -> np.ndarray:
        return self.values[self.layout.cell_indices(c)]

    def restrict_face(self, f: int) -> np.ndarray:
        return self.values[self.layout.face_indices(f)]

    def restrict_edge(self, e: int) -> np.ndarray:
        return self.values[self.layout.edge_indices(e)]


def save_dofvector(vec: DofVector, path) -> None:
    """Flat little-endian binary plus a JSON sidecar with the layout hash."""
    path = Path(path)
    vec.values.astype("<f8").tofile(path)
    sidecar = {"layout_hash": vec.layout.layout_hash(),
               "kind": vec.layout.kind.value, "k": vec.layout.k,
               "n_dofs": vec.layout.total_dim}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


def load_dofvector(layout: DofLayout, path) -> DofVector:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    if sidecar["layout_hash"] != layout.layout_hash():
        raise ValueError("layout hash mismatch: file was written for a "
                         "different space/mesh")
    values = np.fromfile(path, dtype="<f8")
    return DofVector(layout, values)


# ---------------------------------------------------------------------------
# boundary subspaces (essential boundary conditions)


@dataclass
class BoundaryClassification:
    """Boundary faces split into essential and natural sets."""
    essential_faces: list[int] = field(default_factory=list)
    natural_faces: list[int] = field(default_factory=list)

    @property
    def essential_edges(self):
        return self._edges

    def finalise(self, mesh: Mesh):
        edges, verts = set(), set()
        for f in self.essential_faces:
            edges.update(mesh.faces[f].edges)
            verts.update(mesh.faces[f].vertex_loop)
        self._edges = sorted(edges)
        self._vertices = sorted(verts)
        return self

    @property
    def essential_vertices(self):
        return self._vertices


def classify_boundary(mesh: Mesh, classifier) -> BoundaryClassification:
    """Apply a per-face classifier ('essential' | 'natural') to the boundary.

    The classifier receives the Face object; returning anything else raises.
    """
    out = BoundaryClassification()
    for fid in mesh.boundary_faces():
        tag = classifier(mesh.faces[fid])
        if tag == "essential":
            out.essential_faces.append(fid)
        elif tag == "natural":
            out.natural_faces.append(fid)
        else:
            raise ValueError(f"boundary face {fid} left unclassified "
                             f"(classifier returned {tag!r})")
    return out.finalise(mesh)


def boundary_subspace_mask(layout: DofLayout,
                           classification: BoundaryClassification) -> np.ndarray:
    """Mask (True = constrained) of the DoFs zeroed by essential conditions.

    GRAD loses face, edge and vertex DoFs on the essential region; CURL loses
    face and edge DoFs; DIV has no essential DoFs in this scheme.
    """
    mask = np.zeros(layout.total_dim, dtype=bool)
    if layout.kind == SpaceKind.DIV:
        return mask
    for f in classification.essential_faces:
        mask[layout.face_dofs(f)] = True
    for e in classification.essential_edges:
        mask[layout.edge_dofs(e)] = True
    if layout.kind == SpaceKind.GRAD:
        for v in classification.essential_vertices:
            mask[layout.vertex_dofs(v)] = True
    return mask

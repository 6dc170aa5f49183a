"""Sparse P1 finite-element assembly and an SPD solver.

All volume integrands here are polynomials of total degree <= 3 per element
(nodal coefficient fields interpolated linearly, basis gradients constant),
so the closed-form vertex formulas below are exact.  Boundary integrands are
cubic along an edge and integrated with 2-point Gauss, also exact.

The sparse pattern is built once per mesh from the connectivity and cached;
refilling values for velocity-dependent matrices reuses the pattern.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NonFiniteInput, NotConverged
from .mesh import Mesh

_GAUSS2 = ((0.5 - 0.5 / np.sqrt(3.0), 0.5), (0.5 + 0.5 / np.sqrt(3.0), 0.5))


class Assembler:
    """Per-mesh CSR pattern plus scatter maps for vectorized assembly."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.n_nodes
        tri = mesh.triangles
        rows = np.repeat(tri, 3, axis=1).ravel()          # local test index j
        cols = np.tile(tri, (1, 3)).ravel()               # local trial index i
        out = mesh.outer_edge_idx
        self.outer_edges = mesh.edges[out]
        self.outer_normals = mesh.edge_normals[out]
        self.outer_lengths = mesh.edge_lengths[out]
        if len(self.outer_edges):
            erows = np.repeat(self.outer_edges, 2, axis=1).ravel()
            ecols = np.tile(self.outer_edges, (1, 2)).ravel()
            rows = np.concatenate([rows, erows])
            cols = np.concatenate([cols, ecols])

        pattern = sp.coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(n, n)
        ).tocsr()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self.indptr = pattern.indptr
        self.indices = pattern.indices
        self.nnz = pattern.nnz

        pos = {}
        for r in range(n):
            for k in range(self.indptr[r], self.indptr[r + 1]):
                pos[(r, self.indices[k])] = k
        self.tri_scatter = np.array(
            [[[pos[(tri[t, j], tri[t, i])] for i in range(3)] for j in range(3)]
             for t in range(mesh.n_triangles)],
            dtype=np.int64,
        )
        self.edge_scatter = np.array(
            [[[pos[(e[j], e[i])] for i in range(2)] for j in range(2)]
             for e in self.outer_edges],
            dtype=np.int64,
        ).reshape(-1, 2, 2)

    def _csr(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (data, self.indices, self.indptr),
            shape=(self.mesh.n_nodes, self.mesh.n_nodes),
        )

    def from_blocks(self, blocks: np.ndarray) -> sp.csr_matrix:
        """Scatter (n_t, 3, 3) element blocks [test, trial] into CSR."""
        data = np.bincount(
            self.tri_scatter.ravel(), weights=blocks.ravel(), minlength=self.nnz
        )
        return self._csr(data)

    def from_edge_blocks(self, blocks: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(
            self.edge_scatter.ravel(), weights=blocks.ravel(), minlength=self.nnz
        )
        return self._csr(data)


def assembler(mesh: Mesh) -> Assembler:
    """The mesh's cached Assembler (pattern built on first use)."""
    asm = mesh.cache.get("assembler")
    if asm is None:
        asm = Assembler(mesh)
        mesh.cache["assembler"] = asm
    return asm


# --------------------------------------------------------------------------
# Element matrices
# --------------------------------------------------------------------------

def _mass_blocks(mesh: Mesh, c: np.ndarray, elem_scale=None) -> np.ndarray:
    """Exact blocks of int_K c phi_i phi_j with c linear per element.

    Uses int_K phi1^p phi2^q phi3^r = p! q! r! / (p+q+r+2)! * 2A, giving
    M_ij = A/60 * (S + c_i + c_j + delta_ij (S + 2 c_i)),  S = c1+c2+c3.
    """
    ce = c[mesh.triangles]                       # (n_t, 3)
    s = ce.sum(axis=1)
    blocks = s[:, None, None] + ce[:, :, None] + ce[:, None, :]
    k = np.arange(3)
    blocks[:, k, k] += s[:, None] + 2.0 * ce
    blocks *= (mesh.areas / 60.0)[:, None, None]
    if elem_scale is not None:
        blocks *= np.asarray(elem_scale)[:, None, None]
    return blocks


def assemble_weighted_mass(mesh: Mesh, c, elem_scale=None) -> sp.csr_matrix:
    """A[j,i] = int c phi_i phi_j, c interpolated linearly per element."""
    return assembler(mesh).from_blocks(_mass_blocks(mesh, np.asarray(c), elem_scale))


def assemble_weighted_stiffness(mesh: Mesh, c, elem_scale=None) -> sp.csr_matrix:
    """A[j,i] = int c grad phi_i . grad phi_j with c as its element mean."""
    cbar = np.asarray(c)[mesh.triangles].mean(axis=1)
    if elem_scale is not None:
        cbar = cbar * np.asarray(elem_scale)
    g = mesh.grads
    blocks = np.einsum("tjd,tid->tji", g, g) * (cbar * mesh.areas)[:, None, None]
    return assembler(mesh).from_blocks(blocks)


def assemble_convection(mesh: Mesh, u, c=None) -> sp.csr_matrix:
    """C[j,i] = int c_bar phi_i (u . grad phi_j), u linear, exact quadrature.

    The optional nodal field c enters through its element mean.  The caller
    applies whatever sign its equation requires.
    """
    ue = np.asarray(u)[mesh.triangles]           # (n_t, 3, 2)
    w = ue.sum(axis=1)[:, None, :] + ue          # (n_t, i, 2)
    scale = mesh.areas / 12.0
    if c is not None:
        scale = scale * np.asarray(c)[mesh.triangles].mean(axis=1)
    blocks = np.einsum("tjd,tid->tji", mesh.grads, w) * scale[:, None, None]
    return assembler(mesh).from_blocks(blocks)


def assemble_outer_boundary_mass(mesh: Mesh, u) -> sp.csr_matrix:
    """B[j,i] = sum over outer edges of int phi_i (u.n) phi_j ds.

    u.n is linear along the edge; the cubic integrand is exact with the
    closed-form coefficients below.  Rows/cols of non-outer nodes are zero.
    """
    asm = assembler(mesh)
    if len(asm.outer_edges) == 0:
        return asm._csr(np.zeros(asm.nnz))
    ue = np.asarray(u)[asm.outer_edges]          # (n_e, 2, 2)
    w = np.einsum("ekd,ed->ek", ue, asm.outer_normals)   # (n_e, 2) nodal u.n
    w0, w1 = w[:, 0], w[:, 1]
    blocks = np.empty((len(w0), 2, 2))
    blocks[:, 0, 0] = w0 / 4.0 + w1 / 12.0
    blocks[:, 0, 1] = blocks[:, 1, 0] = (w0 + w1) / 12.0
    blocks[:, 1, 1] = w0 / 12.0 + w1 / 4.0
    blocks *= asm.outer_lengths[:, None, None]
    return asm.from_edge_blocks(blocks)


def assemble_load(mesh: Mesh, f) -> np.ndarray:
    """b_j = int f phi_j with f linear per element (exact)."""
    fe = np.asarray(f)[mesh.triangles]
    vals = (mesh.areas / 12.0)[:, None] * (fe.sum(axis=1)[:, None] + fe)
    return np.bincount(
        mesh.triangles.ravel(), weights=vals.ravel(), minlength=mesh.n_nodes
    )


def assemble_outer_boundary_load(mesh: Mesh, rho, u) -> np.ndarray:
    """b_j = sum over outer edges of int rho (u.n) phi_j ds (2-point Gauss)."""
    asm = assembler(mesh)
    out = np.zeros(mesh.n_nodes)
    if len(asm.outer_edges) == 0:
        return out
    re = np.asarray(rho)[asm.outer_edges]                 # (n_e, 2)
    ue = np.asarray(u)[asm.outer_edges]
    w = np.einsum("ekd,ed->ek", ue, asm.outer_normals)    # nodal u.n
    vals = np.zeros((len(re), 2))
    for s, wq in _GAUSS2:
        phi = np.array([1.0 - s, s])
        rq = re @ phi
        wn = w @ phi
        vals += wq * (rq * wn)[:, None] * phi[None, :]
    vals *= asm.outer_lengths[:, None]
    np.add.at(out, asm.outer_edges.ravel(), vals.ravel())
    return out


def lump(a: sp.csr_matrix) -> np.ndarray:
    """Row-sum (lumped) diagonal of a mass-type matrix."""
    return np.asarray(a.sum(axis=1)).ravel()


# --------------------------------------------------------------------------
# SPD solve
# --------------------------------------------------------------------------

def solve_spd(a, b, tol: float = 1e-10, x0=None, maxiter=None) -> np.ndarray:
    """Conjugate gradients with Jacobi preconditioning.

    Returns x with true relative residual ||Ax - b|| / ||b|| <= tol.
    Iteration cap 10 * n; raises NotConverged past it.
    """
    b = np.asarray(b, dtype=float)
    if not np.isfinite(b).all():
        raise NonFiniteInput("solve_spd: non-finite right-hand side")
    n = b.shape[0]
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return np.zeros(n)
    if maxiter is None:
        maxiter = 10 * n
    diag = a.diagonal()
    if not np.isfinite(diag).all():
        raise NonFiniteInput("solve_spd: non-finite matrix diagonal")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    gamma = r @ z
    for _ in range(maxiter):
        ap = a @ p
        alpha = gamma / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * normb:
            # accumulated r can drift from the true residual; verify
            r = b - a @ x
            if np.linalg.norm(r) <= tol * normb:
                return x
            z = inv_diag * r  # restart from the true residual
            p = z.copy()
            gamma = r @ z
            continue
        z = inv_diag * r
        gamma_new = r @ z
        p = z + (gamma_new / gamma) * p
        gamma = gamma_new
    raise NotConverged(
        f"solve_spd: {maxiter} iterations, residual "
        f"{np.linalg.norm(b - a @ x) / normb:.3e} > {tol:g}"
    )

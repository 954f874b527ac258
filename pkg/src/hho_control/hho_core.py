"""HHO spaces, local operators, global assembly and the Poisson solve.

The local gradient reconstruction maps the cell/face unknowns of a cell to a
polynomial one degree above the face degree through a Neumann problem closed
by a cell-mean constraint; the face stabilization penalizes the projected
trace residual with an h_T^{-1} weight.  Local stiffness contributions are
scattered into a global sparse matrix; cell unknowns can be eliminated
cell-by-cell (static condensation) leaving a face-only Schur complement.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import poly
from .poly import (CellBasis, FaceBasis, cell_quadrature, face_quadrature,
                   space_dimension)


class SolverError(Exception):
    """Linear solve failed; carries the achieved residual."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class HhoSpace:
    """Degree-(cell, face) DOF layout over a mesh.

    ``cell_degree`` is either the face degree k (equal-order space) or k+1
    (mixed-order space).  With ``dirichlet`` set, boundary-face DOFs exist in
    the vector layout but are excluded from solves and fixed to the supplied
    boundary data (zero by default), realizing the zero-trace space.
    """

    def __init__(self, mesh, face_degree, cell_degree=None, dirichlet=False):
        if cell_degree is None:
            cell_degree = face_degree
        if cell_degree not in (face_degree, face_degree + 1):
            raise ValueError("cell_degree must be face_degree or face_degree + 1")
        self.mesh = mesh
        self.face_degree = int(face_degree)
        self.cell_degree = int(cell_degree)
        self.dirichlet = bool(dirichlet)
        self.cell_dim = space_dimension(self.cell_degree)
        self.recon_dim = space_dimension(self.face_degree + 1)
        self.face_dim = self.face_degree + 1
        self.n_cell_dofs = mesh.n_cells * self.cell_dim
        self.n_dofs = self.n_cell_dofs + mesh.n_faces * self.face_dim
        self._ops = None
        self._stiffness = None
        self._cell_mass = None
        self._recon_mass = None

        fd = self.face_dim
        self.cell_dof_start = np.arange(mesh.n_cells) * self.cell_dim
        self.face_dof_start = self.n_cell_dofs + np.arange(mesh.n_faces) * fd
        active = np.ones(self.n_dofs, dtype=bool)
        if self.dirichlet:
            for f in mesh.boundary_face_ids:
                s = self.face_dof_start[f]
                active[s:s + fd] = False
        self.active_mask = active
        self.active_dofs = np.nonzero(active)[0]
        self.fixed_dofs = np.nonzero(~active)[0]

    # -- layout helpers ----------------------------------------------------

    def cell_dofs(self, i):
        s = self.cell_dof_start[i]
        return np.arange(s, s + self.cell_dim)

    def face_dofs(self, f):
        s = self.face_dof_start[f]
        return np.arange(s, s + self.face_dim)

    def local_dofs(self, i):
        """Global DOF indices of cell i: cell block, then faces in loop order."""
        parts = [self.cell_dofs(i)]
        for fid, _ in self.mesh.cell_faces[i]:
            parts.append(self.face_dofs(fid))
        return np.concatenate(parts)

    def zero_vector(self):
        return HhoVector(self, np.zeros(self.n_dofs))

    # -- operators and assembled matrices (built lazily, cached) ------------

    def local_ops(self):
        if self._ops is None:
            cache = {}
            self._ops = [build_local_operators(self, i, _cache=cache)
                         for i in range(self.mesh.n_cells)]
        return self._ops

    def stiffness_matrix(self):
        """Global a_h matrix over all DOFs (boundary rows included)."""
        if self._stiffness is None:
            self._stiffness = _assemble(self, lambda op: op.A)
        return self._stiffness

    def cell_mass_matrix(self):
        """Block-diagonal mass matrix of the cell blocks."""
        if self._cell_mass is None:
            self._cell_mass = _assemble_cellblocks(self, lambda op: op.M_cell)
        return self._cell_mass

    def recon_mass_matrix(self):
        """Matrix of (R v, R w) over all DOFs."""
        if self._recon_mass is None:
            self._recon_mass = _assemble(
                self, lambda op: op.G.T @ op.M_recon @ op.G)
        return self._recon_mass

    def boundary_values(self, g):
        """Fixed-DOF values for Dirichlet data g (zeros when g is None)."""
        vals = np.zeros(self.n_dofs)
        if g is not None:
            ops = self.local_ops()
            done = set()
            for op in ops:
                for j, fid in enumerate(op.face_ids):
                    if fid in done or fid not in self.mesh.boundary_face_ids:
                        continue
                    done.add(fid)
                    vals[self.face_dofs(fid)] = op.project_face(j, g)
        return vals[self.fixed_dofs]


class HhoVector:
    """Coefficient container matching an HhoSpace layout."""

    def __init__(self, space, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (space.n_dofs,):
            raise ValueError("coefficient length does not match the space")
        self.space = space
        self.values = values

    def cell_block(self, i):
        return self.values[self.space.cell_dofs(i)]

    def face_block(self, f):
        return self.values[self.space.face_dofs(f)]

    def local_block(self, i):
        return self.values[self.space.local_dofs(i)]

    def copy(self):
        return HhoVector(self.space, self.values.copy())

    def __add__(self, other):
        return HhoVector(self.space, self.values + other.values)

    def __sub__(self, other):
        return HhoVector(self.space, self.values - other.values)

    def __rmul__(self, a):
        return HhoVector(self.space, a * self.values)


class LocalOperators:
    """Per-cell reconstruction, stabilization and stiffness matrices.

    Congruent cells (same relative polygon, face traversal and degrees) share
    all matrices through an internal kernel cache; only the centroid and the
    global DOF indices are cell-specific.
    """

    __slots__ = ("cell_id", "space", "centroid", "face_ids", "dofs", "_k")

    def __init__(self, cell_id, space, centroid, face_ids, dofs, kernels):
        self.cell_id = cell_id
        self.space = space
        self.centroid = centroid
        self.face_ids = face_ids
        self.dofs = dofs
        self._k = kernels

    # geometry / bases
    @property
    def h(self):
        return self._k["h"]

    @property
    def measure(self):
        return self._k["measure"]

    @property
    def n_faces(self):
        return len(self.face_ids)

    def cell_basis(self):
        return CellBasis(self.space.cell_degree, self.centroid, self.h,
                         transform=self._k["Ql"])

    def recon_basis(self):
        return CellBasis(self.space.face_degree + 1, self.centroid, self.h,
                         transform=self._k["Qr"])

    # quadrature in global coordinates
    @property
    def qweights(self):
        return self._k["qw"]

    def qpoints(self):
        return self._k["qp"] + self.centroid

    def face_qweights(self, j):
        return self._k["fqw"][j]

    def face_qpoints(self, j):
        return self._k["fqp"][j] + self.centroid

    # matrices (shared, translation invariant)
    @property
    def G(self):
        """Reconstruction matrix: local DOFs -> P_{k+1}(T) coefficients."""
        return self._k["G"]

    @property
    def A(self):
        """Local stiffness G^T K_{k+1} G + S_T."""
        return self._k["A"]

    @property
    def S_faces(self):
        """Per-face stabilization matrices S_F: local DOFs -> P_k(F) coeffs."""
        return self._k["S_faces"]

    @property
    def M_cell(self):
        return self._k["M_cell"]

    @property
    def M_recon(self):
        return self._k["M_recon"]

    @property
    def M_faces(self):
        return self._k["M_faces"]

    @property
    def K_cell(self):
        return self._k["K_cell"]

    @property
    def K_recon(self):
        return self._k["K_recon"]

    @property
    def int_cell(self):
        """Vector of (phi_i, 1)_T over the cell basis."""
        return self._k["int_cell"]

    @property
    def cell_vals(self):
        """Cell basis values at the cell quadrature points."""
        return self._k["Vl"]

    @property
    def recon_vals(self):
        return self._k["Vr"]

    def face_cell_trace(self, j):
        """Cell basis values at face-j quadrature points."""
        return self._k["Vl_f"][j]

    def face_recon_trace(self, j):
        return self._k["Vr_f"][j]

    def face_vals(self, j):
        """Face basis values at face-j quadrature points."""
        return self._k["Vf"][j]

    # local operations
    def project_cell(self, f):
        """L2-projection of f onto the cell polynomial space."""
        w, pts = self.qweights, self.qpoints()
        rhs = self.cell_vals.T @ (w * f(pts))
        return np.linalg.solve(self.M_cell, rhs)

    def project_face(self, j, f):
        w, pts = self.face_qweights(j), self.face_qpoints(j)
        rhs = self.face_vals(j).T @ (w * f(pts))
        return np.linalg.solve(self.M_faces[j], rhs)

    def reduce(self, f):
        """Local reduction: cell projection plus per-face projections."""
        parts = [self.project_cell(f)]
        parts += [self.project_face(j, f) for j in range(self.n_faces)]
        return np.concatenate(parts)

    def reconstruct(self, local_coeffs):
        """Coefficients of R_T applied to a local DOF block."""
        return self.G @ np.asarray(local_coeffs)

    def stabilization(self, local_coeffs):
        """Per-face residual polynomials S_F and the value S_T(v, v)."""
        v = np.asarray(local_coeffs)
        polys = [S @ v for S in self.S_faces]
        val = 0.0
        for j, p in enumerate(polys):
            val += p @ self.M_faces[j] @ p
        return polys, val / self.h

    def elliptic_project(self, f):
        """R_T of the local reduction of f: identity on P_{k+1}(T)."""
        return self.reconstruct(self.reduce(f))


def build_local_operators(space, cell_id, _cache=None):
    """Construct (or fetch from the congruence cache) a cell's operators."""
    mesh = space.mesh
    cell = mesh.cells[cell_id]
    face_ids = [fid for fid, _ in mesh.cell_faces[cell_id]]
    dofs = space.local_dofs(cell_id)

    key = None
    if _cache is not None:
        rel_poly = np.round(cell.polygon - cell.centroid, 12)
        face_rel = []
        for fid, sign in mesh.cell_faces[cell_id]:
            face = mesh.faces[fid]
            face_rel.append(np.round(face.endpoints - cell.centroid, 12))
            face_rel.append(np.array([[sign, 0.0]]))
        key = (space.cell_degree, space.face_degree,
               rel_poly.tobytes(), np.vstack(face_rel).tobytes())
        hit = _cache.get(key)
        if hit is not None:
            return LocalOperators(cell_id, space, cell.centroid, face_ids, dofs, hit)

    k = space.face_degree
    l = space.cell_degree
    r = k + 1
    h = cell.diameter
    exactness = 2 * (k + 2)

    quad = cell_quadrature(cell, max(exactness, 2 * l, 2 * r))
    cb = poly.make_cell_basis(cell, l, quadrature=quad)
    rb = poly.make_cell_basis(cell, r, quadrature=quad)

    w = quad.weights
    Vl = cb.eval(quad.points)
    Gl = cb.grad(quad.points)
    Vr = rb.eval(quad.points)
    Gr = rb.grad(quad.points)

    M_cell = Vl.T @ (w[:, None] * Vl)
    M_recon = Vr.T @ (w[:, None] * Vr)
    N_lr = Vl.T @ (w[:, None] * Vr)
    K_cell = np.einsum("nid,n,njd->ij", Gl, w, Gl)
    K_recon = np.einsum("nid,n,njd->ij", Gr, w, Gr)
    int_cell = w @ Vl
    int_recon = w @ Vr

    n_faces = len(face_ids)
    dim_l, dim_r, dim_f = cb.dimension, rb.dimension, k + 1
    n_loc = dim_l + n_faces * dim_f

    # RHS of the reconstruction problem: (grad v_T, grad q)_T
    #   + sum_F (v_F - v_T, grad q . n)_F for q in the recon basis.
    rhs = np.zeros((dim_r, n_loc))
    rhs[:, :dim_l] = np.einsum("nid,n,njd->ji", Gl, w, Gr)

    fqw, fqp, Vf, Vl_f, Vr_f, M_faces = [], [], [], [], [], []
    for j, (fid, sign) in enumerate(mesh.cell_faces[cell_id]):
        face = mesh.faces[fid]
        fb = FaceBasis(k, face.endpoints[0], face.endpoints[1])
        fq = face_quadrature(face, max(exactness, 2 * r))
        valf = fb.eval(fq.points)
        vall = cb.eval(fq.points)
        valr = rb.eval(fq.points)
        gradr = rb.grad(fq.points)
        normal = sign * face.normal
        dn = gradr @ normal
        fqw.append(fq.weights)
        fqp.append(fq.points - cell.centroid)
        Vf.append(valf)
        Vl_f.append(vall)
        Vr_f.append(valr)
        M_faces.append(valf.T @ (fq.weights[:, None] * valf))
        fslice = slice(dim_l + j * dim_f, dim_l + (j + 1) * dim_f)
        rhs[:, :dim_l] -= dn.T @ (fq.weights[:, None] * vall)
        rhs[:, fslice] += dn.T @ (fq.weights[:, None] * valf)

    # Solve on the mean-free complement, then fix the constant so that
    # (R v, 1)_T = (v_T, 1)_T.  Basis function 0 is constant in both modes,
    # so K_recon has exactly the first row/column zero.
    G = np.zeros((dim_r, n_loc))
    G[1:, :] = np.linalg.solve(K_recon[1:, 1:], rhs[1:, :])
    mean_rhs = np.zeros(n_loc)
    mean_rhs[:dim_l] = int_cell
    G[0, :] = (mean_rhs - int_recon[1:] @ G[1:, :]) / int_recon[0]

    # Stabilization S_F = Pi_F(v_T|_F - v_F + ((I - Pi_T^l) R v)|_F).
    P_lr = np.linalg.solve(M_cell, N_lr)          # Pi_T^l on recon coefficients
    E_cell = np.zeros((dim_l, n_loc))
    E_cell[:, :dim_l] = np.eye(dim_l)
    S_faces = []
    A_stab = np.zeros((n_loc, n_loc))
    for j in range(n_faces):
        wts = fqw[j][:, None]
        proj = np.linalg.solve(M_faces[j], Vf[j].T)
        trace_ops = Vl_f[j] @ E_cell + (Vr_f[j] - Vl_f[j] @ P_lr) @ G
        S = proj @ (wts * trace_ops)
        fslice = slice(dim_l + j * dim_f, dim_l + (j + 1) * dim_f)
        S[:, fslice] -= np.eye(dim_f)
        S_faces.append(S)
        A_stab += S.T @ M_faces[j] @ S
    A = G.T @ K_recon @ G + A_stab / h
    A = 0.5 * (A + A.T)

    kernels = {
        "h": h, "measure": cell.measure,
        "Ql": cb.transform, "Qr": rb.transform,
        "qw": w, "qp": quad.points - cell.centroid,
        "Vl": Vl, "Vr": Vr,
        "M_cell": M_cell, "M_recon": M_recon, "N_lr": N_lr,
        "K_cell": K_cell, "K_recon": K_recon,
        "int_cell": int_cell, "int_recon": int_recon,
        "G": G, "A": A, "S_faces": S_faces, "M_faces": M_faces,
        "fqw": fqw, "fqp": fqp, "Vf": Vf, "Vl_f": Vl_f, "Vr_f": Vr_f,
    }
    if _cache is not None:
        _cache[key] = kernels
    return LocalOperators(cell_id, space, cell.centroid, face_ids, dofs, kernels)


# ---------------------------------------------------------------------------
# Projections and reduction over the whole mesh
# ---------------------------------------------------------------------------

def l2_project_cell(op, f):
    """Cell-block L2 projection coefficients of f on one cell."""
    return op.project_cell(f)


def l2_project_face(op, j, f):
    return op.project_face(j, f)


def reduce_function(space, f, include_boundary=False):
    """Global reduction of f: cellwise and facewise L2 projections.

    With a Dirichlet space the boundary blocks are zeroed (the interpolant
    lands in the zero-trace space) unless ``include_boundary`` asks for the
    faithful trace projections, which error measurement against solutions
    carrying lifted boundary data needs.
    """
    vec = np.zeros(space.n_dofs)
    mesh = space.mesh
    done = set()
    for op in space.local_ops():
        vec[space.cell_dofs(op.cell_id)] = op.project_cell(f)
        for j, fid in enumerate(op.face_ids):
            if fid in done:
                continue
            done.add(fid)
            if (space.dirichlet and not include_boundary
                    and fid in mesh.boundary_face_ids):
                continue
            vec[space.face_dofs(fid)] = op.project_face(j, f)
    return HhoVector(space, vec)


def reconstruct_all(space, vec):
    """Reconstruction coefficients R v on every cell, (n_cells, recon_dim)."""
    out = np.empty((space.mesh.n_cells, space.recon_dim))
    for op in space.local_ops():
        out[op.cell_id] = op.G @ vec.local_block(op.cell_id)
    return out


def h1h_seminorm_sq(space, vec):
    """Square of the discrete H1-like norm sum_T(|grad v_T|^2 + h_T^{-1}|v_T - v_F|^2)."""
    total = 0.0
    for op in space.local_ops():
        c = vec.cell_block(op.cell_id)
        total += c @ op.K_cell @ c
        jump = 0.0
        for j, fid in enumerate(op.face_ids):
            d = op.face_cell_trace(j) @ c - op.face_vals(j) @ vec.face_block(fid)
            jump += op.face_qweights(j) @ d ** 2
        total += jump / op.h
    return float(total)


# ---------------------------------------------------------------------------
# Loads and global assembly
# ---------------------------------------------------------------------------

def cell_load_vector(space, f):
    """Load tested against cell polynomials: (f, w_T)."""
    vec = np.zeros(space.n_dofs)
    for op in space.local_ops():
        fv = f(op.qpoints())
        vec[space.cell_dofs(op.cell_id)] = op.cell_vals.T @ (op.qweights * fv)
    return vec


def recon_load_vector(space, f):
    """Load tested against reconstructions: (f, R w)."""
    vec = np.zeros(space.n_dofs)
    for op in space.local_ops():
        fv = f(op.qpoints())
        vec[op.dofs] += op.G.T @ (op.recon_vals.T @ (op.qweights * fv))
    return vec


def _assemble(space, local_matrix):
    rows, cols, vals = [], [], []
    for op in space.local_ops():
        mat = local_matrix(op)
        d = op.dofs
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(mat.ravel())
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_dofs, space.n_dofs))
    return a.tocsr()


def _assemble_cellblocks(space, local_matrix):
    rows, cols, vals = [], [], []
    for op in space.local_ops():
        mat = local_matrix(op)
        d = space.cell_dofs(op.cell_id)
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(mat.ravel())
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.n_dofs, space.n_dofs))
    return a.tocsr()


def write_coo(matrix, path):
    """Dump a sparse matrix as one `row col value` triplet per line, 0-based."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


class GlobalSystem:
    """Assembled a_h system over active DOFs with optional condensation."""

    def __init__(self, space, load, boundary_data=None, condense=None):
        self.space = space
        if condense is None:
            condense = space.face_degree >= 1
        self.condensed = condense
        A = space.stiffness_matrix()
        self.matrix_full = A
        if callable(load):
            rhs_full = cell_load_vector(space, load)
        else:
            kind, payload = load
            if kind == "cell":
                rhs_full = cell_load_vector(space, payload)
            elif kind == "recon":
                rhs_full = recon_load_vector(space, payload)
            elif kind == "vector":
                rhs_full = np.asarray(payload, dtype=float)
            else:
                raise ValueError(f"unknown load kind {kind!r}")
        self.rhs_full = rhs_full
        act = space.active_dofs
        fix = space.fixed_dofs
        self.fixed_values = space.boundary_values(boundary_data)
        self.matrix = A[act][:, act].tocsr()
        self.rhs = rhs_full[act]
        if len(fix):
            self.rhs = self.rhs - A[act][:, fix] @ self.fixed_values

    def solve(self, method="direct", cg_tol=1e-12, cg_maxiter=10000):
        space = self.space
        x = np.zeros(space.n_dofs)
        x[space.fixed_dofs] = self.fixed_values
        if self.condensed:
            xa = self._solve_condensed(method, cg_tol, cg_maxiter)
        elif method == "cg":
            xa, info = spla.cg(self.matrix, self.rhs, rtol=cg_tol,
                               maxiter=cg_maxiter)
            if info != 0:
                raise SolverError(f"CG did not converge (info={info})")
        else:
            xa = spla.splu(self.matrix.tocsc()).solve(self.rhs)
        x[space.active_dofs] = xa
        vec = HhoVector(space, x)
        res = self.residual(vec)
        if not np.isfinite(res) or res > 1e-10:
            raise SolverError(f"linear solve residual {res:.3e} exceeds 1e-10",
                              residual=res)
        return vec

    def schur_complement(self):
        """Condensation cache: face Schur matrix, reduced rhs and recovery data."""
        space = self.space
        nc = space.n_cell_dofs
        rows, cols, vals = [], [], []
        rhs_faces = np.zeros(space.n_dofs - nc)
        full_rhs = self.rhs_full.copy()
        if len(space.fixed_dofs):
            lift = np.zeros(space.n_dofs)
            lift[space.fixed_dofs] = self.fixed_values
            full_rhs = full_rhs - self.matrix_full @ lift
        recovery = []
        dl = space.cell_dim
        for op in space.local_ops():
            A = op.A
            Acc, Acf, Afc, Aff = A[:dl, :dl], A[:dl, dl:], A[dl:, :dl], A[dl:, dl:]
            Acc_inv = np.linalg.inv(Acc)
            fc = full_rhs[space.cell_dofs(op.cell_id)]
            schur = Aff - Afc @ Acc_inv @ Acf
            fdofs = op.dofs[dl:] - nc
            rows.append(np.repeat(fdofs, len(fdofs)))
            cols.append(np.tile(fdofs, len(fdofs)))
            vals.append(schur.ravel())
            rhs_faces[fdofs] += -Afc @ Acc_inv @ fc
            recovery.append((op.cell_id, Acc_inv, Acf, fc, op.dofs[dl:]))
        # face-tested loads (e.g. reconstruction loads) contribute directly
        rhs_faces += full_rhs[nc:]
        S = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(space.n_dofs - nc, space.n_dofs - nc)).tocsr()
        act = np.nonzero(space.active_mask[nc:])[0]
        return S[act][:, act].tocsr(), rhs_faces[act], recovery

    def _solve_condensed(self, method, cg_tol, cg_maxiter):
        """Eliminate cell blocks cell-by-cell; solve the face Schur system."""
        space = self.space
        nc = space.n_cell_dofs
        Saa, ra, recovery = self.schur_complement()
        if method == "cg":
            xf_a, info = spla.cg(Saa, ra, rtol=cg_tol, maxiter=cg_maxiter)
            if info != 0:
                raise SolverError(f"CG did not converge (info={info})")
        else:
            xf_a = spla.splu(Saa.tocsc()).solve(ra)
        act = np.nonzero(space.active_mask[nc:])[0]
        xf = np.zeros(space.n_dofs - nc)
        xf[act] = xf_a
        x = np.zeros(space.n_dofs)
        x[nc:] = xf
        for cid, Acc_inv, Acf, fc, fdofs in recovery:
            x[space.cell_dofs(cid)] = Acc_inv @ (fc - Acf @ x[fdofs])
        return x[space.active_dofs]

    def residual(self, vec):
        """Relative residual of the full system at a candidate solution."""
        r = self.matrix_full @ vec.values - self.rhs_full
        # rows of fixed DOFs are not equations of the reduced system
        r = r[self.space.active_dofs]
        scale = np.linalg.norm(self.rhs)
        if scale == 0.0:
            scale = 1.0
        return float(np.linalg.norm(r) / scale)


def assemble(space, load, boundary_data=None, condense=None):
    """Build the global a_h system for a declared load functional."""
    return GlobalSystem(space, load, boundary_data=boundary_data,
                        condense=condense)


def solve_poisson(space, f, boundary_data=None, condense=None, method="direct"):
    """Solve a_h(y, w) = (f, w_T) on a Dirichlet space."""
    if not space.dirichlet:
        raise ValueError("solve_poisson requires a Dirichlet space")
    system = assemble(space, ("cell", f), boundary_data=boundary_data,
                      condense=condense)
    return system.solve(method=method)

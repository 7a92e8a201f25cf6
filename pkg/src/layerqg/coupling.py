"""Layer interaction matrix, per-mode elliptic solver, and eigenpairs.

The three potential-vorticity layers couple through the tridiagonal
template

    Ltilde = [[-l1, l1, 0], [l2, -2*l2, l2], [0, l3, -l3]]

built from positive stretching coefficients l_i.  Rescaling each row by
h_i = lam / l_i (diagonal matrix D) makes L = D Ltilde symmetric negative
semidefinite with kernel (1, 1, 1).  The vorticity inversion q = (A + L) psi
with A = D Laplacian then reduces, mode by mode, to the symmetric negative
definite 3x3 systems

    M_{n,m} = -lambda_{n,m} D + L .

Inverses of all M_{n,m} are cached at construction; the elliptic solve in
the time-step loop is a single batched 3x3 multiply.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError
from .spectral import LayerField, N_LAYERS, SpectralBasis

_TEMPLATE = np.array([[-1.0, 1.0, 0.0],
                      [1.0, -2.0, 1.0],
                      [0.0, 1.0, -1.0]])


def lambda_from_physical(h1, h2, h3, g1, g2, c):
    """Stretching coefficients from layer depths, reduced gravities and
    the Coriolis parameter: l1 = c^2/(H1 g1), l2 = c^2/(H2 g1),
    l3 = c^2/(H3 g2).

    Row 2 of the physical coupling carries two distinct combinations
    c^2/(H2 g1) and c^2/(H2 g2); the tridiagonal template uses a single
    l2 for both off-diagonal entries, and this constructor follows the
    template (the g1 choice).
    """
    for name, v in (("h1", h1), ("h2", h2), ("h3", h3),
                    ("g1", g1), ("g2", g2), ("c", c)):
        if v <= 0:
            raise ConfigurationError(f"{name} must be positive")
    return c**2 / (h1 * g1), c**2 / (h2 * g1), c**2 / (h3 * g2)


@dataclass(frozen=True)
class LayerCoupling:
    """Symmetrized coupling for one basis, with cached mode inverses."""

    basis: SpectralBasis
    lambdas: tuple          # raw (l1, l2, l3)
    scale: float            # lam with h_i * l_i = lam
    h: np.ndarray           # diag of D, shape (3,)
    l_matrix: np.ndarray    # symmetrized L, shape (3, 3)
    mode_inverse: np.ndarray = field(repr=False)  # (Nx, Ny, 3, 3)

    def mode_matrix(self, n, m):
        """M_{n,m} = -lambda_{n,m} D + L for 1-based mode indices."""
        lam_nm = self.basis.eigenvalues[n - 1, m - 1]
        return -lam_nm * np.diag(self.h) + self.l_matrix


def symmetrize(lambdas, basis: SpectralBasis, scale: float = 1.0) -> LayerCoupling:
    """Build D and L = D Ltilde and factorize every mode matrix.

    Hard errors if the constructed L fails symmetry, negative
    semidefiniteness, or the kernel condition, or if any mode matrix is
    not negative definite; these are construction invariants.
    """
    l1, l2, l3 = lambdas
    if min(l1, l2, l3) <= 0:
        raise ConfigurationError("all lambda_i must be positive")
    if scale <= 0:
        raise ConfigurationError("scale must be positive")
    h = scale / np.array([l1, l2, l3])
    ltilde = _TEMPLATE * np.array([l1, l2, l3])[:, None]
    lmat = np.diag(h) @ ltilde
    if np.max(np.abs(lmat - lmat.T)) > 1e-14 * max(1.0, scale):
        raise ConfigurationError("symmetrization failed: L not symmetric")
    if np.linalg.norm(lmat @ np.ones(3)) > 1e-14 * max(1.0, scale):
        raise ConfigurationError("symmetrization failed: (1,1,1) not in ker L")
    if np.max(np.linalg.eigvalsh(lmat)) > 1e-13 * max(1.0, scale):
        raise ConfigurationError("symmetrization failed: L not neg. semidefinite")

    lam = basis.eigenvalues                            # (Nx, Ny)
    modes = -lam[..., None, None] * np.diag(h) + lmat  # (Nx, Ny, 3, 3)
    ceiling = -np.min(h) * lam[..., None]
    eigs = np.linalg.eigvalsh(modes)
    slack = 1e-12 * (1.0 + np.max(h) * lam[..., None])  # eigh roundoff ~ ||M||
    if np.any(eigs > ceiling + slack):
        raise ConfigurationError("mode matrix not negative definite")
    inv = np.linalg.inv(modes)
    return LayerCoupling(basis=basis, lambdas=(l1, l2, l3), scale=scale,
                         h=h, l_matrix=lmat, mode_inverse=inv)


def apply_operator(coupling: LayerCoupling, psi_hat: np.ndarray) -> np.ndarray:
    """(A + L) psi, spectral coefficients in and out."""
    lam = coupling.basis.eigenvalues
    a_part = -lam[None, :, :] * coupling.h[:, None, None] * psi_hat
    l_part = np.einsum("ij,jnm->inm", coupling.l_matrix, psi_hat)
    return a_part + l_part


def solve_elliptic_coeffs(coupling: LayerCoupling, q_hat: np.ndarray) -> np.ndarray:
    """psi_hat with (A + L) psi = q, mode by mode."""
    if q_hat.shape != (N_LAYERS,) + coupling.basis.spectral_shape:
        raise ShapeError(f"q_hat shape {q_hat.shape} invalid")
    return np.einsum("nmij,jnm->inm", coupling.mode_inverse, q_hat,
                     optimize=True)


def solve_elliptic(q: LayerField, coupling: LayerCoupling) -> LayerField:
    """Stream function from potential vorticity (Dirichlet conditions)."""
    psi_hat = solve_elliptic_coeffs(coupling, q.spectral())
    return LayerField.from_coeffs(coupling.basis, psi_hat)


def velocity_grids(basis: SpectralBasis, psi_hat: np.ndarray):
    """u = grad^perp psi = (-psi_y, psi_x) per layer, on the grid."""
    return basis.perp_grad_grids(psi_hat)


def velocity(psi: LayerField):
    """Velocity components as two grid arrays of shape (3, Gx+2, Gy+2)."""
    return velocity_grids(psi.basis, psi.spectral())


def divergence_grid(basis: SpectralBasis, psi_hat: np.ndarray) -> np.ndarray:
    """div grad^perp psi synthesized on the grid (identically zero)."""
    nf = 2.0 / np.sqrt(basis.lx * basis.ly)
    c = (-basis.kx * basis.ky + basis.kx * basis.ky) * psi_hat * nf
    return basis.synth_cc(c)


@dataclass(frozen=True)
class OperatorEigenpairs:
    """The K smallest-|mu| eigenpairs of (A + L).

    Entries are rho_k = e_{n_k, m_k} (x) v_k with (A + L) rho_k = mu_k rho_k,
    sorted by |mu| ascending with (n, m, j) lexicographic tie-break; j
    indexes a mode's three eigenvalues in ascending |mu|.  Eigenvector
    signs are fixed so the largest-magnitude component is positive.
    """

    basis: SpectralBasis
    coupling: LayerCoupling
    mode_n: np.ndarray   # (K,) 1-based
    mode_m: np.ndarray   # (K,)
    comp_j: np.ndarray   # (K,) 0..2
    mu: np.ndarray       # (K,) negative
    vec: np.ndarray      # (K, 3) orthonormal within each mode

    def __len__(self):
        return len(self.mu)

    @property
    def spatial_eigenvalues(self):
        """lambda_{n,m} per entry, shape (K,)."""
        return self.basis.eigenvalues[self.mode_n - 1, self.mode_m - 1]

    def field(self, k: int) -> LayerField:
        """rho_k as a LayerField."""
        c = np.zeros((N_LAYERS,) + self.basis.spectral_shape)
        c[:, self.mode_n[k] - 1, self.mode_m[k] - 1] = self.vec[k]
        return LayerField.from_coeffs(self.basis, c)

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """Pairings <f, rho_k> for all k from spectral coefficients."""
        vals = coeffs[:, self.mode_n - 1, self.mode_m - 1]  # (3, K)
        return np.einsum("ik,ki->k", vals, self.vec)


def eigenpairs(coupling: LayerCoupling, basis: SpectralBasis,
               k: int) -> OperatorEigenpairs:
    """Compute the K smallest-|mu| eigenpairs of (A + L)."""
    total = N_LAYERS * basis.nx * basis.ny
    if not (1 <= k <= total):
        raise ConfigurationError(f"k={k} out of range 1..{total}")
    lam = basis.eigenvalues
    modes = -lam[..., None, None] * np.diag(coupling.h) + coupling.l_matrix
    eigval, eigvec = np.linalg.eigh(modes)  # ascending eigenvalues per mode
    # ascending |mu| within a mode = reversed eigh order (all mu < 0)
    eigval = eigval[..., ::-1]
    eigvec = eigvec[..., ::-1]
    # canonical sign: largest-|component| positive
    idx = np.argmax(np.abs(eigvec), axis=-2, keepdims=True)
    signs = np.sign(np.take_along_axis(eigvec, idx, axis=-2))
    signs[signs == 0] = 1.0
    eigvec = eigvec * signs

    nn, mm, jj = np.meshgrid(np.arange(1, basis.nx + 1),
                             np.arange(1, basis.ny + 1),
                             np.arange(N_LAYERS), indexing="ij")
    flat_mu = eigval.reshape(-1)
    order = np.lexsort((jj.reshape(-1), mm.reshape(-1), nn.reshape(-1),
                        np.abs(flat_mu)))[:k]
    vecs = eigvec.transpose(0, 1, 3, 2).reshape(-1, N_LAYERS)  # row k = v_k
    return OperatorEigenpairs(
        basis=basis, coupling=coupling,
        mode_n=nn.reshape(-1)[order].astype(np.int64),
        mode_m=mm.reshape(-1)[order].astype(np.int64),
        comp_j=jj.reshape(-1)[order].astype(np.int64),
        mu=flat_mu[order],
        vec=vecs[order])

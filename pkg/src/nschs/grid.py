"""Uniform rectangular grid with cell-centred scalars and MAC-staggered velocity.

Scalars live at cell centres, shape ``(nx, ny)``, with axis 0 along x.
Velocity components live on faces: ``ux`` on vertical faces ``(nx + 1, ny)``
and ``uy`` on horizontal faces ``(nx, ny + 1)``. Homogeneous Neumann
conditions for scalars are realised by mirror ghosts, so every face gradient
on the boundary vanishes. No-slip for velocity is realised by zero normal
faces and odd ghosts for tangential components.

With these conventions the cell Laplacian is diagonalised by the type-II DCT,
and the componentwise velocity Laplacian by mixed type-I/type-II DSTs.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NSCHS_THREADS", "1")))
    except ValueError:
        return 1


class SingularSymbolError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MACField:
    ux: np.ndarray
    uy: np.ndarray

    def __add__(self, other: "MACField") -> "MACField":
        return MACField(self.ux + other.ux, self.uy + other.uy)

    def __sub__(self, other: "MACField") -> "MACField":
        return MACField(self.ux - other.ux, self.uy - other.uy)

    def __mul__(self, c) -> "MACField":
        return MACField(c * self.ux, c * self.uy)

    __rmul__ = __mul__

    def __neg__(self) -> "MACField":
        return MACField(-self.ux, -self.uy)

    def copy(self) -> "MACField":
        return MACField(self.ux.copy(), self.uy.copy())

    def max_abs(self) -> float:
        return float(max(np.abs(self.ux).max(), np.abs(self.uy).max()))


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zeros_mac(self) -> MACField:
        return MACField(np.zeros((self.nx + 1, self.ny)), np.zeros((self.nx, self.ny + 1)))

    # ------------------------------------------------------------------ integrals
    def mean(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume / self.area)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(f * g) * self.cell_volume)

    def face_inner(self, v: MACField, w: MACField) -> float:
        return float((np.sum(v.ux * w.ux) + np.sum(v.uy * w.uy)) * self.cell_volume)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)

    # ------------------------------------------------------------------ stencils
    def gradient(self, f: np.ndarray) -> MACField:
        gx = np.zeros((self.nx + 1, self.ny))
        gy = np.zeros((self.nx, self.ny + 1))
        gx[1:-1] = np.diff(f, axis=0) / self.hx
        gy[:, 1:-1] = np.diff(f, axis=1) / self.hy
        return MACField(gx, gy)

    def divergence(self, v: MACField) -> np.ndarray:
        return np.diff(v.ux, axis=0) / self.hx + np.diff(v.uy, axis=1) / self.hy

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.divergence(self.gradient(f))

    def biharmonic(self, f: np.ndarray) -> np.ndarray:
        return self.laplacian(self.laplacian(f))

    def triharmonic(self, f: np.ndarray) -> np.ndarray:
        return self.laplacian(self.biharmonic(f))

    def to_faces(self, f: np.ndarray) -> MACField:
        """Arithmetic average of adjacent cells; boundary faces copy the boundary cell."""
        fx = np.empty((self.nx + 1, self.ny))
        fx[1:-1] = 0.5 * (f[:-1] + f[1:])
        fx[0], fx[-1] = f[0], f[-1]
        fy = np.empty((self.nx, self.ny + 1))
        fy[:, 1:-1] = 0.5 * (f[:, :-1] + f[:, 1:])
        fy[:, 0], fy[:, -1] = f[:, 0], f[:, -1]
        return MACField(fx, fy)

    def to_cells(self, v: MACField) -> tuple[np.ndarray, np.ndarray]:
        return 0.5 * (v.ux[:-1] + v.ux[1:]), 0.5 * (v.uy[:, :-1] + v.uy[:, 1:])

    def grad_sq(self, f: np.ndarray) -> np.ndarray:
        """Cell-centred |grad f|^2: per direction, the mean of the two squared face differences."""
        g = self.gradient(f)
        return 0.5 * (g.ux[:-1] ** 2 + g.ux[1:] ** 2) + 0.5 * (g.uy[:, :-1] ** 2 + g.uy[:, 1:] ** 2)

    def flux_divergence(self, coeff: np.ndarray, f: np.ndarray) -> np.ndarray:
        """div(c_face grad f) with c averaged to faces."""
        c = self.to_faces(coeff)
        g = self.gradient(f)
        return self.divergence(MACField(c.ux * g.ux, c.uy * g.uy))

    def advect(self, v: MACField, f: np.ndarray) -> np.ndarray:
        """Conservative transport div(v f_face) with centred face values."""
        fc = self.to_faces(f)
        return self.divergence(MACField(v.ux * fc.ux, v.uy * fc.uy))

    # ------------------------------------------------------------------ spectral
    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues (<= 0) of the Neumann cell Laplacian, indexed by DCT mode (kx, ky)."""
        lx = -(4.0 / self.hx**2) * np.sin(np.pi * np.arange(self.nx) / (2 * self.nx)) ** 2
        ly = -(4.0 / self.hy**2) * np.sin(np.pi * np.arange(self.ny) / (2 * self.ny)) ** 2
        return lx[:, None] + ly[None, :]

    def dct(self, f: np.ndarray) -> np.ndarray:
        return sfft.dctn(f, type=2, norm="ortho", workers=_workers())

    def idct(self, c: np.ndarray) -> np.ndarray:
        return sfft.idctn(c, type=2, norm="ortho", workers=_workers())

    def symbol(self, coeffs) -> np.ndarray:
        a, b, c, d = coeffs
        lam = self.eigenvalues
        return a + lam * (b + lam * (c + lam * d))

    def apply_polynomial(self, coeffs, f: np.ndarray) -> np.ndarray:
        """(a I + b L + c L^2 + d L^3) f with the stencil Laplacian L."""
        a, b, c, d = coeffs
        l1 = self.laplacian(f)
        out = a * f + b * l1
        if c or d:
            l2 = self.laplacian(l1)
            out = out + c * l2
            if d:
                out = out + d * self.laplacian(l2)
        return out

    def helmholtz_solve(self, coeffs, rhs: np.ndarray) -> np.ndarray:
        """Solve (a + b L + c L^2 + d L^3) f = rhs by DCT diagonalisation.

        A vanishing constant-mode symbol is allowed when the right-hand side is
        mean-free; the returned solution then has zero mean.
        """
        sym = self.symbol(coeffs)
        scale = float(np.abs(sym).max())
        tiny = np.abs(sym) <= 1e-13 * scale
        r = self.dct(rhs)
        if tiny.any():
            bad = np.argwhere(tiny)
            for kx, ky in bad:
                if (kx, ky) != (0, 0):
                    raise SingularSymbolError(f"operator symbol vanishes on cosine mode ({kx}, {ky})")
            rms = float(np.sqrt(np.mean(rhs * rhs)))
            if abs(self.mean(rhs)) > 1e-10 * max(rms, 1e-300):
                raise SingularSymbolError(
                    "operator symbol vanishes on the constant mode (0, 0) and rhs is not mean-free"
                )
            sym = np.where(tiny, 1.0, sym)
            r[0, 0] = 0.0
        return self.idct(r / sym)

    def inv_neumann_laplacian(self, f: np.ndarray) -> np.ndarray:
        """The map N: mean-free f -> mean-free u with -L u = f."""
        rms = float(np.sqrt(np.mean(f * f)))
        if abs(self.mean(f)) > 1e-10 * rms:
            raise ValueError(f"inverse Neumann Laplacian needs mean-free input (mean = {self.mean(f):.3e})")
        r = self.dct(f)
        lam = self.eigenvalues.copy()
        lam[0, 0] = -1.0
        r = r / (-lam)
        r[0, 0] = 0.0
        return self.idct(r)

    @cached_property
    def mode_order(self) -> np.ndarray:
        """Flat DCT indices sorted by |eigenvalue|, ties broken by (kx, ky)."""
        kx, ky = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        key = np.round(-self.eigenvalues.ravel(), 9)
        return np.lexsort((ky.ravel(), kx.ravel(), key))

    def galerkin_project(self, f: np.ndarray, n_modes: int) -> np.ndarray:
        """Keep the first ``n_modes`` cosine eigenmodes of f."""
        if not 1 <= n_modes <= self.nx * self.ny:
            raise ValueError(f"n_modes must lie in [1, {self.nx * self.ny}]")
        c = self.dct(f).ravel()
        keep = np.zeros(c.size, dtype=bool)
        keep[self.mode_order[:n_modes]] = True
        c[~keep] = 0.0
        return self.idct(c.reshape(self.shape))

    # ------------------------------------------------------------------ norms
    def norms(self, f: np.ndarray) -> dict:
        l2sq = self.inner(f, f)
        g = self.gradient(f)
        out = {
            "l2": float(np.sqrt(l2sq)),
            "h1": float(np.sqrt(l2sq + self.face_inner(g, g))),
            "linf": float(np.abs(f).max()),
        }
        fm = f - self.mean(f)
        out["v0_star"] = float(np.sqrt(max(self.inner(fm, self.inv_neumann_laplacian(fm)), 0.0)))
        return out

    def mac_norms(self, v: MACField) -> dict:
        l2sq = self.face_inner(v, v)
        gradsq = -self.face_inner(v, self.vector_laplacian(v))
        return {"l2": float(np.sqrt(l2sq)), "h1": float(np.sqrt(l2sq + max(gradsq, 0.0)))}

    # ------------------------------------------------------------------ velocity operators
    def _ghost_y(self, ux: np.ndarray) -> np.ndarray:
        return np.concatenate([-ux[:, :1], ux, -ux[:, -1:]], axis=1)

    def _ghost_x(self, uy: np.ndarray) -> np.ndarray:
        return np.concatenate([-uy[:1], uy, -uy[-1:]], axis=0)

    def vector_laplacian(self, v: MACField) -> MACField:
        """Componentwise Laplacian on interior faces with no-slip ghosts."""
        hx2, hy2 = self.hx**2, self.hy**2
        ux, uy = v.ux, v.uy
        lx = np.zeros_like(ux)
        ey = self._ghost_y(ux)
        lx[1:-1] = (ux[2:] - 2 * ux[1:-1] + ux[:-2]) / hx2 + (
            ey[1:-1, 2:] - 2 * ey[1:-1, 1:-1] + ey[1:-1, :-2]
        ) / hy2
        ly = np.zeros_like(uy)
        ex = self._ghost_x(uy)
        ly[:, 1:-1] = (uy[:, 2:] - 2 * uy[:, 1:-1] + uy[:, :-2]) / hy2 + (
            ex[2:, 1:-1] - 2 * ex[1:-1, 1:-1] + ex[:-2, 1:-1]
        ) / hx2
        return MACField(lx, ly)

    @cached_property
    def _vector_eigs(self):
        def dirichlet(n, h):  # interior faces, type-I sine modes
            k = np.arange(1, n)
            return -(4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2

        def odd(n, h):  # cell-aligned with odd ghosts, type-II sine modes
            k = np.arange(1, n + 1)
            return -(4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2

        ex = dirichlet(self.nx, self.hx)[:, None] + odd(self.ny, self.hy)[None, :]
        ey = odd(self.nx, self.hx)[:, None] + dirichlet(self.ny, self.hy)[None, :]
        return ex, ey

    def vector_helmholtz_solve(self, a: float, b: float, rhs: MACField) -> MACField:
        """Solve (a + b L_vec) u = rhs on interior faces; boundary normal faces are set to 0."""
        w = _workers()
        ex, ey = self._vector_eigs
        out = self.zeros_mac()
        r = sfft.dst(rhs.ux[1:-1], type=1, axis=0, norm="ortho", workers=w)
        r = sfft.dst(r, type=2, axis=1, norm="ortho", workers=w)
        r /= a + b * ex
        r = sfft.idst(r, type=2, axis=1, norm="ortho", workers=w)
        out.ux[1:-1] = sfft.idst(r, type=1, axis=0, norm="ortho", workers=w)
        r = sfft.dst(rhs.uy[:, 1:-1], type=1, axis=1, norm="ortho", workers=w)
        r = sfft.dst(r, type=2, axis=0, norm="ortho", workers=w)
        r /= a + b * ey
        r = sfft.idst(r, type=2, axis=0, norm="ortho", workers=w)
        out.uy[:, 1:-1] = sfft.idst(r, type=1, axis=1, norm="ortho", workers=w)
        return out

    def node_average(self, f: np.ndarray) -> np.ndarray:
        p = np.pad(f, 1, mode="edge")
        return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])

    @cached_property
    def node_weights(self) -> np.ndarray:
        w = np.ones((self.nx + 1, self.ny + 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w

    def strain(self, v: MACField):
        """Discrete strain rate: D11, D22 at cells and D12 at nodes."""
        d11 = np.diff(v.ux, axis=0) / self.hx
        d22 = np.diff(v.uy, axis=1) / self.hy
        dyux = np.diff(self._ghost_y(v.ux), axis=1) / self.hy
        dxuy = np.diff(self._ghost_x(v.uy), axis=0) / self.hx
        return d11, d22, 0.5 * (dyux + dxuy)

    def viscous_dissipation(self, v: MACField, nu: np.ndarray) -> float:
        """Integral of nu |Du|^2 with nu given at cell centres."""
        d11, d22, d12 = self.strain(v)
        nun = self.node_average(nu)
        return self.cell_volume * float(
            np.sum(nu * (d11**2 + d22**2)) + 2.0 * np.sum(self.node_weights * nun * d12**2)
        )

    def viscous_operator(self, v: MACField, nu: np.ndarray) -> MACField:
        """div(nu Du) on interior faces; the negative gradient of half the dissipation."""
        d11, d22, d12 = self.strain(v)
        q = self.node_weights * self.node_average(nu) * d12
        s11 = nu * d11
        s22 = nu * d22
        # adjoint of the node derivative in y (with odd ghosts) applied to q
        cy = (q[:, :-1] - q[:, 1:]) / self.hy
        cy[:, 0] += q[:, 0] / self.hy
        cy[:, -1] -= q[:, -1] / self.hy
        cx = (q[:-1] - q[1:]) / self.hx
        cx[0] += q[0] / self.hx
        cx[-1] -= q[-1] / self.hx
        fx = np.zeros((self.nx + 1, self.ny))
        fy = np.zeros((self.nx, self.ny + 1))
        fx[1:-1] = np.diff(s11, axis=0) / self.hx - cy[1:-1]
        fy[:, 1:-1] = np.diff(s22, axis=1) / self.hy - cx[:, 1:-1]
        return MACField(fx, fy)

    def momentum_advection(self, v: MACField) -> MACField:
        """Divergence-form (u . grad) u on interior faces with centred interpolation."""
        ux, uy = v.ux, v.uy
        uc = 0.5 * (ux[:-1] + ux[1:])
        vc = 0.5 * (uy[:, :-1] + uy[:, 1:])
        ey = self._ghost_y(ux)
        ex = self._ghost_x(uy)
        un = 0.5 * (ey[:, :-1] + ey[:, 1:])
        vn = 0.5 * (ex[:-1] + ex[1:])
        uv = un * vn
        nx_ = np.zeros_like(ux)
        ny_ = np.zeros_like(uy)
        nx_[1:-1] = np.diff(uc * uc, axis=0) / self.hx + np.diff(uv[1:-1], axis=1) / self.hy
        ny_[:, 1:-1] = np.diff(vc * vc, axis=1) / self.hy + np.diff(uv[:, 1:-1], axis=0) / self.hx
        return MACField(nx_, ny_)

    def project(self, v: MACField) -> tuple[MACField, np.ndarray]:
        """Discrete Helmholtz-Hodge projection: returns (v - grad q, q) with div = 0."""
        d = self.divergence(v)
        d = d - self.mean(d)
        q = self.helmholtz_solve((0.0, 1.0, 0.0, 0.0), d)
        return v - self.gradient(q), q

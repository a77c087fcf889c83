"""Discretized Zakharov-Shabat operators and their eigensystems.

Two discretizations are provided.

``CentralDifference``
    The differential operator itself, ``[[i Dc, u], [s u*, -i Dc]]`` with a
    centered first difference ``Dc`` truncated at the grid edges.  It is
    Hermitian for the dark problem but suffers from fermion doubling, so the
    spectrum carries edge artifacts.

``ModifiedAblowitzLadik``
    A one-step propagator ``W = S C`` of split-step (quantum walk) form.  The
    per-site coin ``C_k = exp(-i dx V_k)`` with ``V = [[0, u], [s u*, 0]]``
    is exact for piecewise constant ``u``; the shift ``S`` moves ``psi1`` one
    site left and ``psi2`` one site right and reflects at the ends, which is
    the discrete version of the vanishing boundary condition.  Eigenvalues
    ``w`` of ``W`` map to spectral parameters by ``w = exp(-i z dx)``.  For the
    dark problem ``W`` is unitary.  For the bright one ``det C_k = 1`` and the
    bulk respects the symmetry ``z -> z*``; the reflecting ends do not, so
    only modes localized away from the ends come in conjugate pairs.  The
    free spectrum is exactly uniform on the quasi-energy circle
    ``xi in (-pi/dx, pi/dx]``.

Eigenvectors are stored in block layout: the first ``n`` entries are
``psi1`` and the last ``n`` are ``psi2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, DegenerateNormError, NumericalError, ValidationError
from .signal import Grid, SignalRealization

__all__ = [
    "Kind",
    "Scheme",
    "OperatorMatrix",
    "ZsSpectrum",
    "build_operator",
    "eigensolve",
    "discrete_mode_filter",
    "coins",
    "walk_matrix",
    "central_difference_matrix",
    "hermiticity_residual",
    "trace_residual",
    "write_spectrum",
]


class Kind(str, enum.Enum):
    HERMITIAN_DARK = "dark"
    NON_HERMITIAN_BRIGHT = "bright"

    @property
    def sign(self) -> int:
        """Sign ``s`` of the lower coupling ``s u``."""
        return 1 if self is Kind.HERMITIAN_DARK else -1

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        aliases = {"hermitiandark": "dark", "nonhermitianbright": "bright"}
        v = str(value).lower().replace("_", "").replace("-", "")
        try:
            return cls(aliases.get(v, v))
        except ValueError:
            raise ConfigurationError(f"unknown operator kind {value!r}") from None


class Scheme(str, enum.Enum):
    CENTRAL_DIFFERENCE = "cd"
    MODIFIED_ABLOWITZ_LADIK = "mal"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        aliases = {"centraldifference": "cd", "modifiedablowitzladik": "mal", "walk": "mal"}
        v = str(value).lower().replace("_", "").replace("-", "")
        try:
            return cls(aliases.get(v, v))
        except ValueError:
            raise ConfigurationError(f"unknown scheme {value!r}") from None


def coins(u, dx, sign) -> np.ndarray:
    """Per-site 2x2 coins ``exp(-i dx [[0, u], [sign u*, 0]])``.

    Returns an array of shape ``(n, 2, 2)``.
    """
    u = np.asarray(u, dtype=complex)
    a = np.abs(u) * dx
    safe = np.where(a > 0, a, 1.0)
    if sign < 0:
        c = np.cosh(a)
        f = np.where(a > 0, np.sinh(a) / safe, 1.0)
    else:
        c = np.cos(a)
        f = np.where(a > 0, np.sin(a) / safe, 1.0)
    C = np.empty((u.size, 2, 2), dtype=complex)
    C[:, 0, 0] = c
    C[:, 1, 1] = c
    C[:, 0, 1] = -1j * dx * u * f
    C[:, 1, 0] = -1j * dx * sign * np.conj(u) * f
    return C


def _walk_index(n):
    """Block-layout index of interleaved walk coordinates."""
    idx = np.empty(2 * n, dtype=np.intp)
    idx[0::2] = np.arange(n)
    idx[1::2] = n + np.arange(n)
    return idx


def walk_matrix(u, dx, sign) -> np.ndarray:
    """Dense one-step propagator ``W = S C`` in block layout."""
    n = len(u)
    C = coins(u, dx, sign)
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    k = np.arange(n - 1)
    p1 = np.arange(n)
    p2 = n + np.arange(n)
    for j, col in enumerate((p1, p2)):
        # psi1 moves left, psi2 moves right, both reflect at the ends
        W[p1[k], col[k + 1]] = C[k + 1, 0, j]
        W[p2[k + 1], col[k]] = C[k, 1, j]
        W[p1[n - 1], col[n - 1]] = C[n - 1, 1, j]
        W[p2[0], col[0]] = C[0, 0, j]
    return W


def central_difference_matrix(u, dx, sign) -> np.ndarray:
    """Dense ``[[i Dc, u], [sign u*, -i Dc]]`` with truncated edges."""
    n = len(u)
    Dc = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * dx)
    M = np.zeros((2 * n, 2 * n), dtype=complex)
    M[:n, :n] = 1j * Dc
    M[n:, n:] = -1j * Dc
    M[:n, n:] = np.diag(u)
    M[n:, :n] = sign * np.diag(np.conj(u))
    return M


@dataclass
class OperatorMatrix:
    """A discretized operator.

    For the ``ModifiedAblowitzLadik`` scheme ``matrix`` is the propagator
    ``W``; otherwise it is the operator itself.
    """

    kind: Kind
    scheme: Scheme
    matrix: np.ndarray
    grid: Grid
    source_signal_seed: int | None = None
    D: float | None = None
    meta: dict = field(default_factory=dict)
    coupling: np.ndarray | None = None

    @property
    def is_propagator(self) -> bool:
        return self.scheme is Scheme.MODIFIED_ABLOWITZ_LADIK

    def generator(self) -> np.ndarray:
        """Hermitian generator ``i (I + W)^-1 (I - W)`` of a dark propagator.

        Its eigenvalues ``mu`` relate to ``z`` by ``z dx = -2 arctan(mu)``.
        """
        if not self.is_propagator:
            return self.matrix
        n = self.matrix.shape[0]
        eye = np.eye(n)
        return 1j * np.linalg.solve(eye + self.matrix, eye - self.matrix)


def build_operator(signal: SignalRealization, kind="dark", scheme="mal") -> OperatorMatrix:
    """Assemble the dense operator for one realization."""
    kind = Kind.parse(kind)
    scheme = Scheme.parse(scheme)
    grid = signal.grid
    if grid.n_points < 4:
        raise ValidationError("operator needs at least 4 grid points")
    u = np.asarray(signal.samples, dtype=complex)
    if not np.all(np.isfinite(u)):
        raise ValidationError("signal contains non-finite samples")
    if scheme is Scheme.MODIFIED_ABLOWITZ_LADIK:
        M = walk_matrix(u, grid.step, kind.sign)
    else:
        M = central_difference_matrix(u, grid.step, kind.sign)
    return OperatorMatrix(kind, scheme, M, grid, signal.seed, signal.D,
                          {"member": signal.member, "polarization": signal.polarization.value}, u)


def hermiticity_residual(op: OperatorMatrix) -> float:
    """Relative anti-Hermitian part ``||A - A^H|| / ||A||`` of the generator."""
    A = op.generator()
    return float(np.linalg.norm(A - A.conj().T) / max(np.linalg.norm(A), 1e-300))


@dataclass
class ZsSpectrum:
    """Eigenpairs of one operator realization.

    Attributes
    ----------
    eigenvalues : ndarray of complex
        Spectral parameters ``z``, sorted by real part.
    eigenvectors : ndarray, shape (m, 2n), optional
        One row per eigenvalue, block layout, unit ``sum |psi|^2 dx``.
    norms : ndarray
        Dark: the L2 norm of the raw solver vector.  Bright:
        ``sum psi1 psi2 dx`` of the coin-midpoint components of the stored
        (L2 normalized) vector, which enters first-order perturbation theory.
    propagator_eigenvalues : ndarray, optional
        Raw ``w`` for the walk scheme.
    coupling : ndarray, optional
        Potential samples of the walk scheme, used by :meth:`midpoint`.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    norms: np.ndarray
    kind: Kind
    scheme: Scheme
    grid: Grid
    D: float | None = None
    seed: int | None = None
    member: int | None = None
    propagator_eigenvalues: np.ndarray | None = None
    coupling: np.ndarray | None = None

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def psi1(self) -> np.ndarray:
        return self.eigenvectors[:, : self.grid.n_points]

    @property
    def psi2(self) -> np.ndarray:
        return self.eigenvectors[:, self.grid.n_points:]

    def subset(self, mask) -> "ZsSpectrum":
        vec = None if self.eigenvectors is None else self.eigenvectors[mask]
        w = None if self.propagator_eigenvalues is None else self.propagator_eigenvalues[mask]
        return replace(self, eigenvalues=self.eigenvalues[mask], eigenvectors=vec,
                       norms=self.norms[mask], propagator_eigenvalues=w)

    def without_vectors(self) -> "ZsSpectrum":
        return replace(self, eigenvectors=None)

    def midpoint(self):
        """Components ``(psi1, psi2)`` where the potential acts.

        A walk eigenvector is the state before the coin; first-order
        perturbation theory needs it half way through the coin, i.e. after
        ``exp(-i dx V / 2)``.  Other schemes return the stored components.
        """
        if self.eigenvectors is None:
            raise ValidationError("spectrum has no eigenvectors")
        p1, p2 = self.psi1, self.psi2
        if self.scheme is not Scheme.MODIFIED_ABLOWITZ_LADIK or self.coupling is None:
            return p1, p2
        h = coins(self.coupling, self.grid.step / 2, self.kind.sign)
        return (h[None, :, 0, 0] * p1 + h[None, :, 0, 1] * p2,
                h[None, :, 1, 0] * p1 + h[None, :, 1, 1] * p2)

    def bilinear_normalized(self, tol=1e-8):
        """Coin-midpoint ``(psi1, psi2)`` scaled so that ``sum psi1 psi2 dx = 1``."""
        dx = self.grid.step
        p1, p2 = self.midpoint()
        nb = np.sum(p1 * p2, axis=1) * dx
        bad = np.abs(nb) < tol
        if np.any(bad):
            raise DegenerateNormError("bilinear norm vanishes", modes=np.flatnonzero(bad)[:5].tolist())
        s = 1 / np.sqrt(nb)
        return p1 * s[:, None], p2 * s[:, None]

    def meta(self) -> dict:
        return {"grid": self.grid.as_dict(), "D": self.D, "kind": self.kind.value,
                "scheme": self.scheme.value, "seed": self.seed, "member": self.member}


def _propagator_to_z(w, dx):
    return 1j * np.log(w) / dx


def _residual(A, V, lam) -> float:
    return float(np.max(np.linalg.norm(A @ V - V * lam[None, :], axis=0)
                        / np.linalg.norm(V, axis=0)))


def _unitary_schur(A, dx):
    """Eigenpairs of a unitary matrix from its complex Schur form."""
    T, V = sla.schur(A, output="complex", check_finite=False)
    w = np.diag(T) / np.abs(np.diag(T))
    return (-np.angle(w) / dx).astype(complex), w, V


def eigensolve(op: OperatorMatrix, vectors=True, check=True) -> ZsSpectrum:
    """All eigenpairs of ``op`` sorted by real part.

    Dark walk propagators are diagonalized through their Hermitian Cayley
    generator, which is faster than a general eigensolve and keeps the
    eigenvalues exactly on the unit circle; when the map is singular or the
    residual check fails (eigenvalues at or close to ``w = -1``) the complex
    Schur form is used instead.

    Raises
    ------
    NumericalError
        If the solver fails or a residual exceeds ``1e-8``.
    """
    A = op.matrix
    if not np.all(np.isfinite(A)):
        raise NumericalError("operator has non-finite entries", shape=A.shape, kind=op.kind.value)
    dx = op.grid.step
    n = op.grid.n_points
    w = None
    try:
        H = None
        if op.kind is Kind.HERMITIAN_DARK:
            try:
                H = op.generator()
            except (np.linalg.LinAlgError, sla.LinAlgError):
                pass  # an eigenvalue sits exactly at w = -1
        if op.kind is Kind.HERMITIAN_DARK and H is None:
            z, w, V = _unitary_schur(A, dx)
            if not vectors:
                V = None
        elif op.kind is Kind.HERMITIAN_DARK:
            H = 0.5 * (H + H.conj().T)
            if vectors:
                mu, V = np.linalg.eigh(H)
            else:
                mu, V = np.linalg.eigvalsh(H), None
            z = -2 * np.arctan(mu) / dx if op.is_propagator else mu.astype(float)
            if op.is_propagator:
                w = (1j - mu) / (1j + mu)
            z = z.astype(complex)
        else:
            if vectors:
                ev, V = sla.eig(A, check_finite=False)
            else:
                ev, V = sla.eigvals(A, check_finite=False), None
            if op.is_propagator:
                w = ev
                z = _propagator_to_z(ev, dx)
            else:
                z = ev
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}", shape=A.shape, kind=op.kind.value,
                             scheme=op.scheme.value, seed=op.source_signal_seed) from exc
    order = np.lexsort((z.imag, z.real))
    z = z[order]
    if w is not None:
        w = w[order]
    u = op.coupling if op.is_propagator else None
    if V is None:
        return ZsSpectrum(z, None, np.ones(z.size), op.kind, op.scheme, op.grid, op.D,
                          op.source_signal_seed, op.meta.get("member"), w, u)
    V = V[:, order]
    if check:
        lam = w if op.is_propagator else z
        res = _residual(A, V, lam)
        scale = max(1.0, float(np.max(np.abs(lam))))
        if res > 1e-8 * scale and op.is_propagator and op.kind is Kind.HERMITIAN_DARK:
            # the Cayley map loses accuracy for w near -1; a unitary matrix has
            # orthonormal Schur vectors that are its eigenvectors
            z, w, V = _unitary_schur(A, dx)
            order = np.lexsort((z.imag, z.real))
            z, w, V = z[order], w[order], V[:, order]
            res = _residual(A, V, w)
        if res > 1e-8 * scale:
            raise NumericalError("eigenpair residual too large", residual=res,
                                 shape=A.shape, seed=op.source_signal_seed)
    l2 = np.sqrt(np.sum(np.abs(V) ** 2, axis=0) * dx)
    V = (V / l2[None, :]).T.copy()
    spec = ZsSpectrum(z, V, l2, op.kind, op.scheme, op.grid, op.D,
                      op.source_signal_seed, op.meta.get("member"), w, u)
    if op.kind is not Kind.HERMITIAN_DARK:
        p1, p2 = spec.midpoint()
        spec.norms = np.sum(p1 * p2, axis=1) * dx
    return spec


def trace_residual(op: OperatorMatrix, spectrum: ZsSpectrum) -> float:
    """Relative mismatch between the eigenvalue sum and the matrix trace."""
    lam = spectrum.propagator_eigenvalues if op.is_propagator else spectrum.eigenvalues
    tr = np.trace(op.matrix)
    scale = max(abs(tr), float(np.sum(np.abs(lam))), 1e-300)
    return float(abs(np.sum(lam) - tr) / scale)


def discrete_mode_filter(spectrum: ZsSpectrum, eta_min, xi_window=None) -> ZsSpectrum:
    """Keep one representative of each conjugate pair with ``Im z > eta_min``.

    Parameters
    ----------
    eta_min : float
        Modes closer than this to the real axis are treated as continuum.
    xi_window : float, optional
        Additionally require ``|Re z| < xi_window``.  On the walk lattice the
        localized modes come in nearly identical pairs separated by ``pi/dx``
        in ``xi``; ``xi_window = pi/(2 dx)`` keeps one of each.
    """
    if eta_min is None or not eta_min > 0:
        raise ValidationError("eta_min must be positive")
    z = spectrum.eigenvalues
    keep = z.imag > eta_min
    if xi_window is not None:
        keep &= np.abs(z.real) < xi_window
    return spectrum.subset(keep)


def write_spectrum(path, spectrum: ZsSpectrum, extra_meta=None) -> list:
    """Write ``re,im,norm`` CSV plus a JSON sidecar; returns both paths."""
    import json
    from pathlib import Path

    path = Path(path)
    z = spectrum.eigenvalues
    norms = np.abs(spectrum.norms)
    meta = spectrum.meta()
    meta.update(extra_meta or {})
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={json.dumps(v)}\n")
        fh.write("re,im,norm\n")
        for zi, ni in zip(z, norms):
            fh.write(f"{zi.real:.17g},{zi.imag:.17g},{ni:.17g}\n")
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [path, side]

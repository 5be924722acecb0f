"""Analytic electromagnetic field models and pointwise field sampling.

Every model returns O(1) *reference* fields in the model length unit (L = 1).
The physical fields used by the dynamics carry a uniform 1/eps amplitude
scaling, applied in :func:`sample`:

    B_phys = B_ref / eps,  E_phys = E_ref / eps,
    A_phys = A_ref / eps,  Phi_phys = Phi_ref / eps.

With the particle speed held O(1) this makes eps the ratio of Larmor radius
to field scale length, directly controllable from run configuration. All
downstream formulas are written in terms of the physical fields, so no
explicit eps appears in the equations of motion.

Models supply exact analytic first derivatives of B and A; the gradient of
the E-cross-B drift velocity is obtained by central finite differences
(step 1e-6 * L) since it involves second derivatives of the potentials.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import FieldNull, InconsistentModel, NonFinite

# Model length unit; eps = r_L / LENGTH_UNIT is the ordering parameter.
LENGTH_UNIT = 1.0

# Below this reference |B| the gyrofrequency is effectively zero and the
# guiding-center description is undefined.
NULL_THRESHOLD = 1e-10

_VE_FD_STEP = 1e-6 * LENGTH_UNIT


@dataclass(frozen=True)
class Species:
    """Particle species in normalized Gaussian-style units."""

    m: float = 1.0
    q: float = 1.0
    c: float = 1.0


DEFAULT_SPECIES = Species()


def _cross(a, b):
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


class FieldModel(ABC):
    """Static analytic EM field model returning reference (unscaled) fields.

    Positions are 3-vectors; all methods are pure, so instances are safe to
    share between concurrent workers.
    """

    kind: str = "abstract"
    time_dependent: bool = False

    @abstractmethod
    def B(self, r, t=0.0):
        """Reference magnetic field at r."""

    @abstractmethod
    def A(self, r, t=0.0):
        """Reference vector potential with B = curl A exactly."""

    def E(self, r, t=0.0):
        """Reference electric field, -grad Phi - (1/c) dA/dt."""
        return np.zeros(3)

    def Phi(self, r, t=0.0):
        """Reference scalar potential."""
        return 0.0

    @abstractmethod
    def grad_B(self, r, t=0.0):
        """Analytic Jacobian d_i B_j as a 3x3 array (rows = derivative axis)."""

    @abstractmethod
    def grad_A(self, r, t=0.0):
        """Analytic Jacobian d_i A_j as a 3x3 array."""

    def grad_Phi(self, r, t=0.0):
        return np.zeros(3)

    def dA_dt(self, r, t=0.0):
        return np.zeros(3)

    def params(self) -> dict:
        return dict(self.__dict__)


class UniformB(FieldModel):
    """Uniform magnetic field B0 along z, A = B0/2 (-y, x, 0)."""

    kind = "uniform_b"

    def __init__(self, B0=1.0):
        self.B0 = float(B0)

    def B(self, r, t=0.0):
        return np.array([0.0, 0.0, self.B0])

    def A(self, r, t=0.0):
        h = 0.5 * self.B0
        return np.array([-h * r[1], h * r[0], 0.0])

    def grad_B(self, r, t=0.0):
        return np.zeros((3, 3))

    def grad_A(self, r, t=0.0):
        h = 0.5 * self.B0
        return np.array([[0.0, h, 0.0], [-h, 0.0, 0.0], [0.0, 0.0, 0.0]])


class CrossedEB(FieldModel):
    """Uniform B0 z-hat with uniform E0 x-hat from Phi = -E0 x."""

    kind = "crossed_eb"

    def __init__(self, B0=1.0, E0=0.1):
        self.B0 = float(B0)
        self.E0 = float(E0)

    def B(self, r, t=0.0):
        return np.array([0.0, 0.0, self.B0])

    def A(self, r, t=0.0):
        h = 0.5 * self.B0
        return np.array([-h * r[1], h * r[0], 0.0])

    def E(self, r, t=0.0):
        return np.array([self.E0, 0.0, 0.0])

    def Phi(self, r, t=0.0):
        return -self.E0 * r[0]

    def grad_B(self, r, t=0.0):
        return np.zeros((3, 3))

    def grad_A(self, r, t=0.0):
        h = 0.5 * self.B0
        return np.array([[0.0, h, 0.0], [-h, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def grad_Phi(self, r, t=0.0):
        return np.array([-self.E0, 0.0, 0.0])


class GradBSlab(FieldModel):
    """Slab field B = B0 (1 + x/L) z-hat with A = B0 (x + x^2/2L) y-hat."""

    kind = "gradb_slab"

    def __init__(self, B0=1.0, L=1.0):
        self.B0 = float(B0)
        self.L = float(L)

    def B(self, r, t=0.0):
        return np.array([0.0, 0.0, self.B0 * (1.0 + r[0] / self.L)])

    def A(self, r, t=0.0):
        x = r[0]
        return np.array([0.0, self.B0 * (x + 0.5 * x * x / self.L), 0.0])

    def grad_B(self, r, t=0.0):
        g = np.zeros((3, 3))
        g[0, 2] = self.B0 / self.L
        return g

    def grad_A(self, r, t=0.0):
        g = np.zeros((3, 3))
        g[0, 1] = self.B0 * (1.0 + r[0] / self.L)
        return g


class MagneticMirror(FieldModel):
    """Axisymmetric mirror, B_z = B0 (1 + z^2/L^2) with div B = 0 closure.

    B = (-x B0 z/L^2, -y B0 z/L^2, B0 (1 + z^2/L^2)), derived from
    A = f(z)/2 (-y, x, 0) with f = B0 (1 + z^2/L^2).
    """

    kind = "magnetic_mirror"

    def __init__(self, B0=1.0, L=1.0):
        self.B0 = float(B0)
        self.L = float(L)

    def _f(self, z):
        return self.B0 * (1.0 + (z / self.L) ** 2)

    def B(self, r, t=0.0):
        k = self.B0 / self.L**2
        return np.array([-r[0] * k * r[2], -r[1] * k * r[2], self._f(r[2])])

    def A(self, r, t=0.0):
        h = 0.5 * self._f(r[2])
        return np.array([-h * r[1], h * r[0], 0.0])

    def grad_B(self, r, t=0.0):
        k = self.B0 / self.L**2
        x, y, z = r[0], r[1], r[2]
        return np.array(
            [
                [-k * z, 0.0, 0.0],
                [0.0, -k * z, 0.0],
                [-k * x, -k * y, 2.0 * k * z],
            ]
        )

    def grad_A(self, r, t=0.0):
        x, y, z = r[0], r[1], r[2]
        h = 0.5 * self._f(z)
        fp = self.B0 * z / self.L**2  # f'(z)/2
        return np.array(
            [
                [0.0, h, 0.0],
                [-h, 0.0, 0.0],
                [-fp * y, fp * x, 0.0],
            ]
        )


class ScrewPinch(FieldModel):
    """Tokamak-like screw pinch: uniform axial Bz0 plus azimuthal field
    linear in radius, B_theta(rho) = Btheta * rho / L (regular on axis)."""

    kind = "screw_pinch"

    def __init__(self, Bz0=1.0, Btheta=0.3, L=1.0):
        self.Bz0 = float(Bz0)
        self.Btheta = float(Btheta)
        self.L = float(L)

    def B(self, r, t=0.0):
        k = self.Btheta / self.L
        return np.array([-k * r[1], k * r[0], self.Bz0])

    def A(self, r, t=0.0):
        h = 0.5 * self.Bz0
        k = self.Btheta / self.L
        return np.array(
            [-h * r[1], h * r[0], -0.5 * k * (r[0] ** 2 + r[1] ** 2)]
        )

    def grad_B(self, r, t=0.0):
        k = self.Btheta / self.L
        return np.array([[0.0, k, 0.0], [-k, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def grad_A(self, r, t=0.0):
        h = 0.5 * self.Bz0
        k = self.Btheta / self.L
        return np.array(
            [
                [0.0, h, -k * r[0]],
                [-h, 0.0, -k * r[1]],
                [0.0, 0.0, 0.0],
            ]
        )


class ABCFlowField(FieldModel):
    """Arnold-Beltrami-Childress field with chaotic field lines.

    B = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x).
    Beltrami property curl B = B makes the field its own vector potential.
    """

    kind = "abc_flow"

    def __init__(self, A=1.0, B=1.0, C=1.0):
        self.A_coef = float(A)
        self.B_coef = float(B)
        self.C_coef = float(C)

    def B(self, r, t=0.0):
        a, b, c = self.A_coef, self.B_coef, self.C_coef
        x, y, z = r[0], r[1], r[2]
        return np.array(
            [
                a * math.sin(z) + c * math.cos(y),
                b * math.sin(x) + a * math.cos(z),
                c * math.sin(y) + b * math.cos(x),
            ]
        )

    def A(self, r, t=0.0):
        return self.B(r, t)

    def grad_B(self, r, t=0.0):
        a, b, c = self.A_coef, self.B_coef, self.C_coef
        x, y, z = r[0], r[1], r[2]
        return np.array(
            [
                [0.0, b * math.cos(x), -b * math.sin(x)],
                [-c * math.sin(y), 0.0, c * math.cos(y)],
                [a * math.cos(z), -a * math.sin(z), 0.0],
            ]
        )

    def grad_A(self, r, t=0.0):
        return self.grad_B(r, t)

    def params(self) -> dict:
        return {"A": self.A_coef, "B": self.B_coef, "C": self.C_coef}


MODEL_REGISTRY = {
    cls.kind: cls
    for cls in (
        UniformB,
        CrossedEB,
        GradBSlab,
        MagneticMirror,
        ScrewPinch,
        ABCFlowField,
    )
}


def model_from_config(kind: str, params: dict | None = None) -> FieldModel:
    """Build a field model by registry name with keyword parameters."""
    if kind not in MODEL_REGISTRY:
        raise KeyError(
            f"unknown field kind {kind!r}; known: {sorted(MODEL_REGISTRY)}"
        )
    return MODEL_REGISTRY[kind](**(params or {}))


def frame(b):
    """Deterministic perpendicular frame (e1, e2) completing b to a
    right-handed orthonormal triad.

    Built by normalized rejection of the reference axis z-hat from b; falls
    back to x-hat when |b . z| > 1 - 1e-6. Continuous in b away from the
    fallback switch. b must be unit to 1e-9.
    """
    bn = math.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
    if abs(bn - 1.0) > 1e-9:
        raise ValueError(f"frame() requires a unit vector, got |b| = {bn}")
    if abs(b[2]) > 1.0 - 1e-6:
        ref = np.array([1.0, 0.0, 0.0])
    else:
        ref = np.array([0.0, 0.0, 1.0])
    e1 = ref - (ref @ b) * np.asarray(b, dtype=float)
    e1 = e1 / math.sqrt(e1 @ e1)
    e2 = _cross(b, e1)
    return e1, e2


class FieldSample:
    """All local EM quantities and first derivatives at one point.

    Physical (1/eps scaled) values throughout. Cheap entries (B, E, b, Bmag,
    Omega, frame) are computed on construction; derivative tensors and
    potentials are cached properties evaluated on first access, so hot loops
    that only need the fields pay only for the fields. Instances are
    immutable in intent; do not mutate the arrays.
    """

    def __init__(self, model: FieldModel, r, t: float, eps: float, species: Species):
        r = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(r)):
            raise NonFinite(f"non-finite sampling position {r}")
        B_ref = model.B(r, t)
        if not np.all(np.isfinite(B_ref)):
            raise NonFinite(f"non-finite reference field at {r}")
        Bmag_ref = math.sqrt(B_ref @ B_ref)
        if Bmag_ref < NULL_THRESHOLD:
            raise FieldNull(
                f"|B_ref| = {Bmag_ref:.3e} < {NULL_THRESHOLD} at r = {r}"
            )
        self.model = model
        self.r = r
        self.t = float(t)
        self.eps = float(eps)
        self.species = species
        self.B = B_ref / eps
        self.Bmag = Bmag_ref / eps
        self.b = B_ref / Bmag_ref
        self.E = model.E(r, t) / eps
        self.Omega = species.q * self.Bmag / (species.m * species.c)

    @cached_property
    def _frame(self):
        return frame(self.b)

    @property
    def e1(self):
        return self._frame[0]

    @property
    def e2(self):
        return self._frame[1]

    @cached_property
    def A(self):
        return self.model.A(self.r, self.t) / self.eps

    @cached_property
    def Phi(self):
        return self.model.Phi(self.r, self.t) / self.eps

    @cached_property
    def gradB_tensor(self):
        """d_i B_j of the physical field."""
        return self.model.grad_B(self.r, self.t) / self.eps

    @cached_property
    def gradA_tensor(self):
        """d_i A_j of the physical vector potential."""
        return self.model.grad_A(self.r, self.t) / self.eps

    @cached_property
    def gradPhi(self):
        return self.model.grad_Phi(self.r, self.t) / self.eps

    @cached_property
    def dA_dt(self):
        return self.model.dA_dt(self.r, self.t) / self.eps

    @cached_property
    def gradBmag(self):
        """Gradient of |B_phys|; scale-free direction times 1/eps."""
        gB_ref = self.model.grad_B(self.r, self.t)
        B_ref = self.B * self.eps
        Bmag_ref = self.Bmag * self.eps
        return (gB_ref @ B_ref) / Bmag_ref / self.eps

    @cached_property
    def gradb_tensor(self):
        """d_i b_j of the unit field direction (eps-independent)."""
        gB_ref = self.model.grad_B(self.r, self.t)
        B_ref = self.B * self.eps
        Bmag_ref = self.Bmag * self.eps
        gBmag_ref = (gB_ref @ B_ref) / Bmag_ref
        return gB_ref / Bmag_ref - np.outer(gBmag_ref, B_ref) / Bmag_ref**2

    @cached_property
    def grad_vE_tensor(self):
        """d_i v_E,j by central differences; v_E is eps-independent."""
        g = np.empty((3, 3))
        h = _VE_FD_STEP
        for i in range(3):
            rp = self.r.copy()
            rm = self.r.copy()
            rp[i] += h
            rm[i] -= h
            g[i] = (_vE_ref(self.model, rp, self.t, self.species)
                    - _vE_ref(self.model, rm, self.t, self.species)) / (2.0 * h)
        return g


def _vE_ref(model, r, t, species):
    """E-cross-B drift from reference fields (identical to physical value)."""
    B = model.B(r, t)
    E = model.E(r, t)
    return species.c * _cross(E, B) / (B @ B)


def sample(model: FieldModel, r, t: float = 0.0, eps: float = 1.0,
           species: Species = DEFAULT_SPECIES) -> FieldSample:
    """Sample all physical field quantities at a point.

    Parameters
    ----------
    model : FieldModel
        Analytic reference-field model.
    r : array-like, shape (3,)
        Position in model length units.
    t : float
        Time (all built-in models are static).
    eps : float
        Ordering parameter; physical fields are reference fields over eps.
    species : Species
        Sets Omega = q |B_phys| / (m c).

    Raises
    ------
    FieldNull
        If the reference field magnitude is below 1e-10.
    NonFinite
        If the position or field is not finite.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return FieldSample(model, r, t, eps, species)


@dataclass
class ConsistencyReport:
    """Finite-difference consistency residuals for a field model."""

    curl_residual: float
    faraday_residual: float
    h: float
    n_points: int


def _fd_curl_A(model, r, t, h, eps):
    curl = np.empty(3)
    dA = np.empty((3, 3))
    for i in range(3):
        rp = np.array(r, dtype=float)
        rm = np.array(r, dtype=float)
        rp[i] += h
        rm[i] -= h
        dA[i] = (model.A(rp, t) - model.A(rm, t)) / (2.0 * h)
    curl[0] = dA[1, 2] - dA[2, 1]
    curl[1] = dA[2, 0] - dA[0, 2]
    curl[2] = dA[0, 1] - dA[1, 0]
    return curl / eps


def _fd_grad_Phi(model, r, t, h, eps):
    g = np.empty(3)
    for i in range(3):
        rp = np.array(r, dtype=float)
        rm = np.array(r, dtype=float)
        rp[i] += h
        rm[i] -= h
        g[i] = (model.Phi(rp, t) - model.Phi(rm, t)) / (2.0 * h)
    return g / eps


def verify_model(model: FieldModel, sample_points, t: float = 0.0,
                 h: float = 1e-4, eps: float = 1.0,
                 species: Species = DEFAULT_SPECIES) -> ConsistencyReport:
    """Check B = curl A and E = -grad Phi - (1/c) dA/dt by finite differences.

    Residuals are max-norm over the supplied points and converge as O(h^2)
    for smooth models. Raises InconsistentModel when the curl or Faraday
    residual exceeds 1e-4 at the reference step h = 1e-4 * L (or smaller).
    """
    if h <= 0.0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    curl_res = 0.0
    far_res = 0.0
    n = 0
    ht = h  # same step for the time derivative of A
    for r in sample_points:
        fs = sample(model, r, t, eps, species)
        curl_res = max(curl_res,
                       np.max(np.abs(fs.B - _fd_curl_A(model, r, t, h, eps))))
        dA_dt = (model.A(np.asarray(r, float), t + ht)
                 - model.A(np.asarray(r, float), t - ht)) / (2.0 * ht) / eps
        far = fs.E + _fd_grad_Phi(model, r, t, h, eps) + dA_dt / species.c
        far_res = max(far_res, np.max(np.abs(far)))
        n += 1
    report = ConsistencyReport(curl_residual=float(curl_res),
                               faraday_residual=float(far_res), h=h,
                               n_points=n)
    if h <= 1.0000001e-4 * LENGTH_UNIT and max(curl_res, far_res) > 1e-4:
        raise InconsistentModel(
            f"model {model.kind!r}: residual {max(curl_res, far_res):.3e} "
            f"exceeds 1e-4 at h = {h:.1e}"
        )
    return report

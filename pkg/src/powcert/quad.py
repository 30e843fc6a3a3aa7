"""Verified integration over the unit square of eta^q * xi with eta > 0
inside and eta = 0 on the boundary.

The square is split into four quadrants, each mapped by a reflection onto
the standard quadrant [0, 1/2]^2 so that eta vanishes exactly on the left
and lower edges.  The quadrant is covered by an M x M grid of closed
rectangles classified by adjacency to the vanishing edges:

    S11  touches both edges (Taylor expansion at the corner, factor x*y)
    S01  touches only the lower edge (expansion at the lower-edge midpoint,
         factor y)
    S10  touches only the left edge (factor x)
    S00  touches neither (expansion at the center, no factor)

On each rectangle the reduced integrand eta / (class monomial) is enclosed
by a 2-D Taylor model, checked to be strictly positive, raised to the
fractional power q by series composition, multiplied by the xi model, and
integrated term by term.  Monomial integrals evaluate the antiderivative
at the four corners term by term -- the interval coefficient
multiplies every corner term separately, because the distributive law does
not hold for intervals.

Rectangles whose positivity check fails, or whose enclosure is wider than
its share of the caller's width budget, are bisected along their longer
edge (tie: x) down to a depth limit.  Contributions are summed in a fixed
order regardless of the worker count, so results are reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import PositivityError, UsageError
from .galerkin import FourierApproximation
from .interval import PI, Interval, iv_cos, iv_pow, iv_sin
from .ivarray import IArr, iv_conv2d_full, iv_corr2d, iv_matmul
from .psa import ElemFn, PowerSeries2D, ps_compose

__all__ = [
    "Rect",
    "RectClass",
    "Subdivision",
    "MonomialTerm",
    "QuadConfig",
    "integrate_monomial",
    "enclose_on_rect",
    "integrate_rect",
    "integral_power",
    "residual_l2",
    "weighted_gram",
    "sup_weight",
    "u_range_bounds",
]

_HALF = Fraction(1, 2)


class RectClass(Enum):
    S11 = "S11"
    S01 = "S01"
    S10 = "S10"
    S00 = "S00"


def _classify(x0: Fraction, y0: Fraction) -> RectClass:
    if x0 == 0 and y0 == 0:
        return RectClass.S11
    if y0 == 0:
        return RectClass.S01
    if x0 == 0:
        return RectClass.S10
    return RectClass.S00


@dataclass(frozen=True)
class Rect:
    """Closed rectangle in standard-quadrant coordinates with exact rational
    corners.  The class encodes adjacency to the vanishing edges x=0 / y=0."""

    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction
    cls: RectClass
    depth: int = 0

    @classmethod
    def make(cls, x0, x1, y0, y1, depth: int = 0, rect_cls=None) -> "Rect":
        x0, x1, y0, y1 = Fraction(x0), Fraction(x1), Fraction(y0), Fraction(y1)
        if not (x0 < x1 and y0 < y1):
            raise UsageError("degenerate rectangle")
        return cls(x0, x1, y0, y1, rect_cls or _classify(x0, y0), depth)

    # vanishing flags per axis
    @property
    def van_x(self) -> bool:
        return self.cls in (RectClass.S11, RectClass.S10)

    @property
    def van_y(self) -> bool:
        return self.cls in (RectClass.S11, RectClass.S01)

    def expansion_x(self) -> Fraction:
        return Fraction(0) if self.van_x else (self.x0 + self.x1) / 2

    def expansion_y(self) -> Fraction:
        return Fraction(0) if self.van_y else (self.y0 + self.y1) / 2

    def local_x(self) -> tuple[Fraction, Fraction]:
        cx = self.expansion_x()
        return self.x0 - cx, self.x1 - cx

    def local_y(self) -> tuple[Fraction, Fraction]:
        cy = self.expansion_y()
        return self.y0 - cy, self.y1 - cy

    @property
    def area(self) -> float:
        return float((self.x1 - self.x0) * (self.y1 - self.y0))

    def bisect(self) -> tuple["Rect", "Rect"]:
        """Split along the longer edge (tie: x)."""
        wx = self.x1 - self.x0
        wy = self.y1 - self.y0
        d = self.depth + 1
        if wx >= wy:
            xm = (self.x0 + self.x1) / 2
            return (
                Rect.make(self.x0, xm, self.y0, self.y1, depth=d),
                Rect.make(xm, self.x1, self.y0, self.y1, depth=d),
            )
        ym = (self.y0 + self.y1) / 2
        return (
            Rect.make(self.x0, self.x1, self.y0, ym, depth=d),
            Rect.make(self.x0, self.x1, ym, self.y1, depth=d),
        )

    def describe(self) -> str:
        return (
            f"{self.cls.value} [{self.x0},{self.x1}]x[{self.y0},{self.y1}]"
            f" depth={self.depth}"
        )


# quadrant reflections: (reflect_x, reflect_y); the standard quadrant maps
# x -> x or 1 - x.  For odd sine modes and even cosine frequencies the
# transformed coefficients are unchanged; general modes pick up signs.
_QUADRANTS = ((False, False), (True, False), (False, True), (True, True))


@dataclass(frozen=True)
class Subdivision:
    """Uniform M x M grid per quadrant plus the four reflections."""

    grid_m: int = 16

    def __post_init__(self):
        if self.grid_m < 1:
            raise UsageError("grid parameter must be >= 1")

    def rects(self):
        m = self.grid_m
        h = _HALF / m
        out = []
        for i in range(m):
            for j in range(m):
                out.append(Rect.make(i * h, (i + 1) * h, j * h, (j + 1) * h))
        return out

    @property
    def quadrants(self):
        return _QUADRANTS


@dataclass(frozen=True)
class MonomialTerm:
    coeff: Interval
    xexp: Fraction
    yexp: Fraction

    def __post_init__(self):
        object.__setattr__(self, "xexp", Fraction(self.xexp))
        object.__setattr__(self, "yexp", Fraction(self.yexp))
        if self.xexp <= -1 or self.yexp <= -1:
            raise UsageError("exponents must exceed -1 for integrability")


def _endpoint_power(v: Fraction, e: Fraction) -> Interval:
    """v^e for an exact rational endpoint; fractional e requires v >= 0."""
    if v == 0:
        return Interval(0.0) if e > 0 else Interval(1.0)
    if e.denominator == 1 and e >= 0:
        return Interval.from_fraction(v**e.numerator)
    iv = Interval.from_fraction(v)
    return iv_pow(iv, e)


def integrate_monomial(term: MonomialTerm, rect: Rect) -> Interval:
    """Integral of coeff * x^xexp * y^yexp over the rectangle, evaluating the
    antiderivative difference corner by corner with the coefficient inside
    each term; intervals do not distribute, so factoring the coefficient
    across corner terms would be unsound."""
    ex = term.xexp + 1
    ey = term.yexp + 1
    if term.xexp.denominator != 1 and rect.x0 < 0:
        raise UsageError("fractional x-exponent over negative x")
    if term.yexp.denominator != 1 and rect.y0 < 0:
        raise UsageError("fractional y-exponent over negative y")
    den = Interval.from_fraction(ex * ey)
    c = term.coeff / den

    def corner(xe: Fraction, ye: Fraction) -> Interval:
        return c * _endpoint_power(xe, ex) * _endpoint_power(ye, ey)

    t22 = corner(rect.x1, rect.y1)
    t12 = corner(rect.x0, rect.y1)
    t21 = corner(rect.x1, rect.y0)
    t11 = corner(rect.x0, rect.y0)
    return (t22 - t12) - (t21 - t11)


# ----------------------------------------------------------------------
# 1-D trigonometric factor models
# ----------------------------------------------------------------------

def _inv_fact_fractions(n: int):
    return [Fraction(1, math.factorial(k)) for k in range(n + 3)]


def _sine_factor_matrix(
    modes, x0: Fraction, dom: Interval, degree: int, reduced: bool
) -> IArr:
    """Coefficient matrix (degree+1, n_modes) of Taylor models in the local
    variable t for sin(m pi (x0 + t)), or sin(m pi t)/t when reduced (then
    x0 must be 0 and dom = [0, w])."""
    n = degree
    k_modes = len(modes)
    out = IArr.zeros((n + 1, k_modes))
    inv_fact = _inv_fact_fractions(n + 3)
    omegas = [Interval(float(m)) * PI for m in modes]
    if reduced:
        if x0 != 0:
            raise UsageError("reduced sine factor requires expansion at 0")
        # sin(w t)/t = sum_{even k} (-1)^(k/2) w^(k+1) t^k / (k+1)!
        for col, w in enumerate(omegas):
            wp = w  # w^(k+1) running power
            for k in range(0, n + 1):
                if k % 2 == 0:
                    sign = 1.0 if (k // 2) % 2 == 0 else -1.0
                    out[k, col] = wp * Interval.from_fraction(inv_fact[k + 1] * int(sign))
                wp = wp * w
            # Lagrange remainder of the sine series divided by t, resorbed
            # into the degree-n coefficient
            if n % 2 == 0:
                order = n + 3  # sine orders <= n+2 are all present/zero
                extra = dom.sqr()
            else:
                order = n + 2
                extra = dom
            wmag = w.mag
            r = wmag**order / math.factorial(order) * (1.0 + 1e-12)
            r = math.nextafter(r, math.inf)
            rem = Interval(-r, r) * extra
            cur = out[n, col].item()
            out[n, col] = cur + rem
        return out
    # full factor: Taylor of sin(theta + w t) around t = 0
    for col, (m, w) in enumerate(zip(modes, omegas)):
        theta = w * Interval.from_fraction(x0)
        s = iv_sin(theta)
        c = iv_cos(theta)
        cyc = (s, c, -s, -c)
        wp = Interval(1.0)
        for k in range(0, n + 1):
            out[k, col] = cyc[k % 4] * wp * Interval.from_fraction(inv_fact[k])
            wp = wp * w
        # remainder at order n+1 resorbed into index n
        wmag = w.mag
        r = wmag ** (n + 1) / math.factorial(n + 1) * (1.0 + 1e-12)
        r = math.nextafter(r, math.inf)
        cur = out[n, col].item()
        out[n, col] = cur + Interval(-r, r) * dom
    return out


def _cosine_factor_matrix(freqs, x0: Fraction, dom: Interval, degree: int) -> IArr:
    """Taylor models of cos(f pi (x0 + t)) for every frequency (f may be 0)."""
    n = degree
    out = IArr.zeros((n + 1, len(freqs)))
    inv_fact = _inv_fact_fractions(n + 3)
    for col, f in enumerate(freqs):
        if f == 0:
            out[0, col] = Interval(1.0)
            continue
        w = Interval(float(f)) * PI
        theta = w * Interval.from_fraction(x0)
        s = iv_sin(theta)
        c = iv_cos(theta)
        cyc = (c, -s, -c, s)  # derivatives of cos
        wp = Interval(1.0)
        for k in range(0, n + 1):
            out[k, col] = cyc[k % 4] * wp * Interval.from_fraction(inv_fact[k])
            wp = wp * w
        wmag = w.mag
        r = wmag ** (n + 1) / math.factorial(n + 1) * (1.0 + 1e-12)
        r = math.nextafter(r, math.inf)
        cur = out[n, col].item()
        out[n, col] = cur + Interval(-r, r) * dom
    return out


def _frac_interval(lo: Fraction, hi: Fraction) -> Interval:
    return Interval(Interval.from_fraction(lo).lo, Interval.from_fraction(hi).hi)


def _shift_up(coeffs: IArr, axis: int, dom: Interval) -> IArr:
    """Multiply a coefficient matrix by the axis variable, resorbing the
    overflowing top coefficient into degree n (rows/cols 0 become exact 0)."""
    n = coeffs.shape[0] - 1
    out = IArr.zeros(coeffs.shape)
    if axis == 0:
        out.lo[1:, :] = coeffs.lo[:-1, :]
        out.hi[1:, :] = coeffs.hi[:-1, :]
        top = coeffs[n] * dom
        merged = out[n] + top
        out.lo[n], out.hi[n] = merged.lo, merged.hi
    else:
        out.lo[:, 1:] = coeffs.lo[:, :-1]
        out.hi[:, 1:] = coeffs.hi[:, :-1]
        top = coeffs[:, n] * dom
        merged = out[:, n] + top
        out.lo[:, n], out.hi[:, n] = merged.lo, merged.hi
    return out


def _shift_down(coeffs: IArr, axis: int) -> IArr:
    """Divide by the axis variable: requires the face being dropped to be
    exactly zero (structural zeros from the enclosure construction)."""
    face = coeffs[0, :] if axis == 0 else coeffs[:, 0]
    if not face.is_zero():
        raise UsageError(
            "cannot factor the vanishing monomial: leading coefficients not exactly zero"
        )
    out = IArr.zeros(coeffs.shape)
    if axis == 0:
        out.lo[:-1, :] = coeffs.lo[1:, :]
        out.hi[:-1, :] = coeffs.hi[1:, :]
    else:
        out.lo[:, :-1] = coeffs.lo[:, 1:]
        out.hi[:, :-1] = coeffs.hi[:, 1:]
    return out


# ----------------------------------------------------------------------
# public model construction and single-rectangle integration
# ----------------------------------------------------------------------

def _model_domains(rect: Rect):
    lx0, lx1 = rect.local_x()
    ly0, ly1 = rect.local_y()
    return _frac_interval(lx0, lx1), _frac_interval(ly0, ly1)


def enclose_on_rect(eta: FourierApproximation, rect: Rect, degree: int) -> PowerSeries2D:
    """2-D Taylor model of eta on the rectangle, expanded at the class point
    (corner / edge midpoint / center), in local coordinates."""
    dx, dy = _model_domains(rect)
    modes = eta.modes
    a_iv = IArr.exact(eta.coeffs)
    sx = _sine_factor_matrix(modes, rect.expansion_x(), dx, degree, reduced=rect.van_x)
    sy = _sine_factor_matrix(modes, rect.expansion_y(), dy, degree, reduced=rect.van_y)
    coeffs = iv_matmul(iv_matmul(sx, a_iv), IArr(sy.lo.T, sy.hi.T))
    if rect.van_x:
        coeffs = _shift_up(coeffs, 0, dx)
    if rect.van_y:
        coeffs = _shift_up(coeffs, 1, dy)
    return PowerSeries2D(coeffs, (dx, dy))


def _corner_table(v: Fraction, exps) -> IArr:
    vals = []
    for e in exps:
        vals.append(_endpoint_power(v, e + 1) / Interval.from_fraction(e + 1))
    return IArr.from_intervals(vals)


def _poly_integral(
    coeffs: IArr, rect: Rect, qx: Fraction, qy: Fraction
) -> Interval:
    """sum_ij coeffs[i,j] * integral x^(i+qx) y^(j+qy) over the local box,
    with the coefficient entering each of the four corner terms."""
    dgx = coeffs.shape[0]
    dgy = coeffs.shape[1]
    lx0, lx1 = rect.local_x()
    ly0, ly1 = rect.local_y()
    xexps = [Fraction(i) + qx for i in range(dgx)]
    yexps = [Fraction(j) + qy for j in range(dgy)]
    X2 = _corner_table(lx1, xexps)
    Y2 = _corner_table(ly1, yexps)
    total = Interval(0.0)
    xparts = ((X2, 1.0),) if lx0 == 0 else ((X2, 1.0), (_corner_table(lx0, xexps), -1.0))
    yparts = ((Y2, 1.0),) if ly0 == 0 else ((Y2, 1.0), (_corner_table(ly0, yexps), -1.0))
    for xtab, xsign in xparts:
        for ytab, ysign in yparts:
            xv = IArr(xtab.lo.reshape(-1, 1), xtab.hi.reshape(-1, 1))
            yv = IArr(ytab.lo.reshape(1, -1), ytab.hi.reshape(1, -1))
            f = (coeffs * (xv * yv)).sum().item()
            total = total + (f if xsign * ysign > 0 else -f)
    return total


def integrate_rect(
    eta_model: PowerSeries2D,
    xi_model: PowerSeries2D | None,
    q: Fraction,
    rect: Rect,
) -> Interval:
    """Enclose the integral of eta^q * xi over the rectangle, factoring the
    class monomial out of the eta model first."""
    q = Fraction(q)
    coeffs = eta_model.coeffs
    if rect.van_x:
        coeffs = _shift_down(coeffs, 0)
    if rect.van_y:
        coeffs = _shift_down(coeffs, 1)
    reduced = PowerSeries2D(coeffs, eta_model.domain)
    rng = reduced.range()
    if rng.lo <= 0.0:
        raise PositivityError(
            f"reduced model not verifiably positive on {rect.describe()}",
            rng=rng,
            rect=rect,
        )
    w = ps_compose(ElemFn.pow_q(q), reduced)
    if xi_model is None:
        prod = w.coeffs
    else:
        prod = iv_conv2d_full(w.coeffs, xi_model.coeffs)
    qx = q if rect.van_x else Fraction(0)
    qy = q if rect.van_y else Fraction(0)
    return _poly_integral(prod, rect, qx, qy)


# ----------------------------------------------------------------------
# sweep engine
# ----------------------------------------------------------------------

@dataclass
class QuadConfig:
    degree: int = 6
    grid_m: int = 16
    max_depth: int = 12
    workers: int = 1

    def __post_init__(self):
        if self.degree < 2:
            raise UsageError("PSA degree must be >= 2")
        if self.max_depth < 0 or self.workers < 1:
            raise UsageError("bad refinement/worker configuration")


class _EtaFourier:
    """eta given as an odd-mode sine series (the pipeline case)."""

    def __init__(self, eta: FourierApproximation):
        self.modes = eta.modes
        self.base = np.asarray(eta.coeffs, dtype=float)

    def signs(self, quadrant) -> np.ndarray:
        rx, ry = quadrant
        sx = np.array([1.0 if (not rx) or m % 2 == 1 else -1.0 for m in self.modes])
        sy = np.array([1.0 if (not ry) or m % 2 == 1 else -1.0 for m in self.modes])
        return np.outer(sx, sy)

    def coeff_matrix(self, quadrant) -> IArr:
        return IArr.exact(self.base * self.signs(quadrant))


class _EtaConstant:
    """Test-harness eta == c > 0 everywhere (bypasses the boundary zeros:
    every rectangle is treated as interior, no monomial factoring)."""

    def __init__(self, c: Interval):
        if c.lo <= 0:
            raise UsageError("constant eta must be positive")
        self.c = c


@dataclass
class _Request:
    residual_p: Fraction | None = None
    gram_freqs: tuple | None = None
    powers: tuple = ()  # tuple of (xi_spec, q)
    want_ranges: bool = False
    res_width: float | None = None
    gram_width: float | None = None
    power_width: float | None = None


@dataclass
class _RectOut:
    res_sq: Interval = None
    t_table: IArr = None
    powers: list = None
    rng_min: float = math.inf
    rng_max: float = -math.inf
    witness_lo: float = -math.inf
    center_lo: float = -math.inf
    center_hi: float = -math.inf
    rect_count: int = 0
    over_budget: int = 0

    def merge(self, other: "_RectOut"):
        if other.res_sq is not None:
            self.res_sq = other.res_sq if self.res_sq is None else self.res_sq + other.res_sq
        if other.t_table is not None:
            self.t_table = other.t_table if self.t_table is None else self.t_table + other.t_table
        if other.powers is not None:
            if self.powers is None:
                self.powers = list(other.powers)
            else:
                self.powers = [a + b for a, b in zip(self.powers, other.powers)]
        self.rng_min = min(self.rng_min, other.rng_min)
        self.rng_max = max(self.rng_max, other.rng_max)
        self.witness_lo = max(self.witness_lo, other.witness_lo)
        self.center_lo = max(self.center_lo, other.center_lo)
        self.center_hi = max(self.center_hi, other.center_hi)
        self.rect_count += other.rect_count
        self.over_budget += other.over_budget
        return self


class _Engine:
    def __init__(self, eta, p_or_q, cfg: QuadConfig, req: _Request):
        self.eta = eta
        self.cfg = cfg
        self.req = req
        self.sub = Subdivision(cfg.grid_m)
        self.n = cfg.degree
        if req.residual_p is not None:
            self.p = Fraction(req.residual_p)
            self.q = self.p - 1
        else:
            self.q = Fraction(p_or_q) if p_or_q is not None else None
            self.p = None
        self._col_cache = {}
        self._lap_cache = {}

    # -------------------- cached 1-D machinery --------------------

    def sine_cols(self, axis, a: Fraction, b: Fraction, van: bool, reduced: bool):
        key = ("sin", axis, a, b, van, reduced)
        hit = self._col_cache.get(key)
        if hit is not None:
            return hit
        x0 = Fraction(0) if van else (a + b) / 2
        dom = _frac_interval(a - x0, b - x0)
        out = _sine_factor_matrix(self.eta.modes, x0, dom, self.n, reduced=reduced)
        self._col_cache[key] = out
        return out

    def cos_cols(self, axis, a: Fraction, b: Fraction, van: bool):
        key = ("cos", axis, a, b, van)
        hit = self._col_cache.get(key)
        if hit is not None:
            return hit
        x0 = Fraction(0) if van else (a + b) / 2
        dom = _frac_interval(a - x0, b - x0)
        out = _cosine_factor_matrix(self.req.gram_freqs, x0, dom, self.n)
        self._col_cache[key] = out
        return out

    def corner_vec(self, v: Fraction, qoff: Fraction, count: int):
        key = ("corner", v, qoff, count)
        hit = self._col_cache.get(key)
        if hit is not None:
            return hit
        out = _corner_table(v, [Fraction(i) + qoff for i in range(count)])
        self._col_cache[key] = out
        return out

    def poly_integral(self, coeffs: IArr, rect: Rect, qx: Fraction, qy: Fraction) -> Interval:
        """Same as _poly_integral but with engine-cached corner tables."""
        dgx, dgy = coeffs.shape
        lx0, lx1 = rect.local_x()
        ly0, ly1 = rect.local_y()
        X2 = self.corner_vec(lx1, qx, dgx)
        Y2 = self.corner_vec(ly1, qy, dgy)
        xparts = ((X2, 1.0),) if lx0 == 0 else (
            (X2, 1.0), (self.corner_vec(lx0, qx, dgx), -1.0))
        yparts = ((Y2, 1.0),) if ly0 == 0 else (
            (Y2, 1.0), (self.corner_vec(ly0, qy, dgy), -1.0))
        total = Interval(0.0)
        for xtab, xsign in xparts:
            for ytab, ysign in yparts:
                xv = IArr(xtab.lo.reshape(-1, 1), xtab.hi.reshape(-1, 1))
                yv = IArr(ytab.lo.reshape(1, -1), ytab.hi.reshape(1, -1))
                f = (coeffs * (xv * yv)).sum().item()
                total = total + (f if xsign * ysign > 0 else -f)
        return total

    # -------------------- per-rectangle evaluation --------------------

    def lap_matrix(self, quadrant) -> IArr:
        key = quadrant
        hit = self._lap_cache.get(key)
        if hit is not None:
            return hit
        m = self.eta.modes.astype(float)
        fac = IArr.exact(-(m[:, None] ** 2 + m[None, :] ** 2))
        amat = self.eta.coeff_matrix(quadrant)
        out = fac * amat * PI.sqr()
        self._lap_cache[key] = out
        return out

    def _tensor_model(self, sx: IArr, a_iv: IArr, sy: IArr, dom) -> PowerSeries2D:
        coeffs = iv_matmul(iv_matmul(sx, a_iv), IArr(sy.lo.T, sy.hi.T))
        return PowerSeries2D(coeffs, dom)

    def eval_rect(self, quadrant, rect: Rect, check_budget: bool = True) -> _RectOut:
        n = self.n
        const_eta = isinstance(self.eta, _EtaConstant)
        if const_eta and rect.cls != RectClass.S00:
            # the constant harness bypasses the boundary zeros: treat every
            # rectangle as interior so local coordinates stay consistent
            rect = replace(rect, cls=RectClass.S00)
        out = _RectOut(rect_count=1)
        dx, dy = _model_domains(rect)
        dom = (dx, dy)
        area = rect.area

        if const_eta:
            van_x = van_y = False
            v_red = PowerSeries2D.constant(self.eta.c, n, dom)
            mon_range = Interval(1.0)
        else:
            van_x, van_y = rect.van_x, rect.van_y
            a_iv = self.eta.coeff_matrix(quadrant)
            sx_r = self.sine_cols(0, rect.x0, rect.x1, van_x, reduced=van_x)
            sy_r = self.sine_cols(1, rect.y0, rect.y1, van_y, reduced=van_y)
            v_red = self._tensor_model(sx_r, a_iv, sy_r, dom)
            mon_range = Interval(1.0)
            if van_x:
                mon_range = mon_range * dx
            if van_y:
                mon_range = mon_range * dy

        red_range = v_red.range()
        if red_range.lo <= 0.0:
            raise PositivityError(
                f"positivity check failed on {rect.describe()}",
                rng=red_range,
                rect=rect,
            )

        if self.req.want_ranges or self.req.residual_p is not None:
            u_range = mon_range * red_range if (van_x or van_y) else red_range
            out.rng_min = u_range.lo
            out.rng_max = u_range.hi
            out.witness_lo = u_range.lo
            if not (van_x or van_y):
                c0 = v_red.const_coeff()
                out.center_lo = c0.lo
                out.center_hi = c0.hi

        w = None
        if self.q is not None:
            w = ps_compose(ElemFn.pow_q(self.q), v_red)

        qx_base = self.q if van_x else Fraction(0)
        qy_base = self.q if van_y else Fraction(0)

        ok = True

        if self.req.gram_freqs is not None:
            cx = self.cos_cols(0, rect.x0, rect.x1, van_x)
            cy = self.cos_cols(1, rect.y0, rect.y1, van_y)
            t_rect = self._gram_tables(w, cx, cy, rect, qx_base, qy_base)
            out.t_table = t_rect
            if check_budget and self.req.gram_width is not None:
                if t_rect.max_width() > self.req.gram_width * area:
                    ok = False

        if self.req.residual_p is not None:
            res = self._residual_piece(quadrant, rect, v_red, w, van_x, van_y)
            out.res_sq = res
            if (
                check_budget
                and self.req.res_width is not None
                and res.width > self.req.res_width * area
            ):
                ok = False

        if self.req.powers:
            out.powers = []
            for xi_spec, qq in self.req.powers:
                val = self._power_piece(quadrant, rect, w, xi_spec, qx_base, qy_base)
                out.powers.append(val)
                if (
                    check_budget
                    and self.req.power_width is not None
                    and val.width > self.req.power_width * area
                ):
                    ok = False

        if not ok:
            raise _NeedsRefine()
        return out

    def _gram_tables(self, w, cx, cy, rect, qx, qy) -> IArr:
        n = self.n
        nf = len(self.req.gram_freqs)
        lx0, lx1 = rect.local_x()
        ly0, ly1 = rect.local_y()
        size = 2 * n + 1
        X2 = self.corner_vec(lx1, qx, size)
        Y2 = self.corner_vec(ly1, qy, size)
        xparts = [(X2, 1.0)] if lx0 == 0 else [(X2, 1.0), (self.corner_vec(lx0, qx, size), -1.0)]
        yparts = [(Y2, 1.0)] if ly0 == 0 else [(Y2, 1.0), (self.corner_vec(ly0, qy, size), -1.0)]
        total = None
        for xtab, xs in xparts:
            for ytab, ys in yparts:
                xv = IArr(xtab.lo.reshape(-1, 1), xtab.hi.reshape(-1, 1))
                yv = IArr(ytab.lo.reshape(1, -1), ytab.hi.reshape(1, -1))
                itab = xv * yv  # (2n+1, 2n+1)
                q4 = iv_corr2d(itab, w.coeffs)  # (n+1, n+1)
                m = iv_matmul(iv_matmul(IArr(cx.lo.T, cx.hi.T), q4), cy)  # (nf, nf)
                m = m if xs * ys > 0 else -m
                total = m if total is None else total + m
        return total

    def _residual_piece(self, quadrant, rect, v_red, w, van_x, van_y) -> Interval:
        n = self.n
        dx, dy = _model_domains(rect)
        dom = (dx, dy)
        lap_iv = self.lap_matrix(quadrant)
        sx_f = self.sine_cols(0, rect.x0, rect.x1, van_x, reduced=False)
        sy_f = self.sine_cols(1, rect.y0, rect.y1, van_y, reduced=False)
        v_lap = self._tensor_model(sx_f, lap_iv, sy_f, dom)
        p = self.p
        if not (van_x or van_y):
            # single model of Delta u + u^p; widths couple to the small
            # residual instead of the huge separate pieces
            u_pow = w * v_red  # u^(1+q) = u^p
            r_model = v_lap + u_pow
            sq = iv_conv2d_full(r_model.coeffs, r_model.coeffs)
            return self.poly_integral(sq, rect, Fraction(0), Fraction(0))
        # boundary rectangles: local three-piece expansion
        ex = Fraction(1) if van_x else Fraction(0)
        ey = Fraction(1) if van_y else Fraction(0)
        piece1 = self.poly_integral(
            iv_conv2d_full(v_lap.coeffs, v_lap.coeffs), rect, Fraction(0), Fraction(0)
        )
        red_pow = w * v_red  # [eta]^p
        cross = iv_conv2d_full(red_pow.coeffs, v_lap.coeffs)
        piece2 = self.poly_integral(cross, rect, p * ex, p * ey)
        two_p = 2 * p
        if two_p.denominator == 1:
            acc = v_red
            for _ in range(two_p.numerator - 1):
                acc = acc * v_red
            piece3 = self.poly_integral(acc.coeffs, rect, two_p * ex, two_p * ey)
        else:
            w2 = w * w
            r2 = v_red * v_red
            piece3 = self.poly_integral((w2 * r2).coeffs, rect, two_p * ex, two_p * ey)
        return piece1 + Interval(2.0) * piece2 + piece3

    def _power_piece(self, quadrant, rect, w, xi_spec, qx, qy) -> Interval:
        if xi_spec is None:
            prod = w.coeffs
        else:
            xi_model = xi_spec.model_on(self, quadrant, rect)
            if xi_model is None:  # constant xi
                prod = w.coeffs * xi_spec.value
            else:
                prod = iv_conv2d_full(w.coeffs, xi_model.coeffs)
        return self.poly_integral(prod, rect, qx, qy)

    # -------------------- recursion/driver --------------------

    def do_rect(self, quadrant, rect: Rect) -> _RectOut:
        try:
            return self.eval_rect(quadrant, rect)
        except (_NeedsRefine, PositivityError) as exc:
            if rect.depth >= self.cfg.max_depth:
                if isinstance(exc, PositivityError):
                    raise
                # keep the sound-but-wide result, flag it
                res = self.eval_rect(quadrant, rect, check_budget=False)
                res.over_budget += 1
                return res
            r1, r2 = rect.bisect()
            out = self.do_rect(quadrant, r1)
            out.merge(self.do_rect(quadrant, r2))
            return out

    def run(self) -> tuple[_RectOut, list[_RectOut]]:
        jobs = []
        for quadrant in self.sub.quadrants:
            for rect in self.sub.rects():
                jobs.append((quadrant, rect))
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                results = list(pool.map(lambda jr: self.do_rect(*jr), jobs))
        else:
            results = [self.do_rect(q, r) for q, r in jobs]
        total = _RectOut()
        per_quadrant = [_RectOut() for _ in range(4)]
        m2 = self.sub.grid_m**2
        for idx, res in enumerate(results):
            total.merge(res)
            per_quadrant[idx // m2].merge(res)
        return total, per_quadrant


class _NeedsRefine(Exception):
    pass


class _XiConst:
    def __init__(self, value):
        self.value = value if isinstance(value, Interval) else Interval(float(value))

    def model_on(self, engine, quadrant, rect):
        return None


class _XiFourier:
    def __init__(self, xi: FourierApproximation):
        self.wrap = _EtaFourier(xi)

    def model_on(self, engine, quadrant, rect):
        dx, dy = _model_domains(rect)
        sx = engine.sine_cols(0, rect.x0, rect.x1, rect.van_x, reduced=False)
        sy = engine.sine_cols(1, rect.y0, rect.y1, rect.van_y, reduced=False)
        a_iv = self.wrap.coeff_matrix(quadrant)
        return engine._tensor_model(sx, a_iv, sy, (dx, dy))


def _wrap_xi(xi):
    if xi is None:
        return None
    if isinstance(xi, (int, float, Interval)):
        return _XiConst(xi)
    if isinstance(xi, FourierApproximation):
        return _XiFourier(xi)
    if hasattr(xi, "model_on"):
        return xi
    raise UsageError(f"unsupported xi specification {type(xi)!r}")


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------

def integral_power(
    eta: FourierApproximation,
    xi,
    q: Fraction,
    cfg: QuadConfig | None = None,
    width_target: float | None = None,
    return_quadrants: bool = False,
):
    """Verified enclosure of the integral over the unit square of eta^q xi,
    for eta positive inside and vanishing on the boundary."""
    cfg = cfg or QuadConfig()
    q = Fraction(q)
    if not (0 < q <= 1):
        raise UsageError(f"exponent q must lie in (0, 1], got {q}")
    req = _Request(powers=((_wrap_xi(xi), q),), power_width=width_target)
    engine = _Engine(_EtaFourier(eta), q, cfg, req)
    total, per_quad = engine.run()
    if return_quadrants:
        return total.powers[0], [pq.powers[0] for pq in per_quad]
    return total.powers[0]


def residual_l2(
    u_hat: FourierApproximation,
    p: Fraction,
    cfg: QuadConfig | None = None,
    width_target: float | None = None,
) -> Interval:
    """Enclosure of || Delta u_hat + |u_hat|^(p-1) u_hat ||_L2."""
    cfg = cfg or QuadConfig()
    if not np.any(u_hat.coeffs):
        return Interval(0.0)  # the zero function is an exact solution
    req = _Request(residual_p=Fraction(p), res_width=width_target, want_ranges=True)
    engine = _Engine(_EtaFourier(u_hat), None, cfg, req)
    total, _ = engine.run()
    sq = total.res_sq
    lo = max(sq.lo, 0.0)
    return iv_pow(Interval(lo, max(sq.hi, lo)), Fraction(1, 2))


def weighted_gram(
    u_hat,
    p: Fraction,
    indices,
    cfg: QuadConfig | None = None,
    width_target: float | None = None,
):
    """Interval matrix of (p |u_hat|^(p-1) phi_ij, phi_kl) over the index list.

    u_hat may be a FourierApproximation or an Interval/float constant (the
    test-harness bypass where the weight is constant over the square)."""
    cfg = cfg or QuadConfig()
    p = Fraction(p)
    q = p - 1
    indices = [(int(i), int(j)) for i, j in indices]
    freqs = sorted({abs(i - k) for i, _ in indices for k, _ in indices}
                   | {i + k for i, _ in indices for k, _ in indices}
                   | {abs(j - l) for _, j in indices for _, l in indices}
                   | {j + l for _, j in indices for _, l in indices})
    req = _Request(gram_freqs=tuple(freqs), gram_width=width_target)
    if isinstance(u_hat, FourierApproximation):
        eta = _EtaFourier(u_hat)
    else:
        c = u_hat if isinstance(u_hat, Interval) else Interval(float(u_hat))
        eta = _EtaConstant(c)
    engine = _Engine(eta, q, cfg, req)
    total, _ = engine.run()
    return gram_from_tables(total.t_table, freqs, indices, p)


def gram_indices_freqs(indices):
    return sorted(
        {abs(i - k) for i, _ in indices for k, _ in indices}
        | {i + k for i, _ in indices for k, _ in indices}
        | {abs(j - l) for _, j in indices for _, l in indices}
        | {j + l for _, j in indices for _, l in indices}
    )


def gram_from_tables(t: IArr, freqs, indices, p: Fraction) -> IArr:
    """Assemble (p |eta|^(p-1) phi_ij, phi_kl) from the cosine-pair tables
    T[fx, fy] = integral eta^(p-1) cos(fx pi x) cos(fy pi y)."""
    fpos = {f: idx for idx, f in enumerate(freqs)}
    dim = len(indices)
    out = IArr.zeros((dim, dim))
    quarter = Interval.from_fraction(Fraction(1, 4)) * Interval.from_fraction(Fraction(p))
    for a, (i, j) in enumerate(indices):
        for b, (k, l) in enumerate(indices):
            val = (
                t[fpos[abs(i - k)], fpos[abs(j - l)]].item()
                - t[fpos[i + k], fpos[abs(j - l)]].item()
                - t[fpos[abs(i - k)], fpos[j + l]].item()
                + t[fpos[i + k], fpos[j + l]].item()
            )
            out[a, b] = val * quarter
    return out


def sup_weight(
    u_hat: FourierApproximation,
    p: Fraction,
    cfg: QuadConfig | None = None,
    ranges: tuple | None = None,
) -> Interval:
    """Enclosure of || p |u_hat|^(p-1) ||_inf via range bounds of u_hat."""
    if ranges is None:
        ranges = u_range_bounds(u_hat, cfg)
    lo, hi, _, center_lo, _ = ranges
    p = Fraction(p)
    m = Interval(max(center_lo, 0.0), max(hi, abs(lo)))
    return Interval.from_fraction(p) * iv_pow(m, p - 1)


def pipeline_sweep(
    u_hat: FourierApproximation,
    p: Fraction,
    indices,
    cfg: QuadConfig | None = None,
    res_width: float | None = None,
    gram_width: float | None = None,
):
    """One shared sweep for the certificate pipeline: residual-norm square,
    the cosine gram tables for the eigenvalue pencil, and range bounds.  The
    expensive per-rectangle compositions are computed once and reused.

    Returns (res_norm, gram_matrix, ranges, stats)."""
    cfg = cfg or QuadConfig()
    p = Fraction(p)
    freqs = gram_indices_freqs(indices)
    req = _Request(
        residual_p=p,
        gram_freqs=tuple(freqs),
        want_ranges=True,
        res_width=res_width,
        gram_width=gram_width,
    )
    engine = _Engine(_EtaFourier(u_hat), None, cfg, req)
    total, _ = engine.run()
    sq = total.res_sq
    lo = max(sq.lo, 0.0)
    res_norm = iv_pow(Interval(lo, max(sq.hi, lo)), Fraction(1, 2))
    gram = gram_from_tables(total.t_table, freqs, indices, p)
    ranges = (
        total.rng_min,
        total.rng_max,
        total.witness_lo,
        total.center_lo,
        total.center_hi,
    )
    stats = {"rects": total.rect_count, "over_budget": total.over_budget}
    return res_norm, gram, ranges, stats


def u_range_bounds(u_hat: FourierApproximation, cfg: QuadConfig | None = None):
    """(min_lo, max_hi, witness_lo, center_lo, center_hi) over the square:
    rectangle-range extremes, the best single-rectangle guaranteed lower
    bound (positivity witness), and the best interior constant-coefficient
    enclosure (a verified point value near the peak)."""
    cfg = cfg or QuadConfig()
    req = _Request(want_ranges=True)
    engine = _Engine(_EtaFourier(u_hat), None, cfg, req)
    total, _ = engine.run()
    return total.rng_min, total.rng_max, total.witness_lo, total.center_lo, total.center_hi

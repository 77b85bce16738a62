"""q-series utilities: Pochhammer products, Jacobi theta, the two kernels.

The closed-form log coefficients are the workhorses of the verifier; the
truncated products here exist as independent cross-oracles, so errors in
one path cannot hide errors in the other.
"""

from __future__ import annotations

from fractions import Fraction

from .series_core import (
    ONE,
    NomeOutOfRange,
    Scalar,
    TruncatedSeries,
    sc,
)

RATIONAL = "rational"
THETA = "theta"
KERNELS = (RATIONAL, THETA)


def pochhammer_series(sigma: Scalar, q: Scalar, order: int, factors: int) -> TruncatedSeries:
    """(sigma x; q)_factors = prod_{j<factors} (1 - sigma q^j x) in x."""
    out = TruncatedSeries.one(order)
    coef = sc(sigma)
    for _ in range(factors):
        out = out * TruncatedSeries(order, [ONE, -coef])
        coef = coef * q
    return out


def pochhammer_log_coeff(sigma: Scalar, q: Scalar, n: int) -> Scalar:
    """Coefficient of x^n in log (sigma x; q)_infinity, closed form.

    log prod_j (1 - u q^j) = -sum_n u^n / (n (1 - q^n)).
    """
    if n <= 0:
        raise ValueError("closed-form log coefficients exist for n >= 1 only")
    qn = q**n
    if qn == 1:
        raise NomeOutOfRange(f"q^{n} = 1 makes the infinite product diverge")
    return -(sigma**n) / (n * (ONE - qn))


def double_pochhammer_series(
    sigma: Scalar, p: Scalar, q: Scalar, order: int, factors: int
) -> TruncatedSeries:
    """(sigma x; p, q)_{factors,factors} = prod_{i,j<factors} (1 - sigma p^i q^j x)."""
    out = TruncatedSeries.one(order)
    pi = ONE
    for _ in range(factors):
        out = out * pochhammer_series(sc(sigma) * pi, q, order, factors)
        pi = pi * p
    return out


def euler_factor(q: Scalar, factors: int) -> Scalar:
    """(q; q)_factors as an exact scalar."""
    out, c = ONE, sc(q)
    for _ in range(factors):
        out *= ONE - c
        c *= q
    return out


def theta_jacobi_coeff(q: Scalar, n: int) -> Scalar:
    """z^n coefficient of theta_q(z) by the triple product: (-1)^n q^{n(n-1)/2}."""
    e = n * (n - 1) // 2
    s = ONE if n % 2 == 0 else -ONE
    return s * q**e


def theta_jacobi_window(q: Scalar, sigma: Scalar, bound: int) -> dict[int, Scalar]:
    """Laurent window {n: coeff of z^n} of theta_q(sigma z), |n| <= bound."""
    sigma = sc(sigma)
    return {n: theta_jacobi_coeff(q, n) * sigma**n for n in range(-bound, bound + 1)}


def theta_product_window(
    q: Scalar, sigma: Scalar, bound: int, factors: int
) -> dict[int, Scalar]:
    """Same window from the truncated product, as a cross-oracle.

    theta_q(u) = (u;q)_f (q/u;q)_f (q;q)_f with u = sigma z; each
    Pochhammer is one-sided in z or 1/z, convolved over an internal
    margin so window entries carry only the O(q^f) product-truncation
    error.
    """
    sigma = sc(sigma)
    margin = bound + factors
    plus = pochhammer_series(sigma, q, margin, factors)
    minus = pochhammer_series(q / sigma, q, margin, factors)
    const = euler_factor(q, factors)
    out: dict[int, Scalar] = {}
    for n in range(-bound, bound + 1):
        s = Fraction(0)
        for i in range(margin + 1):
            j = i - n
            if 0 <= j <= margin:
                s += plus[i] * minus[j]
        out[n] = const * s
    return out


def theta_eval(z: Scalar, q: Scalar, factors: int) -> Scalar:
    """theta_q(z) as an exact truncated-product value, error O(q^factors)."""
    z = sc(z)
    if z == 0:
        raise NomeOutOfRange("theta has an essential singularity at z = 0")
    out, c = ONE, ONE
    for _ in range(factors):
        out *= (ONE - z * c) * (ONE - q * c / z)
        c *= q
    return out * euler_factor(q, factors)


class PsiKernel:
    """The kernel psi defining a structure-function family.

    rational: psi(z) = 1 - z.  theta: psi(z) = theta_q(z) at the stored
    nome.  Both satisfy psi(z) = -z psi(1/z), which drives the inversion
    identity of the structure functions.
    """

    def __init__(self, kind: str, nome: Scalar | None = None):
        if kind not in KERNELS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if kind == THETA:
            if nome is None:
                raise NomeOutOfRange("theta kernel needs a nome")
            nome = sc(nome)
            if not (abs(nome) < 1) or nome == 0:
                raise NomeOutOfRange("theta kernel needs 0 < |q| < 1")
        self.kind = kind
        self.nome = nome

    def eval_scalar(self, z: Scalar, factors: int = 40) -> Scalar:
        """Exact value for rational, truncated-product value for theta."""
        z = sc(z)
        if self.kind == RATIONAL:
            return ONE - z
        return theta_eval(z, self.nome, factors)

    def __repr__(self):
        if self.kind == RATIONAL:
            return "PsiKernel(rational)"
        return f"PsiKernel(theta, q={self.nome})"

import numpy as np
import pytest

from micromorph.constitutive import IsotropicParams, special_case_params
from micromorph.green import (CharacteristicLengths, PointStress,
                              box_operator_fd, green_coeffs, green_tensor,
                              green_tensor_mu_c_limit, lengths,
                              lengths_limit_mu_c, special_case_lengths,
                              superpose)


def params(**kw):
    base = dict(mu_e=1.0, lambda_e=0.7, mu_c=0.6, mu_h=0.0, lambda_h=0.0,
                a1=1.1, a2=0.8, a3=0.5)
    base.update(kw)
    return IsotropicParams(**base)


# ---------------------------------------------------------------------------
# characteristic lengths
# ---------------------------------------------------------------------------

def test_length_formulas():
    p = params(mu_e=1.0, a1=2.0)
    ls = lengths(p)
    assert ls.l1_sq == pytest.approx(1.0)
    nu = p.nu
    assert ls.l2_sq == pytest.approx((1 - nu) * p.a2 / (2 * p.mu_e * (1 + nu)))
    assert ls.l4_sq == pytest.approx((p.a1 + 6 * p.a3) / (6 * p.mu_c))


def test_l3_identity_over_random_parameters():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        p = params(mu_e=0.1 + rng.random() * 5, lambda_e=rng.random() * 3,
                   mu_c=0.05 + rng.random() * 4, a1=0.1 + rng.random() * 3,
                   a2=0.1 + rng.random() * 3, a3=0.1 + rng.random() * 3)
        ls = lengths(p)
        nu = p.nu
        expect = ((p.mu_e + p.mu_c) / (4 * p.mu_c)
                  * (ls.l1_sq + (1 + nu) / (1 - nu) * ls.l2_sq))
        worst = max(worst, abs(ls.l3_sq - expect) / abs(expect))
    assert worst <= 1e-13


def test_lengths_mu_c_zero_flags():
    ls = lengths(params(mu_c=0.0))
    assert ls.l3_sq is None and ls.l4_sq is None
    assert not ls.defined(3) and not ls.defined(4)
    assert ls.defined(1) and ls.defined(2)


def test_lengths_einstein_imaginary():
    p = special_case_params("Einstein", 2.0, params())
    ls = lengths(p)
    assert ls.l2_sq < 0
    assert ls.imaginary(2)
    nu = p.nu
    assert ls.l2_sq == pytest.approx(-(1 - nu) * p.a1 / (2 * p.mu_e * (1 + nu)))


def test_lengths_require_positive_mu_e():
    with pytest.raises(ValueError):
        lengths(params(mu_e=0.0))


def test_limit_mu_c_to_infinity():
    p = params(a1=4.0, a2=4.0, mu_e=1.0)
    rep = lengths_limit_mu_c(p, "to_infinity")
    assert rep.l3_sq == pytest.approx(1.0)
    assert rep.l4_sq == 0.0
    # numerical witness at mu_c = 1e6
    ls = lengths(params(a1=4.0, a2=4.0, mu_e=1.0, mu_c=1e6))
    assert ls.l3_sq == pytest.approx(rep.l3_sq, rel=1e-4)
    assert abs(ls.l4_sq) < 1e-4


def test_limit_mu_c_to_zero_diverges():
    rep = lengths_limit_mu_c(params(), "to_zero")
    assert rep.divergent
    ls = lengths(params(mu_c=1e-8))
    assert ls.l3_sq > 1e6 * ls.l1_sq
    assert ls.l4_sq > 1e6 * ls.l1_sq


@pytest.mark.parametrize("case", ["Edelen", "PopovKroener", "Einstein",
                                  "StrainGradient"])
def test_special_case_length_tables(case):
    base = params(mu_e=1.3, lambda_e=0.9)
    nu = base.nu
    a1 = 2.4
    d = 0.7 if case == "PopovKroener" else None
    ls = special_case_lengths(case, a1, base, d=d)
    if case == "PopovKroener":
        a1_pk = 3 * base.mu_e * (2 * d) ** 2 / 24.0
        assert ls.l1_sq == pytest.approx(a1_pk / (2 * base.mu_e), abs=1e-14)
        assert ls.l2_sq == pytest.approx(
            (3 + nu) * a1_pk / (6 * base.mu_e * (1 + nu)), abs=1e-14)
    else:
        assert ls.l1_sq == pytest.approx(a1 / (2 * base.mu_e), abs=1e-14)
    if case == "Edelen":
        assert ls.l2_sq == pytest.approx(
            (1 - nu) * a1 / (2 * base.mu_e * (1 + nu)), abs=1e-14)
    if case == "StrainGradient":
        assert ls.l2_sq == pytest.approx(ls.l1_sq, abs=1e-14)
    if case == "Einstein":
        assert ls.l2_sq == pytest.approx(
            -(1 - nu) * a1 / (2 * base.mu_e * (1 + nu)), abs=1e-14)
        assert ls.l3_sq == 0.0 and ls.l4_sq == 0.0
    else:
        assert ls.l3_sq is None and ls.l4_sq is None
    # consistency between the table and the generic formulas
    p_case = special_case_params(case, a1, base, d=d)
    generic = lengths(p_case)
    assert generic.l1_sq == pytest.approx(ls.l1_sq, abs=1e-14)
    assert generic.l2_sq == pytest.approx(ls.l2_sq, abs=1e-14)


def test_green_coeffs():
    cc = green_coeffs(params(a1=1, a2=1, a3=1))
    assert (cc.c1, cc.c2, cc.c3) == pytest.approx((5.0 / 3.0, 2.0 / 3.0, 0.0))
    cc = green_coeffs(params(a1=6, a2=-6, a3=-1))
    assert (cc.c1, cc.c2, cc.c3) == pytest.approx((3.0, -3.0, -6.0))
    assert green_coeffs(params(a1=2.5, a2=2.5, a3=0.7)).c3 == 0.0


# ---------------------------------------------------------------------------
# Green tensor
# ---------------------------------------------------------------------------

def test_green_term_symmetries():
    # the two delta-pair terms of the published kernel are the exact
    # (anti)symmetrizers in (i, j) <-> (k, l) exchange at fixed radius
    p = params()
    x = np.array([0.7, -0.2, 0.4])
    G = green_tensor(x, p, completion=False)
    Gt = green_tensor(-x, p, completion=False)
    # radial kernel: parity even
    assert np.abs(G - Gt).max() < 1e-14


def test_green_delta_pair_term_structure():
    # the two delta-pair terms of the kernel: the l1 block is the exact
    # symmetrizer in (i,j) and (k,l), the l4 block the antisymmetrizer
    p = params()
    ls = lengths(p)
    r = 0.9
    I3 = np.eye(3)
    sym_coeff = (np.exp(-r / np.sqrt(ls.l1_sq)) / (ls.l1_sq * r)) / (8 * np.pi)
    skw_coeff = (np.exp(-r / np.sqrt(ls.l4_sq)) / (ls.l4_sq * r)) / (8 * np.pi)
    A = np.einsum("ik,jl->ijkl", I3, I3) + np.einsum("il,jk->ijkl", I3, I3)
    B = np.einsum("ik,jl->ijkl", I3, I3) - np.einsum("il,jk->ijkl", I3, I3)
    termA = sym_coeff * A
    termB = skw_coeff * B
    assert np.abs(termA - termA.transpose(1, 0, 2, 3)).max() == 0.0
    assert np.abs(termA - termA.transpose(0, 1, 3, 2)).max() == 0.0
    assert np.abs(termB + termB.transpose(1, 0, 2, 3)).max() == 0.0
    assert np.abs(termB + termB.transpose(0, 1, 3, 2)).max() == 0.0
    # both blocks are symmetric under the (ij) <-> (kl) pair swap
    assert np.abs(termA - termA.transpose(2, 3, 0, 1)).max() == 0.0
    assert np.abs(termB - termB.transpose(2, 3, 0, 1)).max() == 0.0
    # a symmetric source is mapped by the l4 block to zero: the kernel's
    # skew channel at x along e_1 carries exactly these two blocks
    W = np.array([[0.0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    assert np.abs(np.tensordot(termA, W, axes=2)).max() == 0.0
    assert np.allclose(np.tensordot(termB, W, axes=2), 2 * skw_coeff * W)


def test_green_large_r_decay():
    p = params()
    ls = lengths(p)
    lmax = np.sqrt(max(ls.values()))
    direction = np.array([0.4, -0.3, 0.86])
    direction /= np.linalg.norm(direction)
    G_near = green_tensor(2 * lmax * direction, p)
    G_far = green_tensor(20 * lmax * direction, p)
    assert np.linalg.norm(G_far.ravel()) <= 1e-6 * np.linalg.norm(G_near.ravel())


def test_green_rejects_origin_and_bad_params():
    p = params()
    with pytest.raises(ValueError, match="source"):
        green_tensor(np.zeros(3), p)
    with pytest.raises(ValueError, match="mu_c"):
        green_tensor(np.ones(3), params(mu_c=0.0))
    einstein = special_case_params("Einstein", 2.0, params())
    with pytest.raises(ValueError, match="imaginary"):
        green_tensor_mu_c_limit(np.ones(3), einstein)


def test_radial_derivatives_against_fd():
    from micromorph.green import _yukawa_derivs

    r = 1.37
    m = 2.1
    h = 1e-4 * r
    d = _yukawa_derivs(r, m)
    f = lambda rr: np.exp(-m * rr) / rr

    def central1(hh):
        return (f(r + hh) - f(r - hh)) / (2 * hh)

    def central2(hh):
        return (f(r + hh) - 2 * f(r) + f(r - hh)) / hh ** 2

    # Richardson-extrapolated central differences at step 1e-4 r; the
    # second derivative uses a slightly larger step to stay clear of
    # cancellation noise
    fd1 = (4 * central1(h / 2) - central1(h)) / 3
    fd2 = (4 * central2(5 * h / 2) - central2(5 * h)) / 3
    assert d[1] == pytest.approx(fd1, rel=1e-8)
    assert d[2] == pytest.approx(fd2, rel=1e-8)
    # higher derivatives feed the completion terms: same cross-check
    def central3(hh):
        return (f(r + 2 * hh) - 2 * f(r + hh) + 2 * f(r - hh)
                - f(r - 2 * hh)) / (2 * hh ** 3)

    h3 = 1e-2 * r
    fd3 = (4 * central3(h3 / 2) - central3(h3)) / 3
    assert d[3] == pytest.approx(fd3, rel=1e-6)


def test_box_operator_on_constant_and_linear():
    p = params()
    x0 = np.array([0.5, -0.2, 0.1])
    C0 = np.array([[1.0, 2, 0], [0, 1, 0], [3, 0, 1]])
    out = box_operator_fd(lambda y: C0, x0, p, h=0.05)
    assert np.abs(out - C0).max() < 1e-12
    lin = lambda y: C0 * (1 + 2 * y[0] - y[2])
    out = box_operator_fd(lin, x0, p, h=0.05)
    assert np.abs(out - lin(x0)).max() < 1e-10


def test_box_operator_quadratic_hessian():
    # quadratic field: FD second derivatives are exact, so the operator
    # value matches the hand-expanded formula built from the constant
    # Hessian blocks
    p = params()
    nu = p.nu
    cc = green_coeffs(p)
    rng = np.random.default_rng(3)
    Q = rng.standard_normal((3, 3, 3, 3))
    Q = 0.5 * (Q + Q.transpose(0, 1, 3, 2))  # symmetric in the position pair

    def field(y):
        return np.einsum("ijkl,k,l->ij", Q, y, y)

    x0 = np.array([0.3, 0.4, -0.6])
    out = box_operator_fd(field, x0, p, h=1e-3)
    D = 2 * Q.transpose(2, 3, 0, 1)  # D[a,b,i,j] = d_a d_b sigma_ij
    sig = field(x0)
    lap = np.einsum("aaij->ij", D)
    lap_tr = np.trace(lap)
    dd_tr = np.einsum("abkk->ab", D)
    I3 = np.eye(3)
    expect = np.empty((3, 3))
    tcoef = (cc.c1 - cc.c2 + 2 * cc.c3) * (2 * p.mu_c * nu) / (1 + nu) \
        - 2 * cc.c3 * p.mu_c
    for i in range(3):
        for j in range(3):
            v = tcoef * (I3[i, j] * lap_tr - dd_tr[i, j])
            v -= (cc.c1 * (p.mu_c + p.mu_e) - cc.c2 * (p.mu_c - p.mu_e)) * lap[i, j]
            v += (cc.c1 * (p.mu_c - p.mu_e) - cc.c2 * (p.mu_c + p.mu_e)) * (
                sum(D[j, k, k, i] for k in range(3)) - lap[j, i])
            v += (2 * cc.c2 * p.mu_e - cc.c3 * (p.mu_c + p.mu_e)) * \
                sum(D[i, k, k, j] for k in range(3))
            v += 4 * p.mu_e * p.mu_c * sig[i, j]
            expect[i, j] = v / (4 * p.mu_e * p.mu_c)
    assert np.abs(out - expect).max() < 1e-8


def test_point_stress_residual_decays_quadratically():
    p = params()
    ls = lengths(p)
    lmax = np.sqrt(max(ls.values()))
    L = np.array([[0.3, -1.0, 0.4], [0.2, 0.8, -0.5], [1.1, 0.1, -0.2]])
    x0 = np.array([4.1, -3.4, 2.9])
    x0 = x0 / np.linalg.norm(x0) * 6.0 * lmax

    def sig(y):
        return np.tensordot(green_tensor(y, p), L, axes=2)

    residuals = []
    steps = (0.16, 0.08, 0.04, 0.02)
    for h in steps:
        residuals.append(np.linalg.norm(box_operator_fd(sig, x0, p, h)))
    slopes = np.diff(np.log(residuals)) / np.diff(np.log(steps))
    assert np.all(np.abs(slopes - 2.0) <= 0.2)


def test_published_kernel_residual_does_not_vanish():
    # without the completion the kernel is exact only for divergence-free
    # sources; the raw point-stress residual saturates at a finite value
    p = params()
    ls = lengths(p)
    lmax = np.sqrt(max(ls.values()))
    L = np.array([[0.3, -1.0, 0.4], [0.2, 0.8, -0.5], [1.1, 0.1, -0.2]])
    x0 = np.array([4.1, -3.4, 2.9])
    x0 = x0 / np.linalg.norm(x0) * 6.0 * lmax

    def sig(y):
        return np.tensordot(green_tensor(y, p, completion=False), L, axes=2)

    r1 = np.linalg.norm(box_operator_fd(sig, x0, p, 0.04))
    r2 = np.linalg.norm(box_operator_fd(sig, x0, p, 0.02))
    assert r2 > 0.5 * r1  # no quadratic decay


def test_mu_c_limit_variant_finite_and_smooth():
    p = params(mu_c=0.0)
    x = np.array([0.8, 0.3, -0.5])
    G = green_tensor_mu_c_limit(x, p)
    assert np.isfinite(G).all()
    # approached by the full kernel for small mu_c
    G_small = green_tensor(x, params(mu_c=1e-7), completion=True)
    assert np.abs(G_small - G).max() < 1e-4 * max(1.0, np.abs(G).max())


def test_superpose():
    p = params()
    assert np.all(superpose([], np.ones(3), p) == 0)
    L = np.diag([1.0, -2.0, 0.5])
    s = PointStress(location=[0.1, 0.2, 0.3], L=L)
    x = np.array([1.4, -0.3, 0.8])
    single = superpose([s], x, p)
    direct = np.tensordot(green_tensor(x - s.location, p), L, axes=2)
    assert np.allclose(single, direct)
    # dipole cancellation at distance
    s1 = PointStress(location=[0.3, 0, 0], L=L)
    s2 = PointStress(location=[-0.3, 0, 0], L=-L)
    far = np.array([5.0, 1.0, 0.5])
    assert np.linalg.norm(superpose([s1, s2], far, p)) < \
        np.linalg.norm(superpose([s1], far, p))


def test_superpose_rejects_coincident_point():
    p = params()
    s = PointStress(location=[0.5, 0.5, 0.5], L=np.eye(3))
    with pytest.raises(ValueError):
        superpose([s], np.array([0.5, 0.5, 0.5]), p)

import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma as sgamma

from fracstab.expr import parse
from fracstab.model import PRINTED, builtin_example, close_loop, load_spec
from fracstab.stability import (
    EstimationError, GronwallInstance, certify, compare_with_printed, decay_envelope, estimate_M,
    estimate_M1, estimate_M2, fit_growth_bound, gronwall_bound, perturbation_bound,
)
from fracstab.specfun import MLDomainError
from oracles import fit_with_settled_horizon, picard_gronwall, random_stable

CLOSED = close_loop(builtin_example("closed"))


def simple_spec(A, K=None, kernel="0", g=("0", "0", "0")):
    n = len(A)
    return load_spec({
        "n": n, "A": A, "feedback_K": K, "alpha1": 0.5, "alpha2": 0.5,
        "delay_kernel": kernel, "g": list(g), "x0": [0.1] * n,
    })


# --- certify -----------------------------------------------------------------------------

def test_certify_closed_loop():
    cert = certify(CLOSED)
    assert cert.max_real_part == pytest.approx(-0.25, abs=1e-12)
    assert cert.omega == pytest.approx(0.25, abs=1e-12)
    assert cert.M3 == pytest.approx(cert.M * cert.M1 * cert.M2)
    assert cert.inv_norm_spectral == pytest.approx(0.25, rel=1e-10)
    assert cert.inv_norm_paper_literal == pytest.approx(0.25)
    assert cert.verdict == "certified_numerically"
    assert cert.omega > cert.M3 * cert.inv_norm_spectral


def test_certify_open_loop_fails():
    cert = certify(close_loop(builtin_example("open")))
    assert cert.max_real_part == pytest.approx((-16 + math.sqrt(6796)) / 2, rel=1e-12)
    assert cert.verdict == "failed"
    assert cert.M is None


def test_certify_trivial_stable():
    cert = certify(close_loop(simple_spec([[-1, 0, 0], [0, -1, 0], [0, 0, -1]])))
    assert cert.M1 == 0 and cert.M2 == 0 and cert.M3 == 0
    assert cert.M == pytest.approx(1.0)
    assert cert.verdict == "certified_numerically"


def test_certify_gain_violation():
    # x' = -x + 10 x: Hurwitz linear part, kernel 10, g = x  -> M3 = 10 > omega
    cert = certify(close_loop(simple_spec([[-1, 0, 0], [0, -1, 0], [0, 0, -1]], kernel="10", g=("x1", "x2", "x3"))))
    assert cert.verdict == "failed"
    assert cert.M3 == pytest.approx(10, rel=0.01)
    assert any("gain margin" in note for note in cert.notes)


def test_certify_literal_replay():
    cert = certify(CLOSED, literal_M3=PRINTED["M3"])
    assert cert.literal_gain == pytest.approx(0.125)
    assert cert.literal_holds is True
    notes = compare_with_printed(cert, PRINTED, CLOSED.M_inv)
    assert any("-0.125" in n for n in notes)
    assert len(notes) == 3


def test_certificate_json():
    cert = certify(CLOSED)
    for mode in ("spectral", "paper-literal", "both"):
        d = json.loads(cert.to_json(mode))
        assert d["schema_version"] == 1
        assert d["omega"] == pytest.approx(0.25)
        assert ("spectral" in d) == (mode != "paper-literal")
        assert ("paper_literal" in d) == (mode != "spectral")
    with pytest.raises(ValueError):
        cert.to_dict("other")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gain=st.floats(0, 2))
def test_verdict_soundness(seed, gain):
    rng = np.random.default_rng(seed)
    A = (rng.normal(size=(3, 3)) - 2 * np.eye(3)).tolist()
    cert = certify(close_loop(simple_spec(A, kernel=repr(gain), g=("x1 * x2", "x3", "0"))), samples=1000)
    if cert.verdict == "certified_numerically":
        assert cert.max_real_part < 0
        assert cert.omega > cert.M3 * cert.inv_norm_spectral
    if cert.max_real_part >= 0:
        assert cert.verdict == "failed"


# --- constant estimators ------------------------------------------------------------------

def test_estimate_M_examples():
    assert estimate_M(-np.eye(3), 1.0, 40.0) == 1.0
    assert estimate_M(-np.eye(3), 0.5, 40.0) == 1.0
    assert estimate_M(np.diag([-1.0, -2.0]), 1.0, 40.0) == 1.0


def test_estimate_M_closed_loop_dense_oracle():
    m = CLOSED.M_inv_A
    got = estimate_M(m, 0.25, 40.0)
    ts = np.union1d(np.geomspace(4e-5, 40, 2000), np.linspace(0, 40, 2001)[1:])
    ref = max(1.0, max(np.linalg.norm(scipy.linalg.expm(m * t), 2) * math.exp(0.99 * 0.25 * t) for t in ts))
    assert got == pytest.approx(ref, rel=0.05)
    assert got >= ref * (1 - 1e-9)


def test_estimate_M_nonnormal():
    m = np.array([[-1.0, 50.0], [0.0, -2.0]])
    got = estimate_M(m, 1.0, 30.0)
    ts = np.linspace(0, 30, 30001)
    ref = max(np.linalg.norm(scipy.linalg.expm(m * t), 2) * math.exp(0.99 * t) for t in ts)
    assert got == pytest.approx(ref, rel=1e-6)


def test_estimate_M_unsettled_horizon():
    # Jordan block: t e^{-t} e^{0.99 t} keeps growing on a short horizon
    with pytest.raises(EstimationError):
        estimate_M(np.array([[-1.0, 1.0], [0.0, -1.0]]), 1.0, 5.0)


def test_estimate_M1_examples():
    assert estimate_M1(parse("t - 1"), 10.0) == pytest.approx(9.0)
    assert estimate_M1(parse("0"), 10.0) == 0.0
    assert estimate_M1(parse("sin(t)"), 10.0) <= 1.0 + 1e-6
    assert estimate_M1(parse("sin(t)"), 10.0) >= 1.0 - 1e-4
    with pytest.raises(ValueError):
        estimate_M1(parse("x1"), 1.0)


def test_estimate_M2_examples():
    A = [[-1, 0, 0], [0, -1, 0], [0, 0, -1]]
    assert estimate_M2(simple_spec(A), 0.5) == 0.0
    assert estimate_M2(simple_spec(A, g=("x1", "0", "0")), 0.5) == pytest.approx(1.0, abs=0.02)
    assert estimate_M2(simple_spec(A, g=("x1", "0", "0")), 0.5) <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        estimate_M2(simple_spec(A), 0.5, samples=10)


def test_estimate_M2_history_blocks():
    # g reads d1_1 only: ratio |c1_1| / (|x| + |c1|) peaks at 1 with x = 0,
    # a face of the ball that uniform sampling of (x, c1) would almost never reach
    A = [[-1, 0, 0], [0, -1, 0], [0, 0, -1]]
    val = estimate_M2(simple_spec(A, g=("d1_1", "0", "0")), 0.5)
    assert 0.97 <= val <= 1.0 + 1e-12
    val = estimate_M2(simple_spec(A, g=("d1_1 + d2_2", "x1", "0")), 0.5)
    assert 0.97 <= val <= 1.0 + 1e-12


def test_estimate_M2_example_dense_oracle():
    spec = builtin_example("closed")
    got = estimate_M2(spec, 0.1)
    rng = np.random.default_rng(11)
    g = close_loop(spec).g
    z = np.zeros(3)
    best = 0.0
    for _ in range(40960):
        v = rng.normal(size=3)
        x = v / np.linalg.norm(v) * 0.1 * rng.uniform() ** (1 / 3)
        best = max(best, np.linalg.norm(g(0.0, x, z, z)) / np.linalg.norm(x))
    # the x1 * x2^(2/5) term makes the ratio scale like r^(2/5): small but not tiny at r = 0.1
    assert got < 0.5
    assert got == pytest.approx(best, rel=0.10)


# --- envelope ------------------------------------------------------------------------------

def test_decay_envelope_examples():
    cert = certify(CLOSED)
    assert decay_envelope(cert, 0.8, 0.3, 0.2, 0.0) == pytest.approx(cert.M * 0.8)
    t = 20.0
    w, gain = cert.omega, cert.M3 * cert.inv_norm_spectral
    # the bound assembled term by term from its factors
    first = cert.M * 0.8
    second = cert.M3 * (math.exp(w * t) - 1) / w * cert.inv_norm_spectral * (0.3 + 0.2)
    ref = (first + second) * math.exp((gain - w) * t)
    assert decay_envelope(cert, 0.8, 0.3, 0.2, t) == pytest.approx(ref, rel=1e-12)


def test_decay_envelope_monotone_without_history():
    cert = certify(CLOSED)
    vals = [decay_envelope(cert, 1.0, 0.0, 0.0, t) for t in np.linspace(0, 200, 401)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_decay_envelope_overflow_and_errors():
    cert = certify(CLOSED)
    assert decay_envelope(cert, 1.0, 1e300, 1e300, 1e4) == math.inf
    with pytest.raises(ValueError):
        decay_envelope(cert, 1.0, 0, 0, -1.0)
    with pytest.raises(ValueError):
        decay_envelope(certify(close_loop(builtin_example("open"))), 1.0, 0, 0, 1.0)


# --- Gronwall ----------------------------------------------------------------------------------

def test_gronwall_examples():
    assert gronwall_bound(GronwallInstance(2.5, 0.0, 0.7), 3.0) == 2.5
    assert gronwall_bound(GronwallInstance(1.0, 1.0, 1.0), 1.0) == pytest.approx(math.e, rel=1e-14)
    got = gronwall_bound(GronwallInstance(1.0, 0.5, 0.5), 2.0)
    assert got == pytest.approx(picard_gronwall(1.0, 0.5, 0.5, 2.0), rel=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_gronwall_equality(alpha):
    for Z in (0.5, 1.0):
        for u in (0.5, 1.0):
            for t in np.linspace(0, 2, 5):
                ref = picard_gronwall(Z, u, alpha, t)
                assert gronwall_bound(GronwallInstance(Z, u, alpha), t) == pytest.approx(ref, rel=1e-6)


def test_gronwall_solves_integral_equation():
    # residual of a(t) - Z - u int_0^t (t-s)^(alpha-1) a(s) ds with a = the bound
    Z, u, alpha, t = 1.0, 0.8, 0.4, 1.5
    gi = GronwallInstance(Z, u, alpha)
    integral, _ = quad(lambda s: gronwall_bound(gi, s), 0, t, weight="alg", wvar=(0, alpha - 1),
                       epsabs=0, epsrel=1e-11)
    # weight (t-s)^(alpha-1) on [0, t] is (t-s)^(alpha-1) = t^(alpha-1) (1 - s/t)^(alpha-1);
    # QUADPACK's alg weight applies (s-0)^0 (t-s)^(alpha-1) directly
    assert gronwall_bound(gi, t) == pytest.approx(Z + u * integral, rel=1e-8)


def test_gronwall_validation():
    with pytest.raises(ValueError):
        GronwallInstance(-1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        GronwallInstance(1.0, 1.0, 0.0)
    with pytest.raises(MLDomainError):
        gronwall_bound(GronwallInstance(1.0, 100.0, 0.5), 1.0)
    assert sgamma(0.5) == pytest.approx(math.sqrt(math.pi))


# --- perturbation bound --------------------------------------------------------------------------

def test_perturbation_bound_examples():
    assert perturbation_bound(2.0, -0.5, 0.0, 3.0) == pytest.approx(2.0 * math.exp(-1.5))
    assert perturbation_bound(3.0, 1.0, 0.2, 0.0) == 3.0
    assert perturbation_bound(1.0, 1.0, 1.0, 1e6) == math.inf
    with pytest.raises(ValueError):
        perturbation_bound(0.5, 0.0, 0.0, 1.0)


def test_perturbation_bound_dominates():
    rng = np.random.default_rng(2024)
    ts = np.linspace(0, 5, 51)
    for _ in range(20):
        A = random_stable(rng)
        B = rng.normal(size=(3, 3))
        B *= rng.uniform(0, 0.5) / np.linalg.norm(B, 2)
        M, w = fit_with_settled_horizon(A)
        nb = np.linalg.norm(B, 2)
        for t in ts:
            assert np.linalg.norm(scipy.linalg.expm((A + B) * t), 2) <= perturbation_bound(M, w, nb, t) * (1 + 1e-9)


def test_fit_growth_bound_rejects_unstable():
    with pytest.raises(EstimationError):
        fit_growth_bound(np.eye(2), 5.0)

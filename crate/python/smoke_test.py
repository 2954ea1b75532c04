"""Smoke test for the Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math

import lvalue_lab as L


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b, tol)


def main():
    delta = L.Newform("delta", terms=2000)
    assert (delta.level, delta.weight, len(delta)) == (1, 12, 2000)
    assert delta.c(2) == -24 and delta.c(3) == 252
    close(delta.a(2), -0.530330, 1e-6)
    assert delta.root_number() == 1
    s = complex(2.5, 1.0)
    direct = sum(delta.a(n) * n ** (-s) for n in range(1, 2001))
    close(abs(delta.l_value(s) - direct), 0.0, 1e-6)
    zeros = delta.zeros(12.0)
    close(zeros[0], 9.2223794, 1e-6)

    f11 = L.Newform("f11", terms=2000)
    cv = f11.central_value()
    close(cv["value"], 0.2538418608559107, 1e-10)
    assert not cv["vanishing"]
    assert f11.hecke_check(1000)["violations"] == []
    close(f11.p_sum(3.0), -1.0, 1e-15)

    close(L.kloosterman(1, 1, 4), -2.0, 1e-12)
    close(L.bessel_j(0, 2.404825557695773), 0.0, 1e-12)

    est = L.delta_full(1, 1, 1, 12, c_max=5000)
    close(est.value, 2.840287, 1e-5)
    assert est.tail_bound >= 0.0
    empty = L.delta_full(1, 2, 1, 4, c_max=10000)
    assert abs(empty.value) <= 1e-8 + empty.tail_bound
    try:
        L.delta_full(1, 1, 1, 3)
    except ValueError:
        pass
    else:
        raise AssertionError("odd weight accepted")

    kernel = L.FejerKernel(4.0)
    close(kernel.density_integral("O"), 0.75, 1e-12)
    close(kernel.h_hat(0.0), 0.25, 1e-15)

    assert [L.gaussian_moment(l) for l in range(7)] == [1, 0, 1, 0, 3, 0, 15]
    assert L.pairing_count(12) == 10395
    close(L.gaussian_mass(-math.inf, math.inf), 1.0, 1e-15)
    report = L.empirical_distribution([(0.0, 1.0, False)], -1.0, 1.0)
    assert report["mass"] == 1.0 and report["ks_distance"] == 0.5

    # Single-form family at level 11: the harmonic average is w_f P(f_11, x)^2.
    w = L.delta_new(1, 1, 11, 2, c_max=20000).value
    r = L.harmonic_moment(22.0 / 3.0, 2, 2, 20.0, levels=[11], c_max=20000)
    close(r["weighted_sum"], w * f11.p_sum(20.0) ** 2, 2e-3)

    print("python smoke test: ok")


if __name__ == "__main__":
    main()

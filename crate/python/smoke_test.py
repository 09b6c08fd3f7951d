"""Smoke test for the kbrg extension module.

Build and install with `maturin develop --release -m crates/py/Cargo.toml`,
or point PYTHONPATH at a directory holding the built `kbrg` shared library.
"""
import math

import kbrg


def main():
    p = kbrg.ModelParams(n=64, alpha=0.0, kernel="trivial")
    assert p.order() == 64
    ev = kbrg.sample_eigenvalues(p, "adjacency", seed=0, trials=1)[0]
    assert abs(ev[-1] - math.sqrt(63)) < 1e-10
    assert abs(ev[0] + 1 / math.sqrt(63)) < 1e-10

    order, entries = kbrg.sample_matrix(kbrg.ModelParams(n=20, tau=3.0), "adjacency", seed=1)
    assert order == 20 and len(entries) == 400
    assert all(entries[i * 20 + j] == entries[j * 20 + i] for i in range(20) for j in range(20))

    assert [len(kbrg.enumerate_nc2(k)) for k in range(1, 7)] == [kbrg.catalan(k) for k in range(1, 7)]
    assert abs(kbrg.second_moment_closed_form(4.0, 1.0) - 2.25) < 1e-12
    m4, _ = kbrg.limiting_moment(2, 4.0, 1.0, m=20.0, variant="hard")
    m4_closed, _ = kbrg.limiting_moment(2, 4.0, 1.0, m=20.0, variant="hard", method="closed-form")
    assert abs(m4 - m4_closed) < 1e-8 * m4
    assert kbrg.limiting_moment(3, 4.0, 0.5, variant="unit")[0] == 5.0

    s = kbrg.stieltjes_transform(1j, 4.0, 1.0, m=20.0, kernel="trivial", grid_size=64)
    assert abs(s - 0.5j * (math.sqrt(5) - 1)) < 1e-6
    f = kbrg.density([-1.0, 0.0, 1.0], 4.0, 1.0, m=20.0, grid_size=64)
    assert abs(f[0] - f[2]) < 1e-3 and f[1] > 0

    a = kbrg.sample_eigenvalues(kbrg.ModelParams(n=300), "adjacency", seed=3)[0]
    assert 0.0 <= kbrg.ks_distance(a, a) <= 1e-12
    assert kbrg.levy_distance([0.0], [0.25]) == 0.25

    try:
        kbrg.ModelParams(tau=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("tau <= 2 must be rejected")
    print("kbrg", kbrg.__version__, "smoke test passed")


if __name__ == "__main__":
    main()

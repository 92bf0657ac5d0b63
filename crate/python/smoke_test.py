#!/usr/bin/env python3
"""Smoke test for the fluctlab_py extension module.

Build the extension first:

    cargo build -p fluctlab-py --release

then run this script from anywhere inside the repository:

    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import sys
import sysconfig
import tempfile


def load_module():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libfluctlab_py.so",
        root / "target" / "debug" / "libfluctlab_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("libfluctlab_py.so not found; run `cargo build -p fluctlab-py --release` first")
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="fluctlab-py-"))
    ext = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, tmp / f"fluctlab_py{ext}")
    sys.path.insert(0, str(tmp))
    import fluctlab_py

    return fluctlab_py


def approx(a, b, tol, label):
    if abs(a - b) > tol:
        sys.exit(f"FAIL {label}: {a} vs {b} (tol {tol})")
    print(f"  ok {label}: {a:.10g}")


def main():
    fl = load_module()
    print("module loaded:", fl.__name__)

    # Kernel evaluation: W = cos(2 pi x).
    k = fl.Kernel("cosine")
    approx(k.potential([0.0]), 1.0, 1e-14, "W(0) = 1")
    approx(k.potential([0.25]), 0.0, 1e-14, "W(1/4) = 0")
    approx(k.force([0.25])[0], 2.0 * math.pi, 1e-12, "K(1/4) = 2 pi")
    approx(k.norms(256)["l2"], math.sqrt(0.5), 1e-12, "Parseval L2")

    # Log-family coefficients and the alternating sum at x = 1/2.
    klog = fl.Kernel("log", cutoff=4)
    approx(klog.coefficient([3]), 1.0 / 3.0, 1e-15, "log-kernel coefficient")
    approx(klog.potential([0.5]), -7.0 / 6.0, 1e-12, "log kernel at 1/2")

    # Partition function: exact N = 2 value is the Bessel integral I0(1/2).
    i0_half = sum((0.25 / 4.0) ** m / math.factorial(m) ** 2 for m in range(30))
    approx(fl.exact_z_small_n(k, 2, 1.0, 16384), i0_half, 1e-6, "Zbar_2 = I0(1/2)")

    # Limit formula: closed form e^{b/2}/(1 + b/2) for the cosine kernel.
    lz = fl.limit_z(k, 1.0)
    approx(lz["value"], math.exp(0.5) / 1.5, 1e-12, "limit Z closed form")

    # Thermo integration agrees with the exact quadrature within 3 stderr.
    log_z, stderr = fl.estimate_log_z_thermo(k, 2, 1.0, seed=99)
    assert abs(log_z - math.log(i0_half)) < 3.0 * stderr, (log_z, stderr)
    print(f"  ok thermo log Z = {log_z:.6f} +- {stderr:.1e}")

    # Moment identity.
    lhs, rhs = fl.moment_identity(k, 2, 1.0, 2.0, 2048)
    approx(lhs, rhs, 1e-8, "moment identity")

    # Cluster combinatorics: counts and the Penrose identity.
    assert [fl.connected_graph_count(j) for j in (2, 3, 4, 5)] == [1, 4, 38, 728]
    assert fl.cayley_count(7) == 16807
    h = [[0.0, 0.3, -0.7], [0.3, 0.0, 0.5], [-0.7, 0.5, 0.0]]
    approx(fl.penrose_tree_sum(h), fl.connected_graph_sum(h), 1e-14, "Penrose identity")
    print(f"  ok connected-graph counts and Cayley numbers")

    # Dynamics diagnostics: time-reversible, momentum-conserving.
    diag = fl.dynamics_diagnostics(k, 16, 1.0, 1e-3, seed=5)
    assert diag["reversal_error"] < 1e-8, diag
    assert diag["momentum_per_step"] < 1e-12, diag
    print(f"  ok verlet reversibility {diag['reversal_error']:.2e}")

    # Vlasov: the two solvers agree on the density mode.
    f0 = [(1.0, "cos", 1, 0)]
    t_h, re_h, _ = fl.hermite_density_mode(k, 1.0, f0, 1, 1.0, 1e-3, 1, 256)
    t_v, re_v, _ = fl.volterra_density_mode(k, 1.0, f0, 1, 1.0, 1e-3, 1)
    sup = max(abs(a - b) for a, b in zip(re_h, re_v))
    assert sup < 1e-3, sup
    assert abs(re_h[0] - 0.5) < 1e-12
    print(f"  ok hermite/volterra sup diff {sup:.2e} over [0,1]")

    # Mean-field fixed point.
    mf = fl.meanfield_fixed_point(0.5)
    assert mf["converged"] and mf["residual"] < 1e-10, mf
    assert mf["cancellation_sup"] < 1e-7, mf
    mass = sum(mf["rho"]) * (mf["grid"][1] - mf["grid"][0])
    approx(mass, 1.0, 1e-6, "fixed-point mass")

    print("smoke test passed")


if __name__ == "__main__":
    main()

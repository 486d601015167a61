#!/usr/bin/env python3
# diagnostics/closed_form_runner.py
"""
Quick runner checking the rate functionals and the derivative calculus
against closed forms on the small bundled chains.
"""

import math
import sys
from pathlib import Path

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from chuk_metastable import (
    ProbabilityVector,
    SignedMeasure,
    asymptotic_variance,
    dv_rate,
    dv_rate_projection,
    dv_rate_variational,
    load_example_chain,
)
from chuk_metastable.calculus import finite_difference_report


def two_state_dv(r: float, s: float, m: float) -> float:
    return (math.sqrt(r * m) - math.sqrt(s * (1 - m))) ** 2


def check_two_state() -> bool:
    print("🧪 Two-state chain: ℐ(μ) = (√(r m) − √(s(1−m)))²")
    chain = load_example_chain("two_state")
    worst = 0.0
    for m in (0.1, 0.25, 0.5, 0.75, 0.9):
        mu = ProbabilityVector(weights={"x": m, "y": 1 - m})
        value = dv_rate(chain, mu)
        expected = two_state_dv(chain.rate("x", "y"), chain.rate("y", "x"), m)
        worst = max(worst, abs(value - expected))
        print(f"  m={m:<5} ℐ={value:.10f} closed={expected:.10f}")
    print(f"  max error {worst:.2e}")
    return worst < 1e-8


def check_cycle() -> bool:
    print("\n🧪 Three-cycle: three methods agree in the interior")
    chain = load_example_chain("c3")
    mu = ProbabilityVector(weights={"a": 0.5, "b": 0.25, "c": 0.25})
    values = [
        dv_rate(chain, mu),
        dv_rate_variational(chain, mu),
        dv_rate_projection(chain, mu),
    ]
    print(f"  auto={values[0]:.10f} variational={values[1]:.10f} projection={values[2]:.10f}")
    return max(values) - min(values) < 1e-8


def check_derivatives() -> bool:
    print("\n🧪 Derivatives against central differences")
    chain = load_example_chain("two_state")
    mu = ProbabilityVector(weights={"x": 0.3, "y": 0.7})
    nu = SignedMeasure(weights={"x": 1.0, "y": -1.0})
    report = finite_difference_report(chain, mu, nu)
    print(f"  first  {report.first_derivative:.10f} fd {report.first_derivative_fd:.10f}")
    print(f"  second {report.second_derivative:.10f} fd {report.second_derivative_fd:.10f}")
    return report.first_relative_error < 1e-5 and report.second_relative_error < 1e-4


def check_variance() -> bool:
    print("\n🧪 Asymptotic variance: 2rs(f₁ − f₂)²/(r + s)³")
    chain = load_example_chain("two_state")
    r, s = chain.rate("x", "y"), chain.rate("y", "x")
    pi_x = s / (r + s)
    f = [1.0 - pi_x, -pi_x]
    value = asymptotic_variance(chain, f)
    expected = 2 * r * s / (r + s) ** 3
    print(f"  σ²={value:.10f} closed={expected:.10f}")
    return abs(value - expected) < 1e-10


def main() -> int:
    print("🔧 Closed-form checks")
    print("=" * 50)
    checks = [check_two_state, check_cycle, check_derivatives, check_variance]
    failed = [c.__name__ for c in checks if not c()]
    print("\n" + "=" * 50)
    if failed:
        print(f"❌ Failed: {', '.join(failed)}")
        return 1
    print("✅ All closed-form checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())

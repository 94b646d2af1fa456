"""Where weighted-transmission priorities settle, and why that is optimal.

The limit splits clients into nested bottleneck levels. Each level gets a
common ratio theta, and the multipliers built from those thetas certify that
the limit maximizes sum rho log q over the feasible region.
"""
import numpy as np

from delayqos import SystemConfig, solve_access_point, verify_kkt_access_point

cfg = SystemConfig.from_arrays(3, [0.95, 0.9, 0.5, 0.4])
rho = np.array([1.0, 2.0, 1.0, 3.0])

q, cert = solve_access_point(rho, cfg)
print("delivery ratios:", np.round(q, 4))

for subset, zeta in sorted(cert.zeta.items(), key=lambda kv: len(kv[0])):
    print(f"multiplier on {sorted(subset)}: {zeta:.4f}")

report = verify_kkt_access_point(q, cert, rho, cfg)
print("certificate holds:", report.passed, f"stationarity {report.stationarity:.1e}")

# doubling every bid changes nothing
q2, _ = solve_access_point(2 * rho, cfg)
print("scale invariant:", np.allclose(q, q2))

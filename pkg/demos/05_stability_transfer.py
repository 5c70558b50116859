"""
Transferring stability between equation and scheme
==================================================

Each transfer theorem takes a certified envelope for one object -- the
delay equation, its delay-free limit, or their Euler discretizations --
and, when an explicit threshold falls below one, returns an envelope for
the neighboring object with computable constants.  The four directions
close a cycle, so one measured certificate can in principle propagate
all the way around.
"""

import json

from gsdde.certify import StabilityParams, transfer_chain, transfer_sdde_to_sde
from gsdde.model import LinearSystem

# A strongly contractive scalar system with weak delay coupling.
sys = LinearSystem.from_matrices(a_f=-0.4, b_f=-0.04, c_f=0.01, a_h=0.01)
start = StabilityParams(prefactor=1.05, rate=0.94, offset=0.026, kind="SDDE")
shared = dict(p=2.0, lipschitz=sys.lipschitz, growth=sys.growth,
              sigma_hi=0.01, delta_conf=0.75)

# First direction alone: delay equation -> delay-free equation.  The
# threshold is monotone in tau and tends to the confidence split as
# tau -> 0, so small delays always admit a certificate.
for tau in (1e-3, 1e-2, 0.05, 0.1):
    rep = transfer_sdde_to_sde(start, tau=tau, segment_ratio=1.0, **shared)
    mark = "applicable" if rep.applicable else "NOT applicable"
    print(f"tau={tau:<7g} threshold={rep.threshold:<12.4g} {mark}")

# The full chain at tau = step = 1e-3.  Later stages inherit a degraded
# rate, which lengthens their confidence windows; the discretization
# stage amplifies exponentially over that window and here overshoots,
# so the chain reports exactly where and why it halts.
print("\nchain from the measured SDDE certificate:")
reports = transfer_chain(start, tau=1e-3, step=1e-3, segment_ratio=1.0,
                         **shared)
for rep in reports:
    print(f"  {rep.direction:<17} threshold={rep.threshold:<12.4g} "
          f"applicable={rep.applicable}")
    if rep.applicable:
        d = rep.derived
        print(f"  {'':17} -> {d.kind}: M={d.prefactor:.4g} "
              f"lambda={d.rate:.4g} d={d.offset:.4g}")
    else:
        print(f"  {'':17} reason: {rep.reason}")

# Every report serializes to a stable JSON layout for archiving.
print("\nfirst certificate as JSON:")
print(json.dumps(reports[0].to_json_dict(), indent=2)[:400], "...")

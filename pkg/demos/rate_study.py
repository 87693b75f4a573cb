"""Coupled Monte Carlo rate study on the Nemytskii heat model.

All schemes at every level m share one fine Brownian lattice per path, so
the differences measure discretization error only.  The fitted slope of
``log E[sup_t |xi_m - X_ref|^4]`` against ``log(1/m)`` should be at most
``-(p - 1) = -1``.

Run: ``python3 demos/rate_study.py [workers]``
"""

import sys

from wongzakai import StudySpec, run_study

workers = int(sys.argv[1]) if len(sys.argv) > 1 else 1
for pair in ("WZ-vs-ref", "EM-vs-ref", "WZ-vs-EM"):
    spec = StudySpec("nemytskii_heat", p=2.0, m_list=[4, 8, 16, 32, 64], m_fine=1024, paths=200, pair=pair)
    rep = run_study(spec, workers=workers)
    print(f"\n{pair}")
    for row in rep.rows:
        print(f"  m={row['m']:>3}  estimate={row['estimate']:.3e}  stderr={row['stderr']:.1e}")
    print(f"  slope {rep.slope:.3f}")

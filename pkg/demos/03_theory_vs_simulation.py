"""Theory constants next to simulated delays.

Prints the first- and second-order predictions of the d-th local
acceptance time for N = 5 sensors alongside the simulated means.
"""

from bdqcd import AttackStrategy, FusionRule, HypothesisSet, Scenario
from bdqcd.asymptotics import delay_expansion, theory_report
from bdqcd.montecarlo import estimate_delay

hs = HypothesisSet.gaussian_means([0, 1], 1.0)
theory = theory_report(hs, 5)
print("xi_d for N=5:", ", ".join(f"{x:+.4f}" for x in theory.xi))

h = 9.21
for d in (1, 3, 5):
    sc = Scenario(N=5, M=0, hypotheses=hs, rule=FusionRule("multishot", d=d), h=h,
                  attack=AttackStrategy("absent"), master_seed=3, trials=4000)
    est = estimate_delay(sc)
    pred = delay_expansion(1, d, h, theory)
    print(f"d={d}: simulated {est.mean:7.3f} +/- {est.ci_halfwidth:.3f}   "
          f"first order {h / theory.I(1):7.3f}   with sqrt(h) term {pred:7.3f}")

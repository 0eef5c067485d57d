"""The leader's cost against the reverse attack approaches the equilibrium.

The fusion center commits to consensus with a calibrated threshold; the
compromised sensors answer with the reverse attack. The empirical cost
delay / log(gamma) drifts down toward 1/((N-M) I*) as gamma grows.
"""

from bdqcd import AttackStrategy, FusionRule, HypothesisSet, Scenario
from bdqcd.asymptotics import leader_cost_empirical, stackelberg_cost, theory_report
from bdqcd.montecarlo import calibrated_h, estimate_delay, estimate_false_metric

hs = HypothesisSet.gaussian_means([0, 1], 1.0)
N, M = 3, 1
target = stackelberg_cost(N, M, theory_report(hs, N, M))
base = Scenario(N=N, M=M, hypotheses=hs, rule=FusionRule("simultaneous", d=N), h=1.0,
                attack=AttackStrategy("reverse"), master_seed=4, trials=1000)

print(f"equilibrium cost {target:.3f}")
for gamma in (1e2, 1e3, 1e4):
    sc = base.with_(h=calibrated_h(base, gamma))
    delay = estimate_delay(sc)
    fm = estimate_false_metric(sc.with_(trials=300))
    cost = leader_cost_empirical(delay, gamma, fm)
    print(f"gamma={gamma:>8g}  h={sc.h:6.3f}  delay={delay.mean:7.2f}  "
          f"mean time to false alarm={fm.mean:10.1f}  cost={cost:.3f}")

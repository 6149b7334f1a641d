"""
Monte Carlo against the channel model
=====================================

Simulate pulse by pulse, compare detection statistics with the analytic
gains, then run whole protocol repetitions and compare acceptance
frequencies with the analytic bounds.
"""
import math

from qdslab.bounds import Thresholds
from qdslab.channel import ChannelParams, two_photon_gains
from qdslab.engine import Adversary, empirical_bound_check, run_distribution, saturating_repudiation
from qdslab.optimizer import ProtocolConfig, transferability_bounds

cfg = ProtocolConfig()
n = 1_000_000

# detection statistics at a few distances
print(f"{'L_km':>5s} {'Q sim':>10s} {'Q model':>10s} {'z':>6s} {'e^c sim':>9s} {'e^c model':>9s}")
for L in (0.0, 50.0, 100.0):
    ch = ChannelParams().symmetric(L)
    g = two_photon_gains(ch, cfg.z)
    r = run_distribution(cfg, ch, n, seed=1, workers=4)
    z = (len(r) - n * g.Q) / math.sqrt(n * g.Q * (1 - g.Q))
    conclusive = r.charlie_conclusive >= 0
    e_sim = (r.charlie_conclusive[conclusive] != r.sent_bit[conclusive]).mean()
    print(f"{L:5.0f} {len(r) / n:10.6f} {g.Q:10.6f} {z:+6.2f} {e_sim:9.5f} {g.e_C_c:9.5f}")

# a short, noisy lossless link where the bounds are large enough to observe
link = ChannelParams(alpha=0.0, eta_d=1.0, p_d=0.0, e_d=0.01)
loose = ProtocolConfig(thresholds=Thresholds(0.04, 0.3), eps_sample_repud=1e-3)
pulses, reps = 5000, 2000
analytic = transferability_bounds(pulses, 0.0, loose, link)
honest = empirical_bound_check(Adversary.honest(), reps, loose, link, pulses, seed=7, workers=4)
attack = saturating_repudiation(loose, link, pulses)
repud = empirical_bound_check(attack, reps, loose, link, pulses, seed=7, workers=4)

print()
f = honest.bob_reject
print(f"honest abort     {f.value:.4f}  95% CI [{f.low:.4f}, {f.high:.4f}]  bound {analytic.eps_rob:.4f}")
f = repud.bob_accept_charlie_reject
print(f"repudiation      {f.value:.4f}  95% CI [{f.low:.4f}, {f.high:.4f}]  bound {analytic.eps_repud:.4f}")

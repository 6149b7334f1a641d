"""
Bounding two-photon statistics with decoy states
================================================

Generate the gains each source setting would produce, then recover
lower bounds on the two-photon yield and upper bounds on its error
rate, and compare them with the true values of the link model.
"""
from qdslab.channel import ChannelParams, paired_photon_yields, shared_photon_yields
from qdslab.config import load_config
from qdslab.decoy import estimate_two_photon_paired, estimate_two_photon_shared, model_observations

shared = load_config("fig2-sixstate-shared-decoy").protocol
paired = load_config("fig2-sixstate-paired-decoy").protocol

print(f"{'L_km':>5s} {'source':>8s} {'Y true':>11s} {'Y lower':>11s} {'e true':>8s} {'e upper':>8s}")
for L in (0.0, 50.0, 100.0, 150.0):
    params = ChannelParams().symmetric(L)

    est = estimate_two_photon_shared(model_observations(shared.shared, params, shared.z, 1e12), shared.shared)
    Y, e = shared_photon_yields(params, shared.z)
    print(f"{L:5.0f} {'shared':>8s} {Y[2]:11.4e} {est.Y_lower:11.4e} {e[2]:8.4f} {est.e_upper:8.4f}")

    est = estimate_two_photon_paired(
        model_observations(paired.paired, params, paired.z, 1e12), paired.paired, paired.n_alpha
    )
    Y, e = paired_photon_yields(params, paired.z)
    print(f"{L:5.0f} {'paired':>8s} {Y[1, 1]:11.4e} {est.Y_lower:11.4e} {e[1, 1]:8.4f} {est.e_upper:8.4f}")

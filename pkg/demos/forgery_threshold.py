"""
How much noise can a forger hide behind?
========================================

The smallest conclusive mismatch rate a collective forger can reach,
as a function of the bit error rate on the honest link. The verification
threshold has to sit below this curve for forgery to be detectable.
"""
import numpy as np

from qdslab.entropy import EncodingVariant, forger_information, min_forgery_mismatch, phase_error_relation

variants = [
    EncodingVariant.SIX_STATE_TWO_PHOTON,
    EncodingVariant.FOUR_STATE_TWO_PHOTON,
    EncodingVariant.SIX_STATE_SINGLE_PHOTON,
]

print(f"{'e_b':>6s}" + "".join(f"{v.value:>26s}" for v in variants))
for e_b in np.linspace(0.0, 0.1, 11):
    row = "".join(f"{min_forgery_mismatch(e_b, v):26.6f}" for v in variants)
    print(f"{e_b:6.3f}{row}")

# the forger's information grows with the phase error that noise lets them claim
print()
for v in variants:
    r = phase_error_relation(0.02, v)
    print(f"{v.value:26s} e_p = {r.e_p:.4f}  joint = {r.a:.5f}  I = {forger_information(r):.4f}")

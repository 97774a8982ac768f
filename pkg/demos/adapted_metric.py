"""Why the decay rate needs an adapted inner product.

Hypothesis (H) asks that the Jacobian A of phi at the identity has spectrum
in the right half-plane.  That alone does not make <v, A v> >= lambda |v|^2
in the Euclidean metric when A is non-normal.  A Lyapunov solve produces an
inner product P in which the inequality holds with an explicit lambda.
"""
import numpy as np

from liesync.groups import make_group
from liesync.interactions import build_adapted_metric, check_hypothesis_H, get_phi, phi_catalog

A = np.array([[1.0, 4.0], [0.0, 1.0]])
print("A =", A.tolist(), " eigenvalues", np.linalg.eigvals(A).tolist())
print("Euclidean symmetric part eigenvalues:", np.linalg.eigvalsh(0.5 * (A + A.T)).tolist())
m = build_adapted_metric(A)
print("adapted P =\n", np.round(m.P, 6))
print(f"lambda in the P metric: {m.lam:.6f}")

v = np.random.default_rng(0).standard_normal((5, 2))
for x in v:
    lhs = x @ (0.5 * (m.P @ A + A.T @ m.P)) @ x
    print(f"  <v,Av>_P / |v|_P^2 = {lhs / (x @ m.P @ x):.4f}   <v,Av> / |v|^2 = {x @ A @ x / (x @ x):+.4f}")

print("\ncatalog check of hypothesis (H):")
dims = {"circle": 1, "u": 2, "su": 2, "gl_c": 2, "sl_c": 2, "so": 3}
for phi in phi_catalog():
    for fam in phi.families:
        rep = check_hypothesis_H(phi, make_group(fam, dims[fam]))
        lam = build_adapted_metric(rep.jacobian).lam
        print(f"  {phi.id:13s} on {fam}{dims[fam]}: pass={rep.passed}  "
              f"spectrum={np.round(rep.spectrum.real, 6).tolist()}  lambda={lam:.6f}")

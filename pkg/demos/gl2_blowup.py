"""Finite-time blowup off the compact groups.

On GL2(C) with H = 0 and the matrix interaction (X - X^{-1})/2, take
X1 = I and X2 = diag(-0.5, -2).  For N = 2 the ratio R = X2 X1^{-1} obeys
R' = -(kappa/2)(R^2 - I), so each diagonal entry solves x' = (kappa/2)(1 - x^2).
From x(0) = -2 this gives x(t) = coth(kappa t/2 - ln(3)/2), which runs to
-infinity at t* = ln(3)/kappa.

The integrator stops with a blowup event within a fraction of a step of t*
for every step size.
"""
import math

import numpy as np

from liesync.dynamics import EnsembleState, IntegratorConfig, ModelSpec, integrate
from liesync.groups import make_group
from liesync.interactions import get_phi

gl2 = make_group("gl_c", 2)
spec = ModelSpec.build(gl2, 1.0, np.zeros((2, 2, 2)), get_phi("lohe_matrix"))
X0 = np.array([np.eye(2), np.diag([-0.5, -2.0])], dtype=complex)

t_star = math.log(3) / spec.kappa
print(f"analytic blowup time ln(3)/kappa = {t_star:.6f}")
for dt in (1e-2, 1e-3, 1e-4):
    traj = integrate(spec, EnsembleState(0.0, X0), IntegratorConfig(dt=dt, t_final=3.0, stride=10 ** 6))
    ev = traj.event
    print(f"dt={dt:g}: {ev.kind} detected at t={ev.t_detected:.6f} "
          f"(error {ev.t_detected - t_star:+.2e}, last valid t={ev.t_last_valid:.6f})")
    print(f"    reason: {ev.reason}")

# the second diagonal entry of the ratio against the closed form
traj = integrate(spec, EnsembleState(0.0, X0), IntegratorConfig(dt=1e-3, t_final=1.0, stride=250))
for t, X in zip(traj.times, traj.states):
    r = (X[1] @ np.linalg.inv(X[0]))[1, 1].real
    exact = 1 / math.tanh(spec.kappa * t / 2 - math.log(3) / 2)
    print(f"  t={t:.2f}  R_22={r:+.9f}  closed form {exact:+.9f}")

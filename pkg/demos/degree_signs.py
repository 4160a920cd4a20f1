#!/usr/bin/env python3
"""The sign that guarantees the periodic solution cannot vanish.

At lambda = 0 the only fixed point of the period map is the upright
equilibrium.  The Jacobian determinant of the unforced field at the
origin is nonzero, so the equilibrium carries a topological index: -1 on
the line (saddle: one expanding, one contracting direction) and +1 in the
plane (two saddle pairs multiply to a positive determinant).  A nonzero
index is an anchor for the continuation: as lambda grows the fixed point
can move but cannot silently disappear while the trap keeps it from
reaching the boundary.
"""
import numpy as np

from upright.bounds import degree_of_autonomous_field
from upright.dynamics import ModelParams, PhaseState, jacobian
from upright.forcing import make_fourier_forcing

for dim, label in ((1, "line"), (2, "plane")):
    deg = degree_of_autonomous_field(9.81, dim)
    params = ModelParams(G=9.81, lam=0.0, dim=dim)
    origin = PhaseState(np.zeros(dim), np.zeros(dim))
    still = make_fourier_forcing(1.0, dim, [np.zeros(dim)] if dim == 2 else [0.0], [])
    J = jacobian(0.0, origin, params, still)
    eig = np.sort(np.linalg.eigvals(J).real)
    print(f"carriage on a {label}: degree = {deg:+d}")
    print(f"  eigenvalues of the linearization at the origin: "
          f"{np.array2string(eig, precision=4)}")
    print(f"  det = {np.linalg.det(J):+.4f} "
          f"(sign matches the degree: {np.sign(np.linalg.det(J)) == deg})")

"""How far does the near field reach for a 32x32 array at 3.5 GHz?"""

import numpy as np

from nearfield_ris.channel import los_channel
from nearfield_ris.geometry import (aperture, build_upa, phase_error_approx, planar_phase,
                                    rayleigh_distance, spherical_phase, wavelength)

lam = wavelength(3.5e9)
bs = build_upa(32, 32, lam / 2)
D = aperture(bs)
print(f"wavelength {lam * 100:.2f} cm, aperture {D:.3f} m, Rayleigh distance "
      f"{rayleigh_distance(D, lam):.1f} m")

# curvature error at the array edge versus distance, exact and second-order
q = D / 2
for r in (5.0, 20.0, 80.0, 300.0):
    exact = spherical_phase(r, 0.0, q, lam) - planar_phase(0.0, q, lam)
    print(f"r={r:6.1f} m  edge phase error {exact:8.3f} rad  approx "
          f"{phase_error_approx(q, 0.0, r, lam):8.3f} rad")

# a planar steering vector loses gain against the spherical channel at short range
for r in (5.0, 20.0, 80.0):
    h = los_channel(bs, (r, 0.0, 0.0), lam)
    h_far = los_channel(bs, (1e5, 0.0, 0.0), lam)
    focus = np.abs(np.vdot(h, h)) / np.linalg.norm(h) ** 2
    steer = np.abs(np.vdot(h_far, h)) / (np.linalg.norm(h_far) * np.linalg.norm(h))
    print(f"r={r:5.1f} m  beamfocusing gain {focus:.3f}  far-field steering gain {steer**2:.3f}")
